import logging
import os

from datetime import datetime

from fpm_processing.src.helpers import print_time_duration
from fpm_processing.src.io.binary import write_image
from fpm_processing.src.io.dataset import read_dataset
from fpm_processing.src.objective import OverlapMap, overlap_map


logger = logging.getLogger(__name__)


class OverlapInspector:
    """
    Computes the Fourier sampling redundancy of a dataset's plan, writes
    it as an FPMR image and exposes the resulting step size 1 / max.
    """

    def __init__(self, dataset_dir: str, out_path: str) -> None:
        self.dataset_dir = dataset_dir
        self.out_path = out_path

        # Runs overlap inspection
        process_start_at = datetime.now()

        self._inspect()

        process_end_at = datetime.now()
        print_time_duration("Overlap inspection", process_start_at, process_end_at)

    @property
    def overlap(self) -> OverlapMap:
        assert hasattr(self, '_overlap'), (
            "Overlap map is not available. "
            "Please make sure the inspection ran without errors."
        )

        return self._overlap

    @property
    def step_size(self) -> float:
        return 1.0 / self.overlap.max_value

    def _inspect(self) -> None:
        dataset = read_dataset(self.dataset_dir)
        manifest = dataset.manifest

        logger.info(f"Computing overlap map of {manifest.plan.num_measurements} measurements...")

        self._overlap = overlap_map(dataset.measurements.pupil, manifest.plan, manifest.n1, manifest.n2)

        output_dir = os.path.dirname(self.out_path)

        if output_dir and not os.path.exists(output_dir):
            os.makedirs(output_dir)

        write_image(self.out_path, self._overlap.values)
