import logging
import math
import numpy as np

from datetime import datetime
from typing import Callable, Optional

from fpm_processing.src.core import Field2D, make_rng
from fpm_processing.src.exceptions import ValidationError
from fpm_processing.src.helpers import print_time_duration
from fpm_processing.src.io.dataset import Dataset, read_dataset
from fpm_processing.src.objective import (
    GradientCheckReport,
    MeasurementSet,
    check_gradient,
    overlap_map,
    random_coordinates,
)


logger = logging.getLogger(__name__)


PROBE_POINTS = ('random', 'truth')

NUM_COORDINATES = 64
TOLERANCE = 1e-5

POINT_STREAM = 0
COORDINATE_STREAM = 1


class GradientChecker:
    """
    Compares the analytical gradient with finite differences of the cost
    at `NUM_COORDINATES` random covered pixels.

    `at='random'` probes a complex Gaussian field scaled to the measured
    energy, `at='truth'` probes the dataset's ground truth.
    `gradient_fn` replaces the analytical gradient (negative controls).
    """

    def __init__(
        self,
        dataset_dir: str,
        seed: int = 0,
        h: float = 1e-6,
        at: str = 'random',
        gradient_fn: Optional[Callable[[Field2D, MeasurementSet], Field2D]] = None
    ) -> None:
        if at not in PROBE_POINTS:
            raise ValidationError([f'unknown probe point {at!r}, expected one of {PROBE_POINTS}'])

        self.dataset_dir = dataset_dir
        self.seed = seed
        self.h = h
        self.at = at
        self.gradient_fn = gradient_fn

        # Runs gradient check
        process_start_at = datetime.now()

        self._check()

        process_end_at = datetime.now()
        print_time_duration("Gradient check", process_start_at, process_end_at)

    @property
    def report(self) -> GradientCheckReport:
        assert hasattr(self, '_report'), (
            "Gradient check report is not available. "
            "Please make sure the check ran without errors."
        )

        return self._report

    def _probe_point(self, dataset: Dataset) -> Field2D:
        manifest = dataset.manifest

        if self.at == 'truth':
            if dataset.s_true is None:
                raise ValidationError([f'{self.dataset_dir} has no ground truth to probe'])

            return dataset.s_true

        # Mean measured energy per measurement spread over the grid
        energy = float(np.sum(dataset.measurements.stacked ** 2)) / dataset.measurements.num_measurements
        scale = math.sqrt(energy / (manifest.n1 * manifest.n2)) or 1.0

        rng = make_rng(self.seed, POINT_STREAM)
        shape = (manifest.n1, manifest.n2)

        return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2)

    def _check(self) -> None:
        dataset = read_dataset(self.dataset_dir)
        manifest = dataset.manifest

        s = self._probe_point(dataset)

        covered = overlap_map(dataset.measurements.pupil, manifest.plan, manifest.n1, manifest.n2).values > 0
        coordinates = random_coordinates(make_rng(self.seed, COORDINATE_STREAM), covered, NUM_COORDINATES)

        self._report = check_gradient(
            s,
            dataset.measurements,
            coordinates,
            h=self.h,
            tolerance=TOLERANCE,
            gradient_fn=self.gradient_fn,
        )
