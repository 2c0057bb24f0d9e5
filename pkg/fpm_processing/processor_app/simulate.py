import logging

from dataclasses import dataclass, replace
from datetime import datetime
from typing import List, Optional

from fpm_processing.src.core import make_rng
from fpm_processing.src.helpers import print_time_duration
from fpm_processing.src.io.binary import read_image
from fpm_processing.src.io.dataset import write_dataset
from fpm_processing.src.io.manifest import read_manifest
from fpm_processing.src.phantom import (
    AMPLITUDE_STREAM,
    PHASE_STREAM,
    DatasetManifest,
    NoiseModel,
    make_phantom,
    make_test_pattern,
    resolve_manifest,
    simulate,
)


logger = logging.getLogger(__name__)


FALLBACK_PATTERN = 'ellipses'


@dataclass
class SimulationSummary:
    manifest: DatasetManifest
    num_measurements: int
    files: List[str]


class DatasetSimulator:
    """
    Builds a phantom, simulates the measurements of the manifest's plan
    and writes the resulting dataset directory.

    `seed` and `noise_sigma` override the manifest values. Without source
    images, ellipse patterns drawn from the manifest seed are used.
    """

    def __init__(
        self,
        manifest_path: str,
        out_dir: str,
        amplitude_path: Optional[str] = None,
        phase_path: Optional[str] = None,
        seed: Optional[int] = None,
        noise_sigma: Optional[float] = None
    ) -> None:
        self.manifest_path = manifest_path
        self.out_dir = out_dir
        self.amplitude_path = amplitude_path
        self.phase_path = phase_path
        self.seed = seed
        self.noise_sigma = noise_sigma

        # Runs dataset simulation
        process_start_at = datetime.now()

        self._simulate()

        process_end_at = datetime.now()
        print_time_duration("Dataset simulation", process_start_at, process_end_at)

    @property
    def summary(self) -> SimulationSummary:
        assert hasattr(self, '_summary'), (
            "Simulation summary is not available. "
            "Please make sure the simulation ran without errors."
        )

        return self._summary

    def _load_manifest(self) -> DatasetManifest:
        manifest = read_manifest(self.manifest_path)

        if self.seed is not None:
            manifest = replace(manifest, seed=self.seed)

        if self.noise_sigma is not None:
            manifest = replace(manifest, noise_sigma=self.noise_sigma)

            if self.noise_sigma > 0:
                manifest = replace(manifest, noise_model=NoiseModel.GAUSSIAN)

        return resolve_manifest(manifest)

    def _load_source(self, path: Optional[str], stream: int, manifest: DatasetManifest):
        if path is not None:
            logger.info(f"Load source image {path}...")
            return read_image(path)

        return make_test_pattern(FALLBACK_PATTERN, manifest.n1, manifest.n2, make_rng(manifest.seed, stream))

    def _simulate(self) -> None:
        # Step 1 - Resolve the manifest and its LED plan
        manifest = self._load_manifest()

        # Step 2 - Build the sample
        phantom = make_phantom(
            self._load_source(self.amplitude_path, AMPLITUDE_STREAM, manifest),
            self._load_source(self.phase_path, PHASE_STREAM, manifest),
            manifest.n1,
            manifest.n2,
            manifest.phase_range,
        )

        # Step 3 - Simulate and save
        measurements = simulate(phantom, manifest)
        files = write_dataset(self.out_dir, manifest, measurements, phantom.s_true)

        self._summary = SimulationSummary(
            manifest=manifest,
            num_measurements=measurements.num_measurements,
            files=files,
        )
