import logging

from dataclasses import dataclass
from datetime import datetime
from typing import List, Optional

from fpm_processing.src.helpers import print_time_duration
from fpm_processing.src.io.dataset import read_dataset, write_reconstruction
from fpm_processing.src.io.metrics import relative_error_mod_phase
from fpm_processing.src.objective import overlap_map
from fpm_processing.src.solver import (
    Algorithm,
    Momentum,
    SolverConfig,
    init_constant,
    run,
)


logger = logging.getLogger(__name__)


@dataclass
class ReconstructionSummary:
    algorithm: Algorithm
    iterations_run: int
    final_cost: float
    final_grad_norm: float
    step_size: float
    error_full: Optional[float]
    error_covered: Optional[float]
    files: List[str]
    max_iters: int = 500
    momentum: Momentum = Momentum.NESTEROV
    grad_tol: float = 0.0
    init_amplitude: float = 1.0
    init_phase: float = 0.0


class Reconstructor:
    """
    Recovers the sample spectrum of a dataset directory with WF or AWF,
    starting from a constant image.
    """

    def __init__(
        self,
        dataset_dir: str,
        out_dir: str,
        algorithm: str = 'wf',
        iters: int = 500,
        step: Optional[float] = None,
        grad_tol: float = 0.0,
        momentum: str = 'nesterov',
        init_amplitude: float = 1.0,
        init_phase: float = 0.0
    ) -> None:
        self.dataset_dir = dataset_dir
        self.out_dir = out_dir
        self.config = SolverConfig(
            max_iters=iters,
            step_override=step,
            grad_tol=grad_tol,
            algorithm=algorithm,
            momentum=momentum,
        )
        self.init_amplitude = init_amplitude
        self.init_phase = init_phase

        # Runs reconstruction
        process_start_at = datetime.now()

        self._reconstruct()

        process_end_at = datetime.now()
        print_time_duration("Reconstruction", process_start_at, process_end_at)

    @property
    def summary(self) -> ReconstructionSummary:
        assert hasattr(self, '_summary'), (
            "Reconstruction summary is not available. "
            "Please make sure the reconstruction ran without errors."
        )

        return self._summary

    def _reconstruct(self) -> None:
        # Step 1 - Load the dataset
        dataset = read_dataset(self.dataset_dir)
        manifest = dataset.manifest

        # Step 2 - Iterate from the constant initial guess
        s0 = init_constant(manifest.n1, manifest.n2, self.init_amplitude, self.init_phase)
        s_hat, trace = run(dataset.measurements, self.config, s0)

        # Step 3 - Save the estimate and the trace
        files = write_reconstruction(self.out_dir, s_hat, trace)

        # Step 4 - Score against the ground truth when the dataset has one
        error_full = error_covered = None

        if dataset.s_true is not None:
            covered = overlap_map(dataset.measurements.pupil, manifest.plan, manifest.n1, manifest.n2).values > 0

            error_full = relative_error_mod_phase(s_hat, dataset.s_true)
            error_covered = relative_error_mod_phase(s_hat, dataset.s_true, mask=covered)

            logger.info(f"Relative error modulo global phase: {error_full:.6e} (covered band {error_covered:.6e})")

        self._summary = ReconstructionSummary(
            algorithm=self.config.algorithm,
            iterations_run=trace.iterations_run,
            final_cost=trace.costs[-1],
            final_grad_norm=trace.grad_norms[-1],
            step_size=trace.step_size_used,
            error_full=error_full,
            error_covered=error_covered,
            files=files,
            max_iters=self.config.max_iters,
            momentum=self.config.momentum,
            grad_tol=self.config.grad_tol,
            init_amplitude=self.init_amplitude,
            init_phase=self.init_phase,
        )
