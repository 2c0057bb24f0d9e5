import logging
import os
import pandas as pd

from datetime import datetime
from typing import Optional, Sequence

from fpm_processing.src.helpers import print_time_duration
from fpm_processing.src.io.dataset import read_dataset
from fpm_processing.src.solver import StepTuningResult, init_constant, tune_step


logger = logging.getLogger(__name__)


DEFAULT_MULTIPLIERS = (0.5, 1.0, 2.0, 4.0, 8.0, 16.0)


class StepSizeTuner:
    """
    Runs short WF reconstructions with multiples of the analytical step
    and keeps the fastest one whose cost never increased.
    """

    def __init__(
        self,
        dataset_dir: str,
        iters: int = 50,
        multipliers: Sequence[float] = DEFAULT_MULTIPLIERS,
        out_path: Optional[str] = None
    ) -> None:
        self.dataset_dir = dataset_dir
        self.iters = iters
        self.multipliers = tuple(multipliers)
        self.out_path = out_path

        # Runs step tuning
        process_start_at = datetime.now()

        self._tune()

        process_end_at = datetime.now()
        print_time_duration("Step size tuning", process_start_at, process_end_at)

    @property
    def result(self) -> StepTuningResult:
        assert hasattr(self, '_result'), (
            "Step tuning result is not available. "
            "Please make sure the tuning ran without errors."
        )

        return self._result

    def _tune(self) -> None:
        dataset = read_dataset(self.dataset_dir)
        manifest = dataset.manifest

        s0 = init_constant(manifest.n1, manifest.n2)
        self._result = tune_step(dataset.measurements, s0, iters=self.iters, multipliers=self.multipliers)

        if self.out_path is None:
            return

        logger.info(f"Save step tuning candidates into {self.out_path}...")

        output_dir = os.path.dirname(self.out_path)

        if output_dir and not os.path.exists(output_dir):
            os.makedirs(output_dir)

        dataframe = pd.DataFrame([
            {
                'multiplier': candidate.multiplier,
                'step': candidate.step,
                'final_cost': candidate.final_cost,
                'monotone': candidate.monotone,
            }
            for candidate in self._result.candidates
        ])

        dataframe.to_csv(self.out_path, index=False, float_format='%.17g')
