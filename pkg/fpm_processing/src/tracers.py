import logging

from datetime import datetime

from fpm_processing import settings


logger = logging.getLogger(__name__)


def iteration_tracer(iteration: int, cost: float, grad_norm: float, *args, **kwargs) -> None:
    """
    A solver hook to print-out the progress of an iterative reconstruction.

    Only every `FPM_TRACE_EVERY`-th iteration is reported.
    """
    every = max(settings.FPM_TRACE_EVERY or 1, 1)

    if iteration % every:
        return

    timestamp = datetime.now().isoformat()

    logger.info(f"{timestamp}: iter {iteration:5d} - cost {cost:.6e} - |grad| {grad_norm:.6e}")
