import dask
import logging

from datetime import datetime
from typing import Callable, List, Sequence

from fpm_processing import settings


logger = logging.getLogger(__name__)


def format_duration(start: datetime, end: datetime) -> str:
    """
    Returns a human readable duration between two dates,
    e.g. `1 minute(s), 12 second(s)`.

    Runs shorter than a second are reported with their fractional seconds.
    """
    elapsed = end - start

    whole_seconds = elapsed.days * 86400 + elapsed.seconds
    hours, remainder = divmod(whole_seconds, 3600)
    minutes, seconds = divmod(remainder, 60)

    parts = []

    if hours:
        parts.append(f'{hours} hour(s)')

    if minutes:
        parts.append(f'{minutes} minute(s)')

    if seconds:
        parts.append(f'{seconds} second(s)')

    if not parts:
        return f'{elapsed.microseconds / 1000000} second(s)'

    return ', '.join(parts)


def print_time_duration(tag: str, start: datetime, end: datetime) -> None:
    """
    Logs how long the `tag` step took.
    """
    logger.info(f" {tag} is completed in: {format_duration(start, end)}")


def compute_ordered(func: Callable, items: Sequence) -> List:
    """
    Applies `func` to every element of `items` on the dask thread pool
    and returns the results in the order of `items`.

    The pool size follows the `FPM_THREADS` setting.
    """
    if not items:
        return []

    tasks = [dask.delayed(func)(item) for item in items]

    results = dask.compute(
        *tasks,
        scheduler='threads',
        num_workers=settings.FPM_THREADS
    )

    return list(results)
