import os
import logging


def _env_flag(name: str, default: bool) -> bool:
    value = os.environ.get(name)

    if value is None:
        return default

    return value.strip().lower() not in ('0', 'false', 'no', 'off', '')


def _env_int(name: str, default=None):
    value = os.environ.get(name)

    if not value:
        return default

    return int(value)


DEBUG_MODE = _env_flag('DEBUG_MODE', True)

# Caps the dask thread pool, unset means dask picks the pool size
FPM_THREADS = _env_int('FPM_THREADS')

# Iteration period of the solver tracer
FPM_TRACE_EVERY = _env_int('FPM_TRACE_EVERY', 50)


def configure_logging():
    if DEBUG_MODE:
        logging.root.setLevel(logging.INFO)
        logging.basicConfig(level=logging.INFO)
    else:
        logging.root.setLevel(logging.WARNING)
        logging.basicConfig(level=logging.WARNING)
