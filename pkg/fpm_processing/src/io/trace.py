import logging
import pandas as pd

from fpm_processing.src.solver import SolverTrace


logger = logging.getLogger(__name__)


TRACE_COLUMNS = ['iter', 'cost', 'grad_norm']


def trace_to_dataframe(trace: SolverTrace) -> pd.DataFrame:
    """
    One row per recorded iterate, row 0 being the starting point.
    """
    return pd.DataFrame({
        'iter': pd.Series(range(len(trace.costs)), dtype='int64'),
        'cost': pd.Series(trace.costs, dtype='float64'),
        'grad_norm': pd.Series(trace.grad_norms, dtype='float64'),
    }, columns=TRACE_COLUMNS)


def write_trace_csv(path: str, trace: SolverTrace) -> None:
    """
    Writes the trace with 17 significant digits, so that every value
    parses back to the same double.
    """
    logger.info(f"Save solver trace into {path}...")

    trace_to_dataframe(trace).to_csv(path, index=False, float_format='%.17g')


def read_trace_csv(path: str) -> pd.DataFrame:
    return pd.read_csv(
        path,
        sep=',',
        dtype={
            'iter': 'int64',
            'cost': 'float64',
            'grad_norm': 'float64',
        },
        float_precision='round_trip'
    )
