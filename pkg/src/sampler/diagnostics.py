from typing import Sequence

import arviz as az
import numpy as np
import pandas as pd

from common.log import module_logger
from sampler.trace import Trace

logger = module_logger(__name__)

MIN_DRAWS = 4


def _as_draws(draws: np.ndarray | Sequence[np.ndarray]) -> np.ndarray:
    """(chain, draw) array; a single series counts as one chain."""
    return np.atleast_2d(np.asarray(draws, dtype=float))


def effective_sample_size(draws: np.ndarray | Sequence[np.ndarray]) -> float:
    """
    Bulk effective sample size over all chains, rank normalized. A constant series or one shorter than four
    draws returns its total length.
    """
    draws = _as_draws(draws)
    if draws.shape[1] < MIN_DRAWS or np.ptp(draws) == 0:
        return float(draws.size)
    return float(az.ess(draws, method="bulk"))


def split_rhat(draws: np.ndarray | Sequence[np.ndarray]) -> float:
    """
    Rank normalized split R-hat over every chain. Returns 1 for constant draws and NaN when the chains are
    too short to split.
    """
    draws = _as_draws(draws)
    if draws.shape[1] < MIN_DRAWS:
        return float("nan")
    if np.ptp(draws) == 0:
        return 1.0
    return float(az.rhat(draws, method="rank"))


def to_inference_data(traces: Sequence[Trace]) -> az.InferenceData:
    """
    This function stacks per-chain traces into an arviz posterior with one variable per trace column. Chains
    of unequal length are cut to the shortest.

    :param traces: one trace per chain, all sharing a header
    :return: posterior group of shape (chain, draw) per column
    """
    frames: list[pd.DataFrame] = [trace.to_frame() for trace in traces]
    length = min(len(frame) for frame in frames)
    if any(len(frame) != length for frame in frames):
        logger.warning("chains hold %s samples; diagnostics use the first %d of each", [len(f) for f in frames], length)
    posterior = {
        column: np.stack([frame[column].to_numpy(dtype=float)[:length] for frame in frames])
        for column in frames[0].columns
    }
    return az.from_dict(posterior=posterior)


def convergence_table(traces: Sequence[Trace]) -> pd.DataFrame:
    """Bulk ESS and split R-hat for every trace column."""
    posterior = to_inference_data(traces).posterior
    rows: list[dict] = []
    for column in posterior.data_vars:
        draws = posterior[column].to_numpy()
        rows.append({"parameter": column, "ess": effective_sample_size(draws), "rhat": split_rhat(draws)})
    return pd.DataFrame(rows, columns=["parameter", "ess", "rhat"])
