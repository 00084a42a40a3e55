from typing import Sequence

import numpy as np
import pandas as pd

from sampler.diagnostics import convergence_table
from sampler.trace import Trace

"""
The purpose of this module is to centrally consolidate posterior summaries that turn traces into the
dataframes the command line writes out and the plotting helpers draw.
"""

LOWER: float = 0.025
UPPER: float = 0.975
QUANTILE_METHOD: str = "inverted_cdf"


def _quantiles(samples: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    # empirical CDF quantiles, unchanged when a trace is concatenated with a copy of itself
    lower, median, upper = np.quantile(samples, [LOWER, 0.5, UPPER], axis=0, method=QUANTILE_METHOD)
    return lower, median, upper


def summarize_trajectory(
    trace: Trace, grid_points: Sequence[float] | None = None, anchor: float | None = None
) -> pd.DataFrame:
    """
    This function summarizes the posterior of gamma interval by interval: mean, median and the 95% Bayesian
    credibility interval of log_e N_e, with log10 display columns. The interval bounds come from grid_points
    and, given an anchor date, are also reported as calendar years (anchor minus backward time).

    :param trace: a trace with at least one sample
    :param grid_points: x_1..x_M, used for the start and end columns
    :param anchor: calendar date of backward time 0
    :return: one row per interval
    """
    if trace.n_samples == 0:
        raise ValueError("cannot summarize an empty trace")
    lower, median, upper = _quantiles(trace.gamma)
    mean: np.ndarray = trace.gamma.mean(axis=0)
    df: pd.DataFrame = pd.DataFrame(
        {
            "interval": np.arange(trace.n_intervals),
            "mean": mean,
            "median": median,
            "lower": lower,
            "upper": upper,
        }
    )
    if grid_points is not None:
        if len(grid_points) + 1 != trace.n_intervals:
            raise ValueError(f"{len(grid_points)} grid points do not fit {trace.n_intervals} intervals")
        df.insert(1, "start", np.concatenate(([0.0], grid_points)))
        df.insert(2, "end", np.concatenate((grid_points, [np.inf])))
        if anchor is not None:
            df["start_year"] = anchor - df["start"]
            df["end_year"] = anchor - df["end"]
    for column in ("mean", "median", "lower", "upper"):
        df[f"{column}_log10"] = df[column] / np.log(10.0)
    return df


def effect_sizes(trace: Trace) -> pd.DataFrame:
    """
    This function reports every effect size by posterior mean, standard deviation, median, 95% credibility
    interval and the posterior probability that it is positive. Without covariates the frame is empty.

    :param trace: a trace
    :return: one row per covariate column
    """
    columns: list[str] = ["covariate", "mean", "sd", "median", "lower", "upper", "prob_positive"]
    if trace.beta.shape[1] == 0 or trace.n_samples == 0:
        return pd.DataFrame(columns=columns)
    lower, median, upper = _quantiles(trace.beta)
    return pd.DataFrame(
        {
            "covariate": list(trace.labels),
            "mean": trace.beta.mean(axis=0),
            "sd": trace.beta.std(axis=0, ddof=1) if trace.n_samples > 1 else np.zeros(trace.beta.shape[1]),
            "median": median,
            "lower": lower,
            "upper": upper,
            "prob_positive": (trace.beta > 0).mean(axis=0),
        },
        columns=columns,
    )


def scalar_summary(trace: Trace) -> pd.DataFrame:
    """Mean and credibility interval of tau and kappa."""
    rows: list[dict] = []
    for name in ("tau", "kappa"):
        samples: np.ndarray = getattr(trace, name)
        if samples.size == 0:
            continue
        lower, median, upper = _quantiles(samples)
        rows.append({"parameter": name, "mean": samples.mean(), "median": median, "lower": lower, "upper": upper})
    return pd.DataFrame(rows, columns=["parameter", "mean", "median", "lower", "upper"])


def plot_data(
    summary: pd.DataFrame,
    covariates: pd.DataFrame | None = None,
    horizon: float | None = None,
) -> pd.DataFrame:
    """
    This function lays the trajectory summary out as a step function ready for a band plot: two rows per
    interval (its start and end) with mean, lower and upper, and covariate overlays as extra columns. The open
    last interval is drawn up to horizon, by default one interval width past the last grid point.

    :param summary: output of summarize_trajectory with start and end columns
    :param covariates: one row per interval, a column per covariate overlay
    :param horizon: where the last interval stops on the plot
    :return: the plot data
    """
    if "start" not in summary.columns:
        raise ValueError("plot data needs a summary with interval start and end columns")
    ends: np.ndarray = summary["end"].to_numpy(dtype=float).copy()
    if np.isinf(ends[-1]):
        starts: np.ndarray = summary["start"].to_numpy(dtype=float)
        width: float = starts[-1] - starts[-2] if len(starts) > 1 else 1.0
        ends[-1] = horizon if horizon is not None else starts[-1] + max(width, 1.0)

    records: list[dict] = []
    for k, row in enumerate(summary.itertuples(index=False)):
        for time in (row.start, ends[k]):
            record: dict = {"interval": row.interval, "time": time, "mean": row.mean, "lower": row.lower, "upper": row.upper}
            if covariates is not None:
                record.update(covariates.iloc[k].to_dict())
            records.append(record)
    df: pd.DataFrame = pd.DataFrame(records)
    if "start_year" in summary.columns:
        anchor: float = float(summary["start_year"].iloc[0] + summary["start"].iloc[0])
        df.insert(2, "year", anchor - df["time"])
    return df


def diagnostics(traces: Sequence[Trace]) -> pd.DataFrame:
    """
    This function computes the bulk effective sample size and rank normalized split R-hat across chains for
    every trace column, through arviz.

    :param traces: one trace per chain, all sharing a header
    :return: one row per parameter with ess and rhat
    """
    if not traces:
        raise ValueError("diagnostics need at least one trace")
    return convergence_table(traces)
