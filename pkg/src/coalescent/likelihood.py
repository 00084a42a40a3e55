import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from coalescent.grid import GridSpec, Trajectory, as_log_sizes
from genealogy.timeline import EventTimeline

"""
Reduction of event timelines to per-interval sufficient statistics and the log-likelihood of a piecewise
constant log population size trajectory gamma built on them:

    log P(g | gamma) = sum_k ( -gamma_k c_k - SS_k exp(-gamma_k) )
"""


@dataclass(frozen=True, eq=False)
class SufficientStatistics:
    """
    Per-locus coalescent counts c_ik and lineage-pair time sums SS_ik on each grid interval, with the first
    and last interval each locus touches (alpha_i and beta_i + 1, 0-based). Aggregates over loci are exposed
    as counts and ss.
    """

    locus_counts: np.ndarray = field(repr=False)
    locus_ss: np.ndarray = field(repr=False)
    first_interval: tuple[int, ...] = ()
    last_interval: tuple[int, ...] = ()
    loci: tuple[str, ...] = ()

    def __post_init__(self):
        counts = np.atleast_2d(np.asarray(self.locus_counts, dtype=float))
        ss = np.atleast_2d(np.asarray(self.locus_ss, dtype=float))
        if counts.shape != ss.shape:
            raise ValueError(f"count shape {counts.shape} differs from SS shape {ss.shape}")
        if np.any(counts < 0) or np.any(ss < 0):
            raise ValueError("sufficient statistics must be nonnegative")
        for array in (counts, ss):
            array.setflags(write=False)
        object.__setattr__(self, "locus_counts", counts)
        object.__setattr__(self, "locus_ss", ss)
        m, n = counts.shape
        if not self.loci:
            object.__setattr__(self, "loci", tuple(f"locus{i + 1}" for i in range(m)))
        if not self.first_interval:
            object.__setattr__(self, "first_interval", (0,) * m)
        if not self.last_interval:
            object.__setattr__(self, "last_interval", (n - 1,) * m)

    @classmethod
    def from_totals(cls, counts: Sequence[float], ss: Sequence[float]) -> "SufficientStatistics":
        """Statistics for a single pseudo-locus given aggregate c_k and SS_k directly."""
        return cls(locus_counts=np.asarray(counts, dtype=float)[None, :], locus_ss=np.asarray(ss, dtype=float)[None, :])

    @property
    def n_intervals(self) -> int:
        return self.locus_counts.shape[1]

    @property
    def n_loci(self) -> int:
        return self.locus_counts.shape[0]

    @cached_property
    def counts(self) -> np.ndarray:
        return self.locus_counts.sum(axis=0)

    @cached_property
    def ss(self) -> np.ndarray:
        return np.array([math.fsum(column) for column in self.locus_ss.T])

    def locus(self, i: int) -> "SufficientStatistics":
        return SufficientStatistics(
            locus_counts=self.locus_counts[i : i + 1],
            locus_ss=self.locus_ss[i : i + 1],
            first_interval=(self.first_interval[i],),
            last_interval=(self.last_interval[i],),
            loci=(self.loci[i],),
        )

    def __add__(self, other: "SufficientStatistics") -> "SufficientStatistics":
        if other.n_intervals != self.n_intervals:
            raise ValueError(f"cannot combine statistics on {self.n_intervals} and {other.n_intervals} intervals")
        return SufficientStatistics(
            locus_counts=np.vstack([self.locus_counts, other.locus_counts]),
            locus_ss=np.vstack([self.locus_ss, other.locus_ss]),
            first_interval=self.first_interval + other.first_interval,
            last_interval=self.last_interval + other.last_interval,
            loci=self.loci + other.loci,
        )


def locus_statistics(timeline: EventTimeline, grid: GridSpec) -> tuple[np.ndarray, np.ndarray, int, int]:
    """
    c_ik and SS_ik for one locus. Each stretch between events with v lineages contributes v(v-1)/2 times its
    overlap with every grid interval; the contributions are accumulated with math.fsum.

    :return: counts, SS, first interval, last interval
    """
    bounds: np.ndarray = grid.boundaries
    n: int = grid.n_intervals
    pieces: list[list[float]] = [[] for _ in range(n)]

    for start, end, lineages in timeline.segments():
        if end <= start or lineages < 2:
            continue
        pairs = lineages * (lineages - 1) / 2.0
        overlap = np.minimum(end, bounds[1:]) - np.maximum(start, bounds[:-1])
        for k in np.flatnonzero(overlap > 0):
            pieces[k].append(pairs * float(overlap[k]))

    ss = np.array([math.fsum(piece) for piece in pieces])
    counts = np.bincount(grid.interval_of(timeline.coalescent_times), minlength=n).astype(float)
    points = np.asarray(grid.points)
    first = int(np.searchsorted(points, timeline.t0, side="right"))
    last = int(np.searchsorted(points, timeline.t_mrca, side="left"))
    return counts, ss, first, last


def compute_sufficient_statistics(timelines: Sequence[EventTimeline], grid: GridSpec) -> SufficientStatistics:
    """
    This function reduces the timelines of every locus against a grid.

    :param timelines: one event timeline per locus
    :param grid: the grid the trajectory lives on
    :return: per-locus and aggregated sufficient statistics
    """
    if not timelines:
        raise ValueError("at least one timeline is required")
    results = [locus_statistics(timeline, grid) for timeline in timelines]
    return SufficientStatistics(
        locus_counts=np.vstack([r[0] for r in results]),
        locus_ss=np.vstack([r[1] for r in results]),
        first_interval=tuple(r[2] for r in results),
        last_interval=tuple(r[3] for r in results),
        loci=tuple(timeline.locus for timeline in timelines),
    )


def _check(ss: SufficientStatistics, gamma: np.ndarray) -> None:
    if gamma.size != ss.n_intervals:
        raise ValueError(f"trajectory has {gamma.size} entries, statistics have {ss.n_intervals} intervals")


def _weighted_inverse_sizes(ss_values: np.ndarray, gamma: np.ndarray) -> np.ndarray:
    # SS_k exp(-gamma_k), with empty intervals kept at exactly 0
    out = np.zeros_like(gamma)
    live = ss_values > 0
    out[live] = ss_values[live] * np.exp(-gamma[live])
    return out


def log_likelihood(ss: SufficientStatistics, gamma: Trajectory | np.ndarray) -> float:
    gamma = as_log_sizes(gamma)
    _check(ss, gamma)
    terms = -gamma * ss.counts - _weighted_inverse_sizes(ss.ss, gamma)
    return math.fsum(terms)


def locus_log_likelihoods(ss: SufficientStatistics, gamma: Trajectory | np.ndarray) -> np.ndarray:
    """Log-likelihood of each locus separately; these sum to log_likelihood."""
    gamma = as_log_sizes(gamma)
    _check(ss, gamma)
    return np.array([log_likelihood(ss.locus(i), gamma) for i in range(ss.n_loci)])


def log_likelihood_derivatives(
    ss: SufficientStatistics, gamma: Trajectory | np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """
    Gradient -c_k + SS_k exp(-gamma_k) and diagonal curvature -SS_k exp(-gamma_k) of log_likelihood. The
    Hessian is diagonal because each gamma_k enters one term only.
    """
    gamma = as_log_sizes(gamma)
    _check(ss, gamma)
    weighted = _weighted_inverse_sizes(ss.ss, gamma)
    return -ss.counts + weighted, -weighted
