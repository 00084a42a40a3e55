import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from coalescent.grid import GridSpec, Trajectory
from prior_glm.covariates import CovariateMatrix


@dataclass(frozen=True, eq=False)
class SimulationPlan:
    """
    A sampling schedule (distinct backward times with the number of tips taken at each) together with the
    grid and the true trajectory the genealogies are drawn under.
    """

    sampling_times: tuple[float, ...]
    tip_counts: tuple[int, ...]
    grid: GridSpec
    trajectory: Trajectory
    replicates: int = 1
    seed: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "sampling_times", tuple(float(t) for t in self.sampling_times))
        object.__setattr__(self, "tip_counts", tuple(int(c) for c in self.tip_counts))
        if len(self.sampling_times) != len(self.tip_counts) or not self.sampling_times:
            raise ValueError("every sampling time needs exactly one tip count")
        if any(t < 0 or not math.isfinite(t) for t in self.sampling_times):
            raise ValueError("sampling times must be finite and nonnegative")
        if len(set(self.sampling_times)) != len(self.sampling_times):
            raise ValueError("sampling times must be distinct; merge their tip counts instead")
        if any(c < 1 for c in self.tip_counts):
            raise ValueError("every sampling time must contribute at least one tip")
        if self.n_tips < 2:
            raise ValueError(f"a simulation needs at least 2 tips, got {self.n_tips}")
        if not self.trajectory.matches(self.grid):
            raise ValueError(
                f"trajectory has {len(self.trajectory)} entries but the grid has {self.grid.n_intervals} intervals"
            )
        if self.replicates < 1:
            raise ValueError(f"replicate count must be positive, got {self.replicates}")

    @classmethod
    def isochronous(cls, n_tips: int, grid: GridSpec, trajectory: Trajectory, **kwargs) -> "SimulationPlan":
        return cls(sampling_times=(0.0,), tip_counts=(n_tips,), grid=grid, trajectory=trajectory, **kwargs)

    @property
    def n_tips(self) -> int:
        return sum(self.tip_counts)

    def schedule(self) -> list[tuple[float, int]]:
        return sorted(zip(self.sampling_times, self.tip_counts))


def gmrf_noise(n: int, tau: float, rng: np.random.Generator) -> np.ndarray:
    """Zero-mean GMRF draw of precision tau Q with the first entry pinned to 0."""
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")
    if math.isinf(tau) or n == 1:
        return np.zeros(n)
    increments = rng.normal(0.0, 1.0 / math.sqrt(tau), size=n - 1)
    return np.concatenate(([0.0], np.cumsum(increments)))


def simulate_trajectory_and_covariates(
    grid: GridSpec,
    n_covariates: int,
    beta: Sequence[float],
    tau: float,
    rng: np.random.Generator,
    labels: Sequence[str] | None = None,
) -> tuple[Trajectory, CovariateMatrix]:
    """
    This function draws covariates and a trajectory from the generative GMRF-GLM model: every column of Z is a
    standard Gaussian random walk over the grid intervals and gamma = Z beta + w with w a GMRF draw whose first
    entry is pinned to 0.

    :param grid: grid the trajectory lives on
    :param n_covariates: P, at least 1
    :param beta: true effect sizes, length P
    :param tau: GMRF precision; math.inf gives gamma = Z beta exactly
    :param rng: random generator
    :param labels: column labels, Z1..ZP by default
    :return: the trajectory and the fully observed covariate matrix
    """
    if n_covariates < 1:
        raise ValueError(f"at least one covariate is needed, got {n_covariates}")
    beta = np.asarray(beta, dtype=float).reshape(-1)
    if beta.size != n_covariates:
        raise ValueError(f"{beta.size} effect sizes given for {n_covariates} covariates")
    n = grid.n_intervals
    design = np.cumsum(rng.standard_normal((n, n_covariates)), axis=0)
    gamma = design @ beta + gmrf_noise(n, tau, rng)
    # rows sit at the grid points plus one step past the last, so aligned_grid gives back grid
    last_step = grid.points[-1] - (grid.points[-2] if grid.m > 1 else 0.0)
    times = tuple(grid.points) + (grid.points[-1] + max(last_step, 1.0),)
    covariates = CovariateMatrix(
        values=design,
        labels=tuple(labels) if labels else (),
        times=times,
    )
    return Trajectory(gamma), covariates
