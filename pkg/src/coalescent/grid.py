from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class GridSpec:
    """
    Grid points x_1 <= ... <= x_M in backward time. With x_0 = 0 they cut the past into M + 1 intervals,
    [x_{k-1}, x_k) for k = 1..M and the open-ended [x_M, inf).
    """

    points: tuple[float, ...]

    def __post_init__(self):
        points = tuple(float(x) for x in self.points)
        object.__setattr__(self, "points", points)
        if len(points) < 1:
            raise ValueError("a grid needs at least one grid point")
        if not np.all(np.isfinite(points)):
            raise ValueError("grid points must be finite")
        if points[0] <= 0:
            raise ValueError(f"the first grid point must be strictly positive, got {points[0]}")
        if np.any(np.diff(points) < 0):
            raise ValueError("grid points must be nondecreasing")

    @classmethod
    def even(cls, m: int, cutoff: float) -> "GridSpec":
        """M grid points spaced evenly on (0, cutoff], the last one at cutoff."""
        if m < 1:
            raise ValueError(f"M must be a positive integer, got {m}")
        if cutoff <= 0:
            raise ValueError(f"cutoff must be positive, got {cutoff}")
        return cls(tuple(cutoff * k / m for k in range(1, m + 1)))

    @property
    def m(self) -> int:
        return len(self.points)

    @property
    def n_intervals(self) -> int:
        return len(self.points) + 1

    @property
    def boundaries(self) -> np.ndarray:
        """x_0 = 0, x_1..x_M and +inf: interval k spans boundaries[k] to boundaries[k + 1]."""
        return np.concatenate(([0.0], self.points, [np.inf]))

    def interval_of(self, t: float | np.ndarray) -> int | np.ndarray:
        """
        0-based interval index for time t. A time sitting exactly on a grid point belongs to the earlier
        (younger) interval.
        """
        return np.searchsorted(np.asarray(self.points), t, side="left")


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Log effective population sizes gamma_k, one per grid interval."""

    log_sizes: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.array(self.log_sizes, dtype=float).reshape(-1)
        if values.size < 1:
            raise ValueError("a trajectory needs at least one interval")
        if not np.all(np.isfinite(values)):
            raise ValueError("trajectory entries must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "log_sizes", values)

    @property
    def theta(self) -> np.ndarray:
        return np.exp(self.log_sizes)

    def __len__(self) -> int:
        return self.log_sizes.size

    def matches(self, grid: GridSpec) -> bool:
        return len(self) == grid.n_intervals

    def size_at(self, grid: GridSpec, t: float | np.ndarray) -> float | np.ndarray:
        """N_e(t) for the piecewise-constant trajectory on grid."""
        if not self.matches(grid):
            raise ValueError(f"trajectory has {len(self)} entries, grid has {grid.n_intervals} intervals")
        return self.theta[grid.interval_of(t)]


def as_log_sizes(gamma: "Trajectory | np.ndarray | Sequence[float]") -> np.ndarray:
    if isinstance(gamma, Trajectory):
        return gamma.log_sizes
    return np.asarray(gamma, dtype=float).reshape(-1)
