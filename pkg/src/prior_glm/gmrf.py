import math
from dataclasses import dataclass

import numpy as np

from coalescent.grid import Trajectory, as_log_sizes

"""
The GMRF smoothing prior on gamma with a GLM mean Z beta:

    log P(gamma | Z, beta, tau) = (M/2) log tau - (tau/2) (gamma - Z beta)' Q (gamma - Z beta) + const

Q is the first-order random walk structure matrix. It is rank deficient (constants lie in its null space), so
the prior is improper in the overall level; the tau^{M/2} normalization is used as written.
"""


def structure_matrix(n: int) -> np.ndarray:
    """
    The n x n first-order random walk structure: -1 off the diagonal, 1 at both ends of the diagonal and 2 in
    between. For n = 1 it is the 1 x 1 zero matrix.
    """
    if n < 1:
        raise ValueError(f"structure matrix size must be positive, got {n}")
    if n == 1:
        return np.zeros((1, 1))
    diagonal = np.full(n, 2.0)
    diagonal[[0, -1]] = 1.0
    return np.diag(diagonal) - np.eye(n, k=1) - np.eye(n, k=-1)


@dataclass(frozen=True)
class GmrfPrecision:
    size: int

    @property
    def dense(self) -> np.ndarray:
        return structure_matrix(self.size)

    @property
    def banded(self) -> np.ndarray:
        """Upper banded storage (scipy.linalg convention): row 0 the superdiagonal, row 1 the diagonal."""
        ab = np.zeros((2, self.size))
        ab[1] = np.diag(self.dense)
        ab[0, 1:] = -1.0
        return ab

    @property
    def rank(self) -> int:
        return self.size - 1

    def quadratic_form(self, v: np.ndarray) -> float:
        return float(np.sum(np.diff(np.asarray(v, dtype=float)) ** 2))

    def apply(self, v: np.ndarray) -> np.ndarray:
        """Q v without forming Q."""
        v = np.asarray(v, dtype=float)
        out = np.zeros_like(v)
        if self.size == 1:
            return out
        d = np.diff(v)
        out[:-1] -= d
        out[1:] += d
        return out


def linear_predictor(design: np.ndarray | None, beta: np.ndarray | None, n: int) -> np.ndarray:
    """Z beta, or zeros when there are no covariates."""
    if design is None or beta is None or np.size(beta) == 0:
        return np.zeros(n)
    design = np.asarray(design, dtype=float)
    beta = np.asarray(beta, dtype=float).reshape(-1)
    if design.shape != (n, beta.size):
        raise ValueError(f"design shape {design.shape} does not match {n} intervals and {beta.size} coefficients")
    if not np.all(np.isfinite(design)):
        raise ValueError("the design matrix has unfilled missing cells")
    return design @ beta


def gmrf_log_prior(
    gamma: Trajectory | np.ndarray, design: np.ndarray | None, beta: np.ndarray | None, tau: float
) -> float:
    """
    This function evaluates the unnormalized GMRF-GLM log prior density of gamma.

    :param gamma: log population sizes, length M + 1
    :param design: the fully instantiated (M + 1) x P covariate matrix, or None
    :param beta: effect sizes, length P, or None
    :param tau: GMRF precision, strictly positive
    :return: (M/2) log tau - (tau/2) (gamma - Z beta)' Q (gamma - Z beta)
    """
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")
    gamma = as_log_sizes(gamma)
    n = gamma.size
    residual = gamma - linear_predictor(design, beta, n)
    m = n - 1
    return 0.5 * m * math.log(tau) - 0.5 * tau * GmrfPrecision(n).quadratic_form(residual)


def log_tau_prior(tau: float, shape: float, rate: float) -> float:
    """Gamma(shape, rate) log density of tau up to its constant."""
    if not tau > 0:
        return -math.inf
    return (shape - 1.0) * math.log(tau) - rate * tau


def full_conditional_component(
    i: int, gamma: Trajectory | np.ndarray, design: np.ndarray | None, beta: np.ndarray | None, tau: float
) -> tuple[float, float]:
    """
    Mean and variance of gamma_i given every other component under the GMRF-GLM prior. Indices are 0-based:
    the two ends have variance 1/tau and interior components 1/(2 tau).
    """
    gamma = as_log_sizes(gamma)
    n = gamma.size
    if n < 2:
        raise ValueError("a single-interval trajectory has no neighbours to condition on")
    if not 0 <= i < n:
        raise IndexError(f"component index {i} outside 0..{n - 1}")
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")
    zb = linear_predictor(design, beta, n)

    if i == 0:
        return float(zb[0] - zb[1] + gamma[1]), 1.0 / tau
    if i == n - 1:
        return float(zb[n - 1] - zb[n - 2] + gamma[n - 2]), 1.0 / tau
    mean = zb[i] + (gamma[i - 1] + gamma[i + 1] - zb[i - 1] - zb[i + 1]) / 2.0
    return float(mean), 1.0 / (2.0 * tau)
