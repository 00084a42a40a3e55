import math
from dataclasses import dataclass, field, replace

import numpy as np

from coalescent.grid import Trajectory, as_log_sizes
from prior_glm.gaussian import Gaussian
from prior_glm.gmrf import GmrfPrecision

DEFAULT_BETA_VARIANCE: float = 100.0


@dataclass(frozen=True, eq=False)
class Coefficients:
    """Effect sizes beta with their independent normal prior (mean and diagonal variance)."""

    values: np.ndarray
    prior_mean: np.ndarray = field(default=None)
    prior_variance: np.ndarray = field(default=None)

    def __post_init__(self):
        values = np.atleast_1d(np.asarray(self.values, dtype=float)).reshape(-1)
        p = values.size
        mean = np.zeros(p) if self.prior_mean is None else np.broadcast_to(np.asarray(self.prior_mean, dtype=float), (p,)).copy()
        variance = (
            np.full(p, DEFAULT_BETA_VARIANCE)
            if self.prior_variance is None
            else np.broadcast_to(np.asarray(self.prior_variance, dtype=float), (p,)).copy()
        )
        if np.any(variance <= 0) or not np.all(np.isfinite(variance)):
            raise ValueError("the beta prior covariance must be positive definite")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "prior_mean", mean)
        object.__setattr__(self, "prior_variance", variance)

    @classmethod
    def default(cls, p: int, mean: float = 0.0, variance: float = DEFAULT_BETA_VARIANCE) -> "Coefficients":
        return cls(values=np.full(p, mean, dtype=float), prior_mean=np.full(p, mean), prior_variance=np.full(p, variance))

    @property
    def size(self) -> int:
        return self.values.size

    @property
    def prior_precision(self) -> np.ndarray:
        return np.diag(1.0 / self.prior_variance)

    def with_values(self, values: np.ndarray) -> "Coefficients":
        return replace(self, values=np.asarray(values, dtype=float))

    def log_prior(self, values: np.ndarray | None = None) -> float:
        values = self.values if values is None else np.asarray(values, dtype=float)
        deviation = values - self.prior_mean
        return float(
            -0.5 * np.sum(deviation**2 / self.prior_variance)
            - 0.5 * np.sum(np.log(2.0 * math.pi * self.prior_variance))
        )


@dataclass(frozen=True)
class HyperParams:
    """
    tau ~ Gamma(tau_shape, tau_rate), kappa ~ Gamma(kappa_shape, kappa_rate), and the tuning constant F of the
    multiplicative tau proposal.
    """

    tau_shape: float = 0.001
    tau_rate: float = 0.001
    kappa_shape: float = 0.001
    kappa_rate: float = 0.001
    scale_factor: float = 1.5

    def __post_init__(self):
        for name in ("tau_shape", "tau_rate", "kappa_shape", "kappa_rate", "scale_factor"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive, got {getattr(self, name)}")
        if not self.scale_factor > 1:
            raise ValueError(f"the tau proposal tuning F must exceed 1, got {self.scale_factor}")


def beta_full_conditional(
    gamma: Trajectory | np.ndarray, design: np.ndarray, tau: float, prior: Coefficients
) -> Gaussian:
    """
    The conjugate conditional of beta given gamma, Z and tau:

        precision = tau Z'QZ + prior precision
        precision @ mean = tau Z'Q gamma + prior precision @ prior mean

    :param gamma: log population sizes
    :param design: fully instantiated (M + 1) x P covariate matrix
    :param tau: GMRF precision (0 gives back the prior)
    :param prior: the coefficients carrying the prior mean and variance
    :return: the Gaussian full conditional
    """
    gamma = as_log_sizes(gamma)
    design = np.asarray(design, dtype=float)
    if design.shape != (gamma.size, prior.size):
        raise ValueError(f"design shape {design.shape} does not match {gamma.size} intervals and {prior.size} coefficients")
    if tau < 0:
        raise ValueError(f"tau must be nonnegative, got {tau}")
    q = GmrfPrecision(gamma.size)
    q_design = np.column_stack([q.apply(design[:, j]) for j in range(prior.size)]) if prior.size else design
    precision = tau * design.T @ q_design + prior.prior_precision
    linear = tau * q_design.T @ gamma + prior.prior_mean / prior.prior_variance
    return Gaussian.from_canonical(precision, linear)
