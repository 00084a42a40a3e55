import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from common.errors import NumericalError


@dataclass(frozen=True, eq=False)
class Gaussian:
    """
    A multivariate normal held by its mean and precision, with the lower Cholesky factor of the precision
    computed once on construction.
    """

    mean: np.ndarray
    precision: np.ndarray
    _factor: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        precision = np.atleast_2d(np.asarray(self.precision, dtype=float))
        if precision.shape != (mean.size, mean.size):
            raise ValueError(f"precision shape {precision.shape} does not match mean of length {mean.size}")
        try:
            factor = linalg.cholesky(precision, lower=True)
        except linalg.LinAlgError as e:
            raise NumericalError(f"precision matrix is not positive definite: {e}") from e
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "precision", precision)
        object.__setattr__(self, "_factor", factor)

    @classmethod
    def from_canonical(cls, precision: np.ndarray, linear: np.ndarray) -> "Gaussian":
        """The Gaussian with density proportional to exp(-x'Px/2 + h'x)."""
        precision = np.atleast_2d(np.asarray(precision, dtype=float))
        try:
            factor = linalg.cho_factor(precision, lower=True)
        except linalg.LinAlgError as e:
            raise NumericalError(f"precision matrix is not positive definite: {e}") from e
        return cls(mean=linalg.cho_solve(factor, np.asarray(linear, dtype=float)), precision=precision)

    @property
    def dimension(self) -> int:
        return self.mean.size

    @property
    def covariance(self) -> np.ndarray:
        return linalg.cho_solve((self._factor, True), np.eye(self.dimension))

    def log_determinant(self) -> float:
        return 2.0 * float(np.sum(np.log(np.diag(self._factor))))

    def sample(self, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
        """x = mean + L^{-T} z with z standard normal, which has covariance (LL')^{-1}."""
        shape = (self.dimension,) if size is None else (self.dimension, size)
        z = rng.standard_normal(shape)
        draws = linalg.solve_triangular(self._factor, z, lower=True, trans="T")
        if size is None:
            return self.mean + draws
        return (self.mean[:, None] + draws).T

    def log_density(self, x: np.ndarray) -> float:
        deviation = np.asarray(x, dtype=float) - self.mean
        quadratic = float(deviation @ self.precision @ deviation)
        return 0.5 * self.log_determinant() - 0.5 * self.dimension * math.log(2.0 * math.pi) - 0.5 * quadratic
