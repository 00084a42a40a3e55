import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from coalescent.grid import Trajectory, as_log_sizes
from coalescent.likelihood import SufficientStatistics
from common.errors import NumericalError
from common.log import module_logger
from prior_glm.gmrf import GmrfPrecision, linear_predictor

logger = module_logger(__name__)

MAX_HALVINGS: int = 30


# tau scale move: f has density proportional to f + 1/f on [1/F, F]


def scale_factor_normalizer(tuning: float) -> float:
    return (tuning**2 - tuning**-2) / 2.0 + 2.0 * math.log(tuning)


def scale_factor_cdf(f: float | np.ndarray, tuning: float) -> float | np.ndarray:
    f = np.clip(np.asarray(f, dtype=float), 1.0 / tuning, tuning)
    value = ((f**2 - tuning**-2) / 2.0 + np.log(f) + math.log(tuning)) / scale_factor_normalizer(tuning)
    return float(value) if value.ndim == 0 else value


def draw_scale_factor(tuning: float, rng: np.random.Generator) -> float:
    """
    Draws f from the mixture of its two density terms: f itself (weight (F^2 - F^-2)/2) sampled by inverting
    f^2, and 1/f (weight 2 ln F) which is log-uniform.
    """
    if not tuning > 1:
        raise ValueError(f"the tau proposal tuning F must exceed 1, got {tuning}")
    linear_weight = (tuning**2 - tuning**-2) / 2.0 / scale_factor_normalizer(tuning)
    u = rng.random()
    if rng.random() < linear_weight:
        return math.sqrt(tuning**-2 + u * (tuning**2 - tuning**-2))
    return math.exp((2.0 * u - 1.0) * math.log(tuning))


def propose_tau(tau: float, tuning: float, rng: np.random.Generator) -> tuple[float, float]:
    """
    This function proposes tau* = tau f.

    :param tau: current GMRF precision
    :param tuning: F > 1
    :param rng: random generator
    :return: tau* and the log Hastings correction -log f of the multiplicative move
    """
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")
    f = draw_scale_factor(tuning, rng)
    return tau * f, -math.log(f)


# Newton-Raphson mode of the gamma full conditional


def log_conditional_objective(
    gamma: np.ndarray, ss: SufficientStatistics, zb: np.ndarray, tau: float, q: GmrfPrecision
) -> float:
    """f(gamma) = -(tau/2) gamma'Q gamma + tau (Z beta)'Q gamma - sum(gamma_k c_k + SS_k exp(-gamma_k))."""
    with np.errstate(over="ignore", invalid="ignore"):
        inverse = np.where(ss.ss > 0, ss.ss * np.exp(-gamma), 0.0)
        value = (
            -0.5 * tau * float(gamma @ q.apply(gamma))
            + tau * float(zb @ q.apply(gamma))
            - float(np.sum(gamma * ss.counts + inverse))
        )
    return value


def objective_derivatives(
    gamma: np.ndarray, ss: SufficientStatistics, zb: np.ndarray, tau: float, q: GmrfPrecision
) -> tuple[np.ndarray, np.ndarray]:
    """Gradient of f and the diagonal SS_k exp(-gamma_k) that, added to tau Q, gives -d2f."""
    with np.errstate(over="ignore", invalid="ignore"):
        weighted = np.where(ss.ss > 0, ss.ss * np.exp(-gamma), 0.0)
    gradient = -tau * q.apply(gamma) + tau * q.apply(zb) - ss.counts + weighted
    return gradient, weighted


def _banded_precision(q: GmrfPrecision, tau: float, curvature: np.ndarray) -> np.ndarray:
    ab = tau * q.banded
    ab[1] += curvature
    return ab


@dataclass(frozen=True, eq=False)
class NewtonResult:
    mode: np.ndarray
    gradient_norm: float
    iterations: int
    converged: bool


def newton_raphson_mode(
    gamma0: Trajectory | np.ndarray,
    ss: SufficientStatistics,
    design: np.ndarray | None,
    beta: np.ndarray | None,
    tau: float,
    max_iter: int = 25,
    tol: float = 1e-8,
) -> NewtonResult:
    """
    This function maximizes f by Newton-Raphson, gamma <- gamma + (tau Q + Diag(SS e^-gamma))^{-1} df, solving
    the tridiagonal system in banded form. A step that makes f non-finite or smaller is halved up to
    MAX_HALVINGS times.

    :param gamma0: starting point, normally the current state
    :param ss: sufficient statistics
    :param design: fully instantiated covariate matrix or None
    :param beta: effect sizes or None
    :param tau: GMRF precision, nonnegative
    :param max_iter: iteration cap
    :param tol: convergence threshold on the sup norm of the gradient
    :return: the best iterate with its gradient norm and a convergence flag
    """
    gamma = np.array(as_log_sizes(gamma0), dtype=float)
    n = gamma.size
    if n != ss.n_intervals:
        raise ValueError(f"trajectory has {n} entries, statistics have {ss.n_intervals} intervals")
    q = GmrfPrecision(n)
    zb = linear_predictor(design, beta, n)

    current = log_conditional_objective(gamma, ss, zb, tau, q)
    if not math.isfinite(current):
        raise NumericalError("the Newton-Raphson starting point has a non-finite objective")
    gradient, weighted = objective_derivatives(gamma, ss, zb, tau, q)
    norm = float(np.max(np.abs(gradient)))
    iterations = 0

    while norm >= tol and iterations < max_iter:
        iterations += 1
        try:
            step = linalg.solveh_banded(_banded_precision(q, tau, weighted), gradient)
        except linalg.LinAlgError as e:
            raise NumericalError(f"Newton-Raphson precision is not positive definite: {e}") from e

        seen_finite = False
        for _ in range(MAX_HALVINGS + 1):
            candidate = gamma + step
            value = log_conditional_objective(candidate, ss, zb, tau, q)
            if math.isfinite(value):
                seen_finite = True
                if value >= current:
                    break
            step = step / 2.0
        else:
            if not seen_finite:
                raise NumericalError("step halving exhausted without reaching a finite objective")
            logger.debug("Newton-Raphson stalled after %d iterations with gradient norm %.3g", iterations, norm)
            break

        gamma, current = candidate, value
        gradient, weighted = objective_derivatives(gamma, ss, zb, tau, q)
        norm = float(np.max(np.abs(gradient)))

    converged = norm < tol
    if not converged:
        logger.debug("Newton-Raphson stopped at gradient norm %.3g after %d iterations", norm, iterations)
    return NewtonResult(mode=gamma, gradient_norm=norm, iterations=iterations, converged=converged)


# second-order Gaussian approximation


def quadratic_expansion(center: np.ndarray, ss: SufficientStatistics) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Taylor coefficients of h_k(gamma) = gamma c_k + SS_k exp(-gamma_k) about center, as h_k ~ a_k + b_k gamma +
    q_k gamma^2.

    :return: constant a, linear b and quadratic q coefficient arrays
    """
    center = as_log_sizes(center)
    weighted = np.where(ss.ss > 0, ss.ss * np.exp(-center), 0.0)
    constant = weighted * (1.0 + center + center**2 / 2.0)
    linear = ss.counts - weighted * (1.0 + center)
    quadratic = weighted / 2.0
    return constant, linear, quadratic


@dataclass(frozen=True, eq=False)
class GaussianProposal:
    """
    The Gaussian with density proportional to exp(-gamma'P gamma/2 + b'gamma), P = tau Q + Diag(curvature),
    held through the upper Cholesky factor of its banded precision.
    """

    center: np.ndarray
    precision_banded: np.ndarray = field(repr=False)
    linear: np.ndarray = field(repr=False)
    mean: np.ndarray = field(init=False)
    log_normalizer: float = field(init=False)
    _factor: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        try:
            factor = linalg.cholesky_banded(self.precision_banded, lower=False)
        except linalg.LinAlgError as e:
            raise NumericalError(
                "proposal precision is not positive definite; some interval stretch has no lineage time"
            ) from e
        log_det = 2.0 * float(np.sum(np.log(factor[1])))
        object.__setattr__(self, "_factor", factor)
        object.__setattr__(self, "mean", linalg.cho_solve_banded((factor, False), self.linear))
        object.__setattr__(self, "log_normalizer", 0.5 * log_det - 0.5 * self.dimension * math.log(2.0 * math.pi))

    @classmethod
    def build(
        cls, center: np.ndarray, tau: float, zb: np.ndarray, curvature: np.ndarray, linear: np.ndarray
    ) -> "GaussianProposal":
        """
        Proposal for a target whose non-prior part is -sum(linear_k gamma_k + curvature_k gamma_k^2 / 2) under
        the GMRF-GLM prior with mean zb.
        """
        center = np.asarray(center, dtype=float)
        q = GmrfPrecision(center.size)
        return cls(
            center=center,
            precision_banded=_banded_precision(q, tau, np.asarray(curvature, dtype=float)),
            linear=tau * q.apply(zb) - np.asarray(linear, dtype=float),
        )

    @property
    def dimension(self) -> int:
        return self.center.size

    @property
    def precision(self) -> np.ndarray:
        ab = self.precision_banded
        return np.diag(ab[1]) + np.diag(ab[0, 1:], k=1) + np.diag(ab[0, 1:], k=-1)

    def log_density(self, gamma: np.ndarray) -> float:
        deviation = as_log_sizes(gamma) - self.mean
        # ||U d||^2 with U upper bidiagonal
        scaled = self._factor[1] * deviation
        scaled[:-1] += self._factor[0, 1:] * deviation[1:]
        return self.log_normalizer - 0.5 * float(scaled @ scaled)

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        z = rng.standard_normal(self.dimension)
        return self.mean + linalg.solve_banded((0, 1), self._factor, z)


def gaussian_approx(
    center: Trajectory | np.ndarray,
    ss: SufficientStatistics,
    design: np.ndarray | None,
    beta: np.ndarray | None,
    tau: float,
) -> GaussianProposal:
    """
    This function builds the second-order Gaussian approximation of the gamma full conditional about center,
    usually the Newton-Raphson mode.

    :param center: expansion point gamma hat, finite
    :param ss: sufficient statistics
    :param design: fully instantiated covariate matrix or None
    :param beta: effect sizes or None
    :param tau: GMRF precision
    :return: the proposal
    """
    center = np.array(as_log_sizes(center), dtype=float)
    if not np.all(np.isfinite(center)):
        raise NumericalError("the expansion point of the Gaussian approximation is not finite")
    if center.size != ss.n_intervals:
        raise ValueError(f"trajectory has {center.size} entries, statistics have {ss.n_intervals} intervals")
    _, linear, quadratic = quadratic_expansion(center, ss)
    zb = linear_predictor(design, beta, center.size)
    return GaussianProposal.build(center, tau, zb, 2.0 * quadratic, linear)
