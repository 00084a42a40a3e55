import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from scipy import stats

from coalescent.likelihood import SufficientStatistics, log_likelihood
from common.errors import CovariateError, NumericalError
from common.log import module_logger
from prior_glm.coefficients import Coefficients, HyperParams, beta_full_conditional
from prior_glm.covariates import CovariateMatrix
from prior_glm.gaussian import Gaussian
from prior_glm.gmrf import GmrfPrecision, gmrf_log_prior, linear_predictor, log_tau_prior, structure_matrix
from prior_glm.missing import (
    MissingLayout,
    MissingPolicy,
    is_trailing_block,
    kappa_full_conditional,
    log_random_walk_density,
    plausible_range,
)
from sampler.proposals import GaussianProposal, gaussian_approx, newton_raphson_mode, propose_tau

logger = module_logger(__name__)


@dataclass(frozen=True, eq=False)
class ModelContext:
    """Everything a kernel reads but never changes: data, priors and tuning."""

    ss: SufficientStatistics
    covariates: CovariateMatrix
    hyper: HyperParams = field(default_factory=HyperParams)
    beta_prior: Coefficients | None = None
    policy: MissingPolicy = MissingPolicy.RANDOM_WALK
    layout: MissingLayout = MissingLayout.GENERAL
    ranges: Mapping[int, tuple[float, float]] = field(default_factory=dict)
    fix_tau: bool = False
    newton_tol: float = 1e-8
    newton_max_iter: int = 25
    debug: bool = False

    @classmethod
    def build(
        cls,
        ss: SufficientStatistics,
        covariates: CovariateMatrix | None = None,
        hyper: HyperParams | None = None,
        beta_variance: float = 100.0,
        policy: MissingPolicy | str = MissingPolicy.RANDOM_WALK,
        layout: MissingLayout | str = MissingLayout.GENERAL,
        ranges: Mapping[int, tuple[float, float]] | None = None,
        **settings,
    ) -> "ModelContext":
        """
        This function checks that the covariates fit the statistics and fills in defaults: a N(0, beta_variance)
        prior per coefficient and observed min/max as the uniform range of every column with missing cells.
        """
        covariates = covariates if covariates is not None else CovariateMatrix.empty(ss.n_intervals)
        covariates.check_rows(ss.n_intervals)
        policy = MissingPolicy(policy)
        layout = MissingLayout(layout)
        if layout is MissingLayout.TRAILING:
            for j in covariates.missing_columns:
                if not is_trailing_block(covariates.values[:, j]):
                    raise CovariateError(
                        f"covariate '{covariates.labels[j]}' has interleaved missing cells under the trailing layout"
                    )
        resolved = {j: plausible_range(covariates.values[:, j]) for j in covariates.missing_columns}
        resolved.update(ranges or {})
        for j, (low, high) in resolved.items():
            if not low < high and policy is MissingPolicy.UNIFORM:
                raise CovariateError(f"covariate '{covariates.labels[j]}' has an empty plausible range [{low}, {high}]")
        return cls(
            ss=ss,
            covariates=covariates,
            hyper=hyper or HyperParams(),
            beta_prior=Coefficients.default(covariates.n_columns, variance=beta_variance),
            policy=policy,
            layout=layout,
            ranges=resolved,
            **settings,
        )

    @property
    def n_intervals(self) -> int:
        return self.ss.n_intervals

    @property
    def n_covariates(self) -> int:
        return self.covariates.n_columns


@dataclass(frozen=True, eq=False)
class ChainState:
    """
    (gamma, tau, beta, Z with current imputations, kappa) and the cached log-likelihood and log-prior of that
    point. log_prior covers the GMRF-GLM prior, the tau and beta priors and, under the random-walk policy, the
    missing-cell model with its kappa prior.
    """

    gamma: np.ndarray
    tau: float
    beta: np.ndarray
    design: np.ndarray
    kappa: float
    log_likelihood: float
    log_prior: float

    @property
    def log_posterior(self) -> float:
        return self.log_likelihood + self.log_prior

    @classmethod
    def evaluate(
        cls,
        context: ModelContext,
        gamma: np.ndarray,
        tau: float,
        beta: np.ndarray,
        design: np.ndarray,
        kappa: float,
    ) -> "ChainState":
        gamma = np.asarray(gamma, dtype=float)
        beta = np.asarray(beta, dtype=float)
        design = np.asarray(design, dtype=float)
        return cls(
            gamma=gamma,
            tau=float(tau),
            beta=beta,
            design=design,
            kappa=float(kappa),
            log_likelihood=log_likelihood(context.ss, gamma),
            log_prior=log_prior(context, gamma, tau, beta, design, kappa),
        )

    def imputations(self, context: ModelContext) -> np.ndarray:
        return self.design[~context.covariates.observed]


def log_prior(
    context: ModelContext, gamma: np.ndarray, tau: float, beta: np.ndarray, design: np.ndarray, kappa: float
) -> float:
    hyper = context.hyper
    value = gmrf_log_prior(gamma, design, beta, tau) + log_tau_prior(tau, hyper.tau_shape, hyper.tau_rate)
    value += context.beta_prior.log_prior(beta)
    missing = context.covariates.missing_columns
    if missing and context.policy is MissingPolicy.RANDOM_WALK:
        value += sum(log_random_walk_density(design[:, j], kappa) for j in missing)
        value += log_tau_prior(kappa, hyper.kappa_shape, hyper.kappa_rate)
    return value


def check_caches(state: ChainState, context: ModelContext, tol: float = 1e-8) -> None:
    fresh = ChainState.evaluate(context, state.gamma, state.tau, state.beta, state.design, state.kappa)
    for name in ("log_likelihood", "log_prior"):
        cached, expected = getattr(state, name), getattr(fresh, name)
        if not math.isclose(cached, expected, rel_tol=tol, abs_tol=tol):
            raise NumericalError(f"cached {name} {cached} drifted from its fresh value {expected}")


def _target(context: ModelContext, gamma: np.ndarray, tau: float, design: np.ndarray, beta: np.ndarray) -> float:
    # P(gamma, tau | g, Z, beta) up to a constant
    hyper = context.hyper
    return (
        log_likelihood(context.ss, gamma)
        + gmrf_log_prior(gamma, design, beta, tau)
        + log_tau_prior(tau, hyper.tau_shape, hyper.tau_rate)
    )


def log_acceptance_ratio(
    context: ModelContext,
    state: ChainState,
    gamma_star: np.ndarray,
    tau_star: float,
    forward: GaussianProposal,
    reverse: GaussianProposal,
    log_correction: float,
) -> float:
    """
    log of the Metropolis-Hastings ratio of the joint (gamma, tau) move:

        target(gamma*, tau*) - target(gamma, tau) + log q_rev(gamma) - log q_fwd(gamma*) + log correction
    """
    return (
        _target(context, gamma_star, tau_star, state.design, state.beta)
        - _target(context, state.gamma, state.tau, state.design, state.beta)
        + reverse.log_density(state.gamma)
        - forward.log_density(gamma_star)
        + log_correction
    )


def _approximation(context: ModelContext, state: ChainState, start: np.ndarray, tau: float) -> GaussianProposal:
    mode = newton_raphson_mode(
        start,
        context.ss,
        state.design,
        state.beta,
        tau,
        max_iter=context.newton_max_iter,
        tol=context.newton_tol,
    )
    return gaussian_approx(mode.mode, context.ss, state.design, state.beta, tau)


def block_update(
    state: ChainState, context: ModelContext, rng: np.random.Generator
) -> tuple[ChainState, bool, bool]:
    """
    This function is the joint Metropolis-Hastings move on (gamma, tau). tau* comes from the scale move (or
    equals tau when tau is fixed) and gamma* from the Gaussian approximation at tau* centred on the
    Newton-Raphson mode started at the current gamma. The reverse density is built at tau from a mode search
    started at gamma*.

    :param state: current chain state
    :param context: data and settings
    :param rng: random generator
    :return: the next state, whether the proposal was accepted, and whether it failed numerically
    """
    if context.fix_tau:
        tau_star, log_correction = state.tau, 0.0
    else:
        tau_star, log_correction = propose_tau(state.tau, context.hyper.scale_factor, rng)

    try:
        forward = _approximation(context, state, state.gamma, tau_star)
        gamma_star = forward.sample(rng)
        if not np.all(np.isfinite(gamma_star)):
            raise NumericalError("proposed trajectory is not finite")
        reverse = _approximation(context, state, gamma_star, state.tau)
        log_ratio = log_acceptance_ratio(context, state, gamma_star, tau_star, forward, reverse, log_correction)
    except (NumericalError, FloatingPointError) as e:
        logger.warning("Block proposal rejected after a numerical failure: %s", e)
        return state, False, True

    if math.isnan(log_ratio):
        logger.warning("Block proposal rejected: acceptance ratio is %s", log_ratio)
        return state, False, True

    if math.log(rng.random()) < log_ratio:
        return ChainState.evaluate(context, gamma_star, tau_star, state.beta, state.design, state.kappa), True, False
    return state, False, False


def gibbs_update_beta(state: ChainState, context: ModelContext, rng: np.random.Generator) -> ChainState:
    """Exact draw of beta from its conjugate Gaussian conditional."""
    if context.n_covariates == 0:
        return state
    conditional = beta_full_conditional(state.gamma, state.design, state.tau, context.beta_prior)
    beta = conditional.sample(rng)
    return ChainState.evaluate(context, state.gamma, state.tau, beta, state.design, state.kappa)


def missing_full_conditional(
    j: int, gamma: np.ndarray, design: np.ndarray, beta: np.ndarray, tau: float, kappa: float, observed: np.ndarray
) -> Gaussian:
    """
    The Gaussian conditional of the missing cells of column j given everything else, combining the random
    walk with the GMRF-GLM prior in which they enter through Z beta:

        precision = (kappa + tau beta_j^2) Q_mm
        linear    = -kappa Q_mo z_o + tau beta_j (Q u)_m

    with u = gamma - Z beta after zeroing the missing cells of column j.
    """
    n = gamma.size
    missing = ~observed[:, j]
    q = structure_matrix(n)
    column = design[:, j]
    partial = design.copy()
    partial[missing, j] = 0.0
    u = gamma - linear_predictor(partial, beta, n)

    precision = (kappa + tau * beta[j] ** 2) * q[np.ix_(missing, missing)]
    linear = -kappa * q[np.ix_(missing, ~missing)] @ column[~missing] + tau * beta[j] * (q @ u)[missing]
    return Gaussian.from_canonical(precision, linear)


def _uniform_column_update(
    j: int, state: ChainState, design: np.ndarray, context: ModelContext, rng: np.random.Generator
) -> None:
    # cell by cell: a normal truncated to the plausible range, or the flat range when the cell does not
    # reach gamma
    low, high = context.ranges[j]
    q = GmrfPrecision(context.n_intervals)
    diagonal = np.diag(q.dense)
    for i in context.covariates.missing_rows(j):
        precision = state.tau * state.beta[j] ** 2 * diagonal[i]
        if precision <= 0:
            design[i, j] = rng.uniform(low, high)
            continue
        partial = design.copy()
        partial[i, j] = 0.0
        u = state.gamma - linear_predictor(partial, state.beta, context.n_intervals)
        linear = state.tau * state.beta[j] * q.apply(u)[i]
        mean, sd = linear / precision, 1.0 / math.sqrt(precision)
        design[i, j] = stats.truncnorm.rvs((low - mean) / sd, (high - mean) / sd, loc=mean, scale=sd, random_state=rng)


def update_covariate_model(state: ChainState, context: ModelContext, rng: np.random.Generator) -> ChainState:
    """
    This function redraws every missing covariate cell from its full conditional and then kappa from its
    gamma conditional. Nothing happens when no cell is missing.
    """
    missing = context.covariates.missing_columns
    if not missing:
        return state
    design = np.array(state.design)
    observed = context.covariates.observed

    if context.policy is MissingPolicy.UNIFORM:
        for j in missing:
            _uniform_column_update(j, state, design, context, rng)
        return ChainState.evaluate(context, state.gamma, state.tau, state.beta, design, state.kappa)

    for j in missing:
        conditional = missing_full_conditional(
            j, state.gamma, design, state.beta, state.tau, state.kappa, observed
        )
        design[~observed[:, j], j] = conditional.sample(rng)

    shape, rate = kappa_full_conditional(
        [design[:, j] for j in missing], context.hyper.kappa_shape, context.hyper.kappa_rate
    )
    kappa = rng.gamma(shape, 1.0 / rate)
    return ChainState.evaluate(context, state.gamma, state.tau, state.beta, design, kappa)
