from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from common.errors import ConfigError
from common.log import module_logger
from prior_glm.missing import MissingLayout, MissingPolicy, missing_conditional
from sampler.kernels import (
    ChainState,
    ModelContext,
    block_update,
    check_caches,
    gibbs_update_beta,
    update_covariate_model,
)
from sampler.trace import KERNEL_NAMES, Trace

logger = module_logger(__name__)


@dataclass(frozen=True)
class ChainConfig:
    iterations: int = 1_000_000
    thinning: int = 100
    seed: int | None = None
    kernel_weights: dict[str, int] = field(default_factory=lambda: dict.fromkeys(KERNEL_NAMES, 1))
    initial_tau: float = 1.0
    initial_kappa: float = 1.0
    log_every: int = 10_000
    fingerprint: str = ""

    def validate(self) -> None:
        if self.iterations < 0:
            raise ConfigError(f"iterations must be nonnegative, got {self.iterations}")
        if self.thinning < 1:
            raise ConfigError(f"thinning must be a positive integer, got {self.thinning}")
        unknown = set(self.kernel_weights) - set(KERNEL_NAMES)
        if unknown:
            raise ConfigError(f"unknown kernels {sorted(unknown)}; expected some of {list(KERNEL_NAMES)}")
        if any(w < 0 or int(w) != w for w in self.kernel_weights.values()):
            raise ConfigError("kernel weights must be nonnegative integers")
        if not any(self.kernel_weights.values()):
            raise ConfigError("at least one kernel needs a positive weight")
        if not self.initial_tau > 0 or not self.initial_kappa > 0:
            raise ConfigError("initial tau and kappa must be positive")

    @property
    def schedule(self) -> list[str]:
        """Kernels applied in one iteration, each repeated by its weight."""
        return [name for name in KERNEL_NAMES for _ in range(int(self.kernel_weights.get(name, 0)))]


def resolve_seed(seed: int | None) -> int:
    """The configured seed, or fresh OS entropy that is logged and recorded in place of it."""
    if seed is not None:
        return seed
    entropy = int(np.random.SeedSequence().entropy)
    logger.info("No seed configured; drew entropy %d", entropy)
    return entropy


def initial_imputations(context: ModelContext) -> np.ndarray:
    """Random-walk conditional means, or range midpoints under the uniform policy, in the missing cells."""
    covariates = context.covariates
    design = np.array(covariates.values)
    for j in covariates.missing_columns:
        rows = covariates.missing_rows(j)
        if context.policy is MissingPolicy.UNIFORM:
            low, high = context.ranges[j]
            design[rows, j] = 0.5 * (low + high)
        else:
            design[rows, j] = missing_conditional(covariates.values[:, j], 1.0, MissingLayout.GENERAL).mean
    return design


def initial_state(config: ChainConfig, context: ModelContext) -> ChainState:
    """gamma starts flat at the constant-size maximum likelihood log(sum SS / sum c)."""
    counts, ss = context.ss.counts.sum(), context.ss.ss.sum()
    level = float(np.log(ss / counts)) if counts > 0 and ss > 0 else 0.0
    return ChainState.evaluate(
        context,
        gamma=np.full(context.n_intervals, level),
        tau=config.initial_tau,
        beta=context.beta_prior.prior_mean.copy(),
        design=initial_imputations(context),
        kappa=config.initial_kappa,
    )


def run_chain(config: ChainConfig, context: ModelContext, seed_sequence: np.random.SeedSequence | None = None) -> Trace:
    """
    This function runs one chain. Every iteration applies the kernel schedule once; a sample is kept after
    every thinning-th iteration, so the trace holds floor(iterations / thinning) samples.

    :param config: chain settings
    :param context: data, priors and tuning
    :param seed_sequence: random stream; derived from config.seed when omitted
    :return: the trace
    """
    config.validate()
    if seed_sequence is None:
        config = replace(config, seed=resolve_seed(config.seed))
        seed_sequence = np.random.SeedSequence(config.seed).spawn(1)[0]
    rng = np.random.default_rng(seed_sequence)

    state = initial_state(config, context)
    n_samples = config.iterations // config.thinning
    trace = Trace(
        gamma=np.empty((n_samples, context.n_intervals)),
        tau=np.empty(n_samples),
        beta=np.empty((n_samples, context.n_covariates)),
        kappa=np.empty(n_samples),
        log_posterior=np.empty(n_samples),
        labels=context.covariates.labels,
        initial={
            "gamma": state.gamma.tolist(),
            "tau": state.tau,
            "beta": state.beta.tolist(),
            "kappa": state.kappa,
            "log_posterior": state.log_posterior,
        },
        iterations=config.iterations,
        thinning=config.thinning,
        seed=config.seed,
        fingerprint=config.fingerprint,
    )

    schedule = config.schedule
    kept = 0
    for iteration in range(1, config.iterations + 1):
        for name in schedule:
            trace.attempts[name] += 1
            if name == "block":
                state, accepted, failed = block_update(state, context, rng)
                trace.accepted[name] += int(accepted)
                trace.failures[name] += int(failed)
            elif name == "beta":
                state = gibbs_update_beta(state, context, rng)
                trace.accepted[name] += 1
            else:
                state = update_covariate_model(state, context, rng)
                trace.accepted[name] += 1
            if context.debug:
                check_caches(state, context)

        if iteration % config.thinning == 0:
            trace.gamma[kept] = state.gamma
            trace.tau[kept] = state.tau
            trace.beta[kept] = state.beta
            trace.kappa[kept] = state.kappa
            trace.log_posterior[kept] = state.log_posterior
            kept += 1
        if config.log_every and iteration % config.log_every == 0:
            logger.debug("iteration %d: log posterior %.6g, tau %.4g", iteration, state.log_posterior, state.tau)

    for name, rate in trace.acceptance_rates().items():
        if rate is not None:
            logger.info("%s kernel acceptance rate %.3f (%d failures)", name, rate, trace.failures[name])
    return trace


def run_chains(config: ChainConfig, context: ModelContext, n_chains: int, max_workers: int | None = None) -> list[Trace]:
    """
    Independent chains on SeedSequence substreams of config.seed (drawn and recorded when unset), dispatched to worker processes. The first
    chain is identical to the one run_chain produces with the same seed.
    """
    if n_chains < 1:
        raise ConfigError(f"the number of chains must be positive, got {n_chains}")
    config.validate()
    config = replace(config, seed=resolve_seed(config.seed))
    streams = np.random.SeedSequence(config.seed).spawn(n_chains)
    if n_chains == 1:
        return [run_chain(config, context, streams[0])]
    with ProcessPoolExecutor(max_workers=max_workers) as executor:
        futures = [executor.submit(run_chain, config, context, stream) for stream in streams]
        return [future.result() for future in futures]
