import configparser
import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Callable

from common.errors import ConfigError
from genealogy.tree import DateConvention
from prior_glm.covariates import Transform
from prior_glm.missing import MissingLayout, MissingPolicy
from sampler.trace import KERNEL_NAMES

"""
INI run configuration. Every section and key below is the complete schema; anything else is rejected. Paths
are resolved against the directory of the config file.

[run]        seed, chains, log_level, debug
[input]      trees, tip_dates, date_convention, date_delimiter, anchor_date, covariates, covariate_layout,
             transforms
[grid]       mode (even | covariates | points), m, cutoff, points
[prior]      tau_shape, tau_rate, kappa_shape, kappa_rate, scale_factor, beta_variance, standardize, intercept
[mcmc]       iterations, thinning, kernel_weights, fix_tau, initial_tau, initial_kappa, newton_tol,
             newton_max_iter, log_every
[missing]    policy (random_walk | uniform), layout (general | trailing), ranges
[simulation] replicates, loci, sampling_times, tip_counts, n_covariates, beta, tau, log_size, gamma
[output]     directory, plot_horizon
"""


def _list(text: str) -> list[str]:
    return [item.strip() for item in text.split(",") if item.strip()]


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(item) for item in _list(text))


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(item) for item in _list(text))


def _pairs(text: str) -> dict[str, str]:
    pairs: dict[str, str] = {}
    for item in _list(text):
        key, sep, value = item.partition(":")
        if not sep:
            raise ValueError(f"'{item}' is not a name:value pair")
        pairs[key.strip()] = value.strip()
    return pairs


def _bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"'{text}' is not a boolean")


def _optional_float(text: str) -> float | None:
    return None if not text.strip() else float(text)


@dataclass(frozen=True)
class RunSettings:
    seed: int | None = None
    chains: int = 1
    log_level: str = "INFO"
    debug: bool = False


@dataclass(frozen=True)
class InputSettings:
    trees: tuple[str, ...] = ()
    tip_dates: str | None = None
    date_convention: str = DateConvention.BACKWARD.value
    date_delimiter: str | None = None
    anchor_date: float | None = None
    covariates: str | None = None
    covariate_layout: str = "intervals"
    transforms: dict[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class GridSettings:
    mode: str = "even"
    m: int = 10
    cutoff: float | None = None
    points: tuple[float, ...] = ()


@dataclass(frozen=True)
class PriorSettings:
    tau_shape: float = 0.001
    tau_rate: float = 0.001
    kappa_shape: float = 0.001
    kappa_rate: float = 0.001
    scale_factor: float = 1.5
    beta_variance: float = 100.0
    standardize: bool = False
    intercept: bool = False


@dataclass(frozen=True)
class McmcSettings:
    iterations: int = 1_000_000
    thinning: int = 100
    kernel_weights: dict[str, int] = field(default_factory=lambda: dict.fromkeys(KERNEL_NAMES, 1))
    fix_tau: bool = False
    initial_tau: float = 1.0
    initial_kappa: float = 1.0
    newton_tol: float = 1e-8
    newton_max_iter: int = 25
    log_every: int = 10_000


@dataclass(frozen=True)
class MissingSettings:
    policy: str = MissingPolicy.RANDOM_WALK.value
    layout: str = MissingLayout.GENERAL.value
    ranges: dict[str, tuple[float, float]] = field(default_factory=dict)


@dataclass(frozen=True)
class SimulationSettings:
    replicates: int = 1
    loci: int = 1
    sampling_times: tuple[float, ...] = (0.0,)
    tip_counts: tuple[int, ...] = (10,)
    n_covariates: int = 0
    beta: tuple[float, ...] = ()
    tau: float = 1.0
    log_size: float = 0.0
    gamma: tuple[float, ...] = ()


@dataclass(frozen=True)
class OutputSettings:
    directory: str = "out"
    plot_horizon: float | None = None


@dataclass(frozen=True)
class RunConfig:
    run: RunSettings = field(default_factory=RunSettings)
    input: InputSettings = field(default_factory=InputSettings)
    grid: GridSettings = field(default_factory=GridSettings)
    prior: PriorSettings = field(default_factory=PriorSettings)
    mcmc: McmcSettings = field(default_factory=McmcSettings)
    missing: MissingSettings = field(default_factory=MissingSettings)
    simulation: SimulationSettings = field(default_factory=SimulationSettings)
    output: OutputSettings = field(default_factory=OutputSettings)
    base_dir: str = "."

    def resolve(self, path: str | None) -> Path | None:
        if path is None:
            return None
        candidate = Path(path)
        return candidate if candidate.is_absolute() else Path(self.base_dir) / candidate

    @property
    def output_dir(self) -> Path:
        return self.resolve(self.output.directory)

    def fingerprint(self) -> str:
        """SHA-256 of the canonical JSON of every setting except where the config and the outputs live."""
        settings = asdict(self)
        settings.pop("base_dir")
        settings["output"].pop("directory")
        canonical = json.dumps(settings, sort_keys=True, separators=(",", ":"), default=str)
        return hashlib.sha256(canonical.encode()).hexdigest()

    def with_overrides(self, seed: int | None = None, out: str | None = None) -> "RunConfig":
        config = self
        if seed is not None:
            config = replace(config, run=replace(config.run, seed=seed))
        if out is not None:
            config = replace(config, output=replace(config.output, directory=str(Path(out).absolute())))
        return config

    def validate(self) -> None:
        """
        This function checks every cross-field constraint before any computation runs.

        :raises ConfigError: on the first violated constraint
        """
        run, grid, prior, mcmc, sim = self.run, self.grid, self.prior, self.mcmc, self.simulation
        if run.chains < 1:
            raise ConfigError(f"[run] chains must be positive, got {run.chains}")
        if run.log_level.upper() not in ("DEBUG", "INFO", "WARNING", "ERROR"):
            raise ConfigError(f"[run] log_level '{run.log_level}' is not a logging level")
        if self.input.date_convention not in {c.value for c in DateConvention}:
            raise ConfigError(f"[input] date_convention must be one of {[c.value for c in DateConvention]}")
        if self.input.covariate_layout not in ("points", "intervals"):
            raise ConfigError("[input] covariate_layout must be 'points' or 'intervals'")
        for label, name in self.input.transforms.items():
            try:
                Transform.parse(name)
            except ValueError as e:
                raise ConfigError(f"[input] transforms: {e}") from e
        if grid.mode not in ("even", "covariates", "points"):
            raise ConfigError("[grid] mode must be 'even', 'covariates' or 'points'")
        if grid.mode == "even" and grid.m < 1:
            raise ConfigError(f"[grid] m must be positive, got {grid.m}")
        if grid.mode == "even" and grid.cutoff is not None and not grid.cutoff > 0:
            raise ConfigError(f"[grid] cutoff must be positive, got {grid.cutoff}")
        if grid.mode == "points" and not grid.points:
            raise ConfigError("[grid] mode = points needs a points list")
        for name in ("tau_shape", "tau_rate", "kappa_shape", "kappa_rate", "beta_variance"):
            if not getattr(prior, name) > 0:
                raise ConfigError(f"[prior] {name} must be strictly positive")
        if not prior.scale_factor > 1:
            raise ConfigError(f"[prior] scale_factor must exceed 1, got {prior.scale_factor}")
        if mcmc.iterations < 0 or mcmc.thinning < 1:
            raise ConfigError("[mcmc] iterations must be nonnegative and thinning positive")
        unknown = set(mcmc.kernel_weights) - set(KERNEL_NAMES)
        if unknown or any(w < 0 for w in mcmc.kernel_weights.values()) or not any(mcmc.kernel_weights.values()):
            raise ConfigError(f"[mcmc] kernel_weights takes nonnegative integers for {list(KERNEL_NAMES)}")
        if not mcmc.initial_tau > 0 or not mcmc.initial_kappa > 0:
            raise ConfigError("[mcmc] initial_tau and initial_kappa must be positive")
        if not mcmc.newton_tol > 0 or mcmc.newton_max_iter < 1:
            raise ConfigError("[mcmc] newton_tol must be positive and newton_max_iter at least 1")
        if self.missing.policy not in {p.value for p in MissingPolicy}:
            raise ConfigError(f"[missing] policy must be one of {[p.value for p in MissingPolicy]}")
        if self.missing.layout not in {layout.value for layout in MissingLayout}:
            raise ConfigError(f"[missing] layout must be one of {[layout.value for layout in MissingLayout]}")
        for label, (low, high) in self.missing.ranges.items():
            if not low < high:
                raise ConfigError(f"[missing] range of '{label}' is empty: {low} to {high}")
        if sim.replicates < 1 or sim.loci < 1:
            raise ConfigError("[simulation] replicates and loci must be positive")
        if len(sim.sampling_times) != len(sim.tip_counts) or sum(sim.tip_counts) < 2:
            raise ConfigError("[simulation] needs one tip count per sampling time and at least 2 tips")
        if sim.n_covariates and len(sim.beta) != sim.n_covariates:
            raise ConfigError(f"[simulation] beta needs {sim.n_covariates} values, got {len(sim.beta)}")
        if not sim.tau > 0:
            raise ConfigError(f"[simulation] tau must be positive, got {sim.tau}")


def _ranges(text: str) -> dict[str, tuple[float, float]]:
    ranges: dict[str, tuple[float, float]] = {}
    for item in _list(text):
        parts = item.split(":")
        if len(parts) != 3:
            raise ValueError(f"'{item}' is not a label:low:high triple")
        ranges[parts[0].strip()] = (float(parts[1]), float(parts[2]))
    return ranges


def _tau(text: str) -> float:
    return math.inf if text.strip().lower() in ("inf", "infinity") else float(text)


_SECTIONS: dict[str, tuple[type, dict[str, Callable[[str], Any]]]] = {
    "run": (RunSettings, {"seed": int, "chains": int, "log_level": str.strip, "debug": _bool}),
    "input": (
        InputSettings,
        {
            "trees": lambda text: tuple(_list(text)),
            "tip_dates": str.strip,
            "date_convention": lambda text: text.strip().lower(),
            "date_delimiter": str.strip,
            "anchor_date": float,
            "covariates": str.strip,
            "covariate_layout": lambda text: text.strip().lower(),
            "transforms": _pairs,
        },
    ),
    "grid": (GridSettings, {"mode": lambda text: text.strip().lower(), "m": int, "cutoff": float, "points": _floats}),
    "prior": (
        PriorSettings,
        {
            "tau_shape": float,
            "tau_rate": float,
            "kappa_shape": float,
            "kappa_rate": float,
            "scale_factor": float,
            "beta_variance": float,
            "standardize": _bool,
            "intercept": _bool,
        },
    ),
    "mcmc": (
        McmcSettings,
        {
            "iterations": int,
            "thinning": int,
            "kernel_weights": lambda text: {k: int(v) for k, v in _pairs(text).items()},
            "fix_tau": _bool,
            "initial_tau": float,
            "initial_kappa": float,
            "newton_tol": float,
            "newton_max_iter": int,
            "log_every": int,
        },
    ),
    "missing": (
        MissingSettings,
        {"policy": lambda text: text.strip().lower(), "layout": lambda text: text.strip().lower(), "ranges": _ranges},
    ),
    "simulation": (
        SimulationSettings,
        {
            "replicates": int,
            "loci": int,
            "sampling_times": _floats,
            "tip_counts": _ints,
            "n_covariates": int,
            "beta": _floats,
            "tau": _tau,
            "log_size": float,
            "gamma": _floats,
        },
    ),
    "output": (OutputSettings, {"directory": str.strip, "plot_horizon": _optional_float}),
}


def parse_config(text: str, base_dir: str | Path = ".") -> RunConfig:
    """
    This function parses and validates INI text.

    :param text: the INI document
    :param base_dir: directory relative paths are resolved against
    :return: the validated configuration
    """
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as e:
        raise ConfigError(f"malformed config: {e}") from e

    unknown_sections = set(parser.sections()) - set(_SECTIONS)
    if unknown_sections:
        raise ConfigError(f"unknown config sections {sorted(unknown_sections)}")

    sections: dict[str, Any] = {}
    for name, (settings_type, schema) in _SECTIONS.items():
        values: dict[str, Any] = {}
        if parser.has_section(name):
            for key, raw in parser.items(name):
                if key not in schema:
                    raise ConfigError(f"unknown key '{key}' in [{name}]")
                try:
                    values[key] = schema[key](raw)
                except ValueError as e:
                    raise ConfigError(f"[{name}] {key} = {raw!r}: {e}") from e
        sections[name] = settings_type(**values)

    config = RunConfig(**sections, base_dir=str(base_dir))
    config.validate()
    return config


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    return parse_config(text, base_dir=path.parent)


def render_config(sections: dict[str, dict[str, Any]]) -> str:
    """INI text for section/key values; sequences are joined by commas and mappings written as name:value."""
    lines: list[str] = []
    for name, values in sections.items():
        lines.append(f"[{name}]")
        for key, value in values.items():
            if value is None:
                continue
            if isinstance(value, dict):
                value = ", ".join(f"{k}:{v}" for k, v in value.items())
            elif isinstance(value, (list, tuple)):
                value = ", ".join(repr(v) if isinstance(v, float) else str(v) for v in value)
            elif isinstance(value, float):
                value = repr(value)
            lines.append(f"{key} = {value}")
        lines.append("")
    return "\n".join(lines)
