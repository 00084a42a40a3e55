import argparse
import sys
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import pandas as pd

from coalescent.grid import GridSpec, Trajectory
from coalescent.likelihood import SufficientStatistics, compute_sufficient_statistics
from command_line.config import RunConfig, load_config, render_config
from common.errors import ConfigError, exit_code_for
from common.log import get_logger, module_logger
from data_manipulation import fetch, persist, transform
from genealogy.timeline import event_timeline
from genealogy.tree import DateConvention, Genealogy, embedded_dates, emit_newick, parse_genealogy
from prior_glm.coefficients import HyperParams
from prior_glm.covariates import CovariateMatrix
from sampler.chain import ChainConfig, resolve_seed, run_chains
from sampler.kernels import ModelContext
from sampler.trace import Trace, merge_traces
from simulator.genealogies import simulate_genealogy
from simulator.trajectories import SimulationPlan, simulate_trajectory_and_covariates

logger = module_logger(__name__)


def _guarded(action: Callable[[], None], out_dir: Path | None) -> int:
    """Run one subcommand, turning an escaped exception into its exit code and an error.json record."""
    try:
        action()
    except Exception as e:
        logger.error("%s: %s", type(e).__name__, e)
        if out_dir is not None:
            try:
                persist.write_error(e, out_dir)
            except OSError as io_error:
                logger.error("could not write the error record: %s", io_error)
        return exit_code_for(e)
    return 0


# ingestion


def shared_anchor(trees: Sequence[tuple[str, str]], dates: dict[str, float] | None, config: RunConfig) -> float | None:
    """
    The reference date every locus is measured from: the configured anchor_date, else the earliest backward
    offset or the latest calendar date over all tips of all loci.
    """
    if config.input.anchor_date is not None:
        return config.input.anchor_date
    found: list[float] = list(dates.values()) if dates else []
    if config.input.date_delimiter:
        for _, text in trees:
            found.extend(embedded_dates(text, config.input.date_delimiter).values())
    if not found:
        return None
    if config.input.date_convention == DateConvention.BACKWARD.value:
        return min(found)
    return max(found)


def load_genealogies(config: RunConfig) -> tuple[list[Genealogy], float | None]:
    """Every configured locus dated against one shared anchor, together with that anchor."""
    if not config.input.trees:
        raise ConfigError("[input] trees must name at least one Newick file")
    trees: list[tuple[str, str]] = []
    for path in config.input.trees:
        trees.extend(fetch.read_trees(config.resolve(path)))
    dates = fetch.read_tip_dates(config.resolve(config.input.tip_dates)) if config.input.tip_dates else None
    anchor = shared_anchor(trees, dates, config)
    genealogies = [
        parse_genealogy(
            text,
            dates=dates,
            date_convention=config.input.date_convention,
            delimiter=config.input.date_delimiter,
            anchor=anchor,
            locus=locus,
        )
        for locus, text in trees
    ]
    return genealogies, anchor


def load_covariates(config: RunConfig) -> CovariateMatrix | None:
    if not config.input.covariates:
        return None
    times, raw, labels = fetch.read_covariates(config.resolve(config.input.covariates))
    return CovariateMatrix.from_raw(
        raw,
        labels,
        transforms=config.input.transforms,
        times=times,
        standardize=config.prior.standardize,
        intercept=config.prior.intercept,
    )


def build_grid(config: RunConfig, genealogies: Sequence[Genealogy], covariates: CovariateMatrix | None) -> GridSpec:
    mode = config.grid.mode
    if mode == "points":
        return GridSpec(config.grid.points)
    if mode == "covariates":
        if covariates is None:
            raise ConfigError("[grid] mode = covariates needs an [input] covariates file")
        return covariates.aligned_grid(config.input.covariate_layout)
    cutoff = config.grid.cutoff
    if cutoff is None:
        cutoff = max(g.t_mrca for g in genealogies)
    return GridSpec.even(config.grid.m, cutoff)


def _missing_ranges(config: RunConfig, covariates: CovariateMatrix) -> dict[int, tuple[float, float]]:
    ranges: dict[int, tuple[float, float]] = {}
    for label, bounds in config.missing.ranges.items():
        if label not in covariates.labels:
            raise ConfigError(f"[missing] ranges names unknown covariate '{label}'")
        ranges[covariates.labels.index(label)] = bounds
    return ranges


# infer


def _infer(config: RunConfig) -> None:
    out = persist.ensure_directory(config.output_dir)

    genealogies, anchor = load_genealogies(config)
    logger.info("Successfully parsed %d genealogies", len(genealogies))

    covariates = load_covariates(config)
    grid = build_grid(config, genealogies, covariates)
    if covariates is None and config.prior.intercept:
        covariates = CovariateMatrix(values=np.ones((grid.n_intervals, 1)), labels=("intercept",))
    ss: SufficientStatistics = compute_sufficient_statistics([event_timeline(g) for g in genealogies], grid)
    logger.info("Successfully reduced genealogies to %d grid intervals", grid.n_intervals)

    prior = config.prior
    context = ModelContext.build(
        ss,
        covariates,
        hyper=HyperParams(prior.tau_shape, prior.tau_rate, prior.kappa_shape, prior.kappa_rate, prior.scale_factor),
        beta_variance=prior.beta_variance,
        policy=config.missing.policy,
        layout=config.missing.layout,
        ranges=_missing_ranges(config, covariates) if covariates is not None else None,
        fix_tau=config.mcmc.fix_tau,
        newton_tol=config.mcmc.newton_tol,
        newton_max_iter=config.mcmc.newton_max_iter,
        debug=config.run.debug,
    )
    mcmc = config.mcmc
    seed = resolve_seed(config.run.seed)
    chain_config = ChainConfig(
        iterations=mcmc.iterations,
        thinning=mcmc.thinning,
        seed=seed,
        kernel_weights=dict(mcmc.kernel_weights),
        initial_tau=mcmc.initial_tau,
        initial_kappa=mcmc.initial_kappa,
        log_every=mcmc.log_every,
        fingerprint=config.fingerprint(),
    )
    traces = run_chains(chain_config, context, config.run.chains)
    logger.info("Successfully ran %d chains of %d iterations", len(traces), mcmc.iterations)

    chain_manifests: list[dict] = []
    for i, trace in enumerate(traces, start=1):
        name = f"trace_chain{i}.csv"
        persist.write_frame(trace.to_frame(), out / name)
        chain_manifests.append(trace.manifest(file=name, chain=i))
    merged = merge_traces(traces)
    if config.input.date_convention != DateConvention.CALENDAR.value:
        anchor = None
    persist.write_json(
        {
            "command": "infer",
            "seed": seed,
            "seed_configured": config.run.seed is not None,
            "fingerprint": chain_config.fingerprint,
            "grid_points": list(grid.points),
            "loci": list(ss.loci),
            "covariates": list(context.covariates.labels),
            "calendar_anchor": anchor,
            "acceptance_rates": merged.acceptance_rates(),
            "failures": merged.failures,
            "chain_manifests": chain_manifests,
        },
        out / "manifest.json",
    )
    _write_summaries(merged, traces, list(grid.points), anchor, context.covariates, config, out)
    logger.info("Successfully wrote inference artifacts to %s", out)


def _write_summaries(
    merged: Trace,
    traces: Sequence[Trace],
    grid_points: list[float] | None,
    anchor: float | None,
    covariates: CovariateMatrix | None,
    config: RunConfig,
    out: Path,
) -> None:
    persist.write_frame(transform.effect_sizes(merged), out / "effect_sizes.csv")
    if merged.n_samples == 0:
        logger.warning("No samples were retained; only the effect size header is written")
        return
    summary = transform.summarize_trajectory(merged, grid_points, anchor)
    persist.write_frame(summary, out / "trajectory_summary.csv")
    persist.write_frame(transform.scalar_summary(merged), out / "parameter_summary.csv")
    persist.write_frame(transform.diagnostics(traces), out / "diagnostics.csv")
    if grid_points is not None:
        overlay = None
        if covariates is not None and covariates.n_columns:
            overlay = pd.DataFrame(np.array(covariates.values), columns=list(covariates.labels))
        data = transform.plot_data(summary, overlay, horizon=config.output.plot_horizon)
        persist.write_frame(data, out / "plot_data.csv")


def cmd_infer(config: RunConfig) -> int:
    """
    This function runs posterior inference from the configured genealogies and covariates and writes the
    trace CSVs, manifest.json, trajectory_summary.csv, effect_sizes.csv, parameter_summary.csv,
    diagnostics.csv and plot_data.csv into the output directory.

    :param config: a validated run configuration
    :return: the exit status
    """
    return _guarded(lambda: _infer(config), config.output_dir)


# simulate


def _simulation_grid(config: RunConfig) -> GridSpec:
    if config.grid.mode == "points":
        return GridSpec(config.grid.points)
    if config.grid.mode == "even":
        if config.grid.cutoff is None:
            raise ConfigError("[grid] simulation needs an explicit cutoff")
        return GridSpec.even(config.grid.m, config.grid.cutoff)
    raise ConfigError("[grid] simulation needs mode = even or mode = points")


def _simulate(config: RunConfig) -> None:
    config = config.with_overrides(seed=resolve_seed(config.run.seed))
    out = persist.ensure_directory(config.output_dir)
    sim = config.simulation
    grid = _simulation_grid(config)
    streams = np.random.SeedSequence(config.run.seed).spawn(sim.replicates)

    for r, stream in enumerate(streams, start=1):
        rng = np.random.default_rng(stream)
        directory = persist.ensure_directory(out / f"replicate_{r:03d}")
        covariates: CovariateMatrix | None = None
        if sim.n_covariates:
            trajectory, covariates = simulate_trajectory_and_covariates(grid, sim.n_covariates, sim.beta, sim.tau, rng)
        elif sim.gamma:
            trajectory = Trajectory(sim.gamma)
        else:
            trajectory = Trajectory(np.full(grid.n_intervals, sim.log_size))
        plan = SimulationPlan(
            sampling_times=sim.sampling_times,
            tip_counts=sim.tip_counts,
            grid=grid,
            trajectory=trajectory,
            replicates=sim.replicates,
            seed=config.run.seed,
        )

        tree_files: list[str] = []
        dates: dict[str, float] = {}
        for i in range(1, sim.loci + 1):
            genealogy = simulate_genealogy(plan, rng, locus=f"locus{i}")
            name = f"locus{i}.nwk"
            persist.write_newick([emit_newick(genealogy)], directory / name)
            tree_files.append(name)
            dates.update(genealogy.tip_dates())
        persist.write_tip_dates(dates, directory / "tip_dates.tsv")
        if covariates is not None:
            persist.write_covariates(covariates.times, covariates.values, covariates.labels, directory / "covariates.csv")

        persist.write_json(
            {
                "replicate": r,
                "seed": config.run.seed,
                "grid_points": list(grid.points),
                "gamma": trajectory.log_sizes.tolist(),
                "beta": list(sim.beta) if covariates is not None else [],
                "tau": sim.tau,
                "covariates": list(covariates.labels) if covariates is not None else [],
            },
            directory / "truth.json",
        )
        (directory / "infer.ini").write_text(_inference_config(config, grid, tree_files, covariates is not None))
        logger.info("Successfully simulated replicate %d with %d loci", r, sim.loci)


def _inference_config(config: RunConfig, grid: GridSpec, tree_files: list[str], with_covariates: bool) -> str:
    """An infer config that reads a replicate directory as it stands."""
    prior, mcmc = config.prior, config.mcmc
    return render_config(
        {
            "run": {"seed": config.run.seed, "chains": config.run.chains, "log_level": config.run.log_level},
            "input": {
                "trees": tree_files,
                "tip_dates": "tip_dates.tsv",
                "date_convention": DateConvention.BACKWARD.value,
                "anchor_date": 0.0,
                "covariates": "covariates.csv" if with_covariates else None,
                "covariate_layout": "intervals",
            },
            "grid": {"mode": "points", "points": list(grid.points)},
            "prior": {
                "tau_shape": prior.tau_shape,
                "tau_rate": prior.tau_rate,
                "kappa_shape": prior.kappa_shape,
                "kappa_rate": prior.kappa_rate,
                "scale_factor": prior.scale_factor,
                "beta_variance": prior.beta_variance,
            },
            "mcmc": {
                "iterations": mcmc.iterations,
                "thinning": mcmc.thinning,
                "kernel_weights": mcmc.kernel_weights,
                "fix_tau": mcmc.fix_tau,
                "log_every": mcmc.log_every,
            },
            "output": {"directory": "inference"},
        }
    )


def cmd_simulate(config: RunConfig) -> int:
    """
    This function simulates replicate data sets: per replicate a directory with one Newick file per locus,
    tip_dates.tsv, covariates.csv when covariates are simulated, truth.json and an infer.ini that cmd_infer
    accepts unchanged.

    :param config: a validated run configuration
    :return: the exit status
    """
    return _guarded(lambda: _simulate(config), config.output_dir)


# summarize


def _summarize(config: RunConfig, trace_paths: Sequence[str]) -> None:
    out = persist.ensure_directory(config.output_dir)
    paths = [Path(p) for p in trace_paths] or sorted(out.glob("trace_chain*.csv"))
    if not paths:
        raise ConfigError("summarize needs at least one trace file")
    traces = [fetch.read_trace(path) for path in paths]
    merged = merge_traces(traces)
    logger.info("Successfully merged %d traces with %d samples", len(traces), merged.n_samples)

    grid_points: list[float] | None = None
    anchor: float | None = None
    sibling = paths[0].parent / "manifest.json"
    if sibling.exists():
        manifest = fetch.read_manifest(sibling)
        grid_points = manifest.get("grid_points")
        anchor = manifest.get("calendar_anchor")
    covariates = None
    if config.input.covariates and grid_points is not None:
        loaded = load_covariates(config)
        if loaded is not None and loaded.n_rows == len(grid_points) + 1:
            covariates = loaded
    _write_summaries(merged, traces, grid_points, anchor, covariates, config, out)
    logger.info("Successfully wrote summaries to %s", out)


def cmd_summarize(config: RunConfig, trace_paths: Sequence[str] = ()) -> int:
    """
    This function merges traces (by default every trace_chain*.csv in the output directory) and writes the
    posterior summaries, convergence diagnostics and plot data.

    :param config: a validated run configuration
    :param trace_paths: trace CSV files, one per chain
    :return: the exit status
    """
    return _guarded(lambda: _summarize(config, trace_paths), config.output_dir)


# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="skygrid", description="Covariate-informed Skygrid inference of effective population size"
    )
    subcommands = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("infer", "sample the posterior of the trajectory and effect sizes"),
        ("simulate", "simulate genealogies, covariates and truth files"),
        ("summarize", "merge traces and write summaries and diagnostics"),
    ):
        sub = subcommands.add_parser(name, help=help_text)
        sub.add_argument("--config", required=True, help="INI run configuration")
        sub.add_argument("--seed", type=int, default=None, help="override [run] seed")
        sub.add_argument("--out", default=None, help="override [output] directory")
        if name == "summarize":
            sub.add_argument("traces", nargs="*", help="trace CSV files, one per chain")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    """
    This function parses the command line, loads the config and dispatches the subcommand.

    :param argv: arguments without the program name
    :return: 0 on success, 2 config error, 3 data error, 4 numerical failure
    """
    args = build_parser().parse_args(argv)
    console = get_logger()
    try:
        config = load_config(args.config).with_overrides(seed=args.seed, out=args.out)
    except ConfigError as e:
        console.error("%s", e)
        if args.out:
            persist.write_error(e, args.out)
        return e.exit_code
    get_logger(level=config.run.log_level.upper())

    if args.command == "infer":
        return cmd_infer(config)
    if args.command == "simulate":
        return cmd_simulate(config)
    return cmd_summarize(config, args.traces)


def cli() -> None:
    sys.exit(main())
