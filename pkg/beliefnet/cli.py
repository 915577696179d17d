"""
Command-line surface: classify, simulate, sweep, bound, presets, network.

Exit codes: 0 success, 1 runtime failure, 2 usage or config error,
3 hypothesis violation (an analytic bound requested outside its hypothesis).
"""

import logging
import time
from dataclasses import replace
from pathlib import Path
from typing import Any, Dict, List, Optional

import click
import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict
from pydantic import ValidationError as PydanticValidationError
from rich.console import Console
from rich.table import Table

from beliefnet import __version__
from beliefnet.classify import classify_structure, describe_structure, k_g
from beliefnet.config import SimulationSettings, load_settings
from beliefnet.core import AgentType, WorldSignalStructure, make_binary_structure
from beliefnet.dynamics import NETWORK_STREAM, derive_seed
from beliefnet.errors import BeliefNetError, ConfigError, HypothesisViolation
from beliefnet.harness import (
    ExperimentConfig,
    ReplicateSummary,
    build_specs,
    preset,
    preset_names,
    regions,
    run_replicate,
    run_replicate_outcomes,
    speed_sweep,
)
from beliefnet.metrics import learning_rate_bound
from beliefnet.output_manager import OutputManager
from beliefnet.topology import generate_er, left_unit_eigenvector, uniform_influence

logger = logging.getLogger(__name__)

console = Console(highlight=False)
err_console = Console(stderr=True, highlight=False)

OPEN_UNIT = click.FloatRange(0.0, 1.0, min_open=True, max_open=True)


class RunManifest(BaseModel):
    """Index of one command invocation and the files it produced."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    tool_version: str
    command: str
    config: Optional[Dict[str, Any]] = None
    master_seed: Optional[int] = None
    files: List[str]
    duration_seconds: float
    invariant_counters: Dict[str, float] = {}


class BeliefNetGroup(click.Group):
    """Maps beliefnet exceptions onto the exit-code contract."""

    def invoke(self, ctx: click.Context):
        try:
            return super().invoke(ctx)
        except HypothesisViolation as e:
            err_console.print(f"[red]Hypothesis violation:[/red] {e}")
            _print_classification_rows(e.rows)
            ctx.exit(3)
        except ConfigError as e:
            logger.error(f"Configuration error: {e}")
            err_console.print(f"[red]Configuration error:[/red] {e}")
            ctx.exit(2)
        except BeliefNetError as e:
            logger.error(f"Run failed: {e}")
            err_console.print(f"[red]Error:[/red] {e}")
            ctx.exit(1)


def _print_classification_rows(rows: List[dict]) -> None:
    if not rows:
        return
    table = Table(title="Non-conservative agents")
    for column in rows[0]:
        table.add_column(str(column))
    for row in rows:
        table.add_row(*(f"{value:.4f}" if isinstance(value, float) else str(value) for value in row.values()))
    err_console.print(table)


@click.group(cls=BeliefNetGroup)
@click.option("--verbose", is_flag=True, help="Log at DEBUG level.")
@click.version_option(__version__, prog_name="beliefnet")
@click.pass_context
def main(ctx: click.Context, verbose: bool):
    """Non-Bayesian social learning with imperfect private signal structures."""
    settings = load_settings()
    logging.basicConfig(
        level=logging.DEBUG if verbose else getattr(logging, settings.log_level, logging.INFO),
        format="%(asctime)s - %(levelname)s - %(message)s",
    )
    ctx.obj = settings


def _load_config(config_path: Optional[str], preset_name: Optional[str]) -> ExperimentConfig:
    if bool(config_path) == bool(preset_name):
        raise ConfigError("give exactly one of --config or --preset")
    if preset_name:
        return preset(preset_name)
    path = Path(config_path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    return ExperimentConfig.from_json(path.read_text(encoding="utf-8"))


def _override(config: ExperimentConfig, **updates) -> ExperimentConfig:
    updates = {key: value for key, value in updates.items() if value is not None}
    if not updates:
        return config
    try:
        return ExperimentConfig.model_validate({**config.model_dump(), **updates})
    except PydanticValidationError as e:
        raise ConfigError(f"invalid override: {e}") from e


def _resolve_seed(flag_seed: Optional[int], settings: SimulationSettings, default: int) -> int:
    if flag_seed is not None:
        return flag_seed
    if settings.seed is not None:
        return settings.seed
    return default


def _write_manifest(
    output: OutputManager,
    command: str,
    started: float,
    timing: bool,
    config: Optional[ExperimentConfig] = None,
    counters: Optional[Dict[str, float]] = None,
) -> None:
    files = [path.name for path in output.written]
    manifest = RunManifest(
        tool_version=__version__,
        command=command,
        config=config.model_dump(mode="json") if config is not None else None,
        master_seed=config.master_seed if config is not None else None,
        files=files,
        duration_seconds=round(time.perf_counter() - started, 6) if timing else 0.0,
        invariant_counters=counters or {},
    )
    output.write_json("manifest.json", manifest)


@main.command("classify")
@click.option("--alpha", type=OPEN_UNIT, required=True, help="P(high signal | first state).")
@click.option("--beta", type=OPEN_UNIT, required=True, help="P(high signal | second state).")
@click.option("--g", "g_high", type=OPEN_UNIT, required=True, help="World probability of the high signal.")
@click.pass_obj
def cmd_classify(settings: SimulationSettings, alpha: float, beta: float, g_high: float):
    """Print h, k and the agent type of a binary structure."""
    g = WorldSignalStructure.binary(g_high)
    L = make_binary_structure(alpha, beta)
    report = describe_structure(g, L, 0, settings.classify_tol)
    console.print(f"h={report.h[1]:.4f} k={report.k[1]:.4f} {report.agent_type.value}")
    if report.perfect:
        console.print("perfect structure: the real-state column equals g")
    if report.learned_state != 0:
        console.print(f"an isolated agent settles on state {report.learned_state + 1}")


@main.command("simulate")
@click.option("--config", "config_path", type=str, default=None, help="JSON experiment config.")
@click.option("--preset", "preset_name", type=str, default=None, help="Named scenario, see `presets`.")
@click.option("--seed", type=click.IntRange(min=0), default=None, help="Master seed (overrides config and BELIEFNET_SEED).")
@click.option("--replicates", type=click.IntRange(min=1), default=None)
@click.option("--steps", type=click.IntRange(min=0), default=None)
@click.option("--workers", type=click.IntRange(min=1), default=None, help="Replicate processes.")
@click.option("-o", "--output", "output_dir", type=click.Path(file_okay=False), default="out", show_default=True)
@click.option("--no-timing", is_flag=True, help="Write a zero duration so the manifest is byte-reproducible.")
@click.pass_obj
def cmd_simulate(
    settings: SimulationSettings,
    config_path: Optional[str],
    preset_name: Optional[str],
    seed: Optional[int],
    replicates: Optional[int],
    steps: Optional[int],
    workers: Optional[int],
    output_dir: str,
    no_timing: bool,
):
    """Run replicates of a networked scenario and write trajectory, metrics, summary and manifest."""
    started = time.perf_counter()
    config = _load_config(config_path, preset_name)
    if config.kind != "simulation":
        raise ConfigError(f"scenario {config.scenario!r} is a {config.kind} experiment; use `sweep`")
    config = _override(
        config,
        master_seed=_resolve_seed(seed, settings, config.master_seed),
        replicates=replicates,
        steps=steps,
    )
    if workers is not None:
        settings = replace(settings, workers=workers)

    outcomes = run_replicate_outcomes(config, settings)
    summary = ReplicateSummary.from_rows(config.scenario, config.config_hash(), [o.row for o in outcomes])

    trajectories = pd.concat(
        [o.trajectory.to_frame().assign(replicate=o.row.replicate) for o in outcomes], ignore_index=True
    )
    metrics = pd.concat([o.series.to_frame().assign(replicate=o.row.replicate) for o in outcomes], ignore_index=True)
    output = OutputManager(output_dir)
    output.write_csv("trajectory.csv", trajectories[["replicate", "t", "agent", "state_index", "belief"]])
    output.write_csv(
        "metrics.csv",
        metrics[["replicate", "t", "e_t", "consensus_gap", "mean_truth_belief", "min_truth_belief"]],
    )
    output.write_json("summary.json", summary)
    counters = {
        "clamp_count": float(sum(o.row.clamp_count for o in outcomes)),
        "max_normalization_drift": max(o.row.max_normalization_drift for o in outcomes),
    }
    _write_manifest(output, "simulate", started, not no_timing, config, counters)

    table = Table(title=f"{config.scenario} (seed {config.master_seed})")
    for column in ("replicate", "min truth belief", "mean truth belief", "consensus gap", "e_T"):
        table.add_column(column, justify="right")
    for row in summary.rows:
        table.add_row(
            str(row.replicate),
            f"{row.min_truth_belief:.6f}",
            f"{row.mean_truth_belief:.6f}",
            f"{row.consensus_gap:.3e}",
            f"{row.final_e:.3e}",
        )
    console.print(table)
    console.print(f"min truth belief at T={config.steps}: {summary.aggregates['min_truth_belief']['min']:.6f}")


@main.group("sweep", cls=BeliefNetGroup)
def cmd_sweep():
    """Grid sweeps over the alpha-beta square."""


def _grid_option(func):
    func = click.option("--hi", type=OPEN_UNIT, default=None, help="Last lattice value [preset: 0.98].")(func)
    func = click.option("--lo", type=OPEN_UNIT, default=None, help="First lattice value [preset: 0.02].")(func)
    func = click.option("--grid", "count", type=click.IntRange(min=1), default=None, help="Points per axis [preset: 25].")(func)
    func = click.option("--g", "g_high", type=OPEN_UNIT, default=None, help="World probability of the high signal [preset].")(func)
    return func


def _sweep_config(
    preset_name: str, kind: str, g_high: Optional[float], count: Optional[int], lo: Optional[float], hi: Optional[float], **updates
) -> ExperimentConfig:
    """A sweep preset with the command-line world and lattice applied; a bad lattice is a ConfigError."""
    config = preset(preset_name)
    if config.kind != kind:
        raise ConfigError(f"preset {preset_name!r} is a {config.kind} experiment, not a {kind} sweep")
    grid = {**config.grid.model_dump(), **{key: value for key, value in dict(lo=lo, hi=hi, count=count).items() if value is not None}}
    world = (g_high, 1.0 - g_high) if g_high is not None else None
    return _override(config, world=world, grid=grid, **updates)


@cmd_sweep.command("regions")
@click.option("--preset", "preset_name", type=str, default="fig4_regions", show_default=True)
@_grid_option
@click.option("-o", "--output", "output_dir", type=click.Path(file_okay=False), default="out", show_default=True)
@click.option("--no-timing", is_flag=True)
@click.pass_obj
def cmd_sweep_regions(
    settings: SimulationSettings,
    preset_name: str,
    g_high: Optional[float],
    count: Optional[int],
    lo: Optional[float],
    hi: Optional[float],
    output_dir: str,
    no_timing: bool,
):
    """Classification of every lattice point (regions.csv) plus the h and k maps (h_map.csv, k_map.csv)."""
    started = time.perf_counter()
    config = _sweep_config(preset_name, "regions", g_high, count, lo, hi)
    grid = regions(config, settings)
    output = OutputManager(output_dir)
    output.write_csv("regions.csv", grid.to_frame())
    output.write_csv("h_map.csv", grid.map_frame("h"))
    output.write_csv("k_map.csv", grid.map_frame("k"))
    _write_manifest(output, "sweep regions", started, not no_timing, config)
    counts = grid.counts()
    console.print(" ".join(f"{agent_type.value}={counts[agent_type]}" for agent_type in AgentType))


@cmd_sweep.command("speed")
@click.option("--preset", "preset_name", type=str, default="fig8_sweep", show_default=True)
@_grid_option
@click.option("--seed", type=click.IntRange(min=0), default=None)
@click.option("--gamma", type=click.FloatRange(0.0, 1.0, min_open=True), default=None)
@click.option("--steps", type=click.IntRange(min=1), default=None)
@click.option("--replicates", type=click.IntRange(min=1), default=None, help="Runs per cell.")
@click.option("-o", "--output", "output_dir", type=click.Path(file_okay=False), default="out", show_default=True)
@click.option("--no-timing", is_flag=True)
@click.pass_obj
def cmd_sweep_speed(
    settings: SimulationSettings,
    preset_name: str,
    g_high: Optional[float],
    count: Optional[int],
    lo: Optional[float],
    hi: Optional[float],
    seed: Optional[int],
    gamma: Optional[float],
    steps: Optional[int],
    replicates: Optional[int],
    output_dir: str,
    no_timing: bool,
):
    """|k| against |ln e_T| over conservative lattice points (speed.csv)."""
    started = time.perf_counter()
    base = preset(preset_name)
    config = _sweep_config(
        preset_name,
        "speed",
        g_high,
        count,
        lo,
        hi,
        master_seed=_resolve_seed(seed, settings, base.master_seed),
        gamma=gamma,
        steps=steps,
        record_every=steps,
        replicates=replicates,
    )
    sweep = speed_sweep(config, settings)
    output = OutputManager(output_dir)
    output.write_csv("speed.csv", sweep.table)
    _write_manifest(output, "sweep speed", started, not no_timing, config, {"skipped_cells": float(sweep.skipped)})
    console.print(f"{len(sweep.table)} conservative cells, {sweep.skipped} skipped; Pearson r = {sweep.pearson:.4f}")


@main.command("bound")
@click.option("--config", "config_path", type=str, default=None)
@click.option("--preset", "preset_name", type=str, default=None)
@click.option("--alpha", type=OPEN_UNIT, default=None, help="Homogeneous population instead of a config.")
@click.option("--beta", type=OPEN_UNIT, default=None)
@click.option("--g", "g_high", type=OPEN_UNIT, default=0.8, show_default=True)
@click.option("--n", "n_agents", type=click.IntRange(min=1), default=100, show_default=True)
@click.option("--p", "probability", type=click.FloatRange(0.0, 1.0, min_open=True), default=0.1, show_default=True)
@click.option("--gamma", type=click.FloatRange(0.0, 1.0), default=None)
@click.option("--seed", type=click.IntRange(min=0), default=None)
@click.option("--simulate", is_flag=True, help="Also run the network and print the empirical estimate.")
@click.option("-o", "--output", "output_dir", type=click.Path(file_okay=False), default=None, help="Also write v.csv here.")
@click.pass_obj
def cmd_bound(
    settings: SimulationSettings,
    config_path: Optional[str],
    preset_name: Optional[str],
    alpha: Optional[float],
    beta: Optional[float],
    g_high: float,
    n_agents: int,
    probability: float,
    gamma: Optional[float],
    seed: Optional[int],
    simulate: bool,
    output_dir: Optional[str],
):
    """Learning-rate bound gamma * min_m sum_i v_i |k_i| of a conservative network."""
    if alpha is not None or beta is not None:
        if alpha is None or beta is None or config_path or preset_name:
            raise ConfigError("--alpha and --beta go together and replace --config/--preset")
        config = ExperimentConfig(
            scenario="bound",
            n=n_agents,
            er_probability=probability,
            gamma=gamma if gamma else 0.5,
            steps=500,
            replicates=1,
            population=({"count": n_agents, "alpha": alpha, "beta": beta},),
            world=(g_high, 1.0 - g_high),
        )
    else:
        config = _load_config(config_path, preset_name)
    config = _override(config, master_seed=_resolve_seed(seed, settings, config.master_seed))
    gamma = config.gamma if gamma is None else gamma

    network = generate_er(config.n, config.er_probability, derive_seed(config.master_seed, 0, NETWORK_STREAM), settings.max_retries)
    # gamma * I + (1 - gamma) * P has the left eigenvectors of P for every gamma in (0, 1)
    eig_gamma = 1.0 if network.n == 1 else (gamma if 0.0 < gamma < 1.0 else 0.5)
    A = uniform_influence(network, eig_gamma)
    v = left_unit_eigenvector(A, settings.eig_tol, settings.eig_max_iter)

    specs = build_specs(config, 0)
    world = config.world_structure()
    r = config.real_state
    alternatives = [m for m in range(specs[0].structure.n_states) if m != r]
    k = np.array([[k_g(world, spec.structure, m, r) for m in alternatives] for spec in specs])
    types = [classify_structure(world, spec.structure, r, settings.classify_tol) for spec in specs]
    if any(agent_type is not AgentType.CONSERVATIVE for agent_type in types):
        rows = [
            {"agent": i, "alpha": spec.structure.alpha, "beta": spec.structure.beta, "k": float(k[i].max()), "type": t.value}
            for i, (spec, t) in enumerate(zip(specs, types))
            if t is not AgentType.CONSERVATIVE
        ]
        raise HypothesisViolation(f"{len(rows)} of {len(specs)} agents are not conservative", rows=rows)

    weighted = v @ np.abs(k)
    bound = learning_rate_bound(gamma, v, k)
    console.print(f"v = {np.array2string(v, precision=6, separator=', ', threshold=v.size + 1)}", markup=False)
    console.print(f"v: min={v.min():.6f} max={v.max():.6f} sum={v.sum():.12f}")
    if output_dir:
        OutputManager(output_dir).write_csv("v.csv", pd.DataFrame({"agent": np.arange(v.size), "v": v}))
    for m, value in zip(alternatives, weighted):
        console.print(f"sum_i v_i |k_i(state {m + 1})| = {value:.4f}")
    console.print(f"bound = {bound:.4f}")

    if simulate:
        if gamma <= 0.0:
            raise ConfigError("--simulate needs gamma > 0")
        row = run_replicate(_override(config, gamma=gamma), 0, settings).row
        if row.lambda_endpoint is None:
            console.print(f"estimate: e_t reached 0 within {config.steps} steps")
        else:
            console.print(f"estimate |ln e_T|/T = {row.lambda_endpoint:.4f} (slope {row.lambda_slope:.4f})")


@main.command("presets")
def cmd_presets():
    """List the scenario presets."""
    table = Table(title="Presets")
    for column in ("name", "kind", "n", "gamma", "steps", "replicates", "world"):
        table.add_column(column)
    for name in preset_names():
        config = preset(name)
        table.add_row(name, config.kind, str(config.n), str(config.gamma), str(config.steps), str(config.replicates), str(list(config.world)))
    console.print(table)


@main.command("network")
@click.option("--n", "n_agents", type=click.IntRange(min=1), required=True)
@click.option("--p", "probability", type=click.FloatRange(0.0, 1.0, min_open=True), required=True)
@click.option("--seed", type=click.IntRange(min=0), default=None)
@click.option("-o", "--output", "output_dir", type=click.Path(file_okay=False), default="out", show_default=True)
@click.pass_obj
def cmd_network(settings: SimulationSettings, n_agents: int, probability: float, seed: Optional[int], output_dir: str):
    """Write one connected ER draw as an edge list."""
    network = generate_er(n_agents, probability, _resolve_seed(seed, settings, 0), settings.max_retries)
    OutputManager(output_dir).write_edge_list("network.txt", network)
    console.print(f"{network.n} agents, {network.undirected_edge_count} undirected edges")
