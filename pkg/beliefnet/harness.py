"""
Scenario presets, replicate orchestration and parameter sweeps.

Every replicate regenerates its network, initial beliefs, agent placement and
signals from streams keyed by (master_seed, replicate), so a summary depends
only on the configuration and never on execution order.
"""

import hashlib
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import lru_cache, partial
from pathlib import Path
from typing import Callable, Dict, List, Literal, Optional, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, TypeAdapter, model_validator
from pydantic import ValidationError as PydanticValidationError
from scipy import stats

from beliefnet.classify import GridSpec, RegionGrid, classify_structure, k_g, region_sweep
from beliefnet.config import DEFAULT_SETTINGS, SimulationSettings
from beliefnet.core import (
    AgentType,
    BeliefProfile,
    PrivateSignalStructure,
    WorldSignalStructure,
    make_binary_structure,
)
from beliefnet.dynamics import (
    BELIEF_STREAM,
    NETWORK_STREAM,
    PLACEMENT_STREAM,
    AgentSpec,
    Trajectory,
    derive_seed,
    initial_beliefs,
    make_stream,
    run,
    run_isolated,
)
from beliefnet.errors import BeliefNetError, ConfigError
from beliefnet.metrics import MetricSeries, learning_rate_estimate, metric_series
from beliefnet.topology import Network, generate_er, uniform_influence

logger = logging.getLogger(__name__)

PRESETS_PATH = Path(__file__).parent / "data" / "presets.json"


@lru_cache(maxsize=1)
def _preset_file() -> dict:
    return TypeAdapter(dict).validate_json(PRESETS_PATH.read_bytes())


def reference_structures() -> Dict[str, PrivateSignalStructure]:
    """The named binary structures L1, L2, L3 that population groups may refer to."""
    return {
        name: make_binary_structure(entry["alpha"], entry["beta"])
        for name, entry in _preset_file()["structures"].items()
    }


def reference_types() -> Dict[str, AgentType]:
    """Declared type of each reference structure under the preset world g = [0.8, 0.2]."""
    return {name: AgentType(entry["type"]) for name, entry in _preset_file()["structures"].items()}


class PopulationGroup(BaseModel):
    """`count` agents sharing one private signal structure, given inline or by reference name."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    count: int = Field(ge=1)
    alpha: Optional[float] = Field(default=None, gt=0.0, lt=1.0)
    beta: Optional[float] = Field(default=None, gt=0.0, lt=1.0)
    likelihoods: Optional[Tuple[Tuple[float, ...], ...]] = None

    @model_validator(mode="before")
    @classmethod
    def _resolve_reference(cls, data):
        if not isinstance(data, dict) or "structure" not in data:
            return data
        data = dict(data)
        name = data.pop("structure")
        if any(data.get(key) is not None for key in ("alpha", "beta", "likelihoods")):
            raise ValueError(f"group refers to structure {name!r} and also gives its own parameters")
        entries = _preset_file()["structures"]
        if name not in entries:
            raise ValueError(f"unknown reference structure {name!r}; known: {', '.join(sorted(entries))}")
        data["alpha"] = entries[name]["alpha"]
        data["beta"] = entries[name]["beta"]
        return data

    @model_validator(mode="after")
    def _one_structure(self) -> "PopulationGroup":
        binary = self.alpha is not None and self.beta is not None
        if binary == (self.likelihoods is not None):
            raise ValueError("give either alpha and beta, or a likelihoods matrix")
        try:
            self.structure()
        except BeliefNetError as e:
            raise ValueError(str(e)) from e
        return self

    def structure(self) -> PrivateSignalStructure:
        if self.likelihoods is not None:
            return PrivateSignalStructure(np.array(self.likelihoods))
        return make_binary_structure(self.alpha, self.beta)


class GridConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    lo: float = Field(default=0.02, gt=0.0, lt=1.0)
    hi: float = Field(default=0.98, gt=0.0, lt=1.0)
    count: int = Field(default=25, ge=1)

    @model_validator(mode="after")
    def _valid_lattice(self) -> "GridConfig":
        try:
            self.spec()
        except BeliefNetError as e:
            raise ValueError(str(e)) from e
        return self

    def spec(self) -> GridSpec:
        return GridSpec(self.lo, self.hi, self.count)


class ExperimentConfig(BaseModel):
    """Parameters of one experiment: a networked simulation, a region map or a speed sweep."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    scenario: str = "custom"
    kind: Literal["simulation", "regions", "speed"] = "simulation"
    n: int = Field(ge=1)
    er_probability: float = Field(gt=0.0, le=1.0)
    gamma: float = Field(gt=0.0, le=1.0)
    steps: int = Field(ge=0)
    replicates: int = Field(default=DEFAULT_SETTINGS.replicates, ge=1)
    master_seed: int = Field(default=0, ge=0, lt=2**64)
    population: Tuple[PopulationGroup, ...]
    world: Tuple[float, ...]
    record_every: int = Field(default=1, ge=1)
    real_state: int = Field(default=0, ge=0)
    grid: Optional[GridConfig] = None

    @model_validator(mode="after")
    def _consistent(self) -> "ExperimentConfig":
        total = sum(group.count for group in self.population)
        if total != self.n:
            raise ValueError(f"population counts sum to {total}, expected n = {self.n}")
        try:
            world = self.world_structure()
        except BeliefNetError as e:
            raise ValueError(str(e)) from e
        n_states = {group.structure().n_states for group in self.population}
        if len(n_states) != 1:
            raise ValueError("all population groups must share one state space")
        if not self.real_state < n_states.pop():
            raise ValueError(f"real_state {self.real_state} outside the state space")
        for group in self.population:
            if group.structure().n_signals != world.n_signals:
                raise ValueError("population structures and world structure have different signal counts")
        if self.kind != "simulation" and self.grid is None:
            raise ValueError(f"{self.kind} experiments need a grid")
        return self

    def world_structure(self) -> WorldSignalStructure:
        return WorldSignalStructure(np.array(self.world))

    def structures(self) -> List[PrivateSignalStructure]:
        """One structure per agent, groups in declaration order."""
        out = []
        for group in self.population:
            out.extend([group.structure()] * group.count)
        return out

    def config_hash(self) -> str:
        return hashlib.sha256(self.model_dump_json().encode("utf-8")).hexdigest()

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            return cls.model_validate_json(text)
        except (PydanticValidationError, BeliefNetError) as e:
            raise ConfigError(f"invalid experiment config: {e}") from e


@lru_cache(maxsize=1)
def _load_presets() -> Dict[str, ExperimentConfig]:
    adapter = TypeAdapter(Dict[str, ExperimentConfig])
    return adapter.validate_python(_preset_file()["scenarios"])


def preset_names() -> List[str]:
    return sorted(_load_presets())


def preset(name: str) -> ExperimentConfig:
    """
    Frozen configuration of a named scenario.

    Raises:
        ConfigError: unknown name; the message lists the valid presets.
    """
    presets = _load_presets()
    if name not in presets:
        raise ConfigError(f"unknown preset {name!r}; valid presets: {', '.join(sorted(presets))}")
    return presets[name]


class ReplicateRow(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    replicate: int
    network_seed: int
    undirected_edges: int
    final_e: float
    min_truth_belief: float
    mean_truth_belief: float
    consensus_gap: float
    lambda_endpoint: Optional[float]
    lambda_slope: Optional[float]
    clamp_count: int
    max_normalization_drift: float


SUMMARY_FIELDS = (
    "final_e",
    "min_truth_belief",
    "mean_truth_belief",
    "consensus_gap",
    "lambda_endpoint",
    "lambda_slope",
    "clamp_count",
)


def _aggregate(rows: List[ReplicateRow]) -> Dict[str, Dict[str, Optional[float]]]:
    out = {}
    for name in SUMMARY_FIELDS:
        values = np.array([getattr(row, name) for row in rows if getattr(row, name) is not None], dtype=np.float64)
        if values.size == 0:
            out[name] = {key: None for key in ("min", "q25", "median", "q75", "max", "mean")}
            continue
        q = np.quantile(values, [0.0, 0.25, 0.5, 0.75, 1.0])
        out[name] = {
            "min": float(q[0]),
            "q25": float(q[1]),
            "median": float(q[2]),
            "q75": float(q[3]),
            "max": float(q[4]),
            "mean": float(values.mean()),
        }
    return out


class ReplicateSummary(BaseModel):
    """Per-replicate rows and quantile aggregates across replicates."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    scenario: str
    config_hash: str
    rows: Tuple[ReplicateRow, ...]
    aggregates: Dict[str, Dict[str, Optional[float]]]

    @model_validator(mode="after")
    def _aggregates_match_rows(self) -> "ReplicateSummary":
        expected = _aggregate(list(self.rows))
        for name, stats_ in expected.items():
            recorded = self.aggregates.get(name, {})
            for key, value in stats_.items():
                other = recorded.get(key)
                if value is None or other is None:
                    if value is not other:
                        raise ValueError(f"aggregate {name}.{key} does not match the replicate rows")
                elif not math.isclose(value, other, rel_tol=1e-12, abs_tol=1e-300):
                    raise ValueError(f"aggregate {name}.{key} does not match the replicate rows")
        return self

    @classmethod
    def from_rows(cls, scenario: str, config_hash: str, rows: List[ReplicateRow]) -> "ReplicateSummary":
        rows = sorted(rows, key=lambda row: row.replicate)
        return cls(scenario=scenario, config_hash=config_hash, rows=tuple(rows), aggregates=_aggregate(rows))

    def count(self, predicate: Callable[[ReplicateRow], bool]) -> int:
        return sum(1 for row in self.rows if predicate(row))


@dataclass(frozen=True)
class ReplicateOutcome:
    """Everything one replicate produced."""

    row: ReplicateRow
    network: Network
    trajectory: Trajectory
    series: MetricSeries


def _finite_or_none(value: float) -> Optional[float]:
    return value if math.isfinite(value) else None


def build_specs(
    config: ExperimentConfig, replicate: int, structures: Optional[List[PrivateSignalStructure]] = None
) -> List[AgentSpec]:
    """Agent specs of one replicate: structures placed by a seeded permutation, random initial beliefs."""
    structures = structures if structures is not None else config.structures()
    placement = make_stream(config.master_seed, replicate, PLACEMENT_STREAM).permutation(config.n)
    placed = [structures[k] for k in placement]
    world = config.world_structure()
    beliefs = initial_beliefs(config.n, placed[0].n_states, make_stream(config.master_seed, replicate, BELIEF_STREAM))
    return [AgentSpec(structure=L, world=world, initial_belief=mu) for L, mu in zip(placed, beliefs)]


def run_replicate(
    config: ExperimentConfig,
    replicate: int,
    settings: SimulationSettings = DEFAULT_SETTINGS,
    structures: Optional[List[PrivateSignalStructure]] = None,
) -> ReplicateOutcome:
    try:
        network_seed = derive_seed(config.master_seed, replicate, NETWORK_STREAM)
        network = generate_er(config.n, config.er_probability, network_seed, settings.max_retries)
        A = uniform_influence(network, config.gamma)
        specs = build_specs(config, replicate, structures)
        trajectory = run(
            specs,
            A,
            config.steps,
            config.master_seed,
            record_every=config.record_every,
            replicate=replicate,
            real_state=config.real_state,
            floor=settings.belief_floor,
            config_hash=config.config_hash(),
        )
    except BeliefNetError as e:
        raise e.with_context(replicate=replicate)

    series = metric_series(trajectory, config.real_state)
    last = -1
    if config.steps > 0:
        estimate = learning_rate_estimate(series)
        endpoint, slope = _finite_or_none(estimate.endpoint), _finite_or_none(estimate.slope)
    else:
        endpoint = slope = None
    row = ReplicateRow(
        replicate=replicate,
        network_seed=network_seed,
        undirected_edges=network.undirected_edge_count,
        final_e=float(series.e_t[last]),
        min_truth_belief=float(series.min_truth_belief[last]),
        mean_truth_belief=float(series.mean_truth_belief[last]),
        consensus_gap=float(series.consensus_gap[last]),
        lambda_endpoint=endpoint,
        lambda_slope=slope,
        clamp_count=trajectory.metadata["clamp_count"],
        max_normalization_drift=trajectory.metadata["max_normalization_drift"],
    )
    logger.info(
        f"{config.scenario} replicate {replicate}: e_T={row.final_e:.3e} "
        f"min truth belief={row.min_truth_belief:.4f} gap={row.consensus_gap:.3e}"
    )
    return ReplicateOutcome(row=row, network=network, trajectory=trajectory, series=series)


def _gather(func: Callable, items: List, workers: int) -> List:
    """Maps func over items, in a process pool when workers > 1; results keep item order."""
    if workers <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    with ProcessPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(func, items))


def _replicate_worker(replicate: int, config: ExperimentConfig, settings: SimulationSettings) -> ReplicateOutcome:
    return run_replicate(config, replicate, settings)


def run_replicate_outcomes(
    config: ExperimentConfig, settings: SimulationSettings = DEFAULT_SETTINGS
) -> List[ReplicateOutcome]:
    if config.kind != "simulation":
        raise ConfigError(f"scenario {config.scenario!r} is a {config.kind} experiment, not a simulation")
    logger.info(f"Running {config.replicates} replicate(s) of {config.scenario} (seed {config.master_seed})")
    worker = partial(_replicate_worker, config=config, settings=settings)
    return _gather(worker, list(range(config.replicates)), settings.workers)


def run_replicates(config: ExperimentConfig, settings: SimulationSettings = DEFAULT_SETTINGS) -> ReplicateSummary:
    """Runs every replicate of a simulation config and summarizes them."""
    outcomes = run_replicate_outcomes(config, settings)
    return ReplicateSummary.from_rows(config.scenario, config.config_hash(), [o.row for o in outcomes])


@dataclass(frozen=True)
class SpeedSweep:
    """Per-cell |k| against |ln e_T| for networks of identical conservative agents."""

    table: pd.DataFrame
    skipped: int

    @property
    def pearson(self) -> float:
        if len(self.table) < 2:
            return math.nan
        return float(stats.pearsonr(self.table["abs_k"], self.table["abs_log_e50"])[0])


def _speed_cell(
    cell: Tuple[float, float], config: ExperimentConfig, settings: SimulationSettings
) -> float:
    alpha, beta = cell
    L = make_binary_structure(alpha, beta)
    structures = [L] * config.n
    magnitudes = []
    for replicate in range(config.replicates):
        outcome = run_replicate(config, replicate, settings, structures=structures)
        magnitudes.append(abs(math.log(outcome.row.final_e)))
    return float(np.mean(magnitudes))


def speed_sweep(config: ExperimentConfig, settings: SimulationSettings = DEFAULT_SETTINGS) -> SpeedSweep:
    """
    Runs a whole network of agents sharing each conservative grid structure and
    records |ln e_T| next to |k_g|.

    Cells share replicate keys, so every cell sees the same network, initial
    beliefs and signal streams; only the structure changes. Non-conservative
    cells are skipped.
    """
    if config.grid is None:
        raise ConfigError("a speed sweep needs a grid")
    world = config.world_structure()
    r = config.real_state
    if world.n_signals != 2:
        raise ConfigError("speed sweeps need a binary world structure")
    axis = config.grid.spec().values()

    cells, abs_k, skipped = [], [], 0
    for alpha in axis:
        for beta in axis:
            L = make_binary_structure(float(alpha), float(beta))
            agent_type = classify_structure(world, L, r, settings.classify_tol)
            if agent_type is not AgentType.CONSERVATIVE:
                logger.debug(f"Skipping ({alpha:.2f}, {beta:.2f}): {agent_type.value}")
                skipped += 1
                continue
            cells.append((float(alpha), float(beta)))
            abs_k.append(abs(k_g(world, L, 1 - r, r)))
    if skipped:
        logger.warning(f"Speed sweep skipped {skipped} non-conservative cell(s)")

    worker = partial(_speed_cell, config=config, settings=settings)
    magnitudes = _gather(worker, cells, settings.workers)
    table = pd.DataFrame(
        {
            "alpha": [c[0] for c in cells],
            "beta": [c[1] for c in cells],
            "abs_k": abs_k,
            "abs_log_e50": magnitudes,
        }
    )
    return SpeedSweep(table=table, skipped=skipped)


def regions(config: ExperimentConfig, settings: SimulationSettings = DEFAULT_SETTINGS) -> RegionGrid:
    if config.grid is None:
        raise ConfigError("a region map needs a grid")
    return region_sweep(config.world_structure(), config.grid.spec(), config.real_state, settings.classify_tol)


def individual_trials(
    alpha: float, beta: float, g_high: float, steps: int, trials: int, seed: int
) -> pd.DataFrame:
    """
    Final real-state beliefs of isolated agents with structure (alpha, beta),
    one row per trial, each trial starting from a Uniform(0, 1) belief.
    """
    L = make_binary_structure(alpha, beta)
    world = WorldSignalStructure.binary(g_high)
    rows = []
    for trial in range(trials):
        u = float(make_stream(seed, trial, BELIEF_STREAM).random())
        mu0 = BeliefProfile(np.array([u, 1.0 - u]))
        trajectory = run_isolated(AgentSpec(structure=L, world=world, initial_belief=mu0), steps, seed, replicate=trial)
        rows.append({"trial": trial, "initial_truth_belief": u, "final_truth_belief": float(trajectory.final.beliefs[0, 0])})
    return pd.DataFrame(rows, columns=["trial", "initial_truth_belief", "final_truth_belief"])
