"""
Belief dynamics: signal sampling, the Bayesian update of an isolated agent,
the networked update that mixes it with neighbors' beliefs, and seeded runs.

Random streams are derived from a master seed with numpy's SeedSequence spawn
keys: (replicate, 0, agent) for agent signal streams, (replicate, 1) for the
network draw, (replicate, 2) for initial beliefs and (replicate, 3) for agent
placement. One seed therefore fixes every draw of every replicate.
"""

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from beliefnet.config import DEFAULT_SETTINGS
from beliefnet.core import (
    BeliefProfile,
    PrivateSignalStructure,
    WorldSignalStructure,
    validate_influence_row,
)
from beliefnet.errors import BeliefNetError, DomainError, NumericalError, ValidationError
from beliefnet.topology import InfluenceMatrix

logger = logging.getLogger(__name__)

BELIEF_FLOOR = DEFAULT_SETTINGS.belief_floor
FORECAST_FLOOR = 1e-300

SIGNAL_STREAM = 0
NETWORK_STREAM = 1
BELIEF_STREAM = 2
PLACEMENT_STREAM = 3


def seed_sequence(master_seed: int, *key: int) -> np.random.SeedSequence:
    if master_seed < 0:
        raise DomainError(f"master seed must be non-negative, got {master_seed}")
    return np.random.SeedSequence(entropy=master_seed, spawn_key=tuple(int(k) for k in key))


def make_stream(master_seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(seed_sequence(master_seed, *key))


def derive_seed(master_seed: int, *key: int) -> int:
    """A 64-bit integer seed for the given stream key."""
    return int(seed_sequence(master_seed, *key).generate_state(1, dtype=np.uint64)[0])


def agent_streams(master_seed: int, replicate: int, n: int) -> list:
    return [make_stream(master_seed, replicate, SIGNAL_STREAM, i) for i in range(n)]


@dataclass(frozen=True)
class AgentSpec:
    """Per-agent world structure, private structure and initial belief."""

    structure: PrivateSignalStructure
    world: WorldSignalStructure
    initial_belief: BeliefProfile

    def __post_init__(self):
        if self.world.n_signals != self.structure.n_signals:
            raise ValidationError(
                f"world structure has {self.world.n_signals} signals, private structure {self.structure.n_signals}",
                parameter="world",
            )
        if self.initial_belief.n_states != self.structure.n_states:
            raise ValidationError(
                f"initial belief covers {self.initial_belief.n_states} states, structure {self.structure.n_states}",
                parameter="initial_belief",
            )


@dataclass(frozen=True, eq=False)
class SimulationState:
    """Beliefs of all agents at step t (row i is agent i)."""

    t: int
    beliefs: np.ndarray
    last_signals: Optional[np.ndarray] = None
    clamped: int = 0
    drift: float = 0.0

    def __post_init__(self):
        B = np.array(self.beliefs, dtype=np.float64)
        if B.ndim != 2:
            raise ValidationError(f"beliefs must be an n x M matrix, got shape {B.shape}", parameter="beliefs")
        if np.any(np.abs(B.sum(axis=1) - 1.0) > DEFAULT_SETTINGS.belief_tol):
            raise ValidationError("belief profiles are not normalized", parameter="beliefs")
        B.setflags(write=False)
        object.__setattr__(self, "beliefs", B)
        if self.last_signals is not None:
            signals = np.array(self.last_signals, dtype=np.int64)
            signals.setflags(write=False)
            object.__setattr__(self, "last_signals", signals)

    @property
    def n_agents(self) -> int:
        return self.beliefs.shape[0]

    def profile(self, i: int) -> BeliefProfile:
        return BeliefProfile(self.beliefs[i])


@dataclass(frozen=True)
class Trajectory:
    """Recorded states in increasing t plus the metadata needed to replay the run."""

    states: tuple
    metadata: dict = field(default_factory=dict)

    @property
    def final(self) -> SimulationState:
        return self.states[-1]

    def to_frame(self) -> pd.DataFrame:
        """Long format: one row per (t, agent, state_index)."""
        frames = []
        for state in self.states:
            n, M = state.beliefs.shape
            frames.append(
                pd.DataFrame(
                    {
                        "t": np.full(n * M, state.t, dtype=np.int64),
                        "agent": np.repeat(np.arange(n), M),
                        "state_index": np.tile(np.arange(M), n),
                        "belief": state.beliefs.ravel(),
                    }
                )
            )
        return pd.concat(frames, ignore_index=True)


def sample_signal(g: WorldSignalStructure, rng: np.random.Generator) -> int:
    """Inverse-CDF draw over the cumulative sums of g in index order."""
    u = rng.random()
    index = int(np.searchsorted(np.cumsum(g.probabilities), u, side="right"))
    return min(index, g.n_signals - 1)


def _check_signal(L: PrivateSignalStructure, s: int) -> None:
    if not 0 <= s < L.n_signals:
        raise DomainError(f"signal index {s} outside [0, {L.n_signals})")


def one_step_forecast(L: PrivateSignalStructure, mu: BeliefProfile, s: int) -> float:
    """Probability the agent assigns to observing signal s next."""
    _check_signal(L, s)
    if mu.n_states != L.n_states:
        raise DomainError(f"belief covers {mu.n_states} states, structure {L.n_states}")
    return float(np.dot(L.likelihoods[s], mu.beliefs))


def _finalize(raw: np.ndarray, support: np.ndarray, floor: float):
    """Clamps underflowed entries of the support to floor, then renormalizes each row."""
    drift = float(np.max(np.abs(raw.sum(axis=-1) - 1.0)))
    clamp = support & (raw < floor)
    clamped = int(np.count_nonzero(clamp))
    if clamped:
        raw = np.where(clamp, floor, raw)
    return raw / raw.sum(axis=-1, keepdims=True), clamped, drift


def isolated_update(
    L: PrivateSignalStructure, mu: BeliefProfile, s: int, floor: float = BELIEF_FLOOR
) -> BeliefProfile:
    """
    Bayesian update mu'(m) = mu(m) l^m(s) / d(s) of an agent without neighbors.

    Raises:
        NumericalError: the one-step forecast d(s) underflows.
    """
    d = one_step_forecast(L, mu, s)
    if d < FORECAST_FLOOR:
        raise NumericalError(f"one-step forecast underflow: d = {d!r}")
    raw = mu.beliefs * L.likelihoods[s] / d
    updated, _, _ = _finalize(raw, mu.beliefs > 0.0, floor)
    return BeliefProfile(updated)


def agent_update(
    spec: AgentSpec,
    mu_self: BeliefProfile,
    neighbor_beliefs: Sequence[BeliefProfile],
    row: Sequence[float],
    s: int,
    floor: float = BELIEF_FLOOR,
) -> BeliefProfile:
    """
    Networked update of one agent.

    Args:
        spec (AgentSpec): the agent's structures
        mu_self (BeliefProfile): the agent's belief at time t
        neighbor_beliefs: neighbors' beliefs at time t
        row: weights [a_ii, a_ij1, a_ij2, ...], the self weight first and then
            one weight per entry of neighbor_beliefs, in the same order
        s (int): the signal the agent observes at t + 1

    Returns:
        BeliefProfile: a_ii * Bayes(mu_self, s) + sum_j a_ij mu_j, renormalized.
    """
    weights = np.asarray(row, dtype=np.float64)
    if weights.ndim != 1 or weights.size != 1 + len(neighbor_beliefs):
        raise DomainError(f"row has {weights.size} weights for {len(neighbor_beliefs)} neighbors plus self")
    validate_influence_row(weights, 0)
    L = spec.structure
    d = one_step_forecast(L, mu_self, s)
    if d < FORECAST_FLOOR:
        raise NumericalError(f"one-step forecast underflow: d = {d!r}")

    social = np.zeros(L.n_states)
    for weight, mu_j in zip(weights[1:], neighbor_beliefs):
        if mu_j.n_states != L.n_states:
            raise DomainError(f"neighbor belief covers {mu_j.n_states} states, expected {L.n_states}")
        social += weight * mu_j.beliefs
    raw = weights[0] * mu_self.beliefs * L.likelihoods[s] / d + social
    updated, _, _ = _finalize(raw, (mu_self.beliefs > 0.0) | (social > 0.0), floor)
    return BeliefProfile(updated)


def _check_population(specs: Sequence[AgentSpec], A: InfluenceMatrix) -> int:
    if not specs:
        raise DomainError("a run needs at least one agent")
    if A.size != len(specs):
        raise DomainError(f"influence matrix covers {A.size} agents, got {len(specs)} specs")
    n_states = specs[0].structure.n_states
    for i, spec in enumerate(specs):
        if spec.structure.n_states != n_states:
            raise DomainError(f"agent {i} has {spec.structure.n_states} states, expected {n_states}", agent=i)
    return n_states


def network_step(
    state: SimulationState,
    specs: Sequence[AgentSpec],
    A: InfluenceMatrix,
    streams: Sequence[np.random.Generator],
    floor: float = BELIEF_FLOOR,
) -> SimulationState:
    """
    One synchronous step of the whole network.

    Signals are drawn first, one per agent in ascending agent order, then every
    agent is updated against the frozen time-t beliefs.
    """
    n_states = _check_population(specs, A)
    B = state.beliefs
    if B.shape != (len(specs), n_states):
        raise DomainError(f"state has shape {B.shape}, expected {(len(specs), n_states)}")

    signals = np.array([sample_signal(spec.world, stream) for spec, stream in zip(specs, streams)], dtype=np.int64)
    likelihood = np.stack([spec.structure.likelihoods[s] for spec, s in zip(specs, signals)])

    forecast = np.einsum("im,im->i", B, likelihood)
    low = np.flatnonzero(forecast < FORECAST_FLOOR)
    if low.size:
        i = int(low[0])
        raise NumericalError(f"one-step forecast underflow: d = {forecast[i]!r}", agent=i, t=state.t + 1)

    W = A.weights
    self_weight = np.diag(W)
    off_diagonal = W - np.diag(self_weight)
    social = off_diagonal @ B
    raw = self_weight[:, None] * B * likelihood / forecast[:, None] + social

    updated, clamped, drift = _finalize(raw, (B > 0.0) | (social > 0.0), floor)
    if clamped:
        logger.debug(f"Clamped {clamped} belief entries to {floor} at t={state.t + 1}")
    return SimulationState(t=state.t + 1, beliefs=updated, last_signals=signals, clamped=clamped, drift=drift)


def initial_beliefs(n: int, n_states: int, rng: np.random.Generator) -> list:
    """
    Random initial profiles: in the binary case the first state's mass is
    Uniform(0, 1); with more states, normalized standard exponentials
    (a uniform Dirichlet draw).
    """
    if n_states == 2:
        first = rng.random(n)
        return [BeliefProfile(np.array([u, 1.0 - u])) for u in first]
    draws = rng.standard_exponential((n, n_states))
    return [BeliefProfile(row / row.sum()) for row in draws]


def run(
    specs: Sequence[AgentSpec],
    A: InfluenceMatrix,
    steps: int,
    seed: int,
    record_every: int = 1,
    replicate: int = 0,
    real_state: int = 0,
    floor: float = BELIEF_FLOOR,
    config_hash: Optional[str] = None,
) -> Trajectory:
    """
    Applies network_step `steps` times.

    Every record_every-th state is kept, and the final state always is.

    Returns:
        Trajectory: recorded states plus seed, replicate, clamp count and the
        largest pre-normalization drift observed.
    """
    if steps < 0:
        raise DomainError(f"steps must be non-negative, got {steps}")
    if record_every < 1:
        raise DomainError(f"record_every must be positive, got {record_every}")
    _check_population(specs, A)
    if not any(spec.initial_belief[real_state] > 0.0 for spec in specs):
        raise DomainError("no agent has a positive initial belief on the real state")

    state = SimulationState(t=0, beliefs=np.stack([spec.initial_belief.beliefs for spec in specs]))
    streams = agent_streams(seed, replicate, len(specs))
    states = [state]
    clamp_count = 0
    max_drift = 0.0
    for t in range(1, steps + 1):
        try:
            state = network_step(state, specs, A, streams, floor)
        except BeliefNetError as e:
            raise e.with_context(t=t)
        clamp_count += state.clamped
        max_drift = max(max_drift, state.drift)
        if t % record_every == 0 or t == steps:
            states.append(state)

    if clamp_count:
        logger.warning(f"Clamped {clamp_count} belief entries to {floor} over {steps} steps (replicate {replicate})")

    metadata = {
        "seed": seed,
        "replicate": replicate,
        "steps": steps,
        "record_every": record_every,
        "clamp_count": clamp_count,
        "max_normalization_drift": max_drift,
        "config_hash": config_hash,
    }
    return Trajectory(states=tuple(states), metadata=metadata)


def run_isolated(spec: AgentSpec, steps: int, seed: int, record_every: int = 1, replicate: int = 0) -> Trajectory:
    """Run of a single agent with self weight 1, i.e. repeated Bayesian updating."""
    return run([spec], InfluenceMatrix(np.ones((1, 1))), steps, seed, record_every=record_every, replicate=replicate)
