"""
Domain value objects shared by every other module.

All types are immutable after construction: arrays are copied to float64 and
flagged read-only, so instances can be shared between threads and processes.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from beliefnet.config import DEFAULT_SETTINGS
from beliefnet.errors import (
    DomainError,
    SelfRelianceViolation,
    StochasticityViolation,
    ValidationError,
)


CONSTRUCTION_TOL = DEFAULT_SETTINGS.construction_tol
BELIEF_TOL = DEFAULT_SETTINGS.belief_tol


def _frozen_array(values, ndim: int, name: str) -> np.ndarray:
    try:
        array = np.array(values, dtype=np.float64)
    except (TypeError, ValueError) as e:
        raise ValidationError(f"{name} is not numeric: {e}", parameter=name) from e
    if array.ndim != ndim:
        raise ValidationError(f"{name} must be {ndim}-dimensional, got shape {array.shape}", parameter=name)
    if not np.all(np.isfinite(array)):
        raise ValidationError(f"{name} contains non-finite entries", parameter=name)
    array.setflags(write=False)
    return array


class AgentType(str, Enum):
    """Signal-structure class of an agent relative to the real state."""

    CONSERVATIVE = "Conservative"
    RADICAL = "Radical"
    NEGATIVE = "Negative"
    BOUNDARY = "Boundary"


@dataclass(frozen=True)
class StateSpace:
    """The finite state set and the index of the real state."""

    labels: tuple
    real_state_index: int = 0

    def __post_init__(self):
        labels = tuple(self.labels)
        object.__setattr__(self, "labels", labels)
        if len(labels) < 2:
            raise ValidationError("a state space needs at least two states", parameter="labels")
        if len(set(labels)) != len(labels):
            raise ValidationError("state labels must be distinct", parameter="labels")
        if not 0 <= self.real_state_index < len(labels):
            raise ValidationError(
                f"real state index {self.real_state_index} outside [0, {len(labels)})",
                parameter="real_state_index",
            )

    @property
    def size(self) -> int:
        return len(self.labels)

    @classmethod
    def binary(cls) -> "StateSpace":
        return cls(labels=("theta1", "theta2"), real_state_index=0)


@dataclass(frozen=True, eq=False)
class WorldSignalStructure:
    """True distribution g of an agent's signals under the real state."""

    probabilities: np.ndarray

    def __post_init__(self):
        g = _frozen_array(self.probabilities, 1, "probabilities")
        if g.size < 1:
            raise ValidationError("world signal structure is empty", parameter="probabilities")
        if np.any(g <= 0.0):
            raise ValidationError("world signal probabilities must be strictly positive", parameter="probabilities")
        if abs(g.sum() - 1.0) > CONSTRUCTION_TOL:
            raise ValidationError(f"world signal probabilities sum to {g.sum()!r}", parameter="probabilities")
        object.__setattr__(self, "probabilities", g)

    @property
    def n_signals(self) -> int:
        return self.probabilities.size

    @classmethod
    def binary(cls, g_high: float) -> "WorldSignalStructure":
        """World structure [g, 1 - g] over a high and a low signal."""
        if not 0.0 < g_high < 1.0:
            raise ValidationError(f"g must lie in (0, 1), got {g_high}", parameter="g")
        return cls(np.array([g_high, 1.0 - g_high]))


@dataclass(frozen=True, eq=False)
class PrivateSignalStructure:
    """An agent's K x M likelihood matrix; column m is the signal distribution it assumes under state m."""

    likelihoods: np.ndarray

    def __post_init__(self):
        L = _frozen_array(self.likelihoods, 2, "likelihoods")
        if L.shape[0] < 1 or L.shape[1] < 2:
            raise ValidationError(f"likelihood matrix has shape {L.shape}", parameter="likelihoods")
        if np.any(L < CONSTRUCTION_TOL):
            raise ValidationError("likelihood entries must be strictly positive", parameter="likelihoods")
        sums = L.sum(axis=0)
        if np.any(np.abs(sums - 1.0) > CONSTRUCTION_TOL):
            raise ValidationError(f"likelihood columns sum to {sums.tolist()}", parameter="likelihoods")
        object.__setattr__(self, "likelihoods", L)

    @property
    def n_signals(self) -> int:
        return self.likelihoods.shape[0]

    @property
    def n_states(self) -> int:
        return self.likelihoods.shape[1]

    def column(self, m: int) -> np.ndarray:
        return self.likelihoods[:, m]

    @property
    def alpha(self) -> float:
        """Probability of the high signal under the first state (binary case)."""
        return float(self.likelihoods[0, 0])

    @property
    def beta(self) -> float:
        """Probability of the high signal under the second state (binary case)."""
        return float(self.likelihoods[0, 1])


@dataclass(frozen=True, eq=False)
class BeliefProfile:
    """Probability vector over the state set."""

    beliefs: np.ndarray
    tol: float = field(default=BELIEF_TOL, repr=False)

    def __post_init__(self):
        mu = _frozen_array(self.beliefs, 1, "beliefs")
        if mu.size < 2:
            raise ValidationError("a belief profile needs at least two states", parameter="beliefs")
        if np.any(mu < 0.0):
            raise ValidationError("beliefs must be non-negative", parameter="beliefs")
        if abs(mu.sum() - 1.0) > self.tol:
            raise ValidationError(f"beliefs sum to {mu.sum()!r}", parameter="beliefs")
        object.__setattr__(self, "beliefs", mu)

    @property
    def n_states(self) -> int:
        return self.beliefs.size

    def __getitem__(self, m: int) -> float:
        return float(self.beliefs[m])

    @classmethod
    def point_mass(cls, n_states: int, index: int) -> "BeliefProfile":
        mu = np.zeros(n_states)
        mu[index] = 1.0
        return cls(mu)

    @classmethod
    def uniform(cls, n_states: int) -> "BeliefProfile":
        return cls(np.full(n_states, 1.0 / n_states))


def make_binary_structure(alpha: float, beta: float) -> PrivateSignalStructure:
    """
    Builds the binary structure [[alpha, beta], [1 - alpha, 1 - beta]].

    Args:
        alpha (float): probability of the high signal under the first state
        beta (float): probability of the high signal under the second state

    Returns:
        PrivateSignalStructure: 2 x 2 likelihood matrix.
    """
    for name, value in (("alpha", alpha), ("beta", beta)):
        if not 0.0 < value < 1.0:
            raise ValidationError(f"{name} out of open interval (0, 1): {value}", parameter=name)
    return PrivateSignalStructure(np.array([[alpha, beta], [1.0 - alpha, 1.0 - beta]]))


def validate_influence_row(
    weights: Sequence[float], self_index: int, tol: float = CONSTRUCTION_TOL
) -> None:
    """
    Checks one row of an influence matrix.

    Raises:
        SelfRelianceViolation: weights[self_index] is not strictly positive.
        StochasticityViolation: a negative entry, or the row does not sum to one.
    """
    row = np.asarray(weights, dtype=np.float64)
    if row.ndim != 1 or row.size < 1:
        raise DomainError("influence row must be a non-empty vector")
    if not 0 <= self_index < row.size:
        raise DomainError(f"self index {self_index} outside row of length {row.size}")
    if np.any(row < 0.0) or not np.all(np.isfinite(row)):
        raise StochasticityViolation("influence weights must be finite and non-negative", parameter="weights")
    if row[self_index] <= 0.0:
        raise SelfRelianceViolation("self-reliance weight must be strictly positive", parameter="weights")
    if abs(row.sum() - 1.0) > tol:
        raise StochasticityViolation(f"influence row sums to {row.sum()!r}", parameter="weights")
