"""
Information measures of a private signal structure against the world signal
structure, and the conservative / radical / negative classification built on them.

All logarithms are natural; values are in nats.
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
import pandas as pd

from beliefnet.config import DEFAULT_SETTINGS
from beliefnet.core import (
    AgentType,
    PrivateSignalStructure,
    WorldSignalStructure,
    make_binary_structure,
)
from beliefnet.errors import DomainError

logger = logging.getLogger(__name__)

CLASSIFY_TOL = DEFAULT_SETTINGS.classify_tol


def relative_entropy(p, q) -> float:
    """
    Relative entropy D(p || q) = sum_j p_j ln(p_j / q_j).

    Args:
        p: probability vector
        q: probability vector with the same (strictly positive) support

    Returns:
        float: divergence in nats, never negative.
    """
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape or p.ndim != 1:
        raise DomainError(f"relative entropy needs equal-length vectors, got {p.shape} and {q.shape}")
    if np.any(p <= 0.0) or np.any(q <= 0.0):
        raise DomainError("relative entropy needs strictly positive entries")
    return max(0.0, float(np.sum(p * (np.log(p) - np.log(q)))))


def _check_pair(g: WorldSignalStructure, L: PrivateSignalStructure, m: int, r: int) -> None:
    if g.n_signals != L.n_signals:
        raise DomainError(f"world structure has {g.n_signals} signals, private structure {L.n_signals}")
    for name, index in (("m", m), ("r", r)):
        if not 0 <= index < L.n_states:
            raise DomainError(f"state index {name}={index} outside [0, {L.n_states})")
    if m == r:
        raise DomainError(f"state indices must differ, got m = r = {r}")


def h_g(g: WorldSignalStructure, L: PrivateSignalStructure, m: int, r: int) -> float:
    """Expected log-likelihood ratio of state m over state r per observation drawn from g."""
    _check_pair(g, L, m, r)
    log_ratio = np.log(L.likelihoods[:, m]) - np.log(L.likelihoods[:, r])
    return float(np.dot(g.probabilities, log_ratio))


def k_g(g: WorldSignalStructure, L: PrivateSignalStructure, m: int, r: int) -> float:
    """Log of the expected likelihood ratio of state m over state r; never below h_g."""
    _check_pair(g, L, m, r)
    ratio = L.likelihoods[:, m] / L.likelihoods[:, r]
    return float(np.log(np.dot(g.probabilities, ratio)))


def relative_entropies(g: WorldSignalStructure, L: PrivateSignalStructure) -> np.ndarray:
    """D(g || column m) for every state m."""
    if g.n_signals != L.n_signals:
        raise DomainError(f"world structure has {g.n_signals} signals, private structure {L.n_signals}")
    return np.array([relative_entropy(g.probabilities, L.column(m)) for m in range(L.n_states)])


def learned_state(g: WorldSignalStructure, L: PrivateSignalStructure) -> int:
    """State an isolated agent settles on: the column closest to g in relative entropy."""
    return int(np.argmin(relative_entropies(g, L)))


def most_indistinguishable_state(g: WorldSignalStructure, L: PrivateSignalStructure, r: int) -> int:
    """The alternative state with the largest k_g against r."""
    others = [m for m in range(L.n_states) if m != r]
    return max(others, key=lambda m: k_g(g, L, m, r))


def is_positive(g: WorldSignalStructure, L: PrivateSignalStructure, r: int, tol: float = CLASSIFY_TOL) -> bool:
    return all(h_g(g, L, m, r) < -tol for m in range(L.n_states) if m != r)


def is_perfect(g: WorldSignalStructure, L: PrivateSignalStructure, r: int) -> bool:
    """True when the real-state column reproduces g."""
    if g.n_signals != L.n_signals:
        return False
    return bool(np.allclose(L.column(r), g.probabilities, rtol=0.0, atol=DEFAULT_SETTINGS.construction_tol))


def classify_structure(
    g: WorldSignalStructure,
    L: PrivateSignalStructure,
    r: int,
    tol: float = CLASSIFY_TOL,
) -> AgentType:
    """
    Classifies a private signal structure against the real state r.

    Negative takes precedence: a single alternative with h_g > tol makes the
    isolated agent learn a wrong state. Otherwise any |h_g| <= tol is an
    observational-equivalence Boundary. With every h_g < -tol the structure is
    Conservative when every k_g < -tol, Radical when some k_g > tol, and
    Boundary when the largest k_g sits inside the tolerance band.
    """
    if tol <= 0:
        raise DomainError(f"classification tolerance must be positive, got {tol}")
    others = [m for m in range(L.n_states) if m != r]
    hs = np.array([h_g(g, L, m, r) for m in others])
    if np.any(hs > tol):
        return AgentType.NEGATIVE
    if np.any(np.abs(hs) <= tol):
        return AgentType.BOUNDARY

    ks = np.array([k_g(g, L, m, r) for m in others])
    if np.all(ks < -tol):
        return AgentType.CONSERVATIVE
    if np.any(ks > tol):
        return AgentType.RADICAL
    return AgentType.BOUNDARY


@dataclass(frozen=True)
class StructureReport:
    """Everything the classification of one structure is derived from."""

    h: dict
    k: dict
    agent_type: AgentType
    most_indistinguishable: int
    learned_state: int
    perfect: bool


def describe_structure(
    g: WorldSignalStructure, L: PrivateSignalStructure, r: int, tol: float = CLASSIFY_TOL
) -> StructureReport:
    others = [m for m in range(L.n_states) if m != r]
    return StructureReport(
        h={m: h_g(g, L, m, r) for m in others},
        k={m: k_g(g, L, m, r) for m in others},
        agent_type=classify_structure(g, L, r, tol),
        most_indistinguishable=most_indistinguishable_state(g, L, r),
        learned_state=learned_state(g, L),
        perfect=is_perfect(g, L, r),
    )


@dataclass(frozen=True)
class GridSpec:
    """Uniform lattice from lo to hi inclusive with count points per axis."""

    lo: float = 0.02
    hi: float = 0.98
    count: int = 25

    def __post_init__(self):
        if self.count < 1:
            raise DomainError(f"grid count must be at least 1, got {self.count}")
        if not (0.0 < self.lo < 1.0 and 0.0 < self.hi < 1.0):
            raise DomainError(f"grid bounds must lie inside (0, 1), got [{self.lo}, {self.hi}]")
        if self.lo > self.hi or (self.count == 1 and self.lo != self.hi):
            raise DomainError(f"invalid grid [{self.lo}, {self.hi}] with {self.count} points")

    def values(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.count)


@dataclass(frozen=True)
class RegionCell:
    i: int
    j: int
    alpha: float
    beta: float
    h: float
    k: float
    agent_type: AgentType


@dataclass(frozen=True)
class RegionGrid:
    """Classification of every (alpha, beta) lattice point, ordered alpha-major."""

    grid_spec: GridSpec
    g: WorldSignalStructure
    cells: tuple

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "alpha": [c.alpha for c in self.cells],
                "beta": [c.beta for c in self.cells],
                "h": [c.h for c in self.cells],
                "k": [c.k for c in self.cells],
                "type": [c.agent_type.value for c in self.cells],
            }
        )

    def counts(self) -> dict:
        counts = {t: 0 for t in AgentType}
        for cell in self.cells:
            counts[cell.agent_type] += 1
        return counts

    def _map(self, attr: str) -> np.ndarray:
        n = self.grid_spec.count
        out = np.empty((n, n))
        for cell in self.cells:
            out[cell.i, cell.j] = getattr(cell, attr)
        return out

    @property
    def h_map(self) -> np.ndarray:
        """h values indexed [alpha_index, beta_index]; its zero set is the observational-equivalence curve."""
        return self._map("h")

    @property
    def k_map(self) -> np.ndarray:
        return self._map("k")

    def map_frame(self, which: str) -> pd.DataFrame:
        """The h or k map as a table: one row per alpha, one `beta=<value>` column per beta."""
        if which not in ("h", "k"):
            raise DomainError(f"map must be 'h' or 'k', got {which!r}")
        axis = self.grid_spec.values()
        frame = pd.DataFrame(self._map(which), columns=[f"beta={b:.6g}" for b in axis])
        frame.insert(0, "alpha", axis)
        return frame

    def cell(self, alpha: float, beta: float) -> Optional[RegionCell]:
        """Cell whose coordinates match (alpha, beta) to 1e-9, if any."""
        for c in self.cells:
            if abs(c.alpha - alpha) < 1e-9 and abs(c.beta - beta) < 1e-9:
                return c
        return None


def region_sweep(
    g: WorldSignalStructure, grid_spec: GridSpec = GridSpec(), r: int = 0, tol: float = CLASSIFY_TOL
) -> RegionGrid:
    """
    Evaluates h_g, k_g and the classification of the binary structure at every
    lattice point of the alpha-beta square.
    """
    if g.n_signals != 2:
        raise DomainError(f"region sweeps need a binary world structure, got {g.n_signals} signals")
    axis = grid_spec.values()
    m = 1 - r
    cells = []
    for i, alpha in enumerate(axis):
        for j, beta in enumerate(axis):
            L = make_binary_structure(float(alpha), float(beta))
            cells.append(
                RegionCell(
                    i=i,
                    j=j,
                    alpha=float(alpha),
                    beta=float(beta),
                    h=h_g(g, L, m, r),
                    k=k_g(g, L, m, r),
                    agent_type=classify_structure(g, L, r, tol),
                )
            )
    grid = RegionGrid(grid_spec=grid_spec, g=g, cells=tuple(cells))
    logger.debug(f"Region sweep over {len(cells)} cells: {grid.counts()}")
    return grid
