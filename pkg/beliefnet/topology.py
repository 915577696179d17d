"""
Social networks, their influence matrices and the left unit eigenvector.

Edge convention: (j, i) is a directed edge j -> i, meaning agent j's belief is
visible to agent i, so j belongs to the neighbor set N_i.
"""

import logging
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence, Union

import networkx as nx
import numpy as np
from tenacity import RetryError, Retrying, after_log, retry_if_exception_type, stop_after_attempt

from beliefnet.config import DEFAULT_SETTINGS
from beliefnet.core import validate_influence_row
from beliefnet.errors import (
    BeliefNetError,
    ConvergenceError,
    DomainError,
    GenerationError,
    SupportViolation,
    ValidationError,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Network:
    """Directed graph over agents 0..n-1 without self-loops."""

    n: int
    edges: frozenset

    def __post_init__(self):
        if self.n < 1:
            raise ValidationError(f"a network needs at least one agent, got {self.n}", parameter="n")
        edges = frozenset((int(j), int(i)) for j, i in self.edges)
        for j, i in edges:
            if j == i:
                raise ValidationError(f"self-loop on agent {i}", parameter="edges")
            if not (0 <= j < self.n and 0 <= i < self.n):
                raise ValidationError(f"edge {j}->{i} outside agents 0..{self.n - 1}", parameter="edges")
        object.__setattr__(self, "edges", edges)
        neighbors = [[] for _ in range(self.n)]
        for j, i in sorted(edges):
            neighbors[i].append(j)
        object.__setattr__(self, "_neighbors", tuple(tuple(sorted(nbrs)) for nbrs in neighbors))

    @property
    def neighbor_sets(self) -> tuple:
        """N_i for every agent i, each sorted ascending."""
        return self._neighbors

    def neighbors(self, i: int) -> tuple:
        return self._neighbors[i]

    @property
    def undirected_edge_count(self) -> int:
        return len({frozenset(edge) for edge in self.edges})

    def to_networkx(self) -> nx.DiGraph:
        graph = nx.DiGraph()
        graph.add_nodes_from(range(self.n))
        graph.add_edges_from(self.edges)
        return graph

    def relabel(self, permutation: Sequence[int]) -> "Network":
        """Network with agent i renamed to permutation[i]."""
        return Network(self.n, frozenset((permutation[j], permutation[i]) for j, i in self.edges))

    @classmethod
    def from_undirected(cls, n: int, pairs) -> "Network":
        edges = set()
        for a, b in pairs:
            edges.add((a, b))
            edges.add((b, a))
        return cls(n, frozenset(edges))


def format_edge_list(net: Network) -> str:
    """Header `n=<count>` then one `j i` line per directed edge, sorted."""
    lines = [f"n={net.n}"]
    lines.extend(f"{j} {i}" for j, i in sorted(net.edges))
    return "\n".join(lines) + "\n"


def parse_edge_list(text: str) -> Network:
    lines = [line.strip() for line in text.splitlines() if line.strip()]
    if not lines or not lines[0].startswith("n="):
        raise ValidationError("edge list must start with an n=<count> header", parameter="edges")
    try:
        n = int(lines[0][2:])
        edges = [tuple(int(token) for token in line.split()) for line in lines[1:]]
    except ValueError as e:
        raise ValidationError(f"malformed edge list: {e}", parameter="edges") from e
    if any(len(edge) != 2 for edge in edges):
        raise ValidationError("every edge line needs exactly two agent indices", parameter="edges")
    return Network(n, frozenset(edges))


def is_strongly_connected(net: Network) -> bool:
    """Forward and reverse reachability from agent 0 both cover every agent."""
    if net.n <= 1:
        return True
    graph = net.to_networkx()
    forward = nx.descendants(graph, 0)
    backward = nx.descendants(graph.reverse(copy=False), 0)
    return len(forward) == net.n - 1 and len(backward) == net.n - 1


class _Disconnected(Exception):
    pass


def _draw_er(n: int, p: float, rng: np.random.Generator) -> Network:
    rows, cols = np.triu_indices(n, k=1)
    keep = rng.random(rows.size) < p
    return Network.from_undirected(n, zip(rows[keep].tolist(), cols[keep].tolist()))


def generate_er(
    n: int, p: float, seed: int, max_retries: int = DEFAULT_SETTINGS.max_retries
) -> Network:
    """
    Undirected Erdos-Renyi graph G(n, p), redrawn until connected.

    Each unordered pair (a, b), a < b, is visited in row-major order and kept
    when its uniform draw falls below p; both directed edges are added. Redraws
    continue on the same PCG64 stream, so the result depends only on (n, p, seed).

    Raises:
        GenerationError: no connected draw within max_retries attempts.
    """
    if n < 1:
        raise DomainError(f"agent count must be positive, got {n}")
    if not 0.0 < p <= 1.0:
        raise DomainError(f"edge probability must lie in (0, 1], got {p}")
    if max_retries < 1:
        raise DomainError(f"max_retries must be positive, got {max_retries}")
    if n == 1:
        return Network(1, frozenset())

    rng = np.random.default_rng(seed)
    retrying = Retrying(
        stop=stop_after_attempt(max_retries),
        retry=retry_if_exception_type(_Disconnected),
        after=after_log(logger, logging.DEBUG),
    )
    try:
        for attempt in retrying:
            with attempt:
                net = _draw_er(n, p, rng)
                if not is_strongly_connected(net):
                    raise _Disconnected()
    except RetryError as e:
        raise GenerationError(
            f"no connected ER({n}, {p}) draw after {max_retries} attempts",
            attempts=e.last_attempt.attempt_number,
            seed=seed,
        ) from None

    attempts = attempt.retry_state.attempt_number
    logger.info(f"Generated connected ER({n}, {p}) network with {net.undirected_edge_count} edges after {attempts} draw(s)")
    return net


@dataclass(frozen=True, eq=False)
class InfluenceMatrix:
    """Row-stochastic weight matrix with strictly positive diagonal."""

    weights: np.ndarray

    def __post_init__(self):
        W = np.array(self.weights, dtype=np.float64)
        if W.ndim != 2 or W.shape[0] != W.shape[1] or W.shape[0] < 1:
            raise ValidationError(f"influence matrix must be square, got shape {W.shape}", parameter="weights")
        for i in range(W.shape[0]):
            try:
                validate_influence_row(W[i], i)
            except BeliefNetError as e:
                raise e.with_context(agent=i)
        W.setflags(write=False)
        object.__setattr__(self, "weights", W)

    @property
    def size(self) -> int:
        return self.weights.shape[0]

    @property
    def self_reliance(self) -> np.ndarray:
        return np.diag(self.weights)

    def row(self, i: int) -> np.ndarray:
        return self.weights[i]

    def is_irreducible(self) -> bool:
        graph = nx.from_numpy_array(self.weights > 0.0, create_using=nx.DiGraph)
        return nx.is_strongly_connected(graph)


def uniform_influence(net: Network, gamma: float) -> InfluenceMatrix:
    """Self weight gamma, the remaining 1 - gamma split evenly over N_i."""
    if not 0.0 < gamma <= 1.0:
        raise DomainError(f"self-reliance gamma must lie in (0, 1], got {gamma}")
    W = np.zeros((net.n, net.n))
    for i, nbrs in enumerate(net.neighbor_sets):
        W[i, i] = gamma
        if not nbrs:
            if gamma < 1.0:
                raise DomainError(f"agent {i} has no neighbors but gamma = {gamma} < 1", agent=i)
            continue
        W[i, list(nbrs)] = (1.0 - gamma) / len(nbrs)
    return InfluenceMatrix(W)


RowSpec = Union[Sequence[float], Mapping[int, float]]


def general_influence(net: Network, rows: Sequence[RowSpec]) -> InfluenceMatrix:
    """
    Assembles an influence matrix from per-agent rows.

    Args:
        net (Network): the network whose neighbor sets bound each row's support
        rows: one entry per agent, either a dense vector of length n or a
            mapping {agent_index: weight} listing the non-zero weights

    Raises:
        SelfRelianceViolation, StochasticityViolation, SupportViolation: with
        the offending agent index in the error context.
    """
    if len(rows) != net.n:
        raise DomainError(f"expected {net.n} rows, got {len(rows)}")
    W = np.zeros((net.n, net.n))
    for i, row in enumerate(rows):
        if isinstance(row, Mapping):
            for j, weight in row.items():
                if not 0 <= int(j) < net.n:
                    raise DomainError(f"row {i} references agent {j} outside the network", agent=i)
                W[i, int(j)] = weight
        else:
            dense = np.asarray(row, dtype=np.float64)
            if dense.shape != (net.n,):
                raise DomainError(f"row {i} has length {dense.size}, expected {net.n}", agent=i)
            W[i] = dense

        try:
            validate_influence_row(W[i], i)
        except BeliefNetError as e:
            raise e.with_context(agent=i)
        allowed = set(net.neighbors(i)) | {i}
        for j in np.flatnonzero(W[i]):
            if int(j) not in allowed:
                raise SupportViolation(
                    f"agent {i} puts weight {W[i, j]} on non-neighbor {j}", parameter="weights", agent=i, neighbor=int(j)
                )
    return InfluenceMatrix(W)


def left_unit_eigenvector(
    A: InfluenceMatrix,
    tol: float = DEFAULT_SETTINGS.eig_tol,
    max_iter: int = DEFAULT_SETTINGS.eig_max_iter,
    start: Optional[np.ndarray] = None,
) -> np.ndarray:
    """
    Probability vector v with v A = v, by power iteration on the left.

    Raises:
        ConvergenceError: A is reducible (the unit eigenvector is not unique),
        or the residual ||v A - v||_1 stays above tol for max_iter iterations.
    """
    if not A.is_irreducible():
        raise ConvergenceError("influence matrix is reducible; its unit left eigenvector is not unique", iterations=0, residual=float("nan"))

    W = A.weights
    v = np.full(A.size, 1.0 / A.size) if start is None else np.asarray(start, dtype=np.float64) / np.sum(start)
    residual = float("inf")
    for iteration in range(1, max_iter + 1):
        nxt = v @ W
        nxt /= nxt.sum()
        residual = float(np.abs(nxt @ W - nxt).sum())
        v = nxt
        if residual <= tol:
            logger.debug(f"Left eigenvector converged after {iteration} iterations (residual {residual:.3e})")
            return v
    raise ConvergenceError(
        f"power iteration did not reach tolerance {tol}", iterations=max_iter, residual=residual
    )
