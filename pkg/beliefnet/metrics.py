"""
Convergence and learning-speed measurements, plus exact analytic diagnostics:
the expected truth ratio (a submartingale test for conservative agents) and the
consensus drift function whose slope at zero separates radical agents.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy import optimize

from beliefnet.config import DEFAULT_SETTINGS
from beliefnet.core import BeliefProfile, PrivateSignalStructure, WorldSignalStructure
from beliefnet.dynamics import Trajectory
from beliefnet.errors import DomainError, HypothesisViolation

logger = logging.getLogger(__name__)

Beliefs = Union[np.ndarray, Sequence[BeliefProfile]]

_DRIFT_LO = 1e-9
_DRIFT_LO_FLOOR = 1e-300
_BISECT_MAXITER = 2000


def _as_matrix(beliefs: Beliefs) -> np.ndarray:
    if isinstance(beliefs, np.ndarray):
        B = beliefs
    else:
        B = np.stack([mu.beliefs if isinstance(mu, BeliefProfile) else np.asarray(mu, dtype=np.float64) for mu in beliefs])
    if B.ndim != 2 or B.shape[0] < 1:
        raise DomainError(f"expected a non-empty n x M belief matrix, got shape {B.shape}")
    return B


def belief_uncertainty(beliefs: Beliefs, r: int) -> float:
    """
    e_t = 1/2 sum_i ||mu_i - 1_r||_1, computed as the total mass off the real
    state so that tiny values keep full precision.
    """
    B = _as_matrix(beliefs)
    if not 0 <= r < B.shape[1]:
        raise DomainError(f"real state index {r} outside [0, {B.shape[1]})")
    return float(np.delete(B, r, axis=1).sum())


def consensus_gap(beliefs: Beliefs) -> float:
    """Largest L1 distance between the profiles of any two agents."""
    B = _as_matrix(beliefs)
    distances = np.abs(B[:, None, :] - B[None, :, :]).sum(axis=2)
    return float(distances.max())


@dataclass(frozen=True, eq=False)
class MetricSeries:
    """Per-step network metrics of one run."""

    t: np.ndarray
    e_t: np.ndarray
    consensus_gap: np.ndarray
    mean_truth_belief: np.ndarray
    min_truth_belief: np.ndarray

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "t": self.t,
                "e_t": self.e_t,
                "consensus_gap": self.consensus_gap,
                "mean_truth_belief": self.mean_truth_belief,
                "min_truth_belief": self.min_truth_belief,
            }
        )

    def at(self, t: int) -> int:
        """Row index of step t."""
        hits = np.flatnonzero(self.t == t)
        if hits.size == 0:
            raise DomainError(f"step {t} was not recorded")
        return int(hits[0])

    @classmethod
    def from_values(cls, t: Sequence[int], e_t: Sequence[float]) -> "MetricSeries":
        """Series carrying only e_t, for feeding synthetic curves to the estimators."""
        t = np.asarray(t, dtype=np.int64)
        nan = np.full(t.size, np.nan)
        return cls(t=t, e_t=np.asarray(e_t, dtype=np.float64), consensus_gap=nan, mean_truth_belief=nan, min_truth_belief=nan)


def metric_series(trajectory: Trajectory, r: int) -> MetricSeries:
    rows = []
    for state in trajectory.states:
        B = state.beliefs
        truth = B[:, r]
        rows.append((state.t, belief_uncertainty(B, r), consensus_gap(B), float(truth.mean()), float(truth.min())))
    t, e_t, gap, mean_truth, min_truth = (np.array(column) for column in zip(*rows))
    return MetricSeries(
        t=t.astype(np.int64), e_t=e_t, consensus_gap=gap, mean_truth_belief=mean_truth, min_truth_belief=min_truth
    )


@dataclass(frozen=True)
class LearningRateEstimate:
    """
    Finite-horizon estimates of the learning rate.

    endpoint is |ln e_T| / T; slope is the least-squares slope of |ln e_t|
    against t over the window. converged_exactly marks a window where e_t hit 0,
    in which case both estimates are +inf.
    """

    endpoint: float
    slope: float
    t_lo: int
    t_hi: int
    converged_exactly: bool = False


def learning_rate_estimate(series: MetricSeries, window: Optional[Tuple[int, int]] = None) -> LearningRateEstimate:
    t_lo, t_hi = window if window is not None else (int(series.t[0]), int(series.t[-1]))
    if t_hi <= 0 or t_lo > t_hi:
        raise DomainError(f"invalid learning-rate window ({t_lo}, {t_hi})")
    mask = (series.t >= t_lo) & (series.t <= t_hi)
    t = series.t[mask].astype(np.float64)
    e = series.e_t[mask]
    if t.size == 0 or t[-1] != t_hi:
        raise DomainError(f"window end {t_hi} was not recorded")
    if np.any(e <= 0.0):
        return LearningRateEstimate(endpoint=math.inf, slope=math.inf, t_lo=t_lo, t_hi=t_hi, converged_exactly=True)

    magnitude = np.abs(np.log(e))
    endpoint = float(magnitude[-1] / t_hi)
    slope = float(np.polyfit(t, magnitude, 1)[0]) if t.size >= 2 else math.nan
    return LearningRateEstimate(endpoint=endpoint, slope=slope, t_lo=t_lo, t_hi=t_hi)


def learning_rate_bound(gamma: float, v, k_values) -> float:
    """
    Upper bound gamma * min_m sum_i v_i |k_i(m)| on the learning rate of a
    conservative network.

    Args:
        gamma (float): common self-reliance in [0, 1]
        v: left unit eigenvector of the influence matrix
        k_values: n x (number of alternative states) matrix of k_g values, or a
            length-n vector when there is a single alternative

    Raises:
        HypothesisViolation: some k_g >= 0, i.e. a non-conservative agent.
    """
    if not 0.0 <= gamma <= 1.0:
        raise DomainError(f"gamma must lie in [0, 1], got {gamma}")
    v = np.asarray(v, dtype=np.float64)
    k = np.asarray(k_values, dtype=np.float64)
    if k.ndim == 1:
        k = k[:, None]
    if k.shape[0] != v.size:
        raise DomainError(f"{v.size} eigenvector entries for {k.shape[0]} agents")
    offending = np.argwhere(k >= 0.0)
    if offending.size:
        rows = [{"agent": int(i), "alternative": int(m), "k": float(k[i, m])} for i, m in offending]
        raise HypothesisViolation("learning-rate bound holds for conservative agents only", rows=rows)
    return float(gamma * np.min(v @ np.abs(k)))


def expected_truth_ratio(
    g: WorldSignalStructure, L: PrivateSignalStructure, mu: BeliefProfile, r: int
) -> float:
    """E[l^r(s) / d(s)] under s ~ g, an exact finite sum over signals."""
    if g.n_signals != L.n_signals or mu.n_states != L.n_states:
        raise DomainError("world structure, private structure and belief dimensions disagree")
    forecast = L.likelihoods @ mu.beliefs
    return float(np.dot(g.probabilities, L.column(r) / forecast))


def _drift(g: WorldSignalStructure, L: PrivateSignalStructure, r: int, m_hat: int, epsilon: float) -> float:
    # sum_s g(s) = 1 folds the trailing "- 1" into each term
    ratio = L.column(m_hat) / L.column(r)
    return float(epsilon * np.dot(g.probabilities, (1.0 - ratio) / (1.0 - epsilon + epsilon * ratio)))


def consensus_drift(
    g: WorldSignalStructure, L: PrivateSignalStructure, r: int, m_hat: int, epsilon: float
) -> Tuple[float, float]:
    """
    Drift f(epsilon) = sum_s g(s) / (1 - epsilon + epsilon l^m(s)/l^r(s)) - 1
    of the real-state belief near consensus on it, and its slope
    f'(0) = 1 - sum_s g(s) l^m(s)/l^r(s).
    """
    if m_hat == r:
        raise DomainError(f"alternative state must differ from the real state {r}")
    if not 0.0 <= epsilon < 1.0:
        raise DomainError(f"epsilon must lie in [0, 1), got {epsilon}")
    slope = float(np.dot(g.probabilities, 1.0 - L.column(m_hat) / L.column(r)))
    return _drift(g, L, r, m_hat, epsilon), slope


def drift_negativity_end(
    g: WorldSignalStructure,
    L: PrivateSignalStructure,
    r: int,
    m_hat: int,
    tol: float = DEFAULT_SETTINGS.bisection_tol,
) -> float:
    """
    Right end c of the interval (0, c) on which the drift is negative, by
    bisection on [lo, 1].

    lo starts at 1e-9 and shrinks by decades while the drift there is not yet
    negative, so radical structures with k barely above the classification
    tolerance still get their root. The root is located to relative
    precision tol.

    Raises:
        DomainError: the drift is not negative just above zero, or never turns
        positive on (0, 1].
    """
    _, slope = consensus_drift(g, L, r, m_hat, 0.0)
    if slope >= 0.0:
        raise DomainError(f"drift is not negative near zero (f'(0) = {slope})")
    lo, hi = _DRIFT_LO, 1.0
    f_lo = _drift(g, L, r, m_hat, lo)
    while f_lo >= 0.0 and lo > _DRIFT_LO_FLOOR:
        lo *= 0.1
        f_lo = _drift(g, L, r, m_hat, lo)
    if f_lo >= 0.0:
        raise DomainError(f"drift is not negative near zero (f({lo}) = {f_lo})")
    f_hi = _drift(g, L, r, m_hat, hi)
    if f_hi <= 0.0:
        raise DomainError(f"drift stays negative up to 1 (f(1) = {f_hi})")
    return float(
        optimize.bisect(
            lambda eps: _drift(g, L, r, m_hat, eps),
            lo,
            hi,
            xtol=lo * tol,
            rtol=max(tol, 4 * np.finfo(float).eps),
            maxiter=_BISECT_MAXITER,
        )
    )
