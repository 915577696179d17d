import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from beliefnet.classify import classify_structure, k_g
from beliefnet.core import AgentType, BeliefProfile, WorldSignalStructure, make_binary_structure
from beliefnet.dynamics import AgentSpec, initial_beliefs, make_stream, run
from beliefnet.errors import DomainError, HypothesisViolation
from beliefnet.metrics import (
    MetricSeries,
    belief_uncertainty,
    consensus_drift,
    consensus_gap,
    drift_negativity_end,
    expected_truth_ratio,
    learning_rate_bound,
    learning_rate_estimate,
    metric_series,
)
from beliefnet.topology import generate_er, left_unit_eigenvector, uniform_influence


def _sample_structures(rng, world, wanted, count):
    """Rejection-samples binary structures of the wanted type."""
    out = []
    while len(out) < count:
        alpha, beta = rng.uniform(0.01, 0.99, size=2)
        L = make_binary_structure(float(alpha), float(beta))
        if classify_structure(world, L, 0) is wanted:
            out.append(L)
    return out


class TestBeliefUncertainty:
    def test_values(self):
        B = np.array([[1.0, 0.0], [0.5, 0.5], [0.25, 0.75]])
        assert belief_uncertainty(B, 0) == pytest.approx(1.25)
        assert belief_uncertainty(B, 1) == pytest.approx(1.75)

    def test_consensus_on_truth(self):
        assert belief_uncertainty([BeliefProfile.point_mass(3, 2)] * 4, 2) == 0.0

    def test_keeps_tiny_values(self):
        B = np.array([[1.0 - 1e-20, 1e-20]])
        assert belief_uncertainty(B, 0) == 1e-20

    def test_bad_index(self):
        with pytest.raises(DomainError):
            belief_uncertainty(np.array([[0.5, 0.5]]), 2)


def test_consensus_gap():
    assert consensus_gap(np.array([[1.0, 0.0], [0.5, 0.5], [0.0, 1.0]])) == pytest.approx(2.0)
    assert consensus_gap(np.array([[0.3, 0.7]] * 3)) == 0.0


def test_metric_series(world, conservative, triangle):
    specs = [AgentSpec(conservative, world, BeliefProfile(np.array([p, 1 - p]))) for p in (0.2, 0.5, 0.8)]
    trajectory = run(specs, uniform_influence(triangle, 0.5), 20, seed=4, record_every=5)
    series = metric_series(trajectory, 0)
    assert series.t.tolist() == [0, 5, 10, 15, 20]
    assert series.e_t[0] == pytest.approx(0.8 + 0.5 + 0.2)
    assert series.min_truth_belief[0] == pytest.approx(0.2)
    assert series.at(10) == 2
    with pytest.raises(DomainError):
        series.at(11)
    assert list(series.to_frame().columns) == ["t", "e_t", "consensus_gap", "mean_truth_belief", "min_truth_belief"]


class TestLearningRateEstimate:
    def test_exponential_decay(self):
        t = np.arange(0, 101)
        estimate = learning_rate_estimate(MetricSeries.from_values(t, 0.5 * np.exp(-0.1 * t)))
        assert estimate.slope == pytest.approx(0.1, rel=1e-6)
        assert estimate.endpoint == pytest.approx((math.log(2.0) + 10.0) / 100)
        assert not estimate.converged_exactly

    def test_window(self):
        t = np.arange(0, 101)
        estimate = learning_rate_estimate(MetricSeries.from_values(t, np.exp(-0.2 * t)), window=(50, 80))
        assert (estimate.t_lo, estimate.t_hi) == (50, 80)
        assert estimate.endpoint == pytest.approx(0.2)

    def test_exact_convergence(self):
        estimate = learning_rate_estimate(MetricSeries.from_values([0, 1, 2], [1.0, 0.5, 0.0]))
        assert estimate.converged_exactly
        assert estimate.endpoint == math.inf

    def test_unrecorded_end(self):
        with pytest.raises(DomainError):
            learning_rate_estimate(MetricSeries.from_values([0, 10, 20], [1.0, 0.5, 0.2]), window=(0, 15))

    def test_zero_horizon(self):
        with pytest.raises(DomainError):
            learning_rate_estimate(MetricSeries.from_values([0], [1.0]))


class TestLearningRateBound:
    def test_uniform_population(self):
        k = k_g(WorldSignalStructure.binary(0.8), make_binary_structure(0.6, 0.4), 1, 0)
        v = np.full(10, 0.1)
        assert learning_rate_bound(0.5, v, np.full(10, k)) == pytest.approx(0.0912, abs=5e-5)

    def test_zero_gamma(self):
        assert learning_rate_bound(0.0, [0.5, 0.5], [-0.2, -0.3]) == 0.0

    def test_minimum_over_alternatives(self):
        v = np.array([0.25, 0.75])
        k = np.array([[-0.2, -0.4], [-0.1, -0.8]])
        assert learning_rate_bound(1.0, v, k) == pytest.approx(min(0.05 + 0.075, 0.1 + 0.6))

    def test_non_conservative(self):
        with pytest.raises(HypothesisViolation) as info:
            learning_rate_bound(0.5, [0.5, 0.5], [-0.2, 0.636])
        assert info.value.rows == [{"agent": 1, "alternative": 0, "k": 0.636}]

    def test_length_mismatch(self):
        with pytest.raises(DomainError):
            learning_rate_bound(0.5, [1.0], [-0.2, -0.2])


class TestExpectedTruthRatio:
    def test_conservative_structures_push_toward_truth(self, world):
        rng = np.random.default_rng(1)
        for L in _sample_structures(rng, world, AgentType.CONSERVATIVE, 1000):
            for first in rng.uniform(1e-6, 1 - 1e-6, size=10):
                mu = BeliefProfile(np.array([first, 1.0 - first]))
                assert expected_truth_ratio(world, L, mu, 0) > 1.0

    def test_consensus_on_truth(self, world, radical):
        assert expected_truth_ratio(world, radical, BeliefProfile.point_mass(2, 0), 0) == pytest.approx(1.0)

    def test_dimension_mismatch(self, world, conservative):
        with pytest.raises(DomainError):
            expected_truth_ratio(world, conservative, BeliefProfile.uniform(3), 0)


class TestConsensusDrift:
    def test_slope_is_one_minus_exp_k(self, world, radical):
        _, slope = consensus_drift(world, radical, 0, 1, 0.0)
        assert slope == pytest.approx(1.0 - math.exp(k_g(world, radical, 1, 0)))

    def test_drift_vanishes_at_zero(self, world, radical):
        f, _ = consensus_drift(world, radical, 0, 1, 0.0)
        assert f == pytest.approx(0.0, abs=1e-15)

    def test_radical_structures_repel_near_consensus(self, world):
        rng = np.random.default_rng(2)
        for L in _sample_structures(rng, world, AgentType.RADICAL, 1000):
            _, slope = consensus_drift(world, L, 0, 1, 0.0)
            assert slope < 0.0
            c = drift_negativity_end(world, L, 0, 1)
            assert c > 0.0
            f, _ = consensus_drift(world, L, 0, 1, c / 2)
            assert f < 0.0

    @pytest.mark.parametrize("delta", [1e-8, 5e-9, 2e-9, 5e-10])
    def test_barely_radical_structures(self, world, delta):
        L = make_binary_structure(0.8 + delta, 0.2)
        assert classify_structure(world, L, 0) is AgentType.RADICAL
        # with two signals the root of sum_s g(s) a(s) / (1 - c a(s)) has a closed form
        a = 1.0 - L.column(1) / L.column(0)
        expected = float(np.dot(world.probabilities, a) / (a[0] * a[1]))
        c = drift_negativity_end(world, L, 0, 1)
        assert c == pytest.approx(expected, rel=1e-5)
        f, _ = consensus_drift(world, L, 0, 1, c / 2)
        assert f < 0.0

    def test_drift_keeps_precision_for_small_epsilon(self, world):
        L = make_binary_structure(0.8 + 1e-8, 0.2)
        f, slope = consensus_drift(world, L, 0, 1, 1e-9)
        assert f < 0.0
        assert f == pytest.approx(1e-9 * slope, rel=0.1)

    def test_conservative_drift_not_negative(self, world, conservative):
        with pytest.raises(DomainError):
            drift_negativity_end(world, conservative, 0, 1)

    @pytest.mark.parametrize("m_hat,epsilon", [(0, 0.1), (1, 1.0), (1, -0.1)])
    def test_preconditions(self, world, radical, m_hat, epsilon):
        with pytest.raises(DomainError):
            consensus_drift(world, radical, 0, m_hat, epsilon)


@given(st.lists(st.floats(min_value=0.0, max_value=1.0), min_size=1, max_size=20))
def test_uncertainty_bounds(firsts):
    B = np.array([[p, 1.0 - p] for p in firsts])
    e = belief_uncertainty(B, 0)
    assert 0.0 <= e <= len(firsts) + 1e-12


@pytest.mark.slow
def test_conservative_networks_respect_learning_rate_bound(world):
    rng = np.random.default_rng(5)
    for trial in range(20):
        gamma = (0.3, 0.5, 0.9)[trial % 3]
        structures = [
            make_binary_structure(float(a), float(b))
            for a, b in zip(rng.uniform(0.5, 0.7, size=50), rng.uniform(0.35, 0.5, size=50))
        ]
        net = generate_er(50, 0.2, seed=trial)
        A = uniform_influence(net, gamma)
        v = left_unit_eigenvector(A)
        k = np.array([k_g(world, L, 1, 0) for L in structures])
        bound = learning_rate_bound(gamma, v, k)

        beliefs = initial_beliefs(50, 2, make_stream(trial, 0, 2))
        specs = [AgentSpec(L, world, mu) for L, mu in zip(structures, beliefs)]
        series = metric_series(run(specs, A, 500, seed=trial, record_every=50), 0)
        estimate = learning_rate_estimate(series)
        assert estimate.endpoint <= bound + 0.05
