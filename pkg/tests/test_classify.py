import math

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from beliefnet.classify import (
    GridSpec,
    classify_structure,
    describe_structure,
    h_g,
    is_perfect,
    is_positive,
    k_g,
    learned_state,
    most_indistinguishable_state,
    region_sweep,
    relative_entropies,
    relative_entropy,
)
from beliefnet.core import AgentType, PrivateSignalStructure, WorldSignalStructure, make_binary_structure
from beliefnet.errors import DomainError

open_unit = st.floats(min_value=0.01, max_value=0.99, allow_nan=False)

# Constant signal structures against g = [0.8, 0.2]: (alpha, beta, h, k, type)
GOLDEN = [
    (0.6, 0.4, -0.2433, -0.1823, AgentType.CONSERVATIVE),
    (0.9, 0.1, -1.3183, 0.6360, AgentType.RADICAL),
    (0.4, 0.6, 0.2433, 0.2877, AgentType.NEGATIVE),
]


@pytest.mark.parametrize("alpha,beta,h,k,agent_type", GOLDEN)
def test_golden_structures(world, alpha, beta, h, k, agent_type):
    L = make_binary_structure(alpha, beta)
    assert h_g(world, L, 1, 0) == pytest.approx(h, abs=5e-5)
    assert k_g(world, L, 1, 0) == pytest.approx(k, abs=5e-5)
    assert classify_structure(world, L, 0) is agent_type


def test_identical_columns_are_boundary(world):
    L = make_binary_structure(0.5, 0.5)
    assert h_g(world, L, 1, 0) == 0.0
    assert k_g(world, L, 1, 0) == 0.0
    assert classify_structure(world, L, 0) is AgentType.BOUNDARY


def test_perfect_structure_is_boundary(world):
    L = make_binary_structure(0.8, 0.3)
    assert is_perfect(world, L, 0)
    assert abs(k_g(world, L, 1, 0)) < 1e-12
    assert classify_structure(world, L, 0) is AgentType.BOUNDARY


def test_observational_equivalence_is_boundary():
    # columns (0.8, 0.2) and (0.2, 0.8) are equally far from g = [0.5, 0.5]
    g = WorldSignalStructure.binary(0.5)
    L = make_binary_structure(0.8, 0.2)
    assert abs(h_g(g, L, 1, 0)) < 1e-12
    assert classify_structure(g, L, 0) is AgentType.BOUNDARY


def test_pair_preconditions(world, conservative):
    with pytest.raises(DomainError):
        h_g(world, conservative, 0, 0)
    with pytest.raises(DomainError):
        k_g(world, conservative, 2, 0)
    with pytest.raises(DomainError):
        h_g(WorldSignalStructure(np.array([0.5, 0.3, 0.2])), conservative, 1, 0)


def test_tolerance_must_be_positive(world, conservative):
    with pytest.raises(DomainError):
        classify_structure(world, conservative, 0, tol=0.0)


@given(open_unit, open_unit, open_unit)
def test_h_antisymmetric(g_high, alpha, beta):
    g = WorldSignalStructure.binary(g_high)
    L = make_binary_structure(alpha, beta)
    assert h_g(g, L, 1, 0) == -h_g(g, L, 0, 1)


@given(open_unit, open_unit, open_unit)
def test_k_dominates_h(g_high, alpha, beta):
    g = WorldSignalStructure.binary(g_high)
    L = make_binary_structure(alpha, beta)
    assert k_g(g, L, 1, 0) >= h_g(g, L, 1, 0) - 1e-12


@given(open_unit, open_unit, open_unit)
def test_h_is_difference_of_relative_entropies(g_high, alpha, beta):
    g = WorldSignalStructure.binary(g_high)
    L = make_binary_structure(alpha, beta)
    divergences = relative_entropies(g, L)
    assert h_g(g, L, 1, 0) == pytest.approx(divergences[0] - divergences[1], abs=1e-12)


@given(open_unit, open_unit, open_unit)
def test_classification_matches_signs(g_high, alpha, beta):
    g = WorldSignalStructure.binary(g_high)
    L = make_binary_structure(alpha, beta)
    h, k = h_g(g, L, 1, 0), k_g(g, L, 1, 0)
    assume(abs(h) > 1e-6 and abs(k) > 1e-6)
    agent_type = classify_structure(g, L, 0)
    if h > 0:
        assert agent_type is AgentType.NEGATIVE
    elif k < 0:
        assert agent_type is AgentType.CONSERVATIVE
    else:
        assert agent_type is AgentType.RADICAL


def test_relative_entropy():
    assert relative_entropy([0.5, 0.5], [0.5, 0.5]) == 0.0
    assert relative_entropy([0.8, 0.2], [0.5, 0.5]) == pytest.approx(0.8 * math.log(1.6) + 0.2 * math.log(0.4))
    with pytest.raises(DomainError):
        relative_entropy([1.0], [0.5, 0.5])


def test_learned_state(world, conservative, radical, negative):
    assert learned_state(world, conservative) == 0
    assert learned_state(world, radical) == 0
    assert learned_state(world, negative) == 1


def test_is_positive(world, conservative, radical, negative):
    assert is_positive(world, conservative, 0)
    assert is_positive(world, radical, 0)
    assert not is_positive(world, negative, 0)


def test_most_indistinguishable_state_three_states():
    g = WorldSignalStructure(np.array([0.5, 0.3, 0.2]))
    L = PrivateSignalStructure(
        np.array(
            [
                [0.6, 0.5, 0.1],
                [0.3, 0.3, 0.3],
                [0.1, 0.2, 0.6],
            ]
        )
    )
    ks = {m: k_g(g, L, m, 0) for m in (1, 2)}
    assert most_indistinguishable_state(g, L, 0) == max(ks, key=ks.get)
    assert most_indistinguishable_state(g, L, 0) == 2


def test_describe_structure(world, radical):
    report = describe_structure(world, radical, 0)
    assert report.agent_type is AgentType.RADICAL
    assert report.h[1] == pytest.approx(-1.3183, abs=5e-5)
    assert report.most_indistinguishable == 1
    assert not report.perfect


class TestRegionSweep:
    def test_shape_and_order(self, world):
        grid = region_sweep(world)
        frame = grid.to_frame()
        assert len(frame) == 625
        assert list(frame.columns) == ["alpha", "beta", "h", "k", "type"]
        assert frame["alpha"].iloc[0] == pytest.approx(0.02)
        assert frame["beta"].iloc[1] == pytest.approx(0.06)
        assert frame["alpha"].iloc[25] == pytest.approx(0.06)

    def test_closed_form_regions(self, world):
        grid = region_sweep(world)
        for cell in grid.cells:
            if abs(cell.h) <= 1e-6 or abs(cell.k) <= 1e-6:
                continue
            conservative = (cell.alpha - cell.beta) * (cell.alpha - 0.8) < 0
            assert (cell.agent_type is AgentType.CONSERVATIVE) == conservative
            assert (cell.agent_type is AgentType.NEGATIVE) == (cell.h > 0)
            if not conservative and cell.h < 0:
                assert cell.agent_type is AgentType.RADICAL

    def test_radical_region_grows_as_g_moves_to_half(self):
        narrow = region_sweep(WorldSignalStructure.binary(0.8)).counts()
        wide = region_sweep(WorldSignalStructure.binary(0.6)).counts()
        assert wide[AgentType.RADICAL] > narrow[AgentType.RADICAL]

    def test_maps(self, world):
        grid = region_sweep(world, GridSpec(0.1, 0.9, 5))
        assert grid.h_map.shape == (5, 5)
        cell = grid.cell(0.3, 0.7)
        assert cell is not None
        assert grid.h_map[cell.i, cell.j] == cell.h
        assert grid.k_map[cell.i, cell.j] == cell.k
        assert np.allclose(np.diag(grid.h_map), 0.0)
        assert sum(grid.counts().values()) == 25

    def test_single_point_grid(self, world):
        grid = region_sweep(world, GridSpec(0.6, 0.6, 1))
        assert len(grid.cells) == 1

    @pytest.mark.parametrize("lo,hi,count", [(0.0, 0.5, 5), (0.5, 0.4, 5), (0.2, 0.4, 0), (0.2, 0.4, 1)])
    def test_invalid_grid(self, lo, hi, count):
        with pytest.raises(DomainError):
            GridSpec(lo, hi, count)

    def test_needs_binary_world(self):
        with pytest.raises(DomainError):
            region_sweep(WorldSignalStructure(np.array([0.5, 0.3, 0.2])))
