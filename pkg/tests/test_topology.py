import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from beliefnet.errors import (
    ConvergenceError,
    DomainError,
    GenerationError,
    SelfRelianceViolation,
    StochasticityViolation,
    SupportViolation,
    ValidationError,
)
from beliefnet.topology import (
    InfluenceMatrix,
    Network,
    format_edge_list,
    general_influence,
    generate_er,
    is_strongly_connected,
    left_unit_eigenvector,
    parse_edge_list,
    uniform_influence,
)


def _reference_er(n, p, seed):
    """Redraw G(n, p) over the upper triangle until the undirected graph is connected."""
    rng = np.random.default_rng(seed)
    rows, cols = np.triu_indices(n, k=1)
    while True:
        keep = rng.random(rows.size) < p
        graph = nx.Graph()
        graph.add_nodes_from(range(n))
        graph.add_edges_from(zip(rows[keep].tolist(), cols[keep].tolist()))
        if nx.is_connected(graph):
            return {frozenset(edge) for edge in graph.edges}


class TestNetwork:
    def test_neighbor_sets(self, path4):
        assert path4.neighbor_sets == ((1,), (0, 2), (1, 3), (2,))
        assert path4.undirected_edge_count == 3
        assert len(path4.edges) == 6

    def test_rejects_self_loop(self):
        with pytest.raises(ValidationError):
            Network(2, frozenset({(0, 0)}))

    def test_rejects_out_of_range(self):
        with pytest.raises(ValidationError):
            Network(2, frozenset({(0, 2)}))

    def test_relabel(self, path4):
        relabeled = path4.relabel([3, 2, 1, 0])
        assert relabeled.neighbors(0) == (1,)
        assert relabeled.neighbors(2) == (1, 3)

    def test_edge_list_format(self, triangle):
        text = format_edge_list(triangle)
        assert text.startswith("n=3\n0 1\n0 2\n1 0\n")
        assert text.endswith("\n")
        assert parse_edge_list(text) == triangle

    @pytest.mark.parametrize("text", ["", "0 1\n", "n=3\n0\n", "n=x\n"])
    def test_edge_list_parse_errors(self, text):
        with pytest.raises(ValidationError):
            parse_edge_list(text)


def test_strong_connectivity():
    assert is_strongly_connected(Network(1, frozenset()))
    assert not is_strongly_connected(Network(2, frozenset({(0, 1)})))
    assert is_strongly_connected(Network(3, frozenset({(0, 1), (1, 2), (2, 0)})))
    assert not is_strongly_connected(Network.from_undirected(4, [(0, 1), (2, 3)]))


class TestGenerateER:
    def test_deterministic(self):
        assert generate_er(40, 0.1, seed=5) == generate_er(40, 0.1, seed=5)

    def test_matches_reference_draw(self):
        net = generate_er(30, 0.15, seed=11)
        assert {frozenset(edge) for edge in net.edges} == _reference_er(30, 0.15, 11)

    def test_complete_graph(self):
        net = generate_er(6, 1.0, seed=0)
        assert net.undirected_edge_count == 15

    def test_single_agent(self):
        assert generate_er(1, 0.5, seed=0) == Network(1, frozenset())

    def test_edge_count_concentrates(self):
        counts = [generate_er(100, 0.1, seed=seed).undirected_edge_count for seed in range(100)]
        assert sum(395 <= count <= 595 for count in counts) >= 99

    def test_generation_error(self):
        with pytest.raises(GenerationError) as info:
            generate_er(50, 1e-6, seed=3, max_retries=3)
        assert info.value.attempts == 3

    @pytest.mark.parametrize("n,p", [(0, 0.5), (5, 0.0), (5, 1.5)])
    def test_invalid_arguments(self, n, p):
        with pytest.raises(DomainError):
            generate_er(n, p, seed=0)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(min_value=2, max_value=40), st.integers(min_value=0, max_value=2**32))
    def test_always_connected(self, n, seed):
        net = generate_er(n, 0.3, seed=seed)
        assert is_strongly_connected(net)
        assert all((i, j) in net.edges for j, i in net.edges)


class TestInfluence:
    def test_uniform(self, triangle):
        A = uniform_influence(triangle, 0.5)
        assert np.allclose(A.self_reliance, 0.5)
        assert A.weights[0, 1] == pytest.approx(0.25)
        assert np.allclose(A.weights.sum(axis=1), 1.0)

    def test_uniform_isolated_agent(self):
        net = Network(2, frozenset())
        with pytest.raises(DomainError):
            uniform_influence(net, 0.5)
        assert np.array_equal(uniform_influence(net, 1.0).weights, np.eye(2))

    def test_uniform_gamma_range(self, triangle):
        with pytest.raises(DomainError):
            uniform_influence(triangle, 0.0)

    def test_general_dict_rows(self, path4):
        rows = [{0: 0.5, 1: 0.5}, {1: 0.4, 0: 0.3, 2: 0.3}, {2: 1.0}, {3: 0.9, 2: 0.1}]
        A = general_influence(path4, rows)
        assert A.weights[1, 0] == 0.3
        assert A.row(2).tolist() == [0.0, 0.0, 1.0, 0.0]

    def test_general_support_violation(self, path4):
        rows = [[0.5, 0.0, 0.0, 0.5], [0.5, 0.5, 0, 0], [0, 0, 1.0, 0], [0, 0, 0, 1.0]]
        with pytest.raises(SupportViolation) as info:
            general_influence(path4, rows)
        assert info.value.context["agent"] == 0

    def test_general_self_reliance(self, path4):
        rows = [{1: 1.0}, {1: 1.0}, {2: 1.0}, {3: 1.0}]
        with pytest.raises(SelfRelianceViolation) as info:
            general_influence(path4, rows)
        assert info.value.context["agent"] == 0

    def test_matrix_row_sum(self):
        with pytest.raises(StochasticityViolation) as info:
            InfluenceMatrix(np.array([[1.0, 0.0], [0.5, 0.6]]))
        assert info.value.context["agent"] == 1


class TestLeftEigenvector:
    def test_degree_proportional(self, path4):
        v = left_unit_eigenvector(uniform_influence(path4, 0.3))
        assert v == pytest.approx([1 / 6, 1 / 3, 1 / 3, 1 / 6], abs=1e-9)

    def test_reducible(self):
        A = InfluenceMatrix(np.array([[1.0, 0.0], [0.5, 0.5]]))
        assert not A.is_irreducible()
        with pytest.raises(ConvergenceError):
            left_unit_eigenvector(A)

    def test_iteration_budget(self, path4):
        with pytest.raises(ConvergenceError) as info:
            left_unit_eigenvector(uniform_influence(path4, 0.3), tol=1e-300, max_iter=5)
        assert info.value.iterations == 5

    @settings(max_examples=20, deadline=None)
    @given(
        st.integers(min_value=2, max_value=30),
        st.floats(min_value=0.05, max_value=0.95),
        st.integers(min_value=0, max_value=2**32),
    )
    def test_fixed_point(self, n, gamma, seed):
        A = uniform_influence(generate_er(n, 0.4, seed=seed), gamma)
        v = left_unit_eigenvector(A)
        assert v.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.all(v > 0)
        assert np.abs(v @ A.weights - v).sum() <= 1e-10

    @settings(max_examples=20, deadline=None)
    @given(
        st.integers(min_value=2, max_value=20),
        st.floats(min_value=0.1, max_value=0.9),
        st.integers(min_value=0, max_value=2**32),
    )
    def test_relabeling_permutes_eigenvector(self, n, gamma, seed):
        net = generate_er(n, 0.4, seed=seed)
        permutation = np.random.default_rng(seed).permutation(n).tolist()
        v = left_unit_eigenvector(uniform_influence(net, gamma))
        relabeled = left_unit_eigenvector(uniform_influence(net.relabel(permutation), gamma))
        assert relabeled[permutation] == pytest.approx(v, abs=1e-9)
