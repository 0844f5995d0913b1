import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import sparse

from aesn.errors import ConvergenceError, DataError
from aesn.graph import (
    Graph, from_edge_list, lattice_graph, normalized_adjacency, spectral_radius,
)

from conftest import random_graph


def test_edgeless_graph_has_zero_adjacency():
    g = from_edge_list([], 2)
    np.testing.assert_array_equal(g.A.toarray(), np.zeros((2, 2)))


def test_duplicate_and_reversed_edges_collapse():
    g = from_edge_list([(0, 1), (1, 0)], 2)
    assert g.edges == ((0, 1),)
    np.testing.assert_array_equal(g.A.toarray(), [[0, 1], [1, 0]])


@pytest.mark.parametrize("edges", [[(0, 3)], [(-1, 0)]])
def test_out_of_range_edge_rejected(edges):
    with pytest.raises(DataError):
        from_edge_list(edges, 2)


def test_self_loop_rejected():
    with pytest.raises(DataError):
        from_edge_list([(1, 1)], 3)


def test_lattice_rook_neighbours():
    g = lattice_graph(2, 3)
    assert sorted(g.neighbors(4).tolist()) == [1, 3, 5]
    assert g.degree().tolist() == [2, 3, 2, 2, 3, 2]


def test_edgeless_normalized_adjacency_is_identity():
    S = normalized_adjacency(from_edge_list([], 5)).toarray()
    np.testing.assert_array_equal(S, np.eye(5))


def test_single_edge_hand_case():
    S = normalized_adjacency(from_edge_list([(0, 1)], 2)).toarray()
    np.testing.assert_allclose(S, [[0.5, 0.5], [0.5, 0.5]], rtol=0, atol=1e-15)


def test_path_hand_case():
    S = normalized_adjacency(from_edge_list([(0, 1), (1, 2)], 3)).toarray()
    assert S[0, 0] == pytest.approx(0.5, abs=1e-15)
    assert S[0, 1] == pytest.approx(1 / np.sqrt(6), abs=1e-15)
    assert S[1, 1] == pytest.approx(1 / 3, abs=1e-15)
    assert S[0, 2] == 0
    assert np.max(np.linalg.eigvalsh(S)) == pytest.approx(1.0, abs=1e-12)


def test_isolated_node_row_is_identity_row():
    S = normalized_adjacency(from_edge_list([(0, 1)], 3)).toarray()
    np.testing.assert_array_equal(S[2], [0.0, 0.0, 1.0])
    np.testing.assert_array_equal(S[:, 2], [0.0, 0.0, 1.0])


def test_storage_switches_to_sparse_above_limit():
    assert not normalized_adjacency(lattice_graph(8, 8)).is_sparse
    big = normalized_adjacency(lattice_graph(5, 13))
    assert big.is_sparse
    np.testing.assert_array_equal(
        big.toarray(), normalized_adjacency(lattice_graph(5, 13), dense_limit=10**6).toarray()
    )


@settings(max_examples=60, deadline=None)
@given(n_s=st.integers(1, 30), p=st.floats(0.0, 1.0), seed=st.integers(0, 2**31))
def test_normalized_adjacency_structure(n_s, p, seed):
    g = random_graph(np.random.default_rng(seed), n_s, p)
    A = g.A.toarray()
    assert np.array_equal(A, A.T) and np.all(np.diag(A) == 0) and set(np.unique(A)) <= {0.0, 1.0}
    S = normalized_adjacency(g).toarray()
    assert np.max(np.abs(S - S.T)) <= 1e-12
    assert np.all(np.diag(S) > 0)
    for i in range(n_s):
        expected = set(g.neighbors(i).tolist()) | {i}
        assert set(np.flatnonzero(S[i]).tolist()) == expected


@settings(max_examples=40, deadline=None)
@given(n_s=st.integers(2, 25), seed=st.integers(0, 2**31))
def test_permutation_commutes_with_normalization(n_s, seed):
    rng = np.random.default_rng(seed)
    g = random_graph(rng, n_s, 0.3)
    order = rng.permutation(n_s)
    S = normalized_adjacency(g).toarray()
    Sp = normalized_adjacency(g.permute(order)).toarray()
    np.testing.assert_array_equal(Sp, S[np.ix_(order, order)])


def test_spectral_radius_trivial_cases():
    assert spectral_radius(np.eye(4)) == pytest.approx(1.0, abs=1e-12)
    assert spectral_radius(np.diag([2.0, -3.0])) == pytest.approx(3.0, abs=1e-9)


def test_spectral_radius_of_path_matches_dense_oracle():
    S = normalized_adjacency(from_edge_list([(0, 1), (1, 2)], 3)).toarray()
    oracle = np.max(np.abs(np.linalg.eigvals(S)))
    assert spectral_radius(S) == pytest.approx(oracle, abs=1e-10)
    assert oracle == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("method", ["power", "arnoldi"])
def test_spectral_radius_nonsymmetric_sparse(method):
    rng = np.random.default_rng(0)
    W = sparse.random(120, 120, density=0.1, random_state=rng, format="csr")
    W.data = rng.uniform(-0.1, 0.1, W.nnz)
    oracle = np.max(np.abs(np.linalg.eigvals(W.toarray())))
    assert spectral_radius(W, tol=1e-12, method=method) == pytest.approx(oracle, rel=1e-8)


def test_spectral_radius_is_deterministic():
    rng = np.random.default_rng(5)
    M = rng.standard_normal((30, 30))
    assert spectral_radius(M) == spectral_radius(M)


def test_spectral_radius_reports_non_convergence():
    rng = np.random.default_rng(1)
    M = rng.standard_normal((50, 50))
    with pytest.raises(ConvergenceError):
        spectral_radius(M, max_iter=1, block=1)


def test_spectral_radius_argument_checks():
    with pytest.raises(ValueError):
        spectral_radius(np.ones((2, 3)))
    with pytest.raises(ValueError):
        spectral_radius(np.eye(2), max_iter=0)
    with pytest.raises(ValueError):
        spectral_radius(np.eye(2), method="qr")


def test_graph_validation():
    with pytest.raises(DataError):
        Graph(n_s=0)
    with pytest.raises(DataError):
        lattice_graph(2, 2).permute([0, 0, 1, 2])
