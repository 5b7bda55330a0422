import numpy as np
import pytest
from scipy.linalg import null_space

import etconsensus as ec
from property_suites import run_graph_suite


def test_single_node():
    g = ec.build_digraph(1, [])
    assert g.laplacian.tolist() == [[0.0]]


def test_ring3_laplacian_matches_definition(ring3):
    expected = [[1.0, 0.0, -1.0], [-1.0, 1.0, 0.0], [0.0, -1.0, 1.0]]
    assert ring3.laplacian.tolist() == expected
    assert ring3.adjacency.tolist() == [[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]


def test_self_loop_rejected():
    with pytest.raises(ec.SelfLoopError, match=r"\(1, 1"):
        ec.build_digraph(2, [(1, 1, 1.0)])


def test_duplicate_edge_rejected():
    with pytest.raises(ec.DuplicateEdgeError, match=r"\(1, 2"):
        ec.build_digraph(2, [(1, 2, 1.0), (1, 2, 0.5)])


@pytest.mark.parametrize("weight", [0.0, -1.0, float("nan")])
def test_bad_weight_rejected(weight):
    with pytest.raises(ec.EdgeWeightError, match=r"\(1, 2"):
        ec.build_digraph(2, [(1, 2, weight)])


def test_out_of_range_endpoint_rejected():
    with pytest.raises(ec.EdgeIndexError, match=r"\(1, 3"):
        ec.build_digraph(2, [(1, 3, 1.0)])


def test_bad_agent_count_rejected():
    with pytest.raises(ec.DigraphError):
        ec.build_digraph(0, [])


def test_spanning_tree_chain(chain3):
    assert ec.has_spanning_tree(chain3)


def test_spanning_tree_two_disjoint_cycles():
    g = ec.build_digraph(4, [(1, 2, 1.0), (2, 1, 1.0), (3, 4, 1.0), (4, 3, 1.0)])
    assert not ec.has_spanning_tree(g)


def test_spanning_tree_disconnected_pair():
    assert not ec.has_spanning_tree(ec.build_digraph(2, []))


def test_perron_ring_uniform(ring3):
    p = ec.left_perron_vector(ring3)
    assert np.max(np.abs(p.r - 1.0 / 3.0)) <= 1e-10


def test_perron_chain_root_only(chain3):
    # Independent oracle: orthonormal null space of L.T, renormalised to sum 1.
    basis = null_space(chain3.laplacian.T)
    assert basis.shape[1] == 1
    oracle = basis[:, 0] / basis[:, 0].sum()
    p = ec.left_perron_vector(chain3)
    assert np.max(np.abs(p.r - oracle)) <= 1e-10
    assert np.max(np.abs(p.r - np.array([1.0, 0.0, 0.0]))) <= 1e-10


def test_perron_requires_spanning_tree():
    g = ec.build_digraph(4, [(1, 2, 1.0), (2, 1, 1.0), (3, 4, 1.0), (4, 3, 1.0)])
    with pytest.raises(ec.NoSpanningTreeError):
        ec.left_perron_vector(g)


def test_perron_rejects_near_degenerate_kernel():
    # A vanishing coupling makes the zero eigenvalue numerically double.
    g = ec.build_digraph(3, [(1, 2, 1e-12), (2, 3, 1.0)])
    with pytest.raises(ec.NonSimpleZeroError):
        ec.left_perron_vector(g, tol=1e-9)


def test_perron_residuals_against_null_space_oracle():
    rng = np.random.default_rng(5)
    found = 0
    while found < 50:
        n = int(rng.integers(2, 6))
        pairs = [(j, i) for j in range(1, n + 1) for i in range(1, n + 1) if i != j]
        edges = [(j, i, float(rng.uniform(0.2, 2.0)))
                 for j, i in pairs if rng.random() < 0.5]
        g = ec.build_digraph(n, edges)
        if not ec.has_spanning_tree(g):
            continue
        found += 1
        p = ec.left_perron_vector(g, tol=1e-9)
        basis = null_space(g.laplacian.T)
        assert basis.shape[1] == 1
        oracle = basis[:, 0] / basis[:, 0].sum()
        assert np.max(np.abs(p.r - oracle)) <= 1e-8


def test_spectrum_ring_min_real(ring3):
    # Circulant eigenvalues are 0 and 3/2 +/- i sqrt(3)/2.
    assert ec.nonzero_spectrum_min_real(ring3) == pytest.approx(1.5, abs=1e-10)


def test_spectrum_complete_pair():
    g = ec.build_digraph(2, [(1, 2, 1.0), (2, 1, 1.0)])
    assert ec.nonzero_spectrum_min_real(g) == pytest.approx(2.0, abs=1e-10)


def test_spectrum_single_node_returns_none():
    assert ec.nonzero_spectrum_min_real(ec.build_digraph(1, [])) is None


def test_graph_randomized_property_suite():
    assert run_graph_suite(cases=1000) == 1000
