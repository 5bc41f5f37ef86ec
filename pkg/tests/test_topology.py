"""Graph generation, Laplacian weights, spectral gap."""

import numpy as np
import pytest

from ztrack.topology import (
    ConnectivityFailure,
    Graph,
    MixingMatrix,
    gen_erdos_renyi,
    laplacian_weights,
    load_edge_list,
    save_edge_list,
    spectral_gap,
    validate_mixing,
)


def bfs_connected(n, edges):
    """Independent connectivity oracle."""
    adj = {i: [] for i in range(n)}
    for i, j in edges:
        adj[i].append(j)
        adj[j].append(i)
    seen, queue = {0}, [0]
    while queue:
        u = queue.pop()
        for v in adj[u]:
            if v not in seen:
                seen.add(v)
                queue.append(v)
    return len(seen) == n


def dense_rho(w):
    """Deflated spectral norm via full SVD, independent of power iteration."""
    n = w.shape[0]
    return float(np.linalg.svd(w - np.ones((n, n)) / n, compute_uv=False)[0])


def test_graph_rejects_bad_input():
    with pytest.raises(ValueError):
        Graph(1, frozenset())
    with pytest.raises(ValueError):
        Graph(3, frozenset({(0, 0)}))
    with pytest.raises(ValueError):
        Graph(3, frozenset({(0, 3)}))
    with pytest.raises(ValueError):  # disconnected
        Graph(4, frozenset({(0, 1), (2, 3)}))


def test_er_complete_when_p_one():
    g = gen_erdos_renyi(2, 1.0, 0)
    assert g.edges == frozenset({(0, 1)})
    g4 = gen_erdos_renyi(4, 1.0, 5)
    assert len(g4.edges) == 6


def test_er_connected_and_seeded():
    g = gen_erdos_renyi(31, 0.3, 7)
    assert bfs_connected(g.n, g.edges)
    # same seed, same graph; different seed, (almost surely) different graph
    assert gen_erdos_renyi(31, 0.3, 7).edges == g.edges
    assert gen_erdos_renyi(31, 0.3, 8).edges != g.edges


def test_er_unreachable_connectivity():
    # p so small that a connected draw on 40 nodes essentially never happens
    with pytest.raises(ConnectivityFailure):
        gen_erdos_renyi(40, 1e-9, 0)


def test_er_rejects_bad_params():
    with pytest.raises(ValueError):
        gen_erdos_renyi(1, 0.5, 0)
    with pytest.raises(ValueError):
        gen_erdos_renyi(5, 0.0, 0)
    with pytest.raises(ValueError):
        gen_erdos_renyi(5, 1.1, 0)


def test_laplacian_weights_two_path():
    # single edge: d_max+1 = 2, so every weight is 1/2 and rho_w is 0
    g = Graph(2, frozenset({(0, 1)}))
    w = laplacian_weights(g)
    assert np.allclose(w.w, 0.5)
    assert w.rho_w == pytest.approx(0.0, abs=1e-12)


def test_laplacian_weights_triangle():
    g = Graph(3, frozenset({(0, 1), (1, 2), (0, 2)}))
    w = laplacian_weights(g)
    assert np.allclose(w.w, 1.0 / 3.0)
    assert w.rho_w == pytest.approx(0.0, abs=1e-12)


def test_laplacian_weights_ring4():
    # 4-cycle: L has eigenvalues {0, 2, 2, 4}, tau = 3, so W's deflated
    # spectrum is {1/3, 1/3, -1/3} and rho_w = 1/3
    g = Graph(4, frozenset({(0, 1), (1, 2), (2, 3), (0, 3)}))
    w = laplacian_weights(g)
    expected = np.eye(4) - g.laplacian() / 3.0
    assert np.allclose(w.w, expected)
    assert w.rho_w == pytest.approx(1.0 / 3.0, abs=1e-9)
    assert w.rho_w == pytest.approx(dense_rho(w.w), abs=1e-10)


def test_mixing_matrix_immutable():
    w = laplacian_weights(Graph(2, frozenset({(0, 1)})))
    with pytest.raises(ValueError):
        w.w[0, 0] = 2.0


def test_spectral_gap_matches_dense_on_er_graphs():
    rng = np.random.default_rng(81)
    for _ in range(25):
        n = int(rng.integers(2, 65))
        p = float(rng.uniform(0.2, 0.9))
        g = gen_erdos_renyi(n, p, int(rng.integers(0, 10_000)))
        w = laplacian_weights(g)
        assert abs(w.rho_w - dense_rho(w.w)) <= 1e-8
        assert 0.0 <= w.rho_w < 1.0


def test_spectral_gap_full_mixing_is_zero():
    assert spectral_gap(np.full((5, 5), 0.2)) == pytest.approx(0.0, abs=1e-12)


def test_spectral_gap_identity_is_one():
    # identity never mixes: deflated norm is exactly 1
    assert spectral_gap(np.eye(6)) == pytest.approx(1.0, abs=1e-10)


def test_contraction_property():
    # ||W w - 1 wbar|| <= rho_w ||w - 1 wbar|| for any stacked vector
    rng = np.random.default_rng(4)
    for _ in range(20):
        n = int(rng.integers(3, 40))
        g = gen_erdos_renyi(n, float(rng.uniform(0.3, 0.9)), int(rng.integers(0, 999)))
        w = laplacian_weights(g)
        omega = rng.standard_normal((n, 7))
        mixed = w.w @ omega
        lhs = np.linalg.norm(mixed - mixed.mean(axis=0))
        rhs = w.rho_w * np.linalg.norm(omega - omega.mean(axis=0))
        assert lhs <= rhs + 1e-9


def test_validate_mixing_identity_fails_on_rho():
    report = validate_mixing(np.eye(4))
    assert not report.passed
    assert "rho_w" in report.failures


def test_validate_mixing_passes_on_laplacian():
    report = validate_mixing(laplacian_weights(Graph(2, frozenset({(0, 1)}))))
    assert report.passed
    assert report.failures == ()


def test_validate_mixing_catches_negative_entry():
    w = np.full((2, 2), 0.5)
    w[0, 1] = 0.5 + 1e-3
    w[0, 0] = 0.5 - 1e-3
    w[1, 0] = 0.5 + 1e-3
    w[1, 1] = 0.5 - 1e-3
    w2 = np.array([[1.001, -0.001], [-0.001, 1.001]])
    report = validate_mixing(w2)
    assert not report.passed
    assert "nonnegative" in report.failures


def test_mixing_matrix_invariant_support():
    # off-diagonal weight positive only across edges
    g = gen_erdos_renyi(12, 0.4, 3)
    w = laplacian_weights(g)
    for i in range(g.n):
        for j in range(g.n):
            if i == j:
                assert w.w[i, j] > 0.0
            elif (min(i, j), max(i, j)) in g.edges:
                assert w.w[i, j] > 0.0
            else:
                assert w.w[i, j] == 0.0


def test_edge_list_roundtrip(tmp_path):
    g = gen_erdos_renyi(17, 0.35, 9)
    path = tmp_path / "g.txt"
    save_edge_list(g, path)
    g2 = load_edge_list(path)
    assert g2.n == g.n and g2.edges == g.edges


def test_edge_list_rejects_malformed(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("3\n0 1 2\n")
    with pytest.raises(ValueError):
        load_edge_list(path)
    path.write_text("3\n0 0\n1 2\n")
    with pytest.raises(ValueError):
        load_edge_list(path)
    path.write_text("")
    with pytest.raises(ValueError):
        load_edge_list(path)


def test_edge_list_collapses_duplicates(tmp_path):
    path = tmp_path / "dup.txt"
    path.write_text("3\n0 1\n1 0\n1 2\n")
    g = load_edge_list(path)
    assert g.edges == frozenset({(0, 1), (1, 2)})
