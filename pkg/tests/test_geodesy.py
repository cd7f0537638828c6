import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

from tactile_servo import geodesy, skin_sim


def _edge_set(g):
    i, j, w = g.edges()
    return {(int(a), int(b)): float(c) for a, b, c in zip(i, j, w)}


def cap_points(n, r=0.008, seed=0, jitter=0.3):
    """Quasi-uniform points on a hemispherical cap about +x."""
    rng = np.random.default_rng(seed)
    k = np.arange(n)
    u = np.clip((k + 0.5 + jitter * rng.uniform(-0.5, 0.5, n)) / n, 0, 1)
    phi = 2 * math.pi * ((k * 0.5 * (math.sqrt(5) - 1)) % 1.0)
    x = 1 - u
    rho = np.sqrt(1 - x**2)
    v = np.stack([x, rho * np.sin(phi), -rho * np.cos(phi)], 1)
    return r * v, v


def test_collinear_chain():
    d = 0.003
    g = geodesy.knn_graph(np.array([[0, 0, 0], [d, 0, 0], [2 * d, 0, 0.0]]), 1)
    assert _edge_set(g) == {(0, 1): d, (1, 2): d}
    D = geodesy.geodesic_matrix(g)
    assert D[0, 2] == pytest.approx(2 * d, abs=1e-18)
    np.testing.assert_array_equal(np.diag(D), 0.0)


def test_full_m_gives_complete_graph(rng):
    pts = rng.normal(size=(9, 3))
    g = geodesy.knn_graph(pts, 8)
    assert len(_edge_set(g)) == 9 * 8 // 2


def test_ties_broken_by_lowest_index():
    pts = np.array([[0, 0, 0], [1, 0, 0], [-1, 0, 0], [0, 1, 0.0]])
    g = geodesy.knn_graph(pts, 1)
    # point 0 has three neighbours at distance 1; it picks index 1
    assert set(_edge_set(g)) == {(0, 1), (0, 2), (0, 3)}
    nb = geodesy._neighbours(pts, 1)
    assert nb[0, 0] == 1


def test_duplicates_allowed():
    pts = np.array([[0, 0, 0], [0, 0, 0], [1, 0, 0.0]])
    g = geodesy.knn_graph(pts, 1)
    assert _edge_set(g)[(0, 1)] == 0.0
    D = geodesy.geodesic_matrix(geodesy.knn_graph(pts, 2))
    assert D[0, 1] == 0.0


def test_bad_inputs():
    with pytest.raises(ValueError):
        geodesy.knn_graph(np.zeros((3, 3)), 3)
    with pytest.raises(ValueError):
        geodesy.knn_graph(np.zeros((3, 3)), 0)


def test_disconnected_graph_names_components():
    pts = np.vstack([np.arange(4)[:, None] * [1e-3, 0, 0], np.arange(3)[:, None] * [1e-3, 0, 0] + [1.0, 0, 0]])
    g = geodesy.knn_graph(pts, 2)
    with pytest.raises(geodesy.DisconnectedGraphError, match=r"\[4, 3\]"):
        geodesy.geodesic_matrix(g)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.integers(20, 120), st.integers(3, 8))
def test_dijkstra_matches_floyd_warshall(seed, n, M):
    pts = np.random.default_rng(seed).normal(size=(n, 3))
    g = geodesy.knn_graph(pts, M)
    if len(geodesy.component_sizes(g)) > 1:
        with pytest.raises(geodesy.DisconnectedGraphError):
            geodesy.geodesic_matrix(g)
        return
    D = geodesy.geodesic_matrix(g)
    np.testing.assert_allclose(D, geodesy.floyd_warshall(g), rtol=1e-12, atol=1e-15)
    ref = shortest_path(csr_matrix((g.weights, g.indices, g.indptr), shape=(n, n)), directed=False)
    np.testing.assert_allclose(D, ref, rtol=1e-12, atol=1e-15)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.integers(30, 150))
def test_matrix_properties(seed, n):
    pts = np.random.default_rng(seed).uniform(-0.01, 0.01, (n, 3))
    D = geodesy.geodesic_matrix(geodesy.knn_graph(pts, min(18, n - 1)))
    E = np.linalg.norm(pts[:, None] - pts[None], axis=2)
    assert np.array_equal(D, D.T)
    assert np.all(np.diag(D) == 0)
    assert np.all(np.isfinite(D))
    assert np.all(D >= E - 1e-12)
    # triangle inequality for every (i, k, j)
    assert np.all(D[:, None, :] <= D[:, :, None] + D[None, :, :] + 1e-12)


@pytest.mark.xfail(strict=True, reason="fixed-M graph paths keep a direction-dependent stretch; see ledger")
def test_flat_patch_close_to_euclidean(rng):
    pts = np.c_[rng.uniform(0, 0.01, (400, 2)), np.zeros(400)]
    E = np.linalg.norm(pts[:, None] - pts[None], axis=2)
    for M in (6, 12, 18):
        D = geodesy.geodesic_matrix(geodesy.knn_graph(pts, M))
        off = E > 0
        assert np.max(D[off] / E[off] - 1) <= 0.01


def test_flat_patch_stretch_shrinks_with_m(rng):
    pts = np.c_[rng.uniform(0, 0.01, (400, 2)), np.zeros(400)]
    E = np.linalg.norm(pts[:, None] - pts[None], axis=2)
    off = E > 0
    means = []
    for M in (6, 12, 18, 30):
        D = geodesy.geodesic_matrix(geodesy.knn_graph(pts, M))
        means.append(np.mean(D[off] / E[off] - 1))
    assert all(b < a for a, b in zip(means, means[1:]))
    assert means[-1] < 0.02


def test_cap_matches_mesh_oracle(surface):
    P, v = cap_points(500)
    g = geodesy.knn_graph(P, 18)
    D = geodesy.geodesic_matrix(g)
    hops = shortest_path(csr_matrix((np.ones(len(g.indices)), g.indices, g.indptr), shape=(500, 500)),
                         unweighted=True)
    # analytic great-circle distances
    true = 0.008 * np.arccos(np.clip(v @ v.T, -1, 1))
    far = hops >= 5
    assert np.max(np.abs(D[far] / true[far] - 1)) <= 0.05
    # and the simulator's mesh oracle on a few sources
    Q = surface.nearest(P)[0]
    fields = np.stack([surface.distance_field(Q[i]) for i in range(0, 500, 50)])
    G = surface.field_at(fields, Q)
    rows = np.arange(0, 500, 50)
    m = far[rows]
    assert np.max(np.abs(D[rows][m] / G[m] - 1)) <= 0.05


def test_bin_split_sizes_and_determinism(rng):
    pts = rng.normal(size=(4620 // 10, 3))
    bins = geodesy.bin_split(pts, 231, M=10, seed=3)
    assert len(bins) == 2 and all(b.size == 231 for b in bins)
    again = geodesy.bin_split(pts, 231, M=10, seed=3)
    for a, b in zip(bins, again):
        np.testing.assert_array_equal(a.indices, b.indices)
    allidx = np.concatenate([b.indices for b in bins])
    assert len(np.unique(allidx)) == len(allidx)


def test_bin_split_discards_remainder(rng):
    pts = rng.normal(size=(250, 3))
    bins = geodesy.bin_split(pts, 100, M=8, seed=0)
    assert len(bins) == 2
    assert sum(b.size for b in bins) == 200


def test_bin_is_immutable(rng):
    gb = geodesy.bin_split(rng.normal(size=(40, 3)), 40, M=5)[0]
    with pytest.raises(ValueError):
        gb.matrix[0, 1] = 1.0


def test_siamese_pairs(rng):
    pts = rng.normal(size=(300, 3))
    bins = geodesy.bin_split(pts, 100, M=8, seed=1)
    pairs = geodesy.sample_siamese_pairs(bins, 128, rng)
    assert len(pairs.a) == 128
    assert np.all(pairs.a != pairs.b)
    for k, a, b, t in zip(pairs.bin, pairs.a, pairs.b, pairs.target):
        gb = bins[k]
        ia = np.flatnonzero(gb.indices == a)
        ib = np.flatnonzero(gb.indices == b)
        assert len(ia) == 1 and len(ib) == 1
        assert t == gb.matrix[ia[0], ib[0]]


def test_two_sample_bin_forced_pair(rng):
    gb = geodesy.GeodesicBin(np.array([4, 9]), np.array([[0.0, 0.5], [0.5, 0.0]]), 1)
    pairs = geodesy.sample_siamese_pairs([gb], 50, rng)
    assert set(zip(pairs.a.tolist(), pairs.b.tolist())) == {(4, 9)}
    assert np.all(pairs.target == 0.5)


def test_bin_binary_roundtrip(rng, tmp_path):
    bins = geodesy.bin_split(rng.normal(size=(90, 3)), 45, M=6, seed=11)
    geodesy.save_bins(tmp_path, bins)
    back = geodesy.load_bins(tmp_path)
    for a, b in zip(bins, back):
        np.testing.assert_array_equal(a.indices, b.indices)
        np.testing.assert_array_equal(a.matrix, b.matrix)
        assert (a.M, a.seed) == (b.M, b.seed)
    raw = (tmp_path / "geodesic_bin_000.bin").read_bytes()
    assert raw[:4] == b"GBIN"
    assert len(raw) == geodesy._HEADER.size + 8 * 45 + 8 * 45 * 46 // 2
