"""Approximate geodesic distances among contact points.

Points are joined in an M-nearest-neighbour graph weighted by 3D chord
length; graph shortest paths then stand in for surface geodesics. Samples
are split into equal random bins, each with its own dense distance matrix.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from . import kernels

BIN_MAGIC = b"GBIN"
BIN_VERSION = 1


class DisconnectedGraphError(ValueError):
    pass


@dataclass(frozen=True)
class KnnGraph:
    """Undirected graph in CSR form; both directions of every edge are stored."""

    n: int
    indptr: np.ndarray
    indices: np.ndarray
    weights: np.ndarray

    def edges(self):
        """Unique (i, j, w) with i < j."""
        src = np.repeat(np.arange(self.n), np.diff(self.indptr))
        keep = src < self.indices
        return src[keep], self.indices[keep], self.weights[keep]


def _neighbours(points, M, chunk=512):
    """Indices of the M nearest other points, ties to the lowest index."""
    n = len(points)
    out = np.empty((n, M), dtype=np.int64)
    sq = np.einsum("ij,ij->i", points, points)
    for lo in range(0, n, chunk):
        hi = min(n, lo + chunk)
        d2 = sq[lo:hi, None] + sq[None, :] - 2.0 * points[lo:hi] @ points.T
        d2 = np.maximum(d2, 0.0)
        d2[np.arange(hi - lo), np.arange(lo, hi)] = np.inf
        # stable sort keeps equal distances in index order
        out[lo:hi] = np.argsort(d2, axis=1, kind="stable")[:, :M]
    return out


def knn_graph(points, M: int) -> KnnGraph:
    points = np.asarray(points, dtype=float)
    n = len(points)
    if M < 1:
        raise ValueError("M must be >= 1")
    if n < M + 1:
        raise ValueError(f"need at least M+1 = {M + 1} points, got {n}")
    nb = _neighbours(points, M)
    src = np.repeat(np.arange(n), M)
    dst = nb.ravel()
    # union symmetrisation
    pair = np.unique(np.concatenate([np.stack([src, dst], 1), np.stack([dst, src], 1)]), axis=0)
    src, dst = pair[:, 0], pair[:, 1]
    w = np.linalg.norm(points[src] - points[dst], axis=1)
    indptr = np.searchsorted(src, np.arange(n + 1)).astype(np.int64)
    return KnnGraph(n, indptr, dst.astype(np.int64), w)


def component_sizes(graph: KnnGraph):
    # explicit structure matrix so zero-weight edges still count
    adj = csr_matrix((np.ones(len(graph.indices)), graph.indices, graph.indptr),
                     shape=(graph.n, graph.n))
    k, labels = connected_components(adj, directed=False)
    return np.sort(np.bincount(labels, minlength=k))[::-1]


def geodesic_matrix(graph: KnnGraph) -> np.ndarray:
    """All-pairs shortest-path lengths of a connected graph."""
    sizes = component_sizes(graph)
    if len(sizes) > 1:
        raise DisconnectedGraphError(
            f"graph has {len(sizes)} components of sizes {sizes.tolist()}; raise M or re-bin"
        )
    d = kernels.all_pairs_dijkstra(graph.indptr, graph.indices, graph.weights)
    # remove summation-order asymmetry
    d = np.minimum(d, d.T)
    np.fill_diagonal(d, 0.0)
    return d


def dense_weights(graph: KnnGraph) -> np.ndarray:
    """Dense weight matrix (inf where no edge), input for Floyd-Warshall."""
    w = np.full((graph.n, graph.n), np.inf)
    src = np.repeat(np.arange(graph.n), np.diff(graph.indptr))
    w[src, graph.indices] = graph.weights
    np.fill_diagonal(w, 0.0)
    return w


def floyd_warshall(graph: KnnGraph) -> np.ndarray:
    return kernels.floyd_warshall(dense_weights(graph))


# ---------------------------------------------------------------------------
# bins


@dataclass(frozen=True, eq=False)
class GeodesicBin:
    indices: np.ndarray  # global sample ids, length N'
    matrix: np.ndarray  # N' x N' meters
    M: int
    seed: int = 0

    def __post_init__(self):
        self.indices.setflags(write=False)
        self.matrix.setflags(write=False)

    @property
    def size(self):
        return len(self.indices)

    def subset(self, local):
        """Bin restricted to local member positions ``local``."""
        local = np.asarray(local)
        return GeodesicBin(self.indices[local].copy(), self.matrix[np.ix_(local, local)].copy(),
                           self.M, self.seed)


def make_bin(points, indices, M: int, seed: int = 0) -> GeodesicBin:
    indices = np.asarray(indices, dtype=np.int64)
    mat = geodesic_matrix(knn_graph(np.asarray(points)[indices], M))
    return GeodesicBin(indices.copy(), mat, M, seed)


def bin_split(points, bin_size: int, M: int = 18, seed: int = 0) -> list[GeodesicBin]:
    """Random partition into floor(N / bin_size) bins; the remainder is dropped."""
    n = len(points)
    if bin_size < M + 1:
        raise ValueError(f"bin size {bin_size} must exceed M = {M}")
    if n < bin_size:
        raise ValueError(f"need at least {bin_size} samples, got {n}")
    perm = np.random.default_rng(seed).permutation(n)
    n_bins = n // bin_size
    return [make_bin(points, np.sort(perm[k * bin_size:(k + 1) * bin_size]), M, seed)
            for k in range(n_bins)]


@dataclass
class SiamesePairs:
    """A batch of intra-bin pairs; ``a``/``b`` are global sample ids."""

    bin: np.ndarray
    a: np.ndarray
    b: np.ndarray
    target: np.ndarray


def sample_siamese_pairs(bins, batch_size: int, rng) -> SiamesePairs:
    if not bins:
        raise ValueError("no geodesic bins")
    k = rng.integers(0, len(bins), batch_size)
    a = np.empty(batch_size, dtype=np.int64)
    b = np.empty(batch_size, dtype=np.int64)
    g = np.empty(batch_size)
    for j, gb in enumerate(bins):
        sel = np.flatnonzero(k == j)
        if len(sel) == 0:
            continue
        n = gb.size
        ia = rng.integers(0, n, len(sel))
        ib = rng.integers(0, n - 1, len(sel))
        ib += ib >= ia
        lo, hi = np.minimum(ia, ib), np.maximum(ia, ib)
        a[sel] = gb.indices[lo]
        b[sel] = gb.indices[hi]
        g[sel] = gb.matrix[lo, hi]
    return SiamesePairs(k, a, b, g)


# ---------------------------------------------------------------------------
# binary container: magic, header (version, N', M, seed), ids, packed lower triangle

_HEADER = struct.Struct("<4sIQIq")


def save_bin(path, gb: GeodesicBin):
    n = gb.size
    tri = gb.matrix[np.tril_indices(n)]
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(BIN_MAGIC, BIN_VERSION, n, gb.M, gb.seed))
        fh.write(gb.indices.astype("<i8").tobytes())
        fh.write(tri.astype("<f8").tobytes())


def load_bin(path) -> GeodesicBin:
    raw = Path(path).read_bytes()
    magic, version, n, M, seed = _HEADER.unpack_from(raw, 0)
    if magic != BIN_MAGIC or version != BIN_VERSION:
        raise ValueError(f"{path}: not a geodesic bin file (version {version})")
    off = _HEADER.size
    idx = np.frombuffer(raw, "<i8", n, off).astype(np.int64)
    off += 8 * n
    ntri = n * (n + 1) // 2
    if len(raw) != off + 8 * ntri:
        raise ValueError(f"{path}: truncated geodesic bin")
    tri = np.frombuffer(raw, "<f8", ntri, off)
    mat = np.zeros((n, n))
    il = np.tril_indices(n)
    mat[il] = tri
    mat[il[1], il[0]] = tri
    return GeodesicBin(idx, mat, int(M), int(seed))


def save_bins(directory, bins):
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    for k, gb in enumerate(bins):
        save_bin(d / f"geodesic_bin_{k:03d}.bin", gb)


def load_bins(directory):
    return [load_bin(p) for p in sorted(Path(directory).glob("geodesic_bin_*.bin"))]
