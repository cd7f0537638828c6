"""Hot loops: shortest paths, pose integration, nearest point on the fingertip profile.

Each kernel is plain Python over numpy arrays so that it runs unchanged when
JIT compilation is disabled (see ``_jit``).
"""
import math

import numpy as np

from ._jit import njit, prange


# ---------------------------------------------------------------------------
# binary heap on parallel arrays (key, vertex)


@njit(cache=True)
def _heap_push(keys, vals, size, key, val):
    i = size
    keys[i] = key
    vals[i] = val
    while i > 0:
        parent = (i - 1) >> 1
        if keys[parent] <= keys[i]:
            break
        keys[parent], keys[i] = keys[i], keys[parent]
        vals[parent], vals[i] = vals[i], vals[parent]
        i = parent
    return size + 1


@njit(cache=True)
def _heap_pop(keys, vals, size):
    size -= 1
    keys[0] = keys[size]
    vals[0] = vals[size]
    i = 0
    while True:
        left = 2 * i + 1
        if left >= size:
            break
        small = left
        right = left + 1
        if right < size and keys[right] < keys[left]:
            small = right
        if keys[i] <= keys[small]:
            break
        keys[small], keys[i] = keys[i], keys[small]
        vals[small], vals[i] = vals[i], vals[small]
        i = small
    return size


@njit(cache=True)
def dijkstra_csr(indptr, indices, weights, sources, init):
    """Multi-source Dijkstra on a CSR graph.

    ``sources[k]`` starts with tentative distance ``init[k]``. Returns the
    distance to every vertex (``inf`` when unreachable).
    """
    n = indptr.shape[0] - 1
    dist = np.full(n, np.inf)
    done = np.zeros(n, dtype=np.bool_)
    cap = indices.shape[0] + sources.shape[0] + 1
    keys = np.empty(cap)
    vals = np.empty(cap, dtype=np.int64)
    size = 0
    for k in range(sources.shape[0]):
        v = sources[k]
        if init[k] < dist[v]:
            dist[v] = init[k]
            size = _heap_push(keys, vals, size, init[k], v)
    while size > 0:
        d = keys[0]
        u = vals[0]
        size = _heap_pop(keys, vals, size)
        if done[u] or d > dist[u]:
            continue
        done[u] = True
        for e in range(indptr[u], indptr[u + 1]):
            v = indices[e]
            nd = d + weights[e]
            if nd < dist[v]:
                dist[v] = nd
                size = _heap_push(keys, vals, size, nd, v)
    return dist


@njit(cache=True, parallel=True)
def all_pairs_dijkstra(indptr, indices, weights):
    n = indptr.shape[0] - 1
    out = np.empty((n, n))
    init = np.zeros(1)
    for s in prange(n):
        src = np.full(1, s, dtype=np.int64)
        out[s, :] = dijkstra_csr(indptr, indices, weights, src, init)
    return out


@njit(cache=True)
def floyd_warshall(w):
    """Dense all-pairs shortest paths; O(n^3) reference for small graphs."""
    d = w.copy()
    n = d.shape[0]
    for k in range(n):
        for i in range(n):
            dik = d[i, k]
            if dik == np.inf:
                continue
            for j in range(n):
                alt = dik + d[k, j]
                if alt < d[i, j]:
                    d[i, j] = alt
    return d


# ---------------------------------------------------------------------------
# SO(3)


@njit(cache=True)
def so3_exp(w):
    """Rotation matrix exp([w]_x) by Rodrigues' formula."""
    theta = math.sqrt(w[0] * w[0] + w[1] * w[1] + w[2] * w[2])
    k = np.zeros((3, 3))
    k[0, 1] = -w[2]
    k[0, 2] = w[1]
    k[1, 0] = w[2]
    k[1, 2] = -w[0]
    k[2, 0] = -w[1]
    k[2, 1] = w[0]
    if theta < 1e-8:
        a = 1.0 - theta * theta / 6.0
        b = 0.5 - theta * theta / 24.0
    else:
        a = math.sin(theta) / theta
        b = (1.0 - math.cos(theta)) / (theta * theta)
    return np.eye(3) + a * k + b * (k @ k)


@njit(cache=True)
def integrate_base_twists(rot0, trans0, twists, dt):
    """Integrate piecewise-constant base-frame twists.

    ``twists`` is (n, 6): linear then angular velocity in the base frame,
    each held for ``dt``. Returns rotations (n+1, 3, 3) and translations
    (n+1, 3), starting with the initial pose.
    """
    n = twists.shape[0]
    rots = np.empty((n + 1, 3, 3))
    trans = np.empty((n + 1, 3))
    rots[0] = rot0
    trans[0] = trans0
    for k in range(n):
        trans[k + 1] = trans[k] + twists[k, :3] * dt
        rots[k + 1] = so3_exp(twists[k, 3:] * dt) @ rots[k]
    return rots, trans


# ---------------------------------------------------------------------------
# nearest point on the cap profile: x = c cos(t)^(2/n), rho = r sin(t)^(2/n)


@njit(cache=True)
def _cap_point(t, c, r, expo):
    ct = math.cos(t)
    st = math.sin(t)
    if ct < 0.0:
        ct = 0.0
    if st < 0.0:
        st = 0.0
    if expo == 2.0:
        return c * ct, r * st
    return c * ct ** (2.0 / expo), r * st ** (2.0 / expo)


@njit(cache=True)
def _cap_d2(t, xq, rq, c, r, expo):
    x, rho = _cap_point(t, c, r, expo)
    return (x - xq) ** 2 + (rho - rq) ** 2


@njit(cache=True)
def nearest_cap_param(xq, rq, c, r, expo):
    """Cap parameter t in [0, pi/2] closest to each half-plane query (x, rho)."""
    m = xq.shape[0]
    out = np.empty(m)
    half_pi = 0.5 * math.pi
    sphere = expo == 2.0 and c == r
    ngrid = 64
    step = half_pi / ngrid
    gr = 0.5 * (math.sqrt(5.0) - 1.0)
    for q in range(m):
        if sphere:
            t = math.atan2(rq[q], xq[q])
            if t < 0.0:
                t = 0.0
            elif t > half_pi:
                t = half_pi
            out[q] = t
            continue
        best = 0
        bestd = _cap_d2(0.0, xq[q], rq[q], c, r, expo)
        for g in range(1, ngrid + 1):
            d2 = _cap_d2(g * step, xq[q], rq[q], c, r, expo)
            if d2 < bestd:
                bestd = d2
                best = g
        lo = max(0.0, (best - 1) * step)
        hi = min(half_pi, (best + 1) * step)
        a = hi - gr * (hi - lo)
        b = lo + gr * (hi - lo)
        fa = _cap_d2(a, xq[q], rq[q], c, r, expo)
        fb = _cap_d2(b, xq[q], rq[q], c, r, expo)
        for _ in range(60):
            if fa < fb:
                hi = b
                b = a
                fb = fa
                a = hi - gr * (hi - lo)
                fa = _cap_d2(a, xq[q], rq[q], c, r, expo)
            else:
                lo = a
                a = b
                fa = fb
                b = lo + gr * (hi - lo)
                fb = _cap_d2(b, xq[q], rq[q], c, r, expo)
        out[q] = 0.5 * (lo + hi)
    return out
