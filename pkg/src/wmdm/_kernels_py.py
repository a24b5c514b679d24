"""Pure-Python reference versions of the hot kernels.

Signatures match the compiled ``wmdm._kernels`` module exactly; see
``wmdm.kernels`` for backend selection.
"""
from __future__ import annotations

import heapq

import numpy as np

OPEN, HALF, CLOSED = 0, 1, 2


def _membership(d: np.ndarray, r: float, mode: int, rtol: float) -> np.ndarray:
    tol = rtol * r
    inside = (d < r - tol).astype(float)
    shell = np.abs(d - r) <= tol
    if mode == HALF:
        inside[shell] = 0.5
    elif mode == CLOSED:
        inside[shell] = 1.0
    return inside


def _candidates(cell_start, cell_points, origin, cell_size, nx, ny, lo, hi):
    i0 = max(int(np.floor((lo[0] - origin[0]) / cell_size)), 0)
    j0 = max(int(np.floor((lo[1] - origin[1]) / cell_size)), 0)
    i1 = min(int(np.floor((hi[0] - origin[0]) / cell_size)), nx - 1)
    j1 = min(int(np.floor((hi[1] - origin[1]) / cell_size)), ny - 1)
    if i0 > i1 or j0 > j1:
        return np.empty(0, dtype=np.int64)
    chunks = []
    for i in range(i0, i1 + 1):
        a = cell_start[i * ny + j0]
        b = cell_start[i * ny + j1 + 1]
        chunks.append(cell_points[a:b])
    return np.concatenate(chunks) if chunks else np.empty(0, dtype=np.int64)


def ball_masses(coords, weights, cell_start, cell_points, origin, cell_size,
                nx, ny, centers, radii, mode, rtol):
    coords = np.asarray(coords, dtype=float)
    out = np.zeros(len(centers))
    for k, (c, r) in enumerate(zip(centers, radii)):
        p = coords[c]
        pad = r * (1.0 + 2.0 * rtol)
        cand = _candidates(cell_start, cell_points, origin, cell_size, nx, ny,
                           p - pad, p + pad)
        if cand.size == 0:
            continue
        d = np.hypot(coords[cand, 0] - p[0], coords[cand, 1] - p[1])
        out[k] = float(np.dot(weights[cand], _membership(d, r, mode, rtol)))
    return out


def pair_ball_masses(coords, weights, cell_start, cell_points, origin,
                     cell_size, nx, ny, pairs, mode, rtol):
    coords = np.asarray(coords, dtype=float)
    out = np.zeros(len(pairs))
    for k, (i, j) in enumerate(pairs):
        p, q = coords[i], coords[j]
        r = float(np.hypot(q[0] - p[0], q[1] - p[1]))
        pad = r * (1.0 + 2.0 * rtol)
        lo = np.minimum(p, q) - pad
        hi = np.maximum(p, q) + pad
        cand = _candidates(cell_start, cell_points, origin, cell_size, nx, ny, lo, hi)
        d1 = np.hypot(coords[cand, 0] - p[0], coords[cand, 1] - p[1])
        d2 = np.hypot(coords[cand, 0] - q[0], coords[cand, 1] - q[1])
        m = np.maximum(_membership(d1, r, mode, rtol), _membership(d2, r, mode, rtol))
        out[k] = float(np.dot(weights[cand], m))
    return out


def node_dijkstra(indptr, indices, lengths, rho, sources, is_target):
    """Multi-source Dijkstra with edge weight ``len * (rho_u + rho_v) / 2``.

    Stops at the first target settled. Returns ``(dist, pred, hit)``; ``hit``
    is -1 when no target is reachable. Ties break on the smaller node index.
    """
    n = len(indptr) - 1
    dist = np.full(n, np.inf)
    pred = np.full(n, -1, dtype=np.int64)
    done = np.zeros(n, dtype=bool)
    heap = []
    for s in sources:
        s = int(s)
        if dist[s] > 0.0:
            dist[s] = 0.0
            heap.append((0.0, s))
    heapq.heapify(heap)
    while heap:
        du, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        if is_target[u]:
            return dist, pred, u
        ru = rho[u]
        for e in range(indptr[u], indptr[u + 1]):
            v = indices[e]
            if done[v]:
                continue
            nd = du + lengths[e] * 0.5 * (ru + rho[v])
            if nd < dist[v] or (nd == dist[v] and pred[v] > u):
                dist[v] = nd
                pred[v] = u
                heapq.heappush(heap, (nd, v))
    return dist, pred, -1
