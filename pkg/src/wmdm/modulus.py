"""Discrete conformal modulus of path families on a planar sample graph.

Densities live on nodes. A path ``v_0 .. v_k`` has rho-length
``sum_e len_e (rho[v_{i-1}] + rho[v_i]) / 2`` and the energy of ``rho`` is
``sum_v area_v rho_v**2``. The modulus is the least energy over admissible
densities, computed by constraint generation: shortest-path separation
against a working set of paths whose quadratic program is solved through its
dual, ``min 1/4 l^T G l - 1^T l`` over ``l >= 0`` with ``G = P W^-1 P^T``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.sparse import coo_matrix, csr_matrix
from scipy.sparse.csgraph import breadth_first_order
from scipy.spatial import cKDTree

from . import kernels
from .mmspace import MMSpace, SpaceError

log = logging.getLogger(__name__)

DEFAULT_TOL = 0.02
NEIGHBOUR_RADIUS = math.sqrt(5.0)
QUANTUM = 2.0 ** 40

__all__ = [
    "DomainGraph",
    "PathFamily",
    "DensityField",
    "ModulusResult",
    "domain_graph",
    "side_family",
    "ring_family",
    "modulus_solve",
    "path_lengths",
    "admissibility_check",
    "circle_family_modulus",
    "ring_circles",
    "quasiconformality_spot_check",
    "exhaustive_modulus",
    "solve_dual",
]


@dataclass(frozen=True)
class DomainGraph:
    """Symmetric CSR graph with positive edge lengths and node areas."""

    indptr: np.ndarray
    indices: np.ndarray
    lengths: np.ndarray
    areas: np.ndarray
    coords: np.ndarray | None = None
    mask: np.ndarray | None = None

    @property
    def n(self) -> int:
        return len(self.areas)

    @classmethod
    def from_edges(cls, n: int, edges, lengths, areas, coords=None, mask=None) -> "DomainGraph":
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        lengths = np.asarray(lengths, dtype=float).reshape(-1)
        areas = np.asarray(areas, dtype=float).reshape(-1)
        if len(areas) != n:
            raise SpaceError("areas must have one entry per node")
        if np.any(lengths <= 0):
            raise SpaceError("edge lengths must be positive", index=int(np.flatnonzero(lengths <= 0)[0]))
        if np.any(areas <= 0):
            raise SpaceError("node areas must be positive", index=int(np.flatnonzero(areas <= 0)[0]))
        if np.any(edges[:, 0] == edges[:, 1]):
            raise SpaceError("self loops are not allowed")
        ij = np.concatenate([edges, edges[:, ::-1]])
        ln = np.concatenate([lengths, lengths])
        M = csr_matrix((ln, (ij[:, 0], ij[:, 1])), shape=(n, n))
        M.sum_duplicates()
        M.sort_indices()
        return cls(M.indptr.astype(np.int64), M.indices.astype(np.int64), M.data.astype(float), areas,
                   None if coords is None else np.asarray(coords, float),
                   None if mask is None else np.asarray(mask, bool))

    def edge_length(self, u: int, v: int) -> float:
        row = self.indices[self.indptr[u]:self.indptr[u + 1]]
        k = np.searchsorted(row, v)
        if k < len(row) and row[k] == v:
            return float(self.lengths[self.indptr[u] + k])
        raise SpaceError(f"nodes {u} and {v} are not adjacent", index=(u, v))

    def scaled(self, sigma: float) -> "DomainGraph":
        """Lengths times ``sigma``, areas times ``sigma**2``."""
        return DomainGraph(self.indptr, self.indices, self.lengths * sigma, self.areas * sigma * sigma,
                           None if self.coords is None else self.coords * sigma, self.mask)

    def restricted(self, keep: np.ndarray) -> "DomainGraph":
        """Drop edges touching nodes outside ``keep`` (node ids unchanged)."""
        keep = np.asarray(keep, bool)
        rows = np.repeat(np.arange(self.n), np.diff(self.indptr))
        ok = keep[rows] & keep[self.indices]
        M = csr_matrix((self.lengths[ok], (rows[ok], self.indices[ok])), shape=(self.n, self.n))
        M.sort_indices()
        return DomainGraph(M.indptr.astype(np.int64), M.indices.astype(np.int64), M.data.astype(float),
                           self.areas, self.coords, keep)


def domain_graph(space: MMSpace, radius: float | None = None, areas="weight",
                 mask=None) -> DomainGraph:
    """Proximity graph of a coordinate sample.

    Edges join points within ``radius`` coordinate units (default ``sqrt(5)``
    pitches) unless another sample point sits at their midpoint; lengths are
    distances in the space's metric. ``areas`` is ``"weight"``, ``"nn2"``
    (squared nearest-neighbour distance, for deformed metrics) or an array.
    """
    if space.coords is None:
        raise SpaceError("domain graphs need coordinates")
    P = space.coords
    tree = cKDTree(P)
    h = space.pitch or float(np.min(tree.query(P, k=2)[0][:, 1]))
    rad = NEIGHBOUR_RADIUS * h if radius is None else float(radius)
    pairs = tree.query_pairs(rad * (1 + 1e-9), output_type="ndarray")
    mid = 0.5 * (P[pairs[:, 0]] + P[pairs[:, 1]])
    dm, _ = tree.query(mid)
    pairs = pairs[dm > 1e-6 * h]
    if space.metric.kind == "matrix":
        lengths = space.metric.matrix[pairs[:, 0], pairs[:, 1]]
    else:
        lengths = space.from_base(np.hypot(*(P[pairs[:, 0]] - P[pairs[:, 1]]).T))
    if isinstance(areas, str):
        if areas == "weight":
            a = space.weights
        elif areas == "nn2":
            M = csr_matrix((lengths, (pairs[:, 0], pairs[:, 1])), shape=(space.n, space.n))
            M = M.maximum(M.T).tocsr()
            a = np.array([M.data[M.indptr[i]:M.indptr[i + 1]].min() for i in range(space.n)]) ** 2
        else:
            raise SpaceError(f"unknown area model {areas!r}")
    else:
        a = np.asarray(areas, float)
    g = DomainGraph.from_edges(space.n, pairs, lengths, a, coords=P)
    return g if mask is None else g.restricted(mask)


@dataclass(frozen=True)
class PathFamily:
    """Paths joining ``A`` to ``B`` inside ``mask``, or an explicit path list."""

    A: np.ndarray = field(default_factory=lambda: np.empty(0, np.int64))
    B: np.ndarray = field(default_factory=lambda: np.empty(0, np.int64))
    mask: np.ndarray | None = None
    kind: str = "connecting"
    paths: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "A", np.unique(np.asarray(self.A, dtype=np.int64)))
        object.__setattr__(self, "B", np.unique(np.asarray(self.B, dtype=np.int64)))
        if self.kind == "connecting" and np.intersect1d(self.A, self.B).size:
            raise SpaceError("A and B must be disjoint", index=int(np.intersect1d(self.A, self.B)[0]))
        if self.kind not in ("connecting", "explicit"):
            raise SpaceError(f"unknown family kind {self.kind!r}")

    def mapped(self, f: np.ndarray) -> "PathFamily":
        f = np.asarray(f, dtype=np.int64)
        mask = None
        if self.mask is not None:
            mask = np.zeros(f.max() + 1, dtype=bool)
            mask[f[np.flatnonzero(self.mask)]] = True
        return PathFamily(f[self.A], f[self.B], mask, self.kind, tuple(tuple(f[list(p)]) for p in self.paths))

    def to_json(self) -> dict:
        out = {"A": self.A.tolist(), "B": self.B.tolist()}
        if self.mask is not None:
            out["mask"] = np.flatnonzero(self.mask).tolist()
        if self.kind == "explicit":
            out["paths"] = [list(map(int, p)) for p in self.paths]
        return out

    @classmethod
    def from_json(cls, obj: dict, n: int | None = None) -> "PathFamily":
        mask = None
        if obj.get("mask") is not None:
            if n is None:
                raise SpaceError("mask needs the node count")
            mask = np.zeros(n, dtype=bool)
            mask[np.asarray(obj["mask"], dtype=np.int64)] = True
        if "paths" in obj:
            return cls(kind="explicit", paths=tuple(tuple(p) for p in obj["paths"]))
        return cls(obj["A"], obj["B"], mask)


@dataclass
class DensityField:
    rho: np.ndarray
    areas: np.ndarray

    def __post_init__(self):
        if np.any(self.rho < 0):
            raise SpaceError("densities must be nonnegative", index=int(np.flatnonzero(self.rho < 0)[0]))

    @property
    def objective(self) -> float:
        return float(np.dot(self.areas, self.rho * self.rho))


@dataclass
class ModulusResult:
    value: float
    lower: float
    upper: float
    density: DensityField
    paths: list
    weights: np.ndarray
    iterations: int
    converged: bool
    shortest: float

    @property
    def active(self) -> list:
        return [p for p, w in zip(self.paths, self.weights) if w > 0]

    def to_json(self) -> dict:
        return {"value": self.value, "lower": self.lower, "upper": self.upper,
                "iterations": self.iterations, "converged": self.converged,
                "n_paths": len(self.paths), "n_active": len(self.active)}


# ---------------------------------------------------------------------------
# dual QP
# ---------------------------------------------------------------------------

def solve_dual(G: np.ndarray, lam0: np.ndarray | None = None, max_iter: int | None = None) -> np.ndarray:
    """Minimise ``1/4 l^T G l - 1^T l`` over ``l >= 0`` (active set, warm start).

    ``G`` must be symmetric positive semidefinite with positive diagonal. A
    ridge of ``1e-13 * max diag`` keeps the free blocks factorizable.
    """
    k = len(G)
    if k == 0:
        return np.zeros(0)
    H = 0.5 * G + np.eye(k) * (1e-13 * float(np.max(np.diag(G))))
    lam = np.zeros(k) if lam0 is None else np.maximum(np.asarray(lam0, float).copy(), 0.0)
    if len(lam) < k:
        lam = np.r_[lam, np.zeros(k - len(lam))]
    lam = _pdas(H, lam)
    free = lam > 0
    if free.any():
        lam = _inner(H, lam, free)
        free = lam > 0
    max_iter = 10 * k + 50 if max_iter is None else max_iter
    # free every violated variable at once; fall back to the single most
    # violated one when that makes no progress
    single = False
    obj = _dual_obj(H, lam)
    for _ in range(max_iter):
        g = H @ lam - 1.0
        g[free] = 0.0
        i = int(np.argmin(g))
        if g[i] >= -1e-12:
            break
        if single:
            free[i] = True
        else:
            free |= g < -1e-12
        lam = _inner(H, lam, free)
        free = lam > 0
        new = _dual_obj(H, lam)
        single = not new < obj - 1e-15 * abs(obj)
        obj = min(obj, new)
    return lam


def _pdas(H: np.ndarray, lam: np.ndarray, max_sweeps: int = 25) -> np.ndarray:
    """Primal-dual active set sweeps (one factorization each). Returns the
    input unchanged when the sweeps cycle; the caller polishes either way."""
    k = len(lam)
    free = lam > 0
    if not free.any():
        free = (H @ lam - 1.0) < 0
    seen = set()
    for _ in range(max_sweeps):
        key = free.tobytes()
        if key in seen:
            return lam
        seen.add(key)
        idx = np.flatnonzero(free)
        z = np.zeros(k)
        if idx.size:
            try:
                z[idx] = cho_solve(cho_factor(H[np.ix_(idx, idx)]), np.ones(idx.size))
            except np.linalg.LinAlgError:
                return lam
        g = H @ z - 1.0
        nxt = (z > 0) | (~free & (g < -1e-12))
        if np.array_equal(nxt, free) and np.all(z[idx] > 0):
            return z
        free = nxt
    return lam


def _dual_obj(H: np.ndarray, lam: np.ndarray) -> float:
    return float(lam @ (H @ lam) * 0.5 - lam.sum())


def _inner(H: np.ndarray, lam: np.ndarray, free: np.ndarray) -> np.ndarray:
    free = free.copy()
    while True:
        idx = np.flatnonzero(free)
        z = np.zeros_like(lam)
        if idx.size:
            Hs = H[np.ix_(idx, idx)]
            try:
                z[idx] = cho_solve(cho_factor(Hs), np.ones(idx.size))
            except np.linalg.LinAlgError:
                z[idx] = np.linalg.lstsq(Hs, np.ones(idx.size), rcond=None)[0]
        if np.all(z[idx] > 0):
            return z
        neg = idx[z[idx] <= 0]
        with np.errstate(divide="ignore", invalid="ignore"):
            steps = lam[neg] / (lam[neg] - z[neg])
        steps = steps[np.isfinite(steps)]
        alpha = float(np.clip(steps.min(), 0.0, 1.0)) if steps.size else 0.0
        lam = lam + alpha * (z - lam)
        lam[np.abs(lam) < 1e-15] = 0.0
        lam[neg[lam[neg] <= 1e-15 * max(1.0, lam.max())]] = 0.0
        free &= lam > 0


# ---------------------------------------------------------------------------
# separation
# ---------------------------------------------------------------------------

def _path_vector(g: DomainGraph, path) -> np.ndarray:
    a = np.zeros(g.n)
    for u, v in zip(path[:-1], path[1:]):
        ln = g.edge_length(int(u), int(v))
        a[u] += 0.5 * ln
        a[v] += 0.5 * ln
    return a


def path_lengths(g: DomainGraph, rho: np.ndarray, paths) -> np.ndarray:
    return np.array([_path_vector(g, p) @ rho for p in paths])


def _backtrack(pred: np.ndarray, t: int) -> list[int]:
    path = [int(t)]
    while pred[path[-1]] >= 0:
        path.append(int(pred[path[-1]]))
    return path[::-1]


def _prepared(g: DomainGraph, family: PathFamily) -> DomainGraph:
    if family.mask is not None:
        mask = np.asarray(family.mask, bool)
        if g.mask is not None:
            mask = mask & g.mask
        return g.restricted(mask)
    return g


def _sssp(g: DomainGraph, rho: np.ndarray, sources: np.ndarray, targets: np.ndarray | None):
    is_t = np.zeros(g.n, dtype=np.uint8)
    if targets is not None:
        is_t[targets] = 1
    return kernels.node_dijkstra(g.indptr, g.indices, g.lengths, np.ascontiguousarray(rho, float),
                                 np.ascontiguousarray(sources, np.int64), is_t)


def _check_family(g: DomainGraph, family: PathFamily) -> tuple[np.ndarray, np.ndarray]:
    A, B = family.A, family.B
    if len(A) == 0 or len(B) == 0:
        raise SpaceError("A and B must be nonempty")
    if g.mask is not None:
        if not (np.all(g.mask[A]) and np.all(g.mask[B])):
            raise SpaceError("A and B must lie in the domain")
    return A, B


def shortest_path(g: DomainGraph, family: PathFamily, rho: np.ndarray):
    """rho-shortest member of the family: ``(length, path)``; ``(inf, None)``
    when the family is empty."""
    g = _prepared(g, family)
    if family.kind == "explicit":
        L = path_lengths(g, rho, family.paths)
        k = int(np.argmin(L))
        return float(L[k]), list(family.paths[k])
    A, B = _check_family(g, family)
    dist, pred, hit = _sssp(g, rho, A, B)
    if hit < 0:
        return math.inf, None
    return float(dist[hit]), _backtrack(pred, hit)


def modulus_solve(g: DomainGraph, family: PathFamily, tol: float = DEFAULT_TOL, *,
                  max_iter: int | None = None, batch: int = 16,
                  stop_above: float | None = None) -> ModulusResult:
    """Modulus by constraint generation.

    Stops once the shortest path has rho-length at least ``sqrt(1 - tol)``,
    so the feasible rescaling of rho costs at most ``1/(1 - tol)`` times the
    working-set optimum. ``stop_above`` ends early once the lower bound
    exceeds it (the value is then only a certified lower bound).
    """
    if not 0 < tol <= 0.1:
        raise SpaceError("tol must lie in (0, 0.1]")
    g = _prepared(g, family)
    if family.kind == "explicit":
        return _explicit_solve(g, family)
    g0 = g
    g, s, sa = _canonical(g)
    r = _solve_canonical(g, family, tol, max_iter, batch, None if stop_above is None else stop_above * s * s / sa)
    k = sa / (s * s)
    rho = r.density.rho / s
    upper = r.upper * k
    if r.value > 0:
        # undo the snapping: rescale against the exact graph
        A, B = _check_family(g0, family)
        dist, _, hit = _sssp(g0, rho, A, B)
        L = float(dist[hit])
        if 0.0 < L < 1.0:
            rho = rho / L
            upper = float(np.dot(g0.areas, rho * rho))
    return ModulusResult(r.value * k, r.lower * k, upper, DensityField(rho, g0.areas),
                         r.paths, r.weights * k, r.iterations, r.converged, r.shortest)


def _quantize(x: np.ndarray) -> np.ndarray:
    return np.maximum(np.round(x * QUANTUM) / QUANTUM, 1.0 / QUANTUM)


def _canonical(g: DomainGraph) -> tuple[DomainGraph, float, float]:
    """Copy with lengths and areas divided by their maxima and snapped to a
    ``2**-40`` grid, so rescaled graphs reach the solver bit-identical."""
    s = float(g.lengths.max()) if len(g.lengths) else 1.0
    sa = float(g.areas.max())
    gc = DomainGraph(g.indptr, g.indices, _quantize(g.lengths / s), _quantize(g.areas / sa), g.coords, g.mask)
    return gc, s, sa


def _solve_canonical(g: DomainGraph, family: PathFamily, tol: float, max_iter, batch: int,
                     stop_above) -> ModulusResult:
    W = g.areas
    A, B = _check_family(g, family)
    dist, pred, hit = _sssp(g, np.zeros(g.n), A, B)
    if hit < 0:
        zero = DensityField(np.zeros(g.n), W)
        return ModulusResult(0.0, 0.0, 0.0, zero, [], np.zeros(0), 0, True, math.inf)

    thresh = math.sqrt(1.0 - tol)
    is_B = np.zeros(g.n, dtype=bool)
    is_B[B] = True
    ws = _WorkingSet(g)
    rho = np.zeros(g.n)
    it = 0
    converged = False
    L = 0.0
    while True:
        it += 1
        dist, pred, _ = _sssp(g, rho, A, None)
        dB = dist[B]
        order = np.lexsort((B, dB))
        L = float(dB[order[0]])
        if L >= thresh:
            converged = True
            break
        new = []
        for t in B[order]:
            if dist[t] >= thresh or len(new) >= batch:
                break
            p = _backtrack(pred, int(t))
            # paths through other B nodes are covered by their prefixes
            if np.any(is_B[p[:-1]]) or tuple(p) in ws.keys:
                continue
            new.append(p)
        if not new:
            log.warning("modulus_solve: no new violated path at length %.6g", L)
            break
        for p in new:
            ws.add(p)
        ws.solve()
        rho = ws.rho()
        if stop_above is not None and ws.lower > stop_above:
            break
        cap = 50 * max(1, ws.n_active) if max_iter is None else max_iter
        if it >= (max(cap, 200) if max_iter is None else cap):
            log.warning("modulus_solve: iteration cap %d reached", it)
            break
        ws.prune()
    obj = float(np.dot(W, rho * rho))
    Lc = min(L, 1.0)
    if Lc > 0:
        feas = rho / Lc
        upper = obj / (Lc * Lc)
    else:
        feas, upper = rho, math.inf
    return ModulusResult(obj, min(ws.lower, obj), upper, DensityField(feas, W), ws.paths, ws.lam, it,
                         converged, L)


class _WorkingSet:
    """Paths with their sparse coefficient rows and Gram matrix ``P W^-1 P^T``."""

    def __init__(self, g: DomainGraph, stale: int = 3):
        self.g = g
        self.paths: list[list[int]] = []
        self.keys: set[tuple] = set()
        self.rows: list[tuple[np.ndarray, np.ndarray]] = []
        self.idle: list[int] = []
        self.G = np.zeros((0, 0))
        self.lam = np.zeros(0)
        self.stale = stale

    def _row(self, p):
        g = self.g
        u, v = np.asarray(p[:-1]), np.asarray(p[1:])
        ln = np.array([g.edge_length(int(a), int(b)) for a, b in zip(u, v)])
        a = np.zeros(g.n)
        np.add.at(a, u, 0.5 * ln)
        np.add.at(a, v, 0.5 * ln)
        idx = np.flatnonzero(a)
        return idx, a[idx]

    def _matrix(self):
        k = len(self.rows)
        if k == 0:
            return csr_matrix((0, self.g.n))
        ind = np.concatenate([r[0] for r in self.rows])
        val = np.concatenate([r[1] for r in self.rows])
        ptr = np.r_[0, np.cumsum([len(r[0]) for r in self.rows])]
        return csr_matrix((val, ind, ptr), shape=(k, self.g.n))

    def add(self, p):
        idx, val = self._row(p)
        x = np.zeros(self.g.n)
        x[idx] = val / self.g.areas[idx]
        k = len(self.rows)
        col = self._matrix() @ x if k else np.zeros(0)
        G = np.zeros((k + 1, k + 1))
        G[:k, :k] = self.G
        G[k, :k] = G[:k, k] = col
        G[k, k] = float(val @ x[idx])
        self.G = G
        self.rows.append((idx, val))
        self.paths.append(list(p))
        self.keys.add(tuple(p))
        self.idle.append(0)
        self.lam = np.r_[self.lam, 0.0]

    def solve(self):
        self.lam = solve_dual(self.G, self.lam)
        for i, l in enumerate(self.lam):
            self.idle[i] = 0 if l > 0 else self.idle[i] + 1

    def prune(self):
        keep = [i for i, t in enumerate(self.idle) if t < self.stale]
        if len(keep) == len(self.rows):
            return
        for i in set(range(len(self.rows))) - set(keep):
            self.keys.discard(tuple(self.paths[i]))
        self.G = self.G[np.ix_(keep, keep)]
        self.lam = self.lam[keep]
        self.rows = [self.rows[i] for i in keep]
        self.paths = [self.paths[i] for i in keep]
        self.idle = [self.idle[i] for i in keep]

    @property
    def lower(self) -> float:
        return 0.5 * float(self.lam.sum())

    @property
    def n_active(self) -> int:
        return int(np.count_nonzero(self.lam))

    def rho(self) -> np.ndarray:
        return (self._matrix().T @ self.lam) / (2.0 * self.g.areas)


def _explicit_solve(g: DomainGraph, family: PathFamily) -> ModulusResult:
    W = g.areas
    rows = np.array([_path_vector(g, p) for p in family.paths])
    if np.any(rows.sum(axis=1) <= 0):
        raise SpaceError("explicit paths must have positive length")
    G = (rows / W) @ rows.T
    lam = solve_dual(G)
    rho = rows.T @ lam / (2.0 * W)
    obj = float(np.dot(W, rho * rho))
    L = float((rows @ rho).min())
    feas = rho / min(L, 1.0) if L > 0 else rho
    return ModulusResult(obj, min(0.5 * float(lam.sum()), obj), obj / min(L, 1.0) ** 2, DensityField(feas, W),
                         [list(p) for p in family.paths], lam, 1, True, L)


def admissibility_check(g: DomainGraph, family: PathFamily, rho, tol: float = 0.0):
    """``(passed, shortest length, witness path)``; passes when every family
    member has rho-length at least ``1 - tol``."""
    rho = rho.rho if isinstance(rho, DensityField) else np.asarray(rho, float)
    if np.any(rho < 0):
        raise SpaceError("rho must be nonnegative")
    L, path = shortest_path(g, family, rho)
    ok = L >= 1.0 - tol
    return ok, L, (None if ok else path)


# ---------------------------------------------------------------------------
# families on generated spaces
# ---------------------------------------------------------------------------

def side_family(space: MMSpace, sides=("left", "right"), mask=None) -> PathFamily:
    """Nodes on two sides of a gridded rectangle (first/last column or row)."""
    P, h = space.coords, space.pitch
    lo, hi = P.min(axis=0), P.max(axis=0)
    pick = {
        "left": P[:, 0] < lo[0] + 0.5 * h, "right": P[:, 0] > hi[0] - 0.5 * h,
        "bottom": P[:, 1] < lo[1] + 0.5 * h, "top": P[:, 1] > hi[1] - 0.5 * h,
    }
    return PathFamily(np.flatnonzero(pick[sides[0]]), np.flatnonzero(pick[sides[1]]), mask)


def ring_family(space: MMSpace, r: float, R: float, center=(0.0, 0.0), band: float = 0.5) -> PathFamily:
    """Paths from the circle of radius ``r`` to that of radius ``R``: nodes within
    ``band`` pitches of each circle."""
    rad = np.hypot(*(space.coords - np.asarray(center, float)).T)
    h = space.pitch
    return PathFamily(np.flatnonzero(rad < r + band * h), np.flatnonzero(rad > R - band * h))


def ring_circles(space: MMSpace, t0: float, t1: float, center=(0.0, 0.0)) -> list[list[int]]:
    """Closed node cycles partitioning ``t0 <= |p - center| < t1`` into radial
    bands one pitch wide, each ordered by angle (first node repeated last)."""
    c = np.asarray(center, float)
    d = space.coords - c
    rad = np.hypot(d[:, 0], d[:, 1])
    ang = np.arctan2(d[:, 1], d[:, 0])
    h = space.pitch
    out = []
    edges = np.arange(t0, t1 + 1e-12, h)
    for a, b in zip(edges[:-1], edges[1:]):
        ids = np.flatnonzero((rad >= a) & (rad < b))
        if len(ids) < 3:
            continue
        ids = ids[np.lexsort((ids, ang[ids]))]
        out.append(ids.tolist() + [int(ids[0])])
    return out


def _cycle_vector(g: DomainGraph, cyc) -> np.ndarray:
    a = np.zeros(g.n)
    for u, v in zip(cyc[:-1], cyc[1:]):
        try:
            ln = g.edge_length(int(u), int(v))
        except SpaceError:
            if g.coords is None:
                raise
            ln = float(np.hypot(*(g.coords[v] - g.coords[u])))
        a[u] += 0.5 * ln
        a[v] += 0.5 * ln
    return a


def circle_family_modulus(g: DomainGraph, circles) -> ModulusResult:
    """Modulus of a finite family of closed node curves.

    Each curve is a node list whose last entry repeats the first. Consecutive
    nodes that are not graph neighbours are joined by their coordinate chord.
    """
    rows = []
    for k, cyc in enumerate(circles):
        cyc = [int(v) for v in cyc]
        if len(cyc) < 3 or cyc[0] != cyc[-1]:
            raise SpaceError(f"curve {k} is not closed", index=k)
        if len(set(cyc[:-1])) != len(cyc) - 1:
            raise SpaceError(f"curve {k} repeats a node", index=k)
        rows.append(_cycle_vector(g, cyc))
    rows = np.array(rows)
    W = g.areas
    lam = solve_dual((rows / W) @ rows.T)
    rho = rows.T @ lam / (2.0 * W)
    obj = float(np.dot(W, rho * rho))
    L = float((rows @ rho).min())
    return ModulusResult(obj, min(0.5 * float(lam.sum()), obj), obj / min(L, 1.0) ** 2,
                         DensityField(rho / min(L, 1.0), W), [list(c) for c in circles], lam, 1, True, L)


def quasiconformality_spot_check(f, g_src: DomainGraph, g_tgt: DomainGraph, families,
                                 tol: float = DEFAULT_TOL) -> tuple[float, list]:
    """``K = max over families of max(mod(G)/mod(fG), mod(fG)/mod(G))``.

    ``f[i]`` is the target node of source node ``i``. Returns ``(K, rows)``
    with one ``(mod_src, mod_tgt, ratio)`` row per family; a modulus vanishing
    on one side only gives ``inf``.
    """
    f = np.asarray(f, dtype=np.int64)
    if len(np.unique(f)) != len(f) or len(f) != g_src.n:
        raise SpaceError("f must be a bijection on the source nodes")
    rows = []
    K = 1.0
    for fam in families:
        m1 = modulus_solve(g_src, fam, tol).value
        m2 = modulus_solve(g_tgt, fam.mapped(f), tol).value
        if m1 == 0 and m2 == 0:
            ratio = 1.0
        elif m1 == 0 or m2 == 0:
            ratio = math.inf
        else:
            ratio = max(m1 / m2, m2 / m1)
        rows.append((m1, m2, ratio))
        K = max(K, ratio)
    return K, rows


# ---------------------------------------------------------------------------
# exhaustive reference
# ---------------------------------------------------------------------------

def simple_paths(g: DomainGraph, A, B, limit: int = 200000) -> list[list[int]]:
    """All simple paths from ``A`` to ``B`` that touch ``B`` only at the end."""
    A, B = set(map(int, A)), set(map(int, B))
    out: list[list[int]] = []
    for a in sorted(A):
        stack = [(a, [a])]
        while stack:
            u, path = stack.pop()
            for v in g.indices[g.indptr[u]:g.indptr[u + 1]]:
                v = int(v)
                if v in path:
                    continue
                if v in B:
                    out.append(path + [v])
                    if len(out) > limit:
                        raise SpaceError("too many simple paths for exhaustive search")
                elif v not in A:
                    stack.append((v, path + [v]))
    return out


def exhaustive_modulus(g: DomainGraph, family: PathFamily) -> float:
    """Full quadratic program over every simple path, via nonnegative least
    squares on the least-distance form ``min |u|^2 s.t. M u >= 1``."""
    from scipy.optimize import nnls

    g = _prepared(g, family)
    paths = simple_paths(g, family.A, family.B)
    if not paths:
        return 0.0
    rows = np.array([_path_vector(g, p) for p in paths])
    M = rows / np.sqrt(g.areas)
    E = np.vstack([M.T, np.ones((1, len(M)))])
    f = np.zeros(E.shape[0])
    f[-1] = 1.0
    w, _ = nnls(E, f, maxiter=50 * E.shape[1])
    r = E @ w - f
    if abs(r[-1]) < 1e-14:
        raise SpaceError("least-distance problem infeasible")
    u = -r[:-1] / r[-1]
    return float(u @ u)
