"""Chain lengths, the deformed metric q and the constants tied to it.

The chain length of a delta-chain ``x_0, ..., x_m`` is the sum of
``mass(pair_ball(x_{j-1}, x_j)) ** (1/s)``; ``q_delta`` is its infimum, which
on a finite sample is a shortest path in the delta-proximity graph.
"""
from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.sparse import coo_matrix, csr_matrix
from scipy.sparse.csgraph import connected_components, dijkstra, minimum_spanning_tree

from .mmspace import MMSpace, SpaceError, pair_ball_masses

log = logging.getLogger(__name__)

# Below a few pitches the lattice step set is too coarse for chains to turn
# corners cheaply and q degenerates towards an l1-type metric.
RESOLUTION_FACTOR = 4.0
EDGE_RTOL = 1e-9

__all__ = [
    "RESOLUTION_FACTOR",
    "DisconnectedError",
    "ChainGraph",
    "ConstantLedger",
    "chain_graph",
    "connectivity_threshold",
    "finest_delta",
    "default_schedule",
    "q_delta",
    "q_rows",
    "q_estimate",
    "q_matrix",
    "q_space",
    "wmdm_constant",
    "reverse_constant",
    "ell_of",
]


class DisconnectedError(SpaceError):
    """The chain graph (or a query pair) is not connected."""

    def __init__(self, message, components=None):
        super().__init__(message, index=components)
        self.components = components


def threads() -> int:
    try:
        return max(1, int(os.environ.get("WMDM_THREADS", "1")))
    except ValueError:
        return 1


@dataclass(eq=False)
class ChainGraph:
    space: MMSpace
    delta: float
    s: float
    pairs: np.ndarray
    masses: np.ndarray
    costs: np.ndarray
    matrix: csr_matrix
    n_components: int
    labels: np.ndarray
    _rows: dict = field(default_factory=dict, repr=False)

    @property
    def n_edges(self) -> int:
        return len(self.pairs)

    def edge_cost(self, x: int, y: int) -> float:
        v = self.matrix[x, y]
        if v == 0:
            raise KeyError(f"({x}, {y}) is not an edge at delta={self.delta}")
        return float(v)

    def row(self, x: int) -> np.ndarray:
        r = self._rows.get(x)
        if r is None:
            r = dijkstra(self.matrix, directed=False, indices=int(x))
            self._rows[x] = r
        return r


def _edge_pairs(space: MMSpace, delta: float) -> np.ndarray:
    if space.has_coords:
        from scipy.spatial import cKDTree

        rb = float(space.to_base(delta)) * (1.0 + EDGE_RTOL)
        tree = cKDTree(space.coords)
        pairs = tree.query_pairs(rb, output_type="ndarray")
    else:
        D = space.metric.matrix
        i, j = np.nonzero(np.triu(D <= delta * (1.0 + EDGE_RTOL), k=1))
        pairs = np.column_stack([i, j])
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    order = np.lexsort((pairs[:, 1], pairs[:, 0]))
    return np.ascontiguousarray(pairs[order])


def chain_graph(space: MMSpace, delta: float, s: float = 2.0, *,
                allow_disconnected: bool = False) -> ChainGraph:
    """Proximity graph at scale ``delta`` with costs ``mass(B_xy) ** (1/s)``."""
    if not s > 0:
        raise SpaceError("dimension parameter s must be positive")
    if not delta > 0:
        raise SpaceError("delta must be positive")
    pairs = _edge_pairs(space, delta)
    masses = pair_ball_masses(space, pairs) if len(pairs) else np.zeros(0)
    costs = np.power(masses, 1.0 / s)
    if np.any(costs <= 0):
        k = int(np.flatnonzero(costs <= 0)[0])
        raise SpaceError(f"edge {tuple(pairs[k])} has zero pair-ball mass", index=tuple(pairs[k]))
    n = space.n
    A = coo_matrix((costs, (pairs[:, 0], pairs[:, 1])), shape=(n, n)).tocsr()
    A = (A + A.T).tocsr()
    ncomp, labels = connected_components(A, directed=False)
    if ncomp > 1 and not allow_disconnected:
        a = int(np.flatnonzero(labels == 0)[0])
        b = int(np.flatnonzero(labels != 0)[0])
        raise DisconnectedError(
            f"delta={delta:g} leaves {ncomp} components (e.g. points {a} and {b})", (a, b))
    return ChainGraph(space, float(delta), float(s), pairs, masses, costs, A, ncomp, labels)


def connectivity_threshold(space: MMSpace) -> float:
    """Smallest delta for which the delta-graph is connected (MST bottleneck)."""
    if space.has_coords and space.n > 3:
        from scipy.spatial import Delaunay, QhullError

        try:
            tri = Delaunay(space.coords)
            ind = tri.simplices
            e = np.vstack([ind[:, [0, 1]], ind[:, [1, 2]], ind[:, [0, 2]]])
            c = space.coords
            w = np.hypot(*(c[e[:, 0]] - c[e[:, 1]]).T)
            G = coo_matrix((w, (e[:, 0], e[:, 1])), shape=(space.n, space.n)).tocsr()
            T = minimum_spanning_tree(G)
            return float(space.from_base(T.data.max()))
        except QhullError:
            pass
    D = space.dist_matrix
    T = minimum_spanning_tree(csr_matrix(D))
    return float(T.data.max())


def finest_delta(space: MMSpace) -> float:
    """Finest delta that is both connected and above the resolution floor."""
    t = connectivity_threshold(space)
    if space.pitch and space.has_coords:
        floor = float(space.from_base(RESOLUTION_FACTOR * space.pitch))
        return max(t, floor)
    return t


def default_schedule(space: MMSpace, steps: int = 3) -> list[float]:
    """Decreasing deltas ending at :func:`finest_delta`, halving in coordinate units."""
    base = float(space.to_base(finest_delta(space)))
    return [float(space.from_base(base * 2.0 ** k)) for k in range(steps - 1, -1, -1)]


def q_delta(graph: ChainGraph, x: int, y: int) -> float:
    x, y = graph.space.check_id(x), graph.space.check_id(y)
    if x == y:
        return 0.0
    v = graph.row(x)[y]
    if not np.isfinite(v):
        raise DisconnectedError(f"points {x} and {y} are not chain-connected at delta={graph.delta:g}",
                                (x, y))
    return float(v)


def q_rows(graph: ChainGraph, sources) -> np.ndarray:
    sources = np.asarray(sources, dtype=np.int64)
    todo = [int(s) for s in sources if int(s) not in graph._rows]
    if todo:
        nt = threads()
        chunks = [todo[k::nt] for k in range(nt)] if nt > 1 else [todo]

        def run(chunk):
            return chunk, dijkstra(graph.matrix, directed=False, indices=chunk)

        if nt > 1:
            with ThreadPoolExecutor(nt) as ex:
                results = list(ex.map(run, [c for c in chunks if c]))
        else:
            results = [run(todo)]
        for chunk, rows in results:
            rows = np.atleast_2d(rows)
            for s, r in zip(chunk, rows):
                graph._rows[s] = r
    return np.vstack([graph._rows[int(s)] for s in sources])


def q_matrix(graph: ChainGraph) -> np.ndarray:
    """All-pairs q_delta; symmetrised to remove floating-point asymmetry."""
    M = q_rows(graph, np.arange(graph.space.n))
    if not np.all(np.isfinite(M)):
        raise DisconnectedError("chain graph is disconnected")
    return np.minimum(M, M.T)


def q_space(space: MMSpace, delta: float | None = None, s: float = 2.0) -> MMSpace:
    """Same points and masses, metric replaced by all-pairs ``q_delta``."""
    delta = finest_delta(space) if delta is None else delta
    g = chain_graph(space, delta, s)
    return space.with_metric(q_matrix(g), deformed_from=space.meta.get("generator"), delta=delta)


@dataclass
class QEstimate:
    q: float
    delta: float
    table: list[tuple[float, float]]
    monotone: bool
    flagged: bool


def q_estimate(space: MMSpace, x: int, y: int, schedule=None, s: float = 2.0,
               graphs: dict | None = None) -> QEstimate:
    """Evaluate ``q_delta(x, y)`` along a decreasing schedule.

    ``q`` is the value at the finest feasible delta. ``flagged`` marks a
    table that decreases by more than 1% as delta shrinks, which cannot happen
    for exact chain infima and signals a resolution artifact.
    """
    if schedule is None:
        schedule = default_schedule(space)
    schedule = [float(d) for d in schedule]
    if any(b >= a for a, b in zip(schedule, schedule[1:])):
        raise SpaceError("delta schedule must be strictly decreasing")
    floor = finest_delta(space) * (1.0 - 1e-9)
    table = []
    best = None
    for d in schedule:
        g = None if graphs is None else graphs.get(d)
        if g is None:
            try:
                g = chain_graph(space, d, s)
            except DisconnectedError:
                table.append((d, math.inf))
                continue
            if graphs is not None:
                graphs[d] = g
        v = q_delta(g, x, y)
        table.append((d, v))
        if d >= floor:
            best = (v, d)
    if best is None:
        raise DisconnectedError("no feasible delta in the schedule")
    vals = [v for _, v in table if np.isfinite(v)]
    monotone = all(b >= a * (1 - 1e-12) for a, b in zip(vals, vals[1:]))
    flagged = any(b < a * 0.99 for a, b in zip(vals, vals[1:]))
    if flagged:
        log.warning("q table for (%d, %d) decreases as delta shrinks: %s", x, y, table)
    return QEstimate(best[0], best[1], table, monotone, flagged)


def _q_values(q, pairs: np.ndarray) -> np.ndarray:
    if isinstance(q, ChainGraph):
        out = np.empty(len(pairs))
        for s in np.unique(pairs[:, 0]):
            sel = pairs[:, 0] == s
            out[sel] = q.row(int(s))[pairs[sel, 1]]
        return out
    Q = np.asarray(q)
    return Q[pairs[:, 0], pairs[:, 1]]


def sample_pairs(space: MMSpace, count: int | None = 2000, seed: int = 0,
                 ids=None) -> np.ndarray:
    """All pairs when small, otherwise ``count`` distinct random pairs."""
    ids = np.arange(space.n) if ids is None else np.asarray(ids, dtype=np.int64)
    m = len(ids)
    total = m * (m - 1) // 2
    if count is None or total <= count:
        i, j = np.triu_indices(m, k=1)
        return np.column_stack([ids[i], ids[j]])
    rng = np.random.default_rng(seed)
    a = rng.integers(0, m, 2 * count)
    b = rng.integers(0, m, 2 * count)
    keep = a != b
    p = np.column_stack([ids[np.minimum(a, b)], ids[np.maximum(a, b)]])[keep]
    p = np.unique(p, axis=0)
    rng.shuffle(p)
    return p[:count]


@dataclass
class Witnessed:
    value: float
    witness: tuple
    ratios: np.ndarray | None = field(default=None, repr=False)


def wmdm_constant(space: MMSpace, q, pairs=None, s: float = 2.0) -> Witnessed:
    """``C_W = max mass(B_xy)**(1/s) / q(x, y)`` over the pair sample."""
    pairs = sample_pairs(space) if pairs is None else np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    qv = _q_values(q, pairs)
    if np.any(qv <= 0):
        k = int(np.flatnonzero(qv <= 0)[0])
        raise SpaceError(f"q vanishes on distinct points {tuple(pairs[k])}", index=tuple(pairs[k]))
    m = np.power(pair_ball_masses(space, pairs), 1.0 / s)
    ratio = m / qv
    k = int(np.argmax(ratio))
    return Witnessed(float(ratio[k]), (int(pairs[k, 0]), int(pairs[k, 1])), ratio)


@dataclass
class ReverseResult:
    C_S: float
    witness: tuple
    r_x: dict
    admitted: int
    skipped: int


def reverse_constant(space: MMSpace, q, pairs=None, radius: float | None = None,
                     s: float = 2.0) -> ReverseResult:
    """Measured ``C_S`` for ``q(x, y) <= C_S mass(B_xy)**(1/s)``.

    Pairs within ``radius`` (metric units; default: all sampled pairs) are
    admitted. ``r_x[x]`` is the largest radius about ``x`` inside which every
    sampled ``y`` obeys the bound with the measured constant, ``inf`` when no
    sampled pair violates it.
    """
    pairs = sample_pairs(space) if pairs is None else np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    qv = _q_values(q, pairs)
    masses = pair_ball_masses(space, pairs)
    d = np.array([space.dist(int(a), int(b)) for a, b in pairs]) if not space.has_coords else \
        space.from_base(np.hypot(*(space.coords[pairs[:, 0]] - space.coords[pairs[:, 1]]).T))
    ok = masses > 0
    skipped = int((~ok).sum())
    if skipped:
        log.info("reverse_constant: skipped %d zero-mass pairs", skipped)
    admitted = ok if radius is None else ok & (d < radius)
    ratio = np.full(len(pairs), -np.inf)
    ratio[ok] = qv[ok] / np.power(masses[ok], 1.0 / s)
    if not np.any(admitted):
        raise SpaceError("no admitted pairs for the reverse constant")
    adm = np.flatnonzero(admitted)
    k = adm[int(np.argmax(ratio[adm]))]
    C_S = float(ratio[k])
    r_x: dict[int, float] = {}
    bad = ratio > C_S * (1 + 1e-12)
    for col in (0, 1):
        for x in np.unique(pairs[:, col]):
            x = int(x)
            sel = (pairs[:, col] == x) & bad
            r = float(d[sel].min()) if np.any(sel) else math.inf
            r_x[x] = min(r_x.get(x, math.inf), r)
    return ReverseResult(C_S, (int(pairs[k, 0]), int(pairs[k, 1])), r_x, int(admitted.sum()), skipped)


def ell_of(lam: float) -> int:
    """``ceil(log2 lam)`` after rounding ``lam`` up to a power of two."""
    if lam < 1:
        raise SpaceError("LLC constant must be at least 1")
    return max(0, math.ceil(math.log2(lam) - 1e-12))


@dataclass
class ConstantLedger:
    C_W: float
    C_D: float
    lam: float
    C_S: float | None = None

    @property
    def ell(self) -> int:
        return ell_of(self.lam)

    @property
    def C_S_bound(self) -> float:
        return 16.0 * self.C_W * self.C_D ** (28 + 16 * self.ell)

    @property
    def C_2(self) -> float:
        return 4.0 * self.C_W * self.C_D ** (28 + 15 * self.ell)

    def to_json(self) -> dict:
        out = asdict(self)
        out.update(ell=self.ell, C_S_bound=self.C_S_bound, C_2=self.C_2)
        return out
