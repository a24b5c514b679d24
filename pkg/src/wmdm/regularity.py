"""Doubling, LLC and domain constants; Hausdorff content; ball comparisons."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .mmspace import MMSpace, SpaceError, ball_masses
from .reports import VerificationReport, compare, worst

log = logging.getLogger(__name__)

__all__ = [
    "UndefinedConstant",
    "UnresolvableScale",
    "RegularityReport",
    "dyadic_sample",
    "doubling_constant",
    "doubite_check",
    "llc_check",
    "llc_passes",
    "c_x_constant",
    "hausdorff2_content",
    "ball_comparison_check",
]


class UndefinedConstant(SpaceError):
    """The requested constant does not exist for this input."""


class UnresolvableScale(SpaceError):
    """The requested scale is below the sampling resolution."""


@dataclass
class RegularityReport:
    C_D: float | None = None
    doubite_C: float | None = None
    doubite_alpha: float | None = None
    lam: float | None = None
    C_X: float | None = None
    samples: list = field(default_factory=list)
    worst_case: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "C_D": self.C_D, "doubite_C": self.doubite_C, "doubite_alpha": self.doubite_alpha,
            "lambda": self.lam, "C_X": self.C_X, "n_samples": len(self.samples),
            "worst_case": {k: list(map(_num, v)) for k, v in self.worst_case.items()},
        }


def _num(v):
    return int(v) if isinstance(v, (int, np.integer)) else float(v)


def _resolution(space: MMSpace) -> float:
    """Smallest radius at which balls see more than their centre, roughly."""
    if space.pitch and space.has_coords:
        return float(space.from_base(space.pitch))
    D = space.dist_matrix
    return float(np.min(D + np.diag(np.full(space.n, np.inf))))


def dyadic_sample(space: MMSpace, centers=None, max_centers: int = 256, seed: int = 0,
                  min_radius: float | None = None) -> list[tuple[int, float]]:
    """Centres times radii ``diam / 2**k`` down to ``min_radius``."""
    if centers is None:
        centers = np.arange(space.n)
        if len(centers) > max_centers:
            centers = np.sort(np.random.default_rng(seed).choice(centers, max_centers, replace=False))
    diam = space.diameter
    lo = 0.5 * _resolution(space) if min_radius is None else min_radius
    radii = []
    r = diam / 2.0
    while r >= lo:
        radii.append(r)
        r /= 2.0
    return [(int(c), float(r)) for c in centers for r in radii]


def doubling_constant(space: MMSpace, sample=None) -> RegularityReport:
    """``C_D = max mass(B(x, 2r)) / mass(B(x, r))`` over the sample."""
    sample = dyadic_sample(space) if sample is None else list(sample)
    if not sample:
        raise SpaceError("empty doubling sample")
    cs = np.array([c for c, _ in sample], dtype=np.int64)
    rs = np.array([r for _, r in sample], dtype=float)
    m1 = ball_masses(space, cs, rs)
    m2 = ball_masses(space, cs, 2.0 * rs)
    ok = m1 > 0
    if not np.all(ok):
        log.info("doubling_constant: skipped %d zero-mass balls", int((~ok).sum()))
    ratio = np.where(ok, m2 / np.where(ok, m1, 1.0), -np.inf)
    k = int(np.argmax(ratio))
    C_D = max(1.0, float(ratio[k]))
    return RegularityReport(C_D=C_D, samples=sample, worst_case={"C_D": (int(cs[k]), float(rs[k]))})


@dataclass
class DoubiteResult:
    passed: bool
    C: float
    alpha: float
    upper_exponent: float
    alpha_bound: float
    C_bound_upper: float
    witness: tuple


def doubite_check(space: MMSpace, C_D: float, sample=None) -> DoubiteResult:
    """Fit the two-sided power bound for ball-mass ratios.

    ``sample`` holds ``(x, r, R)`` with ``r <= R``. ``upper_exponent`` is the
    least-squares slope of ``log ratio`` against ``log(R/r)``; ``alpha`` is the
    smallest exponent compatible with that slope on both sides and ``C`` the
    least constant making both bounds hold with it. ``passed`` requires the
    upper bound with ``C = C_D`` and ``alpha = log2 C_D`` and a finite ``C``.
    """
    if sample is None:
        base = dyadic_sample(space, max_centers=64)
        by_c: dict[int, list[float]] = {}
        for c, r in base:
            by_c.setdefault(c, []).append(r)
        sample = [(c, r, R) for c, rs in by_c.items() for r in rs for R in rs if r <= R]
    sample = list(sample)
    cs = np.array([s[0] for s in sample], dtype=np.int64)
    r = np.array([s[1] for s in sample], dtype=float)
    R = np.array([s[2] for s in sample], dtype=float)
    mr = ball_masses(space, cs, r)
    mR = ball_masses(space, cs, R)
    ok = (mr > 0) & (R >= r)
    ratio = mR[ok] / mr[ok]
    t = R[ok] / r[ok]
    lt, lr = np.log(t), np.log(ratio)
    nz = lt > 0
    if np.count_nonzero(nz) >= 2:
        slope = float(np.polyfit(lt[nz], lr[nz], 1)[0])
    elif np.any(nz):
        slope = float(lr[nz][0] / lt[nz][0])
    else:
        slope = 1.0
    alpha = max(slope, 1.0 / slope if slope > 0 else math.inf, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        up = ratio / t ** alpha
        low = t ** (1.0 / alpha) / ratio
    both = np.maximum(up, low)
    k = int(np.argmax(both))
    C = max(1.0, float(both[k]))
    a_bound = math.log2(C_D) if C_D > 1 else 0.0
    up_bound = float(np.max(ratio / t ** a_bound))
    passed = bool(up_bound <= C_D * (1 + 1e-12) and math.isfinite(C))
    idx = np.flatnonzero(ok)[k]
    return DoubiteResult(passed, C, alpha, slope, a_bound, up_bound,
                         (int(cs[idx]), float(r[idx]), float(R[idx])))


# ---------------------------------------------------------------------------
# LLC
# ---------------------------------------------------------------------------

def eps_graph(space: MMSpace, eps: float | None = None):
    """Proximity graph used as the stand-in for continua (``eps`` in coordinate
    units for coordinate spaces, metric units otherwise)."""
    if space.has_coords:
        from scipy.spatial import cKDTree

        eps = 2.0 * (space.pitch or _resolution(space)) if eps is None else eps
        pairs = cKDTree(space.coords).query_pairs(eps * (1 + 1e-9), output_type="ndarray")
    else:
        eps = 2.0 * _resolution(space) if eps is None else eps
        i, j = np.nonzero(np.triu(space.dist_matrix <= eps * (1 + 1e-9), k=1))
        pairs = np.column_stack([i, j])
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    n = space.n
    A = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n)).tocsr()
    return (A + A.T).tocsr()


class _DSU:
    def __init__(self, n):
        self.p = np.arange(n)

    def find(self, a):
        p = self.p
        root = a
        while p[root] != root:
            root = p[root]
        while p[a] != root:
            p[a], a = root, p[a]
        return root


def _lam_one(A, order, dist, marked, r, inner: bool) -> float:
    """Incremental union-find: add points in ``order`` until every marked
    point is present and they share one component."""
    need = int(marked.sum())
    if need <= 1:
        return 1.0
    dsu = _DSU(len(order))
    added = np.zeros(len(order), dtype=bool)
    has_mark = np.zeros(len(order), dtype=bool)
    comps = 0
    seen = 0
    indptr, indices = A.indptr, A.indices
    for v in order:
        added[v] = True
        if marked[v]:
            has_mark[v] = True
            comps += 1
            seen += 1
        for u in indices[indptr[v]:indptr[v + 1]]:
            if not added[u]:
                continue
            a, b = dsu.find(v), dsu.find(u)
            if a == b:
                continue
            if has_mark[a] and has_mark[b]:
                comps -= 1
            dsu.p[a] = b
            has_mark[b] = has_mark[b] or has_mark[a]
        if seen == need and comps == 1:
            d = dist[v]
            if inner:
                return max(1.0, d / r)
            return math.inf if d <= 0 else max(1.0, r / d)
    return math.inf


@dataclass
class LLCResult:
    lam: float
    lam_inner: float
    lam_outer: float
    witness_inner: tuple
    witness_outer: tuple
    per_sample: list = field(default_factory=list, repr=False)
    passed: bool | None = None


def llc_check(space: MMSpace, lam: float | None = None, samples=None, eps: float | None = None
              ) -> LLCResult:
    """Minimal LLC constant over the samples, computed exactly per sample.

    For (i) points are added by increasing distance from the centre until the
    points of ``B(x, r)`` are connected; for (ii) by decreasing distance until
    the points outside ``B(x, r)`` are connected. The distance of the last
    point added fixes the least admissible constant for that sample.
    """
    A = eps_graph(space, eps)
    if connected_components(A, directed=False)[0] > 1:
        raise SpaceError("proximity graph is disconnected; LLC undefined on this sample")
    samples = dyadic_sample(space, max_centers=64) if samples is None else list(samples)
    per = []
    for x, r in samples:
        d = space.dist_from(x)
        inner = d < r
        li = _lam_one(A, np.argsort(d, kind="stable"), d, inner, r, True)
        lo = _lam_one(A, np.argsort(-d, kind="stable"), d, ~inner, r, False)
        per.append((x, r, li, lo))
    li = max(per, key=lambda t: t[2])
    lo = max(per, key=lambda t: t[3])
    lam_min = max(li[2], lo[3])
    passed = None if lam is None else bool(lam >= lam_min * (1 - 1e-12))
    return LLCResult(lam_min, li[2], lo[3], (li[0], li[1]), (lo[0], lo[1]), per, passed)


def llc_passes(space: MMSpace, lam: float, samples, eps: float | None = None) -> bool:
    """Direct check at a fixed ``lam`` via induced-subgraph connectivity."""
    A = eps_graph(space, eps)
    for x, r in samples:
        d = space.dist_from(x)
        for marked, keep in ((d < r, d <= lam * r), (d >= r, d >= r / lam)):
            if marked.sum() <= 1:
                continue
            idx = np.flatnonzero(keep)
            _, lab = connected_components(A[idx][:, idx], directed=False)
            if len(np.unique(lab[marked[idx]])) > 1:
                return False
    return True


def c_x_constant(space: MMSpace, labels=None) -> float:
    """Diameter over the least distance between labelled boundary components."""
    comps = {k: v for k, v in space.boundary.items() if len(v)}
    if labels is not None:
        comps = {k: comps[k] for k in labels}
    if len(comps) < 2:
        raise UndefinedConstant(f"C_X needs at least 2 boundary components, found {len(comps)}")
    names = sorted(comps)
    best = math.inf
    for a in range(len(names)):
        for b in range(a + 1, len(names)):
            ia, ib = comps[names[a]], comps[names[b]]
            if space.has_coords:
                from scipy.spatial import cKDTree

                dd, _ = cKDTree(space.coords[ib]).query(space.coords[ia])
                gap = float(space.from_base(dd.min()))
            else:
                gap = float(space.dist_matrix[np.ix_(ia, ib)].min())
            best = min(best, gap)
    if best <= 0:
        raise UndefinedConstant("boundary components touch")
    return space.diameter / best


# ---------------------------------------------------------------------------
# Hausdorff 2-content of a q-deformed space
# ---------------------------------------------------------------------------

@dataclass
class ContentEstimate:
    content: float
    upper: float
    lower: float
    cover: list
    packing: list
    residual: int
    delta: float


def _nn(D: np.ndarray, ids: np.ndarray) -> np.ndarray:
    sub = D[np.ix_(ids, np.arange(D.shape[0]))].copy()
    sub[np.arange(len(ids)), ids] = np.inf
    return sub.min(axis=1)


def hausdorff2_content(space_q: MMSpace, E, delta: float) -> ContentEstimate:
    """2-dimensional content of ``E`` in the metric of ``space_q``.

    Two constructions, both from greedy selections in index order:

    * 5r cover: a maximal family of disjoint balls ``B(x_j, delta/10)`` whose
      fivefold dilates (radius ``delta/2 < delta``) cover ``E``. ``upper`` is
      ``pi * sum (delta/2)**2`` and ``lower`` is ``pi * sum (delta/10)**2``.
    * Vitali fill: disjoint balls inside ``E`` at radii ``delta/2, delta/4, ...``
      down to the sampling resolution; points left over are charged the square
      of their nearest-neighbour distance (the cell of a square lattice).
      ``content`` is ``pi * sum s_j**2`` plus that residual.

    Normalised so the euclidean metric gives Lebesgue measure.
    """
    E = np.unique(np.asarray(E, dtype=np.int64))
    if len(E) == 0:
        return ContentEstimate(0.0, 0.0, 0.0, [], [], 0, delta)
    D = space_q.dist_matrix
    nn = _nn(D, E)
    res = float(nn.max())
    if delta <= res:
        raise UnresolvableScale(f"delta={delta:g} is below the resolution {res:g}")
    inE = np.zeros(space_q.n, dtype=bool)
    inE[E] = True

    s5 = delta / 10.0
    centers: list[int] = []
    covered = np.zeros(space_q.n, dtype=bool)
    for x in E:
        if covered[x]:
            continue
        dx = D[x]
        if centers and np.min(dx[centers]) < 2 * s5:
            continue
        centers.append(int(x))
        covered |= dx < 5 * s5
    # maximality of the disjoint family makes the dilates cover E
    for x in E:
        if not covered[x]:
            centers.append(int(x))
            covered |= D[x] < 5 * s5
    upper = math.pi * len(centers) * (5 * s5) ** 2
    lower = math.pi * len(centers) * s5 ** 2

    # Vitali fill; balls must stay inside E, and since E is a sample we ask
    # that the distance to the nearest point outside E exceeds the radius.
    outside = np.flatnonzero(~inE)
    to_out = D[np.ix_(E, outside)].min(axis=1) if len(outside) else np.full(len(E), np.inf)
    packed: list[tuple[int, float]] = []
    pc: list[int] = []
    pr: list[float] = []
    taken = np.zeros(space_q.n, dtype=bool)
    s = delta / 2.0
    while s > 0.5 * res:
        for k, x in enumerate(E):
            if taken[x] or to_out[k] < s:
                continue
            if pc:
                if np.any(D[x, pc] < np.asarray(pr) + s):
                    continue
            pc.append(int(x))
            pr.append(s)
            packed.append((int(x), s))
            taken |= D[x] < s
        s /= 2.0
    residual = ~taken[E]
    content = math.pi * sum(r * r for _, r in packed) + float(np.sum(nn[residual] ** 2))
    return ContentEstimate(content, upper, lower, [(c, 5 * s5) for c in centers], packed,
                           int(residual.sum()), delta)


# ---------------------------------------------------------------------------
# comparisons between mu and q-balls
# ---------------------------------------------------------------------------

def _q_ball_mass(space: MMSpace, Q: np.ndarray, x: int, s: float) -> float:
    return float(space.weights[Q[x] < s].sum())


def ball_comparison_check(space: MMSpace, Q: np.ndarray, constants: dict, *, r_x=None,
                          centers=None, radii=None, sets=None, delta: float | None = None,
                          seed: int = 0) -> list[VerificationReport]:
    """Mass of q-balls against the WMDM bounds, and mass against q-content.

    ``Q`` is the all-pairs q matrix of ``space``. ``constants`` needs
    ``C_W``, ``C_S`` and ``C_D``. Radii default to a geometric range from the
    q-resolution up to the q-diameter; smaller radii see single atoms, which
    carry mass the continuum measure gives to no point.
    """
    C_W, C_S, C_D = (float(constants[k]) for k in ("C_W", "C_S", "C_D"))
    Q = np.asarray(Q, dtype=float)
    n = space.n
    rng = np.random.default_rng(seed)
    if centers is None:
        centers = np.sort(rng.choice(n, size=min(n, 48), replace=False))
    nnq = np.min(Q + np.diag(np.full(n, np.inf)), axis=1)
    res = float(nnq.max())
    qdiam = float(Q.max())
    if radii is None:
        radii = np.geomspace(2.0 * res, 1.1 * qdiam, 12)
    consts = {"C_W": C_W, "C_S": C_S, "C_D": C_D}

    l1, r1, w1 = [], [], []
    l2, r2, w2 = [], [], []
    skipped2 = 0
    for x in centers:
        x = int(x)
        for s in radii:
            mass = _q_ball_mass(space, Q, x, s)
            l1.append(mass)
            r1.append(C_W ** 2 * s ** 2)
            w1.append((x, float(s)))
            inside = True
            if r_x is not None:
                rx = r_x.get(x, math.inf) if isinstance(r_x, dict) else float(r_x[x])
                members = np.flatnonzero(Q[x] < s)
                if len(members):
                    dm = space.dist_from(x)[members].max()
                    inside = bool(dm < rx)
            if inside:
                l2.append(s ** 2 / (2 * C_S ** 2 * C_D))
                r2.append(mass)
                w2.append((x, float(s)))
            else:
                skipped2 += 1
    reports = [
        worst("clash", l1, r1, w1, consts, note="mu(B_q(x,s)) <= C_W^2 s^2"),
        worst("clash2", l2, r2, w2, consts, skipped_count=skipped2,
              note="s^2/(2 C_S^2 C_D) <= mu(B_q(x,s)) where B_q(x,s) lies in B_d(x,r_x)"),
    ]

    space_q = space.with_metric(Q)
    delta = 4.0 * res if delta is None else delta
    if sets is None:
        sets = []
        for _ in range(6):
            a, b = (int(v) for v in rng.choice(n, 2, replace=False))
            sa, sb = rng.uniform(0.15, 0.4) * qdiam, rng.uniform(0.15, 0.4) * qdiam
            sets.append((np.flatnonzero((Q[a] < sa) | (Q[b] < sb)), f"B_q({a},{sa:.4g}) u B_q({b},{sb:.4g})"))
        sets.append((np.arange(n), "X"))
    la, ra, lb, rb, ws = [], [], [], [], []
    for ids, label in sets:
        h = hausdorff2_content(space_q, ids, delta).content
        mu = float(space.weights[ids].sum())
        la.append(h / (2 * math.pi * C_S ** 2 * C_D ** 4))
        ra.append(mu)
        lb.append(mu)
        rb.append(C_W ** 2 / math.pi * h)
        ws.append(label)
    reports.append(worst("nort_lower", la, ra, ws, consts,
                         note="H^2_q(E)/(2 pi C_S^2 C_D^4) <= mu(E)"))
    reports.append(worst("nort_upper", lb, rb, ws, consts, note="mu(E) <= C_W^2 H^2_q(E)/pi"))

    l4, r4, w4 = [], [], []
    for x in centers[: min(len(centers), 12)]:
        x = int(x)
        for s in radii[len(radii) // 3:]:
            ids = np.flatnonzero(Q[x] < s)
            if len(ids) < 2:
                continue
            try:
                h = hausdorff2_content(space_q, ids, min(delta, s)).content
            except UnresolvableScale:
                continue
            l4.append(h)
            r4.append(2 * math.pi * C_S ** 2 * C_D ** 4 * C_W ** 2 * s ** 2)
            w4.append((x, float(s)))
    reports.append(worst("nort2", l4, r4, w4, consts,
                         note="H^2_q(B_q(x,s)) <= 2 pi C_S^2 C_D^4 C_W^2 s^2"))
    return reports
