"""Layered ball covers: separating rings in annuli and nested connecting continua.

Continua are represented as finite unions of closed coordinate disks. Two
sample points are joined in the complement of such a union when they are
within the proximity radius and the segment between them misses every disk,
so separation is a flood fill on that graph.

The construction radii are powers of ``base`` times ``r``; the classical
choice ``base = 2 * lam`` needs ``base**7 * r`` to fit inside the sample while
``r`` stays above the sampling pitch, which small grids cannot provide, so
``base`` is a parameter.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .chain_metric import ell_of
from .mmspace import MMSpace, SpaceError, ball_masses
from .reports import VerificationReport, compare

log = logging.getLogger(__name__)

DEFAULT_BASE = 1.5
COVER_FACTOR = 0.75
FILL_FACTOR = 2.0

__all__ = [
    "DEFAULT_BASE",
    "LayerDecomposition",
    "Stage",
    "ContinuumResult",
    "separating_layer",
    "connecting_continuum",
    "complement_component",
]


def _constants(constants) -> tuple[float, float, float]:
    if constants is None:
        return 1.0, 1.0, 1.0
    if isinstance(constants, dict):
        return float(constants["C_W"]), float(constants["C_D"]), float(constants.get("lam", 1.0))
    return float(constants.C_W), float(constants.C_D), float(constants.lam)


def _base(base, ell: int, space: MMSpace | None = None) -> float:
    if base is None:
        # the ratio is meant in coordinate terms; a snowflake metric bends it
        if space is not None and space.metric.kind == "snowflake":
            return DEFAULT_BASE ** space.metric.theta
        return DEFAULT_BASE
    if base == "lambda":
        return 2.0 * 2 ** ell
    return float(base)


def _need_coords(space: MMSpace) -> None:
    if not space.has_coords or not space.pitch:
        raise SpaceError("layer constructions need a gridded coordinate space")


def _frontier(space: MMSpace) -> np.ndarray:
    """Points whose 2-pitch neighbourhood is not full, plus labelled boundary."""
    tree = cKDTree(space.coords)
    deg = np.array([len(v) for v in tree.query_ball_point(space.coords, 2.0 * space.pitch * (1 + 1e-9))])
    mask = deg < deg.max()
    for ids in space.boundary.values():
        mask[np.asarray(ids, dtype=np.int64)] = True
    return mask


def _inside_region(space: MMSpace, x: int, radius_base: float) -> bool:
    fr = _frontier(space)
    d = space.base_from(x)[fr]
    return bool(d.size == 0 or d.min() >= radius_base - 0.5 * space.pitch)


def _segment_blocked(a: np.ndarray, b: np.ndarray, C: np.ndarray, rc: float) -> np.ndarray:
    """Rows ``k`` where segment ``a_k b_k`` meets some closed disk ``(C_j, rc)``."""
    if len(C) == 0 or len(a) == 0:
        return np.zeros(len(a), dtype=bool)
    out = np.zeros(len(a), dtype=bool)
    step = max(1, 200000 // max(len(C), 1))
    for s in range(0, len(a), step):
        aa, bb = a[s:s + step, None, :], b[s:s + step, None, :]
        ab = bb - aa
        L2 = np.maximum(np.sum(ab * ab, axis=2), 1e-300)
        t = np.clip(np.sum((C[None] - aa) * ab, axis=2) / L2, 0.0, 1.0)
        p = aa + t[..., None] * ab
        dd = np.hypot(p[..., 0] - C[None, :, 0], p[..., 1] - C[None, :, 1])
        out[s:s + step] = np.any(dd <= rc * (1 + 1e-12), axis=1)
    return out


def complement_component(space: MMSpace, x: int, disk_centers, rc: float, limit_base: float,
                         eps: float | None = None):
    """Component of ``x`` in the sample minus the closed disks, within ``limit_base``.

    Returns ``(ids, escaped)``: ``escaped`` is true when the component reaches
    a point at coordinate distance ``>= limit_base`` from ``x``. ``None`` ids
    mean ``x`` itself lies in the union.
    """
    P = space.coords
    eps = FILL_FACTOR * space.pitch if eps is None else eps
    d0 = space.base_from(x)
    local = np.flatnonzero(d0 <= limit_base + 2.0 * eps)
    C = P[np.asarray(disk_centers, dtype=np.int64)]
    if len(C):
        dk, _ = cKDTree(C).query(P[local])
        inK = dk <= rc * (1 + 1e-12)
    else:
        inK = np.zeros(len(local), dtype=bool)
    free = local[~inK]
    if x not in set(free.tolist()):
        return None, False
    pairs = cKDTree(P[free]).query_pairs(eps * (1 + 1e-9), output_type="ndarray")
    if len(pairs):
        blocked = _segment_blocked(P[free[pairs[:, 0]]], P[free[pairs[:, 1]]], C, rc)
        pairs = pairs[~blocked]
    k = len(free)
    A = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(k, k)) if len(pairs) else \
        coo_matrix((k, k))
    _, lab = connected_components(A, directed=False)
    xi = int(np.flatnonzero(free == x)[0])
    comp = free[lab == lab[xi]]
    escaped = bool(np.any(d0[comp] >= limit_base))
    return np.sort(comp), escaped


@dataclass
class LayerDecomposition:
    x: int
    r: float
    base: float
    radii: dict
    cover: np.ndarray
    cover_radius: float
    epsilon: float
    layers: list
    layer_costs: list
    n0: int
    j0: int
    component: np.ndarray
    points: np.ndarray
    hat: np.ndarray | None
    separates: bool
    contained: bool
    diam_q: float | None = None
    reports: list = field(default_factory=list)

    @property
    def layer_cost(self) -> float:
        return self.layer_costs[self.j0 - 1]

    def to_json(self) -> dict:
        return {
            "x": self.x, "r": self.r, "base": self.base, "radii": self.radii,
            "cover_radius": self.cover_radius, "epsilon": self.epsilon,
            "cover": [int(c) for c in self.cover],
            "layers": [[int(i) for i in L] for L in self.layers],
            "layer_costs": [float(c) for c in self.layer_costs],
            "n0": self.n0, "j0": self.j0,
            "component": [int(c) for c in self.component],
            "separates": self.separates, "contained": self.contained,
            "diam_q": self.diam_q,
            "reports": [r.to_json() for r in self.reports],
        }


def _intersection_graph(P: np.ndarray, rc: float, closed: bool):
    lim = 2.0 * rc * (1 + 1e-12) if closed else 2.0 * rc * (1 - 1e-12)
    pairs = cKDTree(P).query_pairs(lim, output_type="ndarray")
    k = len(P)
    A = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(k, k)).tocsr() if len(pairs) \
        else coo_matrix((k, k)).tocsr()
    return (A + A.T).tocsr()


def separating_layer(space: MMSpace, x: int, r: float, *, constants=None, q=None,
                     base: float | str | None = None, cover_radius: float | None = None,
                     epsilon: float | None = None, check_region: bool = True) -> LayerDecomposition:
    """Ring of cover balls in the annulus about ``x`` that separates ``B(x, r)``.

    ``r`` is in metric units; ``cover_radius`` is in coordinate units
    (default ``0.75 * pitch``). ``constants`` carries ``C_W``, ``C_D`` and
    ``lam``; ``q`` is an optional all-pairs q matrix for the diameter check.
    ``base="lambda"`` uses the LLC-driven ratio ``2 ** (ell + 1)``.
    """
    _need_coords(space)
    x = space.check_id(x)
    C_W, C_D, lam = _constants(constants)
    ell = ell_of(lam)
    b = _base(base, ell, space)
    if b <= 1:
        raise SpaceError("base must exceed 1")
    radii = {k: float(b ** k * r) for k in range(8)}
    rb = {k: float(space.to_base(v)) for k, v in radii.items()}
    if check_region and not _inside_region(space, x, rb[7]):
        raise SpaceError(f"closed ball of radius {radii[7]:g} about {x} leaves the sampled region", index=x)

    p = space.pitch
    rc = COVER_FACTOR * p if cover_radius is None else float(cover_radius)
    d0 = space.base_from(x)
    A_ids = np.flatnonzero((d0 > rb[2]) & (d0 < rb[5]))
    if len(A_ids) == 0:
        raise SpaceError(f"annulus about {x} at r={r:g} holds no sample points", index=x)

    # ennedy: eps^2 <= mu(B(x_i, rc/5)) <= C_D eps^2
    small = ball_masses(space, A_ids, np.full(len(A_ids), space.from_base(rc / 5.0)))
    lo_eps2, hi_eps2 = float(small.max()) / C_D, float(small.min())
    if epsilon is None:
        eps2 = hi_eps2
    else:
        eps2 = float(epsilon) ** 2
    if not (lo_eps2 * (1 - 1e-12) <= eps2 <= hi_eps2 * (1 + 1e-12)):
        raise SpaceError(f"epsilon unsatisfiable; feasible epsilon in "
                         f"[{math.sqrt(lo_eps2):g}, {math.sqrt(hi_eps2):g}]", index=x)

    # 5r cover: maximal disjoint family of B(., rc/5), index order
    P = space.coords
    chosen: list[int] = []
    tree = None
    if rc / 5.0 * 2 < p:
        chosen = A_ids.tolist()
    else:
        taken = np.zeros(space.n, dtype=bool)
        tree = cKDTree(P)
        for a in A_ids:
            if taken[a]:
                continue
            chosen.append(int(a))
            taken[tree.query_ball_point(P[a], 2.0 * rc / 5.0)] = True
    cover = np.asarray(chosen, dtype=np.int64)
    G = _intersection_graph(P[cover], rc, closed=False)

    dc = d0[cover]
    meets_E = np.abs(dc - rb[3]) < rc
    layers: list[np.ndarray] = []
    seen = np.zeros(len(cover), dtype=bool)
    front = np.flatnonzero(meets_E)
    seen[front] = True
    while len(front):
        layers.append(front)
        nb = np.unique(G[front].indices)
        nb = nb[~seen[nb]]
        seen[nb] = True
        front = nb
    if not layers:
        raise SpaceError(f"no cover ball meets the sphere of radius {radii[3]:g}", index=x)
    masses = np.sqrt(ball_masses(space, cover, np.full(len(cover), space.from_base(rc))))
    costs = [float(masses[L].sum()) for L in layers]
    m = len(cover)
    n0 = max(1, math.ceil(math.sqrt(m) / (4.0 * C_W * C_D ** (6 + ell))))
    n0 = min(n0, len(layers))
    j0 = 1 + int(np.argmin(costs[:n0]))
    L = layers[j0 - 1]

    # components of the chosen layer; keep the first that separates
    _, lab = connected_components(G[L][:, L], directed=False)
    comps = [L[lab == k] for k in np.unique(lab)]
    comps.sort(key=lambda c: (-len(c), int(cover[c].min())))
    inner = np.flatnonzero(d0 < rb[0])
    pick, hat, sep = comps[0], None, False
    for comp in comps:
        ids, escaped = complement_component(space, x, cover[comp], rc, rb[7])
        if ids is None:
            continue
        ok = not escaped and np.all(np.isin(inner, ids))
        if ok:
            pick, hat, sep = comp, ids, True
            break
    centers = cover[pick]
    dk, _ = cKDTree(P[centers]).query(P)
    pts = np.flatnonzero(dk <= rc * (1 + 1e-12))
    contained = bool(np.all((d0[pts] <= rb[6] * (1 + 1e-12)) & (d0[pts] >= rb[1])))

    dec = LayerDecomposition(x, float(r), b, radii, cover, rc, math.sqrt(eps2),
                             [cover[L_] for L_ in layers], costs, n0, j0, np.sort(centers), pts,
                             hat, sep, contained)
    mu_r = float(ball_masses(space, [x], [r])[0])
    consts = {"C_W": C_W, "C_D": C_D, "lam": lam, "ell": ell}
    Cp = 4.0 * C_W * C_D ** (11 + 4 * ell)
    dec.reports.append(compare("layer_cost", dec.layer_cost, Cp * math.sqrt(mu_r), (x, float(r)), consts,
                               note="sum over chosen layer of mu(B_i)^(1/2) <= C' mu(B(x,r))^(1/2)"))
    if q is not None:
        Q = np.asarray(q)
        dec.diam_q = float(Q[np.ix_(pts, pts)].max()) if len(pts) else 0.0
        dec.reports.append(compare("viiki", dec.diam_q, 8.0 * C_W * C_D ** (12 + 4 * ell) * math.sqrt(mu_r),
                                   (x, float(r)), consts,
                                   note="diam_q(K) <= 8 C_W C_D^(12+4l) mu(B(x,r))^(1/2)"))
    return dec


# ---------------------------------------------------------------------------
# nested construction
# ---------------------------------------------------------------------------

@dataclass
class Stage:
    center: int
    radius: float
    mass: float
    cover: list
    kept: list
    h: int | None
    points: np.ndarray
    diam_q: float
    connected: bool
    rajat_violations: int
    overlaps_next: bool | None = None
    decompositions: list = field(default_factory=list, repr=False)

    def to_json(self) -> dict:
        return {
            "center": self.center, "radius": self.radius, "mass": self.mass,
            "cover": [[int(z), float(rz)] for z, rz in self.cover],
            "kept": [int(i) for i in self.kept], "h": self.h, "diam_q": self.diam_q,
            "connected": self.connected, "rajat_violations": self.rajat_violations,
            "overlaps_next": self.overlaps_next, "n_points": int(len(self.points)),
        }


@dataclass
class ContinuumResult:
    x: int
    y: int
    stages: list
    balls: list
    reports: list
    residual: float
    stop_reason: str

    def to_json(self) -> dict:
        return {"x": self.x, "y": self.y, "stages": [s.to_json() for s in self.stages],
                "balls": [[c, r, m] for c, r, m in self.balls],
                "residual": self.residual, "stop_reason": self.stop_reason,
                "reports": [r.to_json() for r in self.reports]}


def _window_radius(space: MMSpace, z: int, lo: float, hi: float) -> tuple[float, bool]:
    """Largest radius with ball mass at most ``hi``; flag whether it is ``>= lo``."""
    d = space.dist_from(z)
    order = np.argsort(d, kind="stable")
    ds, cum = d[order], np.cumsum(space.weights[order])
    # ball of radius in (ds[k], ds[k+1]) has mass cum[k] (ties grouped)
    last = np.r_[ds[1:] > ds[:-1], True]
    ks = np.flatnonzero(last & (cum <= hi * (1 + 1e-12)))
    if len(ks) == 0:
        return 0.0, False
    k = int(ks[-1])
    nxt = ds[k + 1] if k + 1 < len(ds) else ds[k] * 1.5 + 1e-12
    return float(0.5 * (ds[k] + nxt)), bool(cum[k] >= lo * (1 - 1e-12))


def _disks_overlap(P, c1, c2, rc) -> bool:
    if len(c1) == 0 or len(c2) == 0:
        return False
    d, _ = cKDTree(P[c2]).query(P[c1])
    return bool(np.any(d <= 2.0 * rc * (1 + 1e-12)))


def connecting_continuum(space: MMSpace, x: int, y: int, q, constants, *, base: float | str | None = None,
                         window: float = 1.0, cover_radius: float | None = None,
                         max_stages: int = 30, check_region: bool = True) -> ContinuumResult:
    """Nested covers shrinking onto ``x``, with the stagewise continua ``K_j``.

    Stage ``j`` covers ``B_j`` by balls ``B(z, r_z)`` whose dilates
    ``B(z, base**7 r_z)`` carry mass in ``[mu(B_j)/(4 window C_D), mu(B_j)/(4 window)]``
    (``window = C_D**(7+7l)`` is the classical choice), runs
    :func:`separating_layer` on each, and moves to ``B(z_h, base**7 r_h)``
    for the kept ball whose complementary component holds ``x``. Stops when
    no admissible cover ball exists at the sampling resolution.
    """
    _need_coords(space)
    x, y = space.check_id(x), space.check_id(y)
    if x == y:
        raise SpaceError("x and y coincide")
    C_W, C_D, lam = _constants(constants)
    ell = ell_of(lam)
    lam_c = float(2 ** ell)
    b = _base(base, ell, space)
    Q = np.asarray(q)
    P = space.coords
    dxy = space.dist(x, y)
    if check_region and not _inside_region(space, x, float(space.to_base(2.0 * lam_c * dxy))):
        raise SpaceError(f"ball of radius {2 * lam_c * dxy:g} about {x} leaves the sampled region", index=x)
    C2 = 4.0 * C_W * C_D ** (28 + 15 * ell)
    rc = COVER_FACTOR * space.pitch if cover_radius is None else float(cover_radius)

    center, R = x, lam_c * dxy
    stages: list[Stage] = []
    balls: list[tuple[int, float, float]] = []
    stop = "max_stages"
    for _ in range(max_stages):
        dC = space.dist_from(center)
        inB = np.flatnonzero(dC < R)
        muB = float(space.weights[inB].sum())
        balls.append((int(center), float(R), muB))
        lo, hi = muB / (4.0 * window * C_D), muB / (4.0 * window)
        cand = []
        bad = 0
        for z in inB:
            Rz, ok = _window_radius(space, int(z), lo, hi)
            rz = Rz / b ** 7
            if rz <= 0:
                continue
            dz = space.dist_from(int(z))
            if not np.any((dz > b ** 2 * rz) & (dz < b ** 5 * rz)):
                continue
            bad += 0 if ok else 1
            cand.append((int(z), rz))
        if not cand:
            stop = "resolution"
            break
        # Vitali selection, largest radius first
        cand.sort(key=lambda t: (-t[1], t[0]))
        chosen: list[tuple[int, float]] = []
        for z, rz in cand:
            if all(space.dist(z, w) >= (rz + rw) / 5.0 for w, rw in chosen):
                chosen.append((z, rz))
        # component of B_j holding x, proximity radius 2 pitch
        sub = inB
        pairs = cKDTree(P[sub]).query_pairs(FILL_FACTOR * space.pitch * (1 + 1e-9), output_type="ndarray")
        k = len(sub)
        A = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1]) if len(pairs) else ([], [])),
                       shape=(k, k))
        _, lab = connected_components(A, directed=False)
        D1 = sub[lab == lab[int(np.flatnonzero(sub == x)[0])]] if x in set(sub.tolist()) else sub

        decs, hats, near = [], [], []
        for z, rz in chosen:
            dec = separating_layer(space, z, rz, constants={"C_W": C_W, "C_D": C_D, "lam": lam}, q=Q,
                                   base=b, cover_radius=rc, check_region=False)
            decs.append(dec)
            hats.append(set(dec.hat.tolist()) if dec.hat is not None else set())
            near.append(bool(np.any(space.dist_from(z)[D1] < rz)))
        kept = []
        for i in range(len(chosen)):
            if not near[i] or not decs[i].separates:
                continue
            dominated = any(
                j != i and decs[j].separates and hats[i] <= hats[j] and (hats[i] != hats[j] or j < i)
                for j in range(len(chosen)))
            if not dominated:
                kept.append(i)
        pts = np.unique(np.concatenate([decs[i].points for i in kept])) if kept else np.empty(0, np.int64)
        diam = float(Q[np.ix_(pts, pts)].max()) if len(pts) else 0.0
        allc = np.unique(np.concatenate([decs[i].component for i in kept])) if kept else np.empty(0, np.int64)
        connected = bool(len(allc) and connected_components(_intersection_graph(P[allc], rc, closed=True),
                                                            directed=False)[0] == 1)
        hs = [i for i in kept if x in hats[i]]
        h = min(hs, key=lambda i: (ball_masses(space, [chosen[i][0]], [chosen[i][1] * b ** 7])[0], i)) \
            if hs else None
        st = Stage(int(center), float(R), muB, chosen, kept, h, pts, diam, connected, bad)
        st.decompositions = decs
        stages.append(st)
        if h is None:
            stop = "x not enclosed"
            break
        center, R = chosen[h][0], chosen[h][1] * b ** 7
    for a, c in zip(stages, stages[1:]):
        ca = np.unique(np.concatenate([a.decompositions[i].component for i in a.kept]))
        cc = np.unique(np.concatenate([c.decompositions[i].component for i in c.kept])) if c.kept else []
        a.overlaps_next = _disks_overlap(P, ca, np.asarray(cc, dtype=np.int64), rc)

    consts = {"C_W": C_W, "C_D": C_D, "lam": lam, "ell": ell, "C_2": C2, "base": b, "window": window}
    reps: list[VerificationReport] = []
    if stages:
        mu1 = stages[0].mass
        for j, st in enumerate(stages, 1):
            reps.append(compare(f"haahu[{j}]", len(st.cover), C_D ** (19 + 14 * ell), (j,), consts,
                                note="M_j <= C_D^(19+14l)"))
            reps.append(compare(f"kraa[{j}]", st.diam_q, 2.0 ** (1 - j) * C2 * math.sqrt(mu1), (j,), consts,
                                note="diam_q(K_j) <= 2^(1-j) C_2 mu(B_1)^(1/2)"))
            kept = [st.decompositions[i] for i in st.kept]
            if kept:
                vi = [d.reports[-1] for d in kept]
                w = max(vi, key=lambda r: r.lhs / r.rhs)
                reps.append(compare(f"viiki[{j}]", w.lhs, w.rhs, w.witness, consts,
                                    note="diam_q(K) <= 8 C_W C_D^(12+4l) mu(B(z,r))^(1/2), worst ball"))
        for j, (a, c) in enumerate(zip(balls, balls[1:]), 1):
            reps.append(compare(f"kaik[{j}]", math.sqrt(c[2]), 0.5 * math.sqrt(a[2]), (j,), consts,
                                note="mu(B_{j+1})^(1/2) <= mu(B_j)^(1/2)/2"))
    # final bound on q(x, y)
    from .mmspace import pair_ball_masses

    mxy = float(pair_ball_masses(space, [(x, y)])[0])
    reps.append(compare("connecting_bound", float(Q[x, y]), 4.0 * C_D ** ell * C2 * math.sqrt(mxy), (x, y),
                        consts, note="q(x,y) <= 4 C_D^l C_2 mu(B_xy)^(1/2)"))
    last = stages[-1] if stages else None
    residual = 0.0
    if last is not None and len(last.points):
        residual = float(Q[x, last.points].min())
    return ContinuumResult(x, y, stages, balls, reps, residual, stop)
