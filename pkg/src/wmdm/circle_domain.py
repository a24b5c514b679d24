"""Circle domains: relative distances, free radii, connector paths and the
modulus harnesses around disk separation.

Disks are closed, the domain is the open complement of their union (and of the
outside of an optional bounding disk). The bounding disk, when present, counts
as one more complementary component. Coordinates may be ints, floats or
``Fraction``; interval endpoints stay exact whenever the centre distances are
rational.
"""
from __future__ import annotations

import heapq
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import mmspace
from .mmspace import SpaceError
from .modulus import PathFamily, domain_graph, modulus_solve
from .reports import VerificationReport, compare, skipped

log = logging.getLogger(__name__)

TANGENCY = 1e-9
SQRT3 = math.sqrt(3.0)
LN2 = math.log(2.0)


class DomainError(SpaceError):
    pass


class PreconditionError(DomainError):
    pass


class ConnectorError(DomainError):
    """The arc graph does not join the two continua."""


# ---------------------------------------------------------------------------
# domain
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Disk:
    z: tuple
    r: object

    @property
    def zf(self) -> np.ndarray:
        return np.array([float(self.z[0]), float(self.z[1])])


def _exact(x):
    if isinstance(x, (int, Fraction)):
        return Fraction(x)
    return Fraction(float(x))


def _dist(a, b):
    """Distance between two points, as a ``Fraction`` when it is rational."""
    d2 = sum((_exact(p) - _exact(q)) ** 2 for p, q in zip(a, b))
    n, m = d2.numerator, d2.denominator
    rn, rm = math.isqrt(n), math.isqrt(m)
    if rn * rn == n and rm * rm == m:
        return Fraction(rn, rm)
    return math.sqrt(d2)


def _num(x):
    return x if isinstance(x, Fraction) else _exact(x) if isinstance(x, int) else x


@dataclass(frozen=True)
class CircleDomain:
    """Complement of pairwise disjoint closed disks, optionally inside ``outer``.

    ``strict`` rejects tangent disks; with ``strict=False`` they are kept and
    listed by :meth:`tangencies`.
    """
    disks: tuple
    outer: Disk | None = None
    strict: bool = True

    def __post_init__(self):
        disks = tuple(d if isinstance(d, Disk) else Disk(tuple(d[0]), d[1]) for d in self.disks)
        object.__setattr__(self, "disks", disks)
        outer = self.outer
        if outer is not None and not isinstance(outer, Disk):
            outer = Disk(tuple(outer[0]), outer[1])
            object.__setattr__(self, "outer", outer)
        for i, d in enumerate(disks):
            if not d.r > 0:
                raise DomainError(f"disk {i} has nonpositive radius (point components are not allowed)",
                                  index=i)
        for i in range(len(disks)):
            for j in range(i):
                gap = _dist(disks[i].z, disks[j].z) - _num(disks[i].r) - _num(disks[j].r)
                if gap < 0 or (gap == 0 and self.strict):
                    kind = "overlap" if gap < 0 else "are tangent"
                    raise DomainError(f"disks {j} and {i} {kind}", index=(j, i))
        if outer is not None:
            for i, d in enumerate(disks):
                gap = _num(outer.r) - _dist(d.z, outer.z) - _num(d.r)
                if gap < 0 or (gap == 0 and self.strict):
                    raise DomainError(f"disk {i} is not inside the outer disk", index=i)

    @property
    def M(self) -> int:
        """Number of complementary components."""
        return len(self.disks) + (self.outer is not None)

    def tangencies(self) -> list:
        out = []
        for i in range(len(self.disks)):
            for j in range(i + 1, len(self.disks)):
                if relative_distance(self, i, j) == 0:
                    out.append((i, j))
        return out

    def contains(self, pts, margin: float = 0.0) -> np.ndarray:
        """Open-domain membership; ``margin`` is a relative safety distance."""
        P = np.atleast_2d(np.asarray(pts, float))
        ok = np.ones(len(P), dtype=bool)
        for d in self.disks:
            r = float(d.r)
            ok &= np.hypot(*(P - d.zf).T) > r * (1 + margin)
        if self.outer is not None:
            R = float(self.outer.r)
            ok &= np.hypot(*(P - self.outer.zf).T) < R * (1 - margin)
        return ok

    def scaled(self, sigma, shift=(0, 0)) -> "CircleDomain":
        def f(d):
            return Disk((d.z[0] * sigma + shift[0], d.z[1] * sigma + shift[1]), d.r * sigma)
        return CircleDomain(tuple(f(d) for d in self.disks),
                            None if self.outer is None else f(self.outer), self.strict)

    def bounding(self) -> tuple[np.ndarray, float]:
        """The outer disk, or one of 1.5 times the extent of the disks."""
        if self.outer is not None:
            return self.outer.zf, float(self.outer.r)
        zs = np.array([d.zf for d in self.disks]) if self.disks else np.zeros((1, 2))
        c = zs.mean(axis=0)
        R = max([float(np.hypot(*(d.zf - c))) + float(d.r) for d in self.disks] + [1.0]) * 1.5
        return c, R

    def space(self, n: int) -> mmspace.MMSpace:
        c, R = self.bounding()
        return mmspace.circle_domain_space([(d.zf, float(d.r)) for d in self.disks], n,
                                           outer=(c, R))

    def to_json(self) -> dict:
        def f(d):
            return {"z": [float(d.z[0]), float(d.z[1])], "r": float(d.r)}
        return {"outer": None if self.outer is None else f(self.outer),
                "disks": [f(d) for d in self.disks]}

    @classmethod
    def from_json(cls, obj: dict) -> "CircleDomain":
        try:
            disks = [Disk(tuple(d["z"]), d["r"]) for d in obj["disks"]]
            o = obj.get("outer")
            outer = None if o is None else Disk(tuple(o["z"]), o["r"])
        except (KeyError, TypeError) as exc:
            raise DomainError(f"malformed domain: missing field {exc}") from exc
        return cls(tuple(disks), outer)


def random_domain(rng: np.random.Generator, k: int, *, rmin=0.05, rmax=0.3, gap=0.02,
                  box=1.0) -> CircleDomain:
    """``k`` disjoint disks with centres in ``[-box, box]^2``, whole plane."""
    disks = []
    for _ in range(10000):
        if len(disks) == k:
            return CircleDomain(tuple(disks))
        z = rng.uniform(-box, box, 2)
        r = rng.uniform(rmin, rmax)
        if all(np.hypot(*(z - d.zf)) > r + float(d.r) + gap for d in disks):
            disks.append(Disk((float(z[0]), float(z[1])), float(r)))
    raise DomainError(f"could not place {k} disks")


def relative_distance(dom: CircleDomain, i, j):
    """``dist(D_i, D_j) / min(r_i, r_j)``; ``j = "outer"`` uses the bounding circle,
    whose radius counts as infinite."""
    if i == j:
        raise DomainError("relative distance needs two different components")
    if i == "outer":
        i, j = j, i
    di = dom.disks[i]
    if j == "outer":
        if dom.outer is None:
            raise DomainError("domain has no outer component")
        gap = _num(dom.outer.r) - _dist(di.z, dom.outer.z) - _num(di.r)
        return gap / _num(di.r)
    dj = dom.disks[j]
    gap = _dist(di.z, dj.z) - _num(di.r) - _num(dj.r)
    return gap / min(_num(di.r), _num(dj.r))


# ---------------------------------------------------------------------------
# constants
# ---------------------------------------------------------------------------

def _kappa(C_W, C_D, C_X) -> float:
    for name, v in (("C_W", C_W), ("C_D", C_D), ("C_X", C_X)):
        if not v >= 1:
            raise DomainError(f"{name} must be at least 1, got {v}")
    return C_W * C_W * C_D ** (1.0 + math.log2(C_X))


def log2_alpha(C_W, C_D, C_X, M: int, log_base: float = math.e) -> float:
    """Base-2 exponent of the separation constant (the value itself underflows
    for realistic constants). ``log_base`` is the base of the logarithm of 2
    in the exponent's denominator."""
    if M < 1:
        raise DomainError("M must be at least 1")
    log2 = math.log(2.0) / math.log(log_base)
    return -2.0 - 2.0 * M - math.pi ** 2 * _kappa(C_W, C_D, C_X) / (8.0 * log2)


def alpha_constant(C_W, C_D, C_X, M: int, log_base: float = math.e) -> float:
    return 2.0 ** log2_alpha(C_W, C_D, C_X, M, log_base)


def beta_constant(alpha, M: int) -> float:
    if not 0 < alpha <= 1 or M < 1:
        raise DomainError("need alpha in (0, 1] and M >= 1")
    return alpha ** M / (2 * math.pi * (10 * M) ** M)


def log2_cafe_bound(log2_a: float, M: int) -> float:
    """Base-2 logarithm of the two-continua modulus lower bound."""
    return M * log2_a - math.log2(2 * math.pi * (10 * M) ** M * (M + 2) ** 2)


def harakka_bound(alpha, M: int):
    return alpha ** M / (10 * M) ** M


def modulus_budget(C_W, C_D, C_X) -> float:
    """Upper bound for the modulus between two complementary disks."""
    return math.pi * _kappa(C_W, C_D, C_X) / 2.0


def counting_N(C_W, C_D, C_X, M: int) -> int:
    return math.floor(2 * M + math.pi ** 2 * _kappa(C_W, C_D, C_X) / (8 * LN2))


# ---------------------------------------------------------------------------
# free radii
# ---------------------------------------------------------------------------

@dataclass
class FreeRadiusSet:
    i: int
    alpha: object
    intervals: list
    measure: object

    def __contains__(self, t) -> bool:
        return any(a < t < b for a, b in self.intervals)

    def sample(self, rng: np.random.Generator) -> float:
        if not self.intervals:
            raise DomainError(f"no free radius around disk {self.i}")
        w = np.array([float(b - a) for a, b in self.intervals])
        k = rng.choice(len(w), p=w / w.sum())
        a, b = self.intervals[k]
        return float(a) + float(b - a) * rng.uniform(0.02, 0.98)

    def circle_modulus(self) -> float:
        """Modulus of the circles ``S(z_i, t r_i)``, ``t`` in the set: the
        integral of ``dt / (2 pi t)``."""
        return sum(math.log(float(b) / float(a)) for a, b in self.intervals) / (2 * math.pi)


def free_radii(dom: CircleDomain, i: int, alpha) -> FreeRadiusSet:
    """Scales ``1 < t < 1 + alpha`` whose circle about disk ``i`` avoids every
    other complementary component."""
    di = dom.disks[i]
    ri = _num(di.r)
    one = Fraction(1)
    hi_end = one + (_num(alpha) if not isinstance(alpha, float) else _exact(alpha))
    cuts = []
    for j, dj in enumerate(dom.disks):
        if j == i:
            continue
        d = _dist(di.z, dj.z)
        cuts.append(((d - _num(dj.r)) / ri, (d + _num(dj.r)) / ri))
    if dom.outer is not None:
        cuts.append(((_num(dom.outer.r) - _dist(di.z, dom.outer.z)) / ri, math.inf))
    cuts.sort(key=lambda c: float(c[0]))
    out = []
    cur = one
    for a, b in cuts:
        if b <= cur:
            continue
        if a >= hi_end:
            break
        if a > cur:
            out.append((cur, a))
        cur = max(cur, b)
        if cur >= hi_end:
            break
    if cur < hi_end:
        out.append((cur, hi_end))
    measure = sum((b - a for a, b in out), Fraction(0) if all(
        isinstance(a, Fraction) and isinstance(b, Fraction) for a, b in out) else 0.0)
    if isinstance(alpha, float):
        # keep float inputs float on the way out
        out = [(float(a), float(b)) for a, b in out]
        measure = math.fsum(b - a for a, b in out)
    return FreeRadiusSet(i, alpha, out, measure)


def harakka_check(dom: CircleDomain, alpha) -> list[VerificationReport]:
    """Free-radius measure against its lower bound, for every disk, provided all
    relative distances reach ``alpha``; skipped otherwise."""
    M = dom.M
    n = len(dom.disks)
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    if dom.outer is not None:
        pairs += [(i, "outer") for i in range(n)]
    deltas = [float(relative_distance(dom, i, j)) for i, j in pairs]
    consts = {"alpha": float(alpha), "M": M}
    if deltas and min(deltas) < alpha:
        k = int(np.argmin(deltas))
        return [skipped("harakka", f"relative distance {deltas[k]:.6g} of pair {pairs[k]} below alpha",
                        consts)]
    bound = harakka_bound(alpha, M)
    reps = []
    for i in range(n):
        fr = free_radii(dom, i, alpha)
        reps.append(compare("harakka", float(bound), float(fr.measure), witness={"disk": i},
                            constants=consts))
        reps.append(compare("harakka2", beta_constant(min(float(alpha), 1.0), M),
                            fr.circle_modulus(), witness={"disk": i}, constants=consts))
    return reps


# ---------------------------------------------------------------------------
# circle arrangement
# ---------------------------------------------------------------------------

def circle_intersections(c1, r1, c2, r2, tol: float = TANGENCY):
    """Intersection points of two circles; tangencies within ``tol * max(r)``
    give a single point. Coincident circles raise."""
    c1, c2 = np.asarray(c1, float), np.asarray(c2, float)
    d = float(np.hypot(*(c2 - c1)))
    eps = tol * max(r1, r2)
    if d <= eps and abs(r1 - r2) <= eps:
        raise ConnectorError("coincident circles")
    if d > r1 + r2 + eps or d < abs(r1 - r2) - eps or d <= eps:
        return []
    u = (c2 - c1) / d
    if abs(d - (r1 + r2)) <= eps:
        return [c1 + r1 * u]
    if abs(d - abs(r1 - r2)) <= eps:
        return [c1 + (r1 if r1 >= r2 else -r1) * u]
    a = (d * d + r1 * r1 - r2 * r2) / (2 * d)
    h = math.sqrt(max(r1 * r1 - a * a, 0.0))
    m = c1 + a * u
    v = np.array([-u[1], u[0]])
    return [m + h * v, m - h * v]


def polyline_circle(P, c, r, tol: float = TANGENCY):
    """Points where a polyline meets a circle."""
    P = np.atleast_2d(np.asarray(P, float))
    c = np.asarray(c, float)
    out = []
    if len(P) == 1:
        if abs(float(np.hypot(*(P[0] - c))) - r) <= tol * r:
            out.append(P[0])
        return out
    for p, q in zip(P[:-1], P[1:]):
        d = q - p
        f = p - c
        a = float(d @ d)
        b = 2 * float(f @ d)
        cc = float(f @ f) - r * r
        disc = b * b - 4 * a * cc
        if a == 0 or disc < 0:
            continue
        s = math.sqrt(disc)
        for u in sorted({(-b - s) / (2 * a), (-b + s) / (2 * a)}):
            if -1e-12 <= u <= 1 + 1e-12:
                out.append(p + min(max(u, 0.0), 1.0) * d)
    return out


@dataclass
class ConnectorPath:
    points: np.ndarray
    arcs: list
    length: float
    node_ids: list

    @property
    def injective(self) -> bool:
        return len(set(self.node_ids)) == len(self.node_ids)

    def polyline(self, per_arc: int = 16) -> np.ndarray:
        pts = []
        for c, r, th, dth in self.arcs:
            k = max(2, int(per_arc * abs(dth) / math.pi) + 2)
            a = th + dth * np.linspace(0.0, 1.0, k)
            pts.append(np.column_stack([c[0] + r * np.cos(a), c[1] + r * np.sin(a)]))
        return np.vstack(pts) if pts else self.points.copy()


def connector_path(dom: CircleDomain, T, z0, r0, E1, E2, tol: float = TANGENCY) -> ConnectorPath:
    """Shortest path joining ``E1`` and ``E2`` along the circles
    ``S(z0, t0 r0)`` and ``S(z_j, t_j r_j)`` inside the domain.

    ``E1`` and ``E2`` are polylines. The circle arrangement is split at all
    crossings (and where the first circle enters a disk); arcs inside the
    domain become graph edges.
    """
    T = [float(t) for t in T]
    if len(T) != len(dom.disks) + 1:
        raise PreconditionError(f"T needs {len(dom.disks) + 1} entries, got {len(T)}")
    if not 1.0 <= T[0] <= SQRT3:
        raise PreconditionError(f"t0 = {T[0]} outside [1, sqrt 3]")
    circles = [(np.asarray(z0, float), T[0] * float(r0))]
    for j, d in enumerate(dom.disks):
        c, r = d.zf, T[j + 1] * float(d.r)
        if not T[j + 1] > 1:
            raise PreconditionError(f"t_{j + 1} = {T[j + 1]} must exceed 1")
        # the circle about disk j must stay inside the domain
        for k, dk in enumerate(dom.disks):
            if k != j:
                gap = abs(float(np.hypot(*(dk.zf - c))) - r)
                if gap <= float(dk.r) * (1 + tol):
                    raise PreconditionError(f"circle about disk {j} meets disk {k}")
        if dom.outer is not None and float(np.hypot(*(c - dom.outer.zf))) + r >= float(dom.outer.r):
            raise PreconditionError(f"circle about disk {j} leaves the outer disk")
        circles.append((c, r))

    pts: list[np.ndarray] = []
    kind: list[str] = []
    marks: list[list[tuple[float, int]]] = [[] for _ in circles]

    def angle(k, p):
        c = circles[k][0]
        return math.atan2(p[1] - c[1], p[0] - c[0])

    def add(p, k_list, label):
        pts.append(np.asarray(p, float))
        kind.append(label)
        nid = len(pts) - 1
        for k in k_list:
            marks[k].append((angle(k, p), nid))
        return nid

    for a in range(len(circles)):
        for b in range(a + 1, len(circles)):
            for p in circle_intersections(*circles[a], *circles[b], tol=tol):
                add(p, [a, b], "x")
    # where the first circle crosses a disk boundary or the outer circle
    c0, r0t = circles[0]
    blockers = [(d.zf, float(d.r)) for d in dom.disks]
    if dom.outer is not None:
        blockers.append((dom.outer.zf, float(dom.outer.r)))
    for c, r in blockers:
        for p in circle_intersections(c0, r0t, c, r, tol=tol):
            add(p, [0], "split")
    src, dst = [], []
    contact0 = [False, False]
    for which, E in enumerate((E1, E2)):
        for k, (c, r) in enumerate(circles):
            for p in polyline_circle(E, c, r, tol=tol):
                if not dom.contains(p, margin=tol)[0]:
                    continue
                nid = add(p, [k], "E1" if which == 0 else "E2")
                (src if which == 0 else dst).append(nid)
                if k == 0:
                    contact0[which] = True
    for which in (0, 1):
        if not contact0[which]:
            raise PreconditionError(f"E{which + 1} does not meet the circle S(z0, t0 r0) inside the domain")

    adj: dict[int, list] = {}
    arcs: dict[tuple, tuple] = {}
    for k, (c, r) in enumerate(circles):
        ms = sorted(marks[k])
        if len(ms) < 2:
            continue
        for (ta, na), (tb, nb) in zip(ms, ms[1:] + [(ms[0][0] + 2 * math.pi, ms[0][1])]):
            dth = tb - ta
            if na == nb or dth <= 0:
                continue
            mid = ta + 0.5 * dth
            mp = (c[0] + r * math.cos(mid), c[1] + r * math.sin(mid))
            if not dom.contains(mp, margin=tol)[0]:
                continue
            ln = r * dth
            key = (min(na, nb), max(na, nb))
            if key in arcs and arcs[key][0] <= ln:
                continue
            arcs[key] = (ln, k, ta, dth, na)
    for (u, v), (ln, *_rest) in arcs.items():
        adj.setdefault(u, []).append((v, ln))
        adj.setdefault(v, []).append((u, ln))

    dist = {s: 0.0 for s in src}
    pred: dict[int, int] = {}
    heap = [(0.0, s) for s in src]
    heapq.heapify(heap)
    targets = set(dst)
    end = None
    while heap:
        du, u = heapq.heappop(heap)
        if du > dist.get(u, math.inf):
            continue
        if u in targets:
            end = u
            break
        for v, ln in adj.get(u, ()):
            nd = du + ln
            if nd < dist.get(v, math.inf):
                dist[v] = nd
                pred[v] = u
                heapq.heappush(heap, (nd, v))
    if end is None:
        raise ConnectorError("no path between the continua along the circle arrangement; "
                             "check the free radii or a near tangency")
    ids = [end]
    while ids[-1] in pred:
        ids.append(pred[ids[-1]])
    ids.reverse()
    out_arcs = []
    for u, v in zip(ids[:-1], ids[1:]):
        ln, k, ta, dth, na = arcs[(min(u, v), max(u, v))]
        c, r = circles[k]
        if na == u:
            out_arcs.append((c, r, ta, dth))
        else:
            out_arcs.append((c, r, ta + dth, -dth))
    return ConnectorPath(np.array([pts[i] for i in ids]), out_arcs, float(dist[end]), ids)


def random_T(dom: CircleDomain, alpha, rng: np.random.Generator) -> list[float]:
    t0 = rng.uniform(1.0, SQRT3)
    return [t0] + [free_radii(dom, i, alpha).sample(rng) for i in range(len(dom.disks))]


# ---------------------------------------------------------------------------
# the two-continua lower bound
# ---------------------------------------------------------------------------

def _densify(P, step: float) -> np.ndarray:
    P = np.atleast_2d(np.asarray(P, float))
    out = [P[:1]]
    for p, q in zip(P[:-1], P[1:]):
        k = max(1, int(math.ceil(float(np.hypot(*(q - p))) / step)))
        u = np.linspace(0, 1, k + 1)[1:, None]
        out.append(p + u * (q - p))
    return np.vstack(out)


def _polyline_dist(P, X) -> np.ndarray:
    """Distance from each point of ``X`` to the polyline ``P``."""
    P = np.atleast_2d(np.asarray(P, float))
    X = np.atleast_2d(np.asarray(X, float))
    if len(P) == 1:
        return np.hypot(*(X - P[0]).T)
    best = np.full(len(X), np.inf)
    for p, q in zip(P[:-1], P[1:]):
        d = q - p
        a = float(d @ d)
        u = np.zeros(len(X)) if a == 0 else np.clip((X - p) @ d / a, 0.0, 1.0)
        best = np.minimum(best, np.hypot(*(X - (p + u[:, None] * d)).T))
    return best


def fars_ratio(E1, E2) -> float:
    """``min(diam E1, diam E2) / dist(E1, E2)`` for polylines."""
    from scipy.spatial.distance import pdist

    P1, P2 = np.atleast_2d(np.asarray(E1, float)), np.atleast_2d(np.asarray(E2, float))
    diam = min(float(pdist(P1).max()) if len(P1) > 1 else 0.0,
               float(pdist(P2).max()) if len(P2) > 1 else 0.0)
    dist = min(float(_polyline_dist(P2, P1).min()), float(_polyline_dist(P1, P2).min()))
    if dist == 0:
        raise PreconditionError("continua intersect")
    return diam / dist


def find_center(E1, E2, grid: int = 24):
    """A centre ``z0`` and radius ``r0`` such that both continua meet every
    circle ``S(z0, t r0)``, ``1 <= t <= sqrt 3``; ``None`` if the search fails.

    A connected set meets all these circles once its nearest point is within
    ``r0`` of ``z0`` and its farthest point beyond ``sqrt(3) r0``.
    """
    P1, P2 = np.atleast_2d(np.asarray(E1, float)), np.atleast_2d(np.asarray(E2, float))
    cands = [P1, P2]
    h = float(np.min(_polyline_dist(P2, P1)))
    D1 = _densify(P1, max(h / 4, 1e-12))
    D2 = _densify(P2, max(h / 4, 1e-12))
    k = int(np.argmin(_polyline_dist(P2, D1)))
    p = D1[k]
    q = D2[int(np.argmin(np.hypot(*(D2 - p).T)))]
    cands.append(p + np.linspace(0, 1, 9)[:, None] * (q - p))
    lo = np.minimum(P1.min(axis=0), P2.min(axis=0))
    hi = np.maximum(P1.max(axis=0), P2.max(axis=0))
    gx, gy = np.meshgrid(np.linspace(lo[0], hi[0], grid), np.linspace(lo[1], hi[1], grid))
    cands.append(np.column_stack([gx.ravel(), gy.ravel()]))
    Z = np.vstack(cands)
    m1, m2 = _polyline_dist(P1, Z), _polyline_dist(P2, Z)
    M1 = np.max(np.hypot(*(D1[None, :, :] - Z[:, None, :]).transpose(2, 0, 1)), axis=1)
    M2 = np.max(np.hypot(*(D2[None, :, :] - Z[:, None, :]).transpose(2, 0, 1)), axis=1)
    lo_r = np.maximum(m1, m2)
    hi_r = np.minimum(M1, M2) / SQRT3
    with np.errstate(divide="ignore", invalid="ignore"):
        slack = np.where(lo_r > 0, hi_r / lo_r, np.where(hi_r > 0, np.inf, 0.0))
    k = int(np.argmax(slack))
    if not slack[k] >= 1:
        return None
    r0 = float(lo_r[k]) if lo_r[k] > 0 else float(hi_r[k]) / 2
    return Z[k], max(r0, 1e-300)


def _node_set(space, E, h) -> np.ndarray:
    return np.flatnonzero(_polyline_dist(E, space.coords) <= h * (1 + 1e-9))


def key_estimate_check(dom: CircleDomain, E1, E2, constants, *, n: int = 48, space=None,
                       tol: float = 0.02, n_max: int = 256) -> VerificationReport:
    """Discrete modulus between two continua against the two-continua lower bound.

    ``constants`` holds ``C_W``, ``C_D``, ``C_X``. The continua are polylines
    in the domain; their grid versions are the sample nodes within one pitch.
    The grid is refined (up to ``n_max``) until the continua are three pitches
    apart. The solver stops as soon as its certified lower bound exceeds the
    bound.
    """
    M = dom.M
    C = {k: float(constants[k]) for k in ("C_W", "C_D", "C_X")}
    # with no complementary disks alpha enters as alpha**0 = 1
    la = log2_alpha(C["C_W"], C["C_D"], C["C_X"], M) if M else 0.0
    lb = log2_cafe_bound(la, M)
    bound = 2.0 ** lb
    consts = {**C, "M": M, "log2_alpha": la, "log2_bound": lb}
    for name, E in (("E1", E1), ("E2", E2)):
        dense = _densify(E, 1e-3 * max(1e-12, float(np.ptp(np.atleast_2d(E), axis=0).max())))
        if not np.all(dom.contains(dense)):
            raise PreconditionError(f"{name} leaves the domain")
    try:
        ratio = fars_ratio(E1, E2)
    except PreconditionError as exc:
        return skipped("cafe", str(exc), consts)
    if ratio < 1:
        return skipped("cafe", f"diameter to distance ratio {ratio:.6g} below 1", consts)
    zr = find_center(E1, E2)
    if zr is None:
        return skipped("cafe", "no common centre found for the circles S(z0, t r0)", consts)
    if space is None:
        gap = min(float(_polyline_dist(E2, E1).min()), float(_polyline_dist(E1, E2).min()))
        h = 2 * dom.bounding()[1] / n
        if gap < 3 * h:
            n = min(n_max, int(math.ceil(n * 3 * h / gap)))
        space = dom.space(n)
    g = domain_graph(space)
    h = space.pitch
    A, B = _node_set(space, E1, h), _node_set(space, E2, h)
    if len(A) == 0 or len(B) == 0:
        raise PreconditionError("a continuum has no grid node within one pitch; refine n")
    if np.intersect1d(A, B).size:
        return skipped("cafe", "continua closer than two grid pitches; refine n", consts)
    res = modulus_solve(g, PathFamily(A, B), tol, stop_above=bound)
    z0, r0 = zr
    return compare("cafe", bound, res.lower,
                   witness={"z0": z0.tolist(), "r0": r0, "fars": ratio},
                   constants=consts, samples={"nodes": space.n, "iterations": res.iterations},
                   note="rhs is a certified lower bound for the grid modulus; lhs may underflow to 0")


# ---------------------------------------------------------------------------
# disk separation
# ---------------------------------------------------------------------------

def _component(dom, i):
    if i == "outer":
        return dom.outer.zf, math.inf
    d = dom.disks[i]
    return d.zf, float(d.r)


def midpoint(dom: CircleDomain, i: int, j: int) -> tuple[np.ndarray, float]:
    """The point halfway across the gap between disks ``i`` and ``j``, and the gap."""
    zi, ri = dom.disks[i].zf, float(dom.disks[i].r)
    zj, rj = dom.disks[j].zf, float(dom.disks[j].r)
    d = float(np.hypot(*(zj - zi)))
    s = d - ri - rj
    return zi + (ri + s / 2) * (zj - zi) / d, s


def sphere_families(dom: CircleDomain, i: int, j: int, N: int) -> dict:
    """For ``n = 1..N``, the components other than ``i``, ``j`` meeting the
    annulus ``2^(n-1) s < |x - w| < 2^n s``."""
    w, s = midpoint(dom, i, j)
    hits = {}
    for n in range(1, N + 1):
        a, b = 2.0 ** (n - 1) * s, 2.0 ** n * s
        near = []
        for k, d in enumerate(dom.disks):
            if k in (i, j):
                continue
            e = float(np.hypot(*(d.zf - w)))
            if e - float(d.r) < b and e + float(d.r) > a:
                near.append(k)
        if dom.outer is not None and float(dom.outer.r) - float(np.hypot(*(dom.outer.zf - w))) < b:
            near.append("outer")
        hits[n] = near
    return hits


def local_space(dom: CircleDomain, i: int, j: int, half_width: float = 4.0, per_gap: int = 4):
    """A fine grid around the gap between disks ``i`` and ``j``: a square of
    half-width ``half_width * s`` at pitch ``s / per_gap``."""
    w, s = midpoint(dom, i, j)
    L = half_width * s
    k = int(round(2 * half_width * per_gap)) + 1
    xs = np.linspace(w[0] - L, w[0] + L, k)
    ys = np.linspace(w[1] - L, w[1] + L, k)
    P = np.column_stack([a.ravel() for a in np.meshgrid(xs, ys)])
    P = P[dom.contains(P)]
    h = xs[1] - xs[0]
    lab = {}
    for name, t in ((f"A{i + 1}", i), (f"A{j + 1}", j)):
        d = dom.disks[t]
        lab[name] = np.flatnonzero(np.hypot(*(P - d.zf).T) - float(d.r) < h)
    return mmspace.build_space(P, pitch=h, area=h * h * len(P), boundary=lab,
                               meta={"generator": "circle_domain_local"})


def pair_modulus(dom: CircleDomain, i, j, *, n: int = 48, space=None, tol: float = 0.02,
                 stop_above=None):
    """Grid modulus between two complementary components."""
    space = dom.space(n) if space is None else space
    lab = lambda k: "outer" if k == "outer" else f"A{k + 1}"
    fam = PathFamily(space.boundary[lab(i)], space.boundary[lab(j)])
    return modulus_solve(domain_graph(space), fam, tol, stop_above=stop_above)


def separation_check(dom: CircleDomain, constants, *, budget: float | None = None, n: int = 48,
                     tol: float = 0.02) -> list[VerificationReport]:
    """Per pair of disks: grid modulus against the separation budget, and, for
    pairs closer than the separation constant, the sphere-family count."""
    M = dom.M
    C = {k: float(constants[k]) for k in ("C_W", "C_D", "C_X")}
    budget = modulus_budget(**C) if budget is None else float(budget)
    la = log2_alpha(C["C_W"], C["C_D"], C["C_X"], M)
    alpha = 2.0 ** la
    N = counting_N(C["C_W"], C["C_D"], C["C_X"], M)
    consts = {**C, "M": M, "budget": budget, "log2_alpha": la, "N": N}
    reps = []
    space = None
    nd = len(dom.disks)
    if dom.outer is not None:
        for i in range(nd):
            delta = float(relative_distance(dom, i, "outer"))
            wit = {"pair": [i, "outer"], "delta": delta}
            if delta < alpha:
                reps.append(skipped("counting", "sphere families are only built between two disks",
                                    consts))
            if space is None:
                space = dom.space(n)
            res = pair_modulus(dom, i, "outer", space=space, tol=tol)
            reps.append(compare("mollo", res.value, budget, witness=wit, constants=consts,
                                samples={"nodes": space.n}))
    for i in range(nd):
        for j in range(i + 1, nd):
            if float(dom.disks[i].r) > float(dom.disks[j].r):
                a, b = j, i
            else:
                a, b = i, j
            delta = float(relative_distance(dom, a, b))
            wit = {"pair": [a, b], "delta": delta}
            if delta >= alpha:
                if space is None:
                    space = dom.space(n)
                res = pair_modulus(dom, a, b, space=space, tol=tol)
                reps.append(compare("mollo", res.value, budget, witness=wit, constants=consts,
                                    samples={"nodes": space.n}))
                continue
            w, s = midpoint(dom, a, b)
            ra = float(dom.disks[a].r)
            reps.append(compare("foro", 2.0 ** (N + 2) * s, ra, witness=wit, constants=consts))
            hits = sphere_families(dom, a, b, N)
            per_k: dict = {}
            for nn, ks in hits.items():
                for k in ks:
                    per_k.setdefault(k, []).append(nn)
            span = max([max(v) - min(v) + 1 for v in per_k.values()] + [0])
            reps.append(compare("goro", span, 2, witness={**wit, "families": per_k}, constants=consts,
                                note="families touched by one component"))
            clean = sum(1 for ks in hits.values() if not ks)
            reps.append(compare("counting", N - 2 * M + 2, clean, witness=wit, constants=consts))
            lower = clean * 2 * LN2 / math.pi
            loc = local_space(dom, a, b)
            res = pair_modulus(dom, a, b, space=loc, tol=tol, stop_above=max(budget, lower))
            reps.append(compare("mollo", res.lower, budget, witness={**wit, "lower_family_bound": lower},
                                constants=consts, samples={"nodes": loc.n},
                                note="pair closer than the separation constant: a failure here "
                                     "exhibits the contradiction with the budget"))
    return reps


def random_continua(dom: CircleDomain, rng: np.random.Generator, *, length=(0.2, 0.6),
                    margin: float = 0.05, min_gap: float = 0.05, tries: int = 2000):
    """Two disjoint segments in the domain whose diameters are at least their
    distance, which is at least ``min_gap``; ``margin`` keeps them off the
    disks and the bounding circle."""
    c, R = dom.bounding()
    for _ in range(tries):
        L = rng.uniform(*length)
        p = c + rng.uniform(-0.7, 0.7, 2) * R
        th = rng.uniform(0, 2 * math.pi)
        u = np.array([math.cos(th), math.sin(th)])
        off = rng.uniform(0.2, 1.0) * L
        th2 = th + rng.uniform(-0.5, 0.5)
        u2 = np.array([math.cos(th2), math.sin(th2)])
        v = np.array([-u[1], u[0]])
        E1 = np.array([p - 0.5 * L * u, p + 0.5 * L * u])
        q = p + off * v
        E2 = np.array([q - 0.5 * L * u2, q + 0.5 * L * u2])
        dense = np.vstack([_densify(E1, L / 50), _densify(E2, L / 50)])
        if not np.all(dom.contains(dense, margin=0)):
            continue
        near = min([float(np.min(np.hypot(*(dense - d.zf).T) - float(d.r))) for d in dom.disks]
                   + [math.inf])
        if near < margin or float(np.max(np.hypot(*(dense - c).T))) > R - margin:
            continue
        if float(_polyline_dist(E1, E2).min()) < min_gap or float(_polyline_dist(E2, E1).min()) < min_gap:
            continue
        try:
            if fars_ratio(E1, E2) >= 1:
                return E1, E2
        except PreconditionError:
            continue
    raise DomainError("could not place two continua")


def measured_constants(dom: CircleDomain, n: int = 32, pairs: int = 2000, seed: int = 0) -> dict:
    """``C_W``, ``C_D`` and ``C_X`` measured on a grid sample of the domain, with
    the chain metric at its finest resolved scale."""
    from .chain_metric import chain_graph, finest_delta, sample_pairs, wmdm_constant
    from .regularity import c_x_constant, doubling_constant

    sp = dom.space(n)
    g = chain_graph(sp, finest_delta(sp))
    C_W = wmdm_constant(sp, g, sample_pairs(sp, pairs, seed)).value
    C_D = doubling_constant(sp).C_D
    C_X = c_x_constant(sp)
    return {"C_W": max(1.0, C_W), "C_D": max(1.0, C_D), "C_X": max(1.0, C_X)}
