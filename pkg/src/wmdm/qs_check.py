"""Quasisymmetry diagnostics for maps between finite metric spaces.

A :class:`DiscreteMap` sends point ``i`` of its source to point ``f[i]`` of
its target. Distortion is measured through distance ratios on triples; all
reported envelopes are empirical lower bounds for any valid distortion
function.
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .mmspace import MMSpace, SpaceError, ball_masses
from .modulus import PathFamily, admissibility_check, domain_graph, modulus_solve
from .regularity import UndefinedConstant
from .reports import VerificationReport, compare

log = logging.getLogger(__name__)

ALL_TRIPLES_MAX = 2000
DEFAULT_GATE = 0.1


class NoTriples(SpaceError):
    pass


@dataclass(frozen=True)
class DiscreteMap:
    source: MMSpace
    target: MMSpace
    f: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.f, dtype=np.int64).reshape(-1)
        object.__setattr__(self, "f", f)
        if len(f) != self.source.n:
            raise SpaceError(f"map has {len(f)} entries for {self.source.n} source points")
        if len(f) and (f.min() < 0 or f.max() >= self.target.n):
            bad = int(np.flatnonzero((f < 0) | (f >= self.target.n))[0])
            raise SpaceError(f"map sends {bad} outside the target", index=bad)
        if len(np.unique(f)) != len(f):
            _, first, counts = np.unique(f, return_index=True, return_counts=True)
            raise SpaceError(f"map is not injective at source point {int(first[np.argmax(counts > 1)])}")

    @classmethod
    def identity(cls, source: MMSpace, target: MMSpace) -> "DiscreteMap":
        if source.n != target.n:
            raise SpaceError("identity needs spaces of equal size")
        return cls(source, target, np.arange(source.n))

    def inverse(self) -> "DiscreteMap":
        if self.target.n != self.source.n:
            raise SpaceError("only bijections can be inverted")
        g = np.empty_like(self.f)
        g[self.f] = np.arange(len(self.f))
        return DiscreteMap(self.target, self.source, g)

    def compose(self, other: "DiscreteMap") -> "DiscreteMap":
        """``other`` after ``self``."""
        return DiscreteMap(self.source, other.target, other.f[self.f])

    def image_row(self, i: int) -> np.ndarray:
        """Target distances from ``f(i)`` to ``f(j)``, indexed by source ``j``."""
        return self.target.dist_from(int(self.f[i]))[self.f]


@dataclass
class QSReport:
    t: float
    witness: tuple | None
    raw_max: float
    centers: int
    gate: float | None
    eta_samples: list = field(default_factory=list)
    normalization: tuple | None = None

    def to_json(self) -> dict:
        return {"t": self.t, "raw_max": self.raw_max, "witness": list(self.witness or ()),
                "centers": self.centers, "gate": self.gate,
                "eta_samples": [list(map(float, p)) for p in self.eta_samples],
                "normalization": None if self.normalization is None else list(self.normalization)}


def _centers(n: int, max_centers: int | None, seed: int) -> np.ndarray:
    if max_centers is None or n <= max_centers:
        return np.arange(n)
    return np.sort(np.random.default_rng(seed).choice(n, max_centers, replace=False))


def weak_qs_constant(fmap: DiscreteMap, *, gate: float | None = DEFAULT_GATE,
                     max_centers: int | None = ALL_TRIPLES_MAX, seed: int = 0) -> QSReport:
    """Least ``t >= 1`` with ``d'(f y0, f y1) <= t d'(f y0, f y2)`` whenever
    ``d(y0, y1) <= d(y0, y2) <= gate`` in the source.

    Every admissible triple around each centre is covered exactly: sorted by
    distance from ``y0``, the candidates for ``y2`` are the tie group of
    ``y1`` (minus ``y1``) and everything after it. With more than
    ``max_centers`` points a seeded subset of centres is used.
    """
    src = fmap.source
    best, wit, centers = -math.inf, None, _centers(src.n, max_centers, seed)
    for y0 in centers:
        d = src.dist_from(int(y0))
        e = fmap.image_row(int(y0))
        keep = d > 0
        if gate is not None:
            keep &= d <= gate * (1 + 1e-12)
        ids = np.flatnonzero(keep)
        if len(ids) < 2:
            continue
        order = ids[np.argsort(d[ids], kind="stable")]
        ratio, partner = _worst_ratios(d[order], e[order])
        k = int(np.argmax(ratio))
        if ratio[k] > best:
            best = float(ratio[k])
            wit = (int(y0), int(order[k]), int(order[partner[k]]))
    if wit is None:
        raise NoTriples("no admissible triples under the gate")
    # ratios within the tie tolerance of 1 count as 1
    return QSReport(1.0 if best <= 1.0 + 1e-12 else best, wit, best, len(centers), gate)


def _worst_ratios(ds: np.ndarray, es: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """For each position ``k`` of the distance-sorted arrays, ``es[k]`` over the
    least ``es[j]``, ``j != k``, with ``ds[j] >= ds[k]`` (ties within 1e-12
    relative), and that ``j``."""
    n = len(ds)
    new = np.r_[True, ds[1:] > ds[:-1] * (1 + 1e-12)]
    gid = np.cumsum(new) - 1
    starts = np.flatnonzero(new)
    ends = np.r_[starts[1:], n]
    # least and second least inside each tie group
    o = np.lexsort((es, gid))
    first = o[starts]
    has2 = ends - starts > 1
    second = np.where(has2, o[np.minimum(starts + 1, n - 1)], -1)
    # least over everything after each group
    suf = np.r_[np.minimum.accumulate(es[::-1])[::-1], np.inf]
    sufarg = np.r_[_suffix_argmin(es), -1]
    pos = np.arange(n)
    g = gid
    in_group = np.where(first[g] != pos, first[g], second[g])
    in_val = np.where(in_group >= 0, es[np.maximum(in_group, 0)], np.inf)
    after = ends[g]
    use_after = suf[after] < in_val
    den = np.where(use_after, suf[after], in_val)
    partner = np.where(use_after, sufarg[after], in_group)
    with np.errstate(divide="ignore"):
        ratio = np.where(np.isfinite(den), es / den, -np.inf)
    return ratio, partner


def _suffix_argmin(a: np.ndarray) -> np.ndarray:
    n = len(a)
    rev = a[::-1]
    run = np.minimum.accumulate(rev)
    # last index (in reversed order) where the running minimum was attained
    hit = np.where(rev == run, np.arange(n), 0)
    idx = np.maximum.accumulate(hit)
    return (n - 1 - idx)[::-1]


@dataclass
class EtaEnvelope:
    s: np.ndarray
    observed: np.ndarray
    envelope: np.ndarray
    triples: np.ndarray

    def __call__(self, s) -> np.ndarray:
        """Envelope value at ``s``: the largest observation at ratios up to ``s``."""
        s = np.asarray(s, float)
        k = np.searchsorted(self.s, s * (1 + 1e-12), side="right") - 1
        return np.where(k >= 0, self.envelope[np.maximum(k, 0)], 0.0)

    def rows(self) -> list:
        return [(float(a), float(b), float(c)) for a, b, c in zip(self.s, self.observed, self.envelope)]


def sample_triples(n: int, count: int = 100_000, seed: int = 0) -> np.ndarray:
    """All ordered triples of distinct points when there are at most ``count``,
    otherwise ``count`` seeded random ones."""
    if n * (n - 1) * (n - 2) <= count:
        return np.array([t for t in itertools.permutations(range(n), 3)], dtype=np.int64).reshape(-1, 3)
    rng = np.random.default_rng(seed)
    out = rng.integers(0, n, (int(count * 1.2) + 10, 3))
    out = out[(out[:, 0] != out[:, 1]) & (out[:, 0] != out[:, 2]) & (out[:, 1] != out[:, 2])]
    return out[:count]


def stratified_triples(space: MMSpace, count: int = 100_000, seed: int = 0,
                       ratio_min: float = 1e-3) -> np.ndarray:
    """Triples ``(x, y, z)`` whose coordinate ratio ``|x - y| / |x - z|`` is
    spread log-uniformly over ``[ratio_min, 1]``: ``y`` is the sample point
    nearest to a target placed at the drawn ratio."""
    from scipy.spatial import cKDTree

    if space.coords is None:
        raise SpaceError("stratified sampling needs coordinates")
    P = space.coords
    tree = cKDTree(P)
    rng = np.random.default_rng(seed)
    m = int(count * 1.3) + 10
    x = rng.integers(0, space.n, m)
    z = rng.integers(0, space.n, m)
    dz = np.hypot(*(P[z] - P[x]).T)
    rho = np.exp(rng.uniform(math.log(ratio_min), 0.0, m)) * dz
    th = rng.uniform(0, 2 * math.pi, m)
    _, y = tree.query(P[x] + rho[:, None] * np.column_stack([np.cos(th), np.sin(th)]))
    T = np.column_stack([x, y, z])
    T = T[(x != y) & (x != z) & (y != z)]
    return T[:count]


def _pair_dist(space: MMSpace, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if space.metric.kind == "matrix":
        return space.metric.matrix[a, b]
    return space.from_base(np.hypot(*(space.coords[a] - space.coords[b]).T))


def eta_estimate(fmap: DiscreteMap, triples=None, *, count: int = 100_000, seed: int = 0,
                 stratified: bool = False) -> EtaEnvelope:
    """Observed ``(s, eta)`` with ``s = d(x, y)/d(x, z)`` and the image ratio,
    sorted by ``s``, plus the running maximum as a monotone envelope.
    ``stratified`` spreads the sample over scales (see :func:`stratified_triples`)."""
    if triples is not None:
        T = np.asarray(triples, np.int64).reshape(-1, 3)
    elif stratified:
        T = stratified_triples(fmap.source, count, seed)
    else:
        T = sample_triples(fmap.source.n, count, seed)
    if len(T) == 0 or np.any((T[:, 0] == T[:, 1]) | (T[:, 0] == T[:, 2]) | (T[:, 1] == T[:, 2])):
        raise SpaceError("triples must consist of distinct points")
    x, y, z = T.T
    s = _pair_dist(fmap.source, x, y) / _pair_dist(fmap.source, x, z)
    f = fmap.f
    eta = _pair_dist(fmap.target, f[x], f[y]) / _pair_dist(fmap.target, f[x], f[z])
    order = np.lexsort((eta, s))
    s, eta, T = s[order], eta[order], T[order]
    return EtaEnvelope(s, eta, np.maximum.accumulate(eta), T)


# ---------------------------------------------------------------------------
# normalization by Moebius maps
# ---------------------------------------------------------------------------

def stereographic(P) -> np.ndarray:
    """Unit sphere (projection from the north pole) to the plane."""
    P = np.atleast_2d(np.asarray(P, float))
    if P.shape[1] != 3:
        raise SpaceError("sphere points need three coordinates")
    with np.errstate(divide="ignore", invalid="ignore"):
        return P[:, :2] / (1.0 - P[:, 2:3])


def inverse_stereographic(Z) -> np.ndarray:
    Z = np.atleast_2d(np.asarray(Z, float))
    r2 = (Z ** 2).sum(axis=1, keepdims=True)
    return np.hstack([2 * Z, r2 - 1]) / (r2 + 1)


@dataclass(frozen=True)
class Moebius:
    """``z -> (a z + b) / (c z + d)`` on complex numbers."""
    a: complex
    b: complex
    c: complex
    d: complex

    @classmethod
    def identity(cls) -> "Moebius":
        return cls(1, 0, 0, 1)

    @classmethod
    def to_standard(cls, z0: complex, z1: complex, zinf: complex) -> "Moebius":
        """The map sending ``z0, z1, zinf`` to ``0, 1, infinity``."""
        k = (z1 - zinf) / (z1 - z0)
        return cls(k, -k * z0, 1, -zinf)

    def __call__(self, z):
        z = np.asarray(z, complex)
        num = self.a * z + self.b
        den = self.c * z + self.d
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(den == 0, complex(np.inf), num / np.where(den == 0, 1, den))

    def inverse(self) -> "Moebius":
        return Moebius(self.d, -self.b, -self.c, self.a)


@dataclass
class Normalization:
    triple: tuple
    moebius: Moebius
    min_image_distance: float
    required: float
    source_points: np.ndarray
    identity: bool

    @property
    def margin(self) -> float:
        return self.min_image_distance / self.required - 1.0


def _farthest(D: np.ndarray, k: int) -> np.ndarray:
    chosen = [int(np.argmax(D[0]))]
    dmin = D[chosen[0]].copy()
    while len(chosen) < min(k, len(D)):
        j = int(np.argmax(dmin))
        chosen.append(j)
        dmin = np.minimum(dmin, D[j])
    return np.array(chosen)


def normalize_map(fmap: DiscreteMap, marked=None, candidates=None, *, n_candidates: int = 60,
                  plane=None) -> Normalization:
    """Choose ``(a0, a1, a_inf)`` in the source with well separated images and
    the Moebius change of variables moving them to ``0, 1, infinity``.

    The source must have planar (or unit-sphere, given via ``plane`` as 3D
    points) coordinates. An already adequate ``marked`` triple is kept with
    the identity change. Returns the new source coordinates; the image of
    ``a_inf`` is the point at infinity (``inf``).
    """
    if plane is not None:
        Z = np.asarray(plane, float)
        if Z.ndim == 2 and Z.shape[1] == 3:
            Z = stereographic(Z)
    else:
        if fmap.source.coords is None:
            raise SpaceError("normalization needs source coordinates")
        Z = fmap.source.coords
    z = Z[:, 0] + 1j * Z[:, 1]
    required = fmap.target.diameter / 10.0

    def image_min(t):
        i, j, k = (int(fmap.f[v]) for v in t)
        T = fmap.target
        return min(T.dist(i, j), T.dist(i, k), T.dist(j, k))

    base = None
    if marked is not None:
        marked = tuple(int(v) for v in marked)
        base = image_min(marked)
        if base >= required:
            return Normalization(marked, Moebius.identity(), base, required, Z, True)
    if candidates is None:
        D = fmap.target.dist_matrix[np.ix_(fmap.f, fmap.f)] if fmap.target.n <= 4096 else None
        if D is None:
            rng = np.random.default_rng(0)
            candidates = rng.choice(fmap.source.n, n_candidates, replace=False)
        else:
            candidates = _farthest(D, n_candidates)
    candidates = [int(c) for c in candidates]
    if marked is not None:
        candidates = sorted(set(candidates) | set(marked))
    best, triple = -1.0, None
    for t in itertools.combinations(candidates, 3):
        v = image_min(t)
        if v > best:
            best, triple = v, t
    if marked is not None and base >= best:
        best, triple = base, marked
    if best < required:
        log.warning("normalize_map: best triple reaches %.4g of the required %.4g", best, required)
    m = Moebius.to_standard(z[triple[0]], z[triple[1]], z[triple[2]])
    w = m(z)
    return Normalization(triple, m, best, required, np.column_stack([w.real, w.imag]), False)


# ---------------------------------------------------------------------------
# annulus density and the final ratio bound
# ---------------------------------------------------------------------------

def inaali_bound(k: int, C_W: float, C_S: float, C_D: float) -> float:
    return 2 * math.pi * C_W ** 2 * C_S ** 2 * C_D ** 6 / k


def annulus_count(lamA: float, B_over_lam: float) -> int:
    """Largest ``k >= 2`` with ``B / lambda >= 2^k lambda A``."""
    if not lamA > 0:
        raise UndefinedConstant("lambda A must be positive")
    ratio = B_over_lam / lamA
    k = math.floor(math.log2(ratio) + 1e-12) if ratio > 0 else -1
    if k < 2:
        raise UndefinedConstant(f"B/lambda over lambda A is {ratio:.6g}, below 4: no annuli")
    return k


@dataclass
class AnnulusBound:
    k: int
    bound: float
    objective: float
    admissible: bool
    shortest: float
    modulus: float | None
    rho: np.ndarray = field(repr=False)
    reports: list = field(default_factory=list)


def annulus_density_bound(space: MMSpace, q: MMSpace, center: int, lamA: float, B_over_lam: float,
                          constants, *, cross_check: bool = True, tol: float = 0.02) -> AnnulusBound:
    """Density of ``k`` stacked annuli about ``center``.

    Annuli and ball masses use the metric and measure of ``space``; path
    lengths use ``q`` (a space on the same points, e.g. the chain metric) and
    areas are squared nearest-neighbour ``q``-distances. Reports whether the
    density is admissible for the curves from the inner ball to the outer
    complement, each annulus crossing estimate, and the cost against the
    bound; ``cross_check`` also solves for the modulus itself.
    """
    C_W, C_S, C_D = (float(constants[k]) for k in ("C_W", "C_S", "C_D"))
    k = annulus_count(lamA, B_over_lam)
    d = space.dist_from(center)
    radii = lamA * 2.0 ** np.arange(1, k + 1)
    mass = ball_masses(space, [center] * k, radii)
    rho = np.zeros(space.n)
    Qm = q.dist_matrix
    reps = []
    consts = {"C_W": C_W, "C_S": C_S, "C_D": C_D, "k": k}
    for j in range(1, k + 1):
        lo, hi = radii[j - 1] / 2, radii[j - 1]
        inside = (d >= lo) & (d <= hi)
        rho[inside] += C_W * C_D / math.sqrt(mass[j - 1]) / k
        a, b = np.flatnonzero(d < lo), np.flatnonzero(d > hi)
        if len(a) and len(b):
            cross = float(Qm[np.ix_(a, b)].min())
            reps.append(compare("crossing", math.sqrt(mass[j - 1]) / (C_W * C_D), cross,
                                witness={"j": j}, constants=consts))
    g = domain_graph(q, radius=math.sqrt(5) * (space.pitch or 0) or None, areas="nn2")
    fam = PathFamily(np.flatnonzero(d <= lamA), np.flatnonzero(d >= B_over_lam))
    ok, L, path = admissibility_check(g, fam, rho)
    obj = float(np.dot(g.areas, rho * rho))
    bound = inaali_bound(k, C_W, C_S, C_D)
    reps.append(compare("admissible", 1.0, L, witness={"path": path}, constants=consts,
                        note="shortest rho-length of a curve from the inner ball to the outer complement"))
    reps.append(compare("inaali", obj, bound, witness={"center": center}, constants=consts))
    mod = None
    if cross_check:
        mod = modulus_solve(g, fam, tol).value
        reps.append(compare("modulus", mod, obj, witness={"center": center}, constants=consts,
                            note="the annulus density is admissible, so it costs at least the modulus"))
    return AnnulusBound(k, bound, obj, bool(ok), float(L), mod, rho, reps)


def final_ratio_bound(C_W, C_S, C_D, M: int, alpha) -> float:
    """Upper bound for the annulus count ``k`` (may be ``inf`` in floating point)."""
    return 2 * math.pi ** 3 * C_W ** 2 * C_S ** 2 * C_D ** 6 * (10 * M) ** M * (M + 2) ** 2 / alpha ** M


def log2_final_ratio_bound(C_W, C_S, C_D, M: int, log2_alpha: float) -> float:
    return (math.log2(2 * math.pi ** 3) + 2 * math.log2(C_W) + 2 * math.log2(C_S) + 6 * math.log2(C_D)
            + M * math.log2(10 * M) + 2 * math.log2(M + 2) - M * log2_alpha)


def log2_weak_qs_bound(k_max: float, lam: float) -> float:
    """``log2`` of the weak quasisymmetry constant ``2^(k_max + 1) lambda^2``."""
    return k_max + 1 + 2 * math.log2(lam)


def qs_reports(fmap: DiscreteMap, *, gate: float | None = DEFAULT_GATE, t_max: float | None = None,
               seed: int = 0) -> tuple[QSReport, list[VerificationReport]]:
    """Weak quasisymmetry constant and, when ``t_max`` is given, its check."""
    rep = weak_qs_constant(fmap, gate=gate, seed=seed)
    env = eta_estimate(fmap, count=20_000, seed=seed)
    step = max(1, len(env.s) // 200)
    rep.eta_samples = [(float(a), float(b)) for a, b in zip(env.s[::step], env.envelope[::step])]
    out = []
    if t_max is not None:
        out.append(compare("weakqs", rep.t, t_max, witness=rep.witness))
    return rep, out
