"""Finite metric measure spaces, ball queries and standard test spaces.

A space is a finite sample of points in the model plane together with a
metric (euclidean, snowflaked euclidean, or an explicit matrix) and per-point
masses. The measure of a set is the sum of the masses it contains.

Balls are open. Points lying on the bounding sphere (within a relative
tolerance) form the *shell*; with the default ``shell="half"`` rule each shell
point contributes half its mass. This is the trapezoid rule for the lattice
count and keeps small pair balls from being undercounted; ``"open"`` and
``"closed"`` are available for experiments.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from . import kernels

SHELL_RTOL = 1e-9
SHELL_MODES = {"open": kernels.OPEN, "half": kernels.HALF, "closed": kernels.CLOSED}

__all__ = [
    "SHELL_RTOL",
    "SpaceError",
    "Metric",
    "MMSpace",
    "BallSet",
    "GridIndex",
    "build_space",
    "ball",
    "pair_ball",
    "ball_masses",
    "pair_ball_masses",
    "generate",
    "parse_generator",
]


class SpaceError(ValueError):
    """Invalid space input. ``index`` names the offending point or pair."""

    def __init__(self, message: str, index=None):
        super().__init__(message)
        self.index = index


@dataclass(frozen=True)
class Metric:
    kind: str = "euclidean"
    theta: float = 1.0
    matrix: np.ndarray | None = field(default=None, repr=False, compare=False)

    def to_json(self) -> dict:
        out: dict = {"kind": self.kind}
        if self.kind == "snowflake":
            out["theta"] = self.theta
        if self.kind == "matrix":
            out["matrix"] = np.asarray(self.matrix).tolist()
        return out


class GridIndex:
    """Bucket grid over model coordinates, stored CSR-style."""

    def __init__(self, coords: np.ndarray, cell_size: float):
        lo = coords.min(axis=0)
        hi = coords.max(axis=0)
        self.cell_size = float(cell_size)
        self.origin = np.ascontiguousarray(lo - 0.5 * cell_size, dtype=float)
        span = hi - self.origin
        self.nx = int(span[0] // cell_size) + 1
        self.ny = int(span[1] // cell_size) + 1
        ix = np.floor((coords[:, 0] - self.origin[0]) / cell_size).astype(np.int64)
        iy = np.floor((coords[:, 1] - self.origin[1]) / cell_size).astype(np.int64)
        ix = np.clip(ix, 0, self.nx - 1)
        iy = np.clip(iy, 0, self.ny - 1)
        key = ix * self.ny + iy
        order = np.argsort(key, kind="stable")
        self.cell_points = np.ascontiguousarray(order, dtype=np.int64)
        counts = np.bincount(key, minlength=self.nx * self.ny)
        self.cell_start = np.zeros(self.nx * self.ny + 1, dtype=np.int64)
        np.cumsum(counts, out=self.cell_start[1:])

    def args(self) -> tuple:
        return (self.cell_start, self.cell_points, self.origin, self.cell_size,
                self.nx, self.ny)


@dataclass(frozen=True, eq=False)
class MMSpace:
    """Immutable finite metric measure space.

    Point ids are the integers ``0..n-1``. ``coords`` may be ``None`` only for
    explicit-matrix spaces.
    """

    coords: np.ndarray | None
    weights: np.ndarray
    metric: Metric = Metric()
    boundary: Mapping[str, np.ndarray] = field(default_factory=dict)
    pitch: float | None = None
    shell: str = "half"
    meta: Mapping[str, object] = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.weights)

    @property
    def total_mass(self) -> float:
        return float(self.weights.sum())

    @property
    def shell_mode(self) -> int:
        return SHELL_MODES[self.shell]

    @property
    def has_coords(self) -> bool:
        return self.coords is not None and self.metric.kind != "matrix"

    def check_id(self, i) -> int:
        if not isinstance(i, (int, np.integer)) or not 0 <= int(i) < self.n:
            raise SpaceError(f"unknown point id {i!r}", index=i)
        return int(i)

    def to_base(self, r):
        """Metric radius -> coordinate radius (identity unless snowflaked)."""
        if self.metric.kind == "snowflake":
            return np.power(r, 1.0 / self.metric.theta)
        return r

    def from_base(self, d):
        if self.metric.kind == "snowflake":
            return np.power(d, self.metric.theta)
        return d

    def base_from(self, i: int) -> np.ndarray:
        """Coordinate distances from point ``i`` (matrix row for matrix spaces)."""
        if self.metric.kind == "matrix":
            return self.metric.matrix[i]
        c = self.coords
        return np.hypot(c[:, 0] - c[i, 0], c[:, 1] - c[i, 1])

    def dist_from(self, i: int) -> np.ndarray:
        i = self.check_id(i)
        return self.from_base(self.base_from(i))

    def dist(self, i: int, j: int) -> float:
        i, j = self.check_id(i), self.check_id(j)
        if self.metric.kind == "matrix":
            return float(self.metric.matrix[i, j])
        d = math.hypot(*(self.coords[j] - self.coords[i]))
        return float(self.from_base(d))

    @cached_property
    def dist_matrix(self) -> np.ndarray:
        if self.metric.kind == "matrix":
            return self.metric.matrix
        c = self.coords
        d = np.hypot(c[:, None, 0] - c[None, :, 0], c[:, None, 1] - c[None, :, 1])
        return self.from_base(d)

    @cached_property
    def index(self) -> GridIndex | None:
        if not self.has_coords:
            return None
        cell = self.pitch
        if not cell:
            lo, hi = self.coords.min(axis=0), self.coords.max(axis=0)
            cell = max(float(np.max(hi - lo)) / max(math.sqrt(self.n), 1.0), 1e-12)
        return GridIndex(self.coords, cell)

    @cached_property
    def diameter(self) -> float:
        if self.metric.kind == "matrix" or self.n <= 2048:
            return float(self.dist_matrix.max())
        from scipy.spatial import ConvexHull

        hull = self.coords[ConvexHull(self.coords).vertices]
        d = np.hypot(hull[:, None, 0] - hull[None, :, 0], hull[:, None, 1] - hull[None, :, 1])
        return float(self.from_base(d.max()))

    def with_metric(self, matrix: np.ndarray, **meta) -> "MMSpace":
        return MMSpace(self.coords, self.weights, Metric("matrix", 1.0, np.asarray(matrix, float)),
                       self.boundary, self.pitch, self.shell, {**self.meta, **meta})

    def with_weights(self, weights: np.ndarray) -> "MMSpace":
        return MMSpace(self.coords, np.asarray(weights, float), self.metric, self.boundary,
                       self.pitch, self.shell, self.meta)

    def snowflake(self, theta: float) -> "MMSpace":
        if not self.has_coords:
            raise SpaceError("snowflaking needs a coordinate metric")
        return MMSpace(self.coords, self.weights, Metric("snowflake", theta), self.boundary,
                       self.pitch, self.shell, {**self.meta, "theta": theta})

    def to_json(self) -> dict:
        out = {
            "points": self.coords.tolist() if self.coords is not None else None,
            "metric": self.metric.to_json(),
            "weights": self.weights.tolist(),
            "boundary": {k: np.asarray(v).tolist() for k, v in self.boundary.items()},
        }
        if self.pitch:
            out["pitch"] = self.pitch
        if self.shell != "half":
            out["shell"] = self.shell
        if self.meta:
            out["meta"] = dict(self.meta)
        return out


@dataclass(frozen=True)
class BallSet:
    centers: tuple[int, ...]
    radius: float
    members: np.ndarray
    shell: np.ndarray
    mass: float

    def __contains__(self, i) -> bool:
        return bool(np.any(self.members == i))


def _membership(d: np.ndarray, r: float) -> tuple[np.ndarray, np.ndarray]:
    tol = SHELL_RTOL * r
    return d < r - tol, np.abs(d - r) <= tol


def _shell_factor(space: MMSpace) -> float:
    return {"open": 0.0, "half": 0.5, "closed": 1.0}[space.shell]


def build_space(points, metric="euclidean", weights="uniform-cell", *, area=None,
                pitch=None, boundary=None, shell="half", meta=None,
                check_triples: int = 2000, seed: int = 0) -> MMSpace:
    """Validate inputs and assemble an :class:`MMSpace`.

    ``metric`` is ``"euclidean"``, ``("snowflake", theta)``, a :class:`Metric`,
    or a square distance matrix. ``weights`` is ``"uniform-cell"``, an array,
    or a callable density evaluated at the coordinates (times the cell mass).
    """
    coords = None
    if points is not None:
        coords = np.ascontiguousarray(np.asarray(points, dtype=float).reshape(-1, 2))
    if isinstance(metric, Metric):
        m = metric
    elif isinstance(metric, str):
        if metric == "euclidean":
            m = Metric("euclidean")
        elif metric.startswith("snowflake"):
            mt = re.fullmatch(r"snowflake\(([^)]+)\)", metric)
            if not mt:
                raise SpaceError(f"bad metric spec {metric!r}")
            m = Metric("snowflake", float(eval_number(mt.group(1))))
        else:
            raise SpaceError(f"unknown metric {metric!r}")
    elif isinstance(metric, tuple) and metric[0] == "snowflake":
        m = Metric("snowflake", float(metric[1]))
    else:
        m = Metric("matrix", 1.0, np.asarray(metric, dtype=float))

    if m.kind == "matrix":
        D = m.matrix
        n = D.shape[0]
        if D.ndim != 2 or D.shape[1] != n:
            raise SpaceError("distance matrix must be square")
        bad = np.argwhere(np.abs(D - D.T) > 1e-12 * max(1.0, float(np.abs(D).max())))
        if len(bad):
            raise SpaceError(f"distance matrix not symmetric at {tuple(bad[0])}", index=tuple(bad[0]))
        diag = np.flatnonzero(np.diag(D) != 0)
        if len(diag):
            raise SpaceError(f"nonzero diagonal at {diag[0]}", index=int(diag[0]))
        off = D + np.eye(n)
        bad = np.argwhere(off <= 0)
        if len(bad):
            raise SpaceError(f"duplicate points {tuple(bad[0])} (zero distance)", index=tuple(bad[0]))
        _check_triangle(D, check_triples, seed)
    else:
        if coords is None:
            raise SpaceError("coordinate metric needs points")
        n = len(coords)
        if m.kind == "snowflake" and not 0.0 < m.theta <= 1.0:
            raise SpaceError(f"snowflake exponent must lie in (0,1], got {m.theta}")
    if n < 2:
        raise SpaceError("a space needs at least 2 points")
    if coords is not None:
        if len(coords) != n:
            raise SpaceError("points and matrix sizes differ")
        _, first, counts = np.unique(coords, axis=0, return_index=True, return_counts=True)
        if np.any(counts > 1):
            dup = np.flatnonzero(np.all(coords == coords[first[np.argmax(counts > 1)]], axis=1))
            raise SpaceError(f"duplicate points {dup[:2].tolist()}", index=int(dup[1]))

    if isinstance(weights, str):
        if weights != "uniform-cell":
            raise SpaceError(f"unknown weights {weights!r}")
        w = np.full(n, _cell(n, area, pitch))
    elif callable(weights):
        if coords is None:
            raise SpaceError("density weights need coordinates")
        w = _cell(n, area, pitch) * np.asarray([weights(p) for p in coords], dtype=float)
    else:
        w = np.asarray(weights, dtype=float).reshape(-1)
        if len(w) != n:
            raise SpaceError(f"expected {n} weights, got {len(w)}")
    neg = np.flatnonzero(w < 0)
    if len(neg):
        raise SpaceError(f"negative weight at point {neg[0]}", index=int(neg[0]))
    if not w.sum() > 0:
        raise SpaceError("total mass must be positive")

    labels = {}
    seen = np.full(n, -1)
    for k, (name, ids) in enumerate((boundary or {}).items()):
        ids = np.unique(np.asarray(ids, dtype=np.int64))
        if len(ids) and (ids.min() < 0 or ids.max() >= n):
            raise SpaceError(f"boundary component {name} has unknown ids", index=name)
        clash = ids[seen[ids] >= 0]
        if len(clash):
            raise SpaceError(f"boundary components overlap at point {clash[0]}", index=int(clash[0]))
        seen[ids] = k
        labels[str(name)] = ids
    if shell not in SHELL_MODES:
        raise SpaceError(f"unknown shell rule {shell!r}")
    return MMSpace(coords, w, m, labels, pitch, shell, dict(meta or {}))


def eval_number(text: str) -> float:
    """Parse ``"0.5"``, ``"1/2"`` and similar."""
    text = text.strip()
    if "/" in text:
        a, b = text.split("/", 1)
        return float(a) / float(b)
    return float(text)


def _cell(n, area, pitch) -> float:
    if area is not None:
        return float(area) / n
    if pitch:
        return float(pitch) ** 2
    return 1.0


def _check_triangle(D: np.ndarray, count: int, seed: int) -> None:
    n = D.shape[0]
    rng = np.random.default_rng(seed)
    if n ** 3 <= count:
        i, j, k = np.meshgrid(np.arange(n), np.arange(n), np.arange(n), indexing="ij")
        i, j, k = i.ravel(), j.ravel(), k.ravel()
    else:
        i, j, k = (rng.integers(0, n, count) for _ in range(3))
    viol = D[i, k] > D[i, j] + D[j, k]
    if np.any(viol):
        t = int(np.flatnonzero(viol)[0])
        raise SpaceError(f"triangle inequality fails on {(int(i[t]), int(j[t]), int(k[t]))}",
                         index=(int(i[t]), int(j[t]), int(k[t])))


def ball(space: MMSpace, c: int, r: float) -> BallSet:
    c = space.check_id(c)
    if not r > 0:
        raise SpaceError(f"radius must be positive, got {r}")
    rb = float(space.to_base(r))
    members, shell = _membership(space.base_from(c), rb)
    mem = np.flatnonzero(members)
    sh = np.flatnonzero(shell)
    mass = float(space.weights[mem].sum() + _shell_factor(space) * space.weights[sh].sum())
    return BallSet((c,), float(r), mem, sh, mass)


def pair_ball(space: MMSpace, x: int, y: int) -> BallSet:
    """Union of the open balls of radius ``dist(x, y)`` about ``x`` and ``y``."""
    x, y = space.check_id(x), space.check_id(y)
    if x == y:
        raise SpaceError("pair ball needs distinct points", index=x)
    dx, dy = space.base_from(x), space.base_from(y)
    rb = float(dx[y])
    in_x, sh_x = _membership(dx, rb)
    in_y, sh_y = _membership(dy, rb)
    members = in_x | in_y
    shell = (sh_x | sh_y) & ~members
    mem, sh = np.flatnonzero(members), np.flatnonzero(shell)
    mass = float(space.weights[mem].sum() + _shell_factor(space) * space.weights[sh].sum())
    return BallSet((x, y), float(space.from_base(rb)), mem, sh, mass)


def ball_masses(space: MMSpace, centers: Sequence[int], radii: Sequence[float]) -> np.ndarray:
    """Vectorised ``ball(space, c, r).mass`` over many queries."""
    centers = np.ascontiguousarray(centers, dtype=np.int64)
    radii = np.ascontiguousarray(space.to_base(np.asarray(radii, dtype=float)), dtype=float)
    if space.has_coords:
        return kernels.ball_masses(space.coords, space.weights, *space.index.args(),
                                   centers, radii, space.shell_mode, SHELL_RTOL)
    out = np.empty(len(centers))
    f = _shell_factor(space)
    for k, (c, r) in enumerate(zip(centers, radii)):
        inside, shell = _membership(space.metric.matrix[c], r)
        out[k] = space.weights[inside].sum() + f * space.weights[shell].sum()
    return out


def pair_ball_masses(space: MMSpace, pairs) -> np.ndarray:
    """Vectorised ``pair_ball(space, x, y).mass`` over an ``(m, 2)`` array."""
    pairs = np.ascontiguousarray(np.asarray(pairs, dtype=np.int64).reshape(-1, 2))
    if len(pairs) and np.any(pairs[:, 0] == pairs[:, 1]):
        k = int(np.flatnonzero(pairs[:, 0] == pairs[:, 1])[0])
        raise SpaceError("pair ball needs distinct points", index=k)
    if space.has_coords:
        return kernels.pair_ball_masses(space.coords, space.weights, *space.index.args(),
                                        pairs, space.shell_mode, SHELL_RTOL)
    D = space.metric.matrix
    f = _shell_factor(space)
    out = np.empty(len(pairs))
    for k, (x, y) in enumerate(pairs):
        r = D[x, y]
        ix, sx = _membership(D[x], r)
        iy, sy = _membership(D[y], r)
        inside = ix | iy
        shell = (sx | sy) & ~inside
        out[k] = space.weights[inside].sum() + f * space.weights[shell].sum()
    return out


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------

def _grid(x0, y0, x1, y1, nx, ny):
    hx, hy = (x1 - x0) / nx, (y1 - y0) / ny
    xs = x0 + (np.arange(nx) + 0.5) * hx
    ys = y0 + (np.arange(ny) + 0.5) * hy
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    return np.column_stack([X.ravel(), Y.ravel()]), hx


def square(n: int, side: float = 1.0, metric="euclidean", shell="half") -> MMSpace:
    """``n x n`` cell-centre grid on ``[0, side]^2`` with uniform cell masses."""
    _check_res(n)
    pts, h = _grid(0.0, 0.0, side, side, n, n)
    return build_space(pts, metric, area=side * side, pitch=h, shell=shell,
                       meta={"generator": f"square({n})", "region": ("rect", 0.0, 0.0, side, side)})


def rectangle(nx: int, ny: int, width: float, height: float, metric="euclidean") -> MMSpace:
    _check_res(min(nx, ny))
    pts, h = _grid(0.0, 0.0, width, height, nx, ny)
    if not math.isclose(h, height / ny, rel_tol=1e-12):
        raise SpaceError("rectangle grid must have square cells")
    return build_space(pts, metric, area=width * height, pitch=h,
                       meta={"generator": f"rectangle({nx},{ny},{width},{height})",
                             "region": ("rect", 0.0, 0.0, width, height)})


def _circle(c, r: float, h: float) -> np.ndarray:
    k = max(8, int(math.ceil(2 * math.pi * r / h)))
    a = 2 * math.pi * np.arange(k) / k
    return np.column_stack([c[0] + r * np.cos(a), c[1] + r * np.sin(a)])


def _with_circles(interior: np.ndarray, circles: dict, h: float, area: float):
    """Stack interior points and boundary circle samples; circle samples carry
    half a cell of mass, and masses are rescaled to the exact ``area``."""
    pts = [interior]
    labels = {}
    k = len(interior)
    for name, P in circles.items():
        labels[name] = np.arange(k, k + len(P))
        k += len(P)
        pts.append(P)
    w = np.full(k, h * h)
    w[len(interior):] *= 0.5
    return np.vstack(pts), w * (area / w.sum()), labels


def annulus(r: float, R: float, n: int, metric="euclidean") -> MMSpace:
    """Samples of ``r <= |p| <= R``: cell centres of an ``n x n`` grid on
    ``[-R, R]^2`` at least half a pitch inside, plus points spaced about one
    pitch on both circles, labelled ``inner`` and ``outer``.
    """
    _check_res(n)
    if not 0 < r < R:
        raise SpaceError("annulus needs 0 < r < R")
    pts, h = _grid(-R, -R, R, R, n, n)
    rad = np.hypot(pts[:, 0], pts[:, 1])
    pts = pts[(rad > r + 0.5 * h) & (rad < R - 0.5 * h)]
    area = math.pi * (R * R - r * r)
    P, w, boundary = _with_circles(pts, {"inner": _circle((0, 0), r, h), "outer": _circle((0, 0), R, h)},
                                   h, area)
    return build_space(P, metric, w, pitch=h, boundary=boundary,
                       meta={"generator": f"annulus({r},{R},{n})", "region": ("annulus", r, R)})


def circle_domain_space(disks, n: int, outer=None, metric="euclidean") -> MMSpace:
    """Samples of a circle domain.

    ``disks`` is a sequence of ``((x, y), r)``; ``outer`` is ``((x, y), R)`` or
    ``None`` (a bounding disk is then chosen around the disks). Cell centres
    of an ``n x n`` grid at least half a pitch from every circle are combined
    with points spaced about one pitch on each circle; the circle of disk
    ``i`` is labelled ``A{i+1}``, the bounding circle ``outer``.
    """
    _check_res(n)
    disks = [(np.asarray(z, float), float(r)) for z, r in disks]
    for i, (zi, ri) in enumerate(disks):
        if ri <= 0:
            raise SpaceError(f"disk {i} has nonpositive radius", index=i)
        for j in range(i):
            zj, rj = disks[j]
            if math.hypot(*(zi - zj)) <= ri + rj:
                raise SpaceError(f"disks {j} and {i} overlap", index=(j, i))
    if outer is None:
        zs = np.array([z for z, _ in disks]) if disks else np.zeros((1, 2))
        c = zs.mean(axis=0)
        R = max([math.hypot(*(z - c)) + r for z, r in disks] + [1.0]) * 1.5
        outer = (c, R)
    c0, R = np.asarray(outer[0], float), float(outer[1])
    for i, (zi, ri) in enumerate(disks):
        if math.hypot(*(zi - c0)) + ri >= R:
            raise SpaceError(f"disk {i} not inside the outer disk", index=i)
    pts, h = _grid(c0[0] - R, c0[1] - R, c0[0] + R, c0[1] + R, n, n)
    keep = np.hypot(*(pts - c0).T) < R - 0.5 * h
    circles = {}
    for i, (zi, ri) in enumerate(disks):
        keep &= np.hypot(*(pts - zi).T) > ri + 0.5 * h
        P = _circle(zi, ri, h)
        # drop circle samples that sit inside another disk's clearance
        ok = np.hypot(*(P - c0).T) < R - 0.5 * h
        for k, (zk, rk) in enumerate(disks):
            if k != i:
                ok &= np.hypot(*(P - zk).T) > rk + 0.5 * h
        circles[f"A{i + 1}"] = P[ok]
    P = _circle(c0, R, h)
    ok = np.ones(len(P), dtype=bool)
    for zk, rk in disks:
        ok &= np.hypot(*(P - zk).T) > rk + 0.5 * h
    circles["outer"] = P[ok]
    area = math.pi * R * R - sum(math.pi * r * r for _, r in disks)
    P, w, boundary = _with_circles(pts[keep], circles, h, area)
    return build_space(P, metric, w, pitch=h, boundary=boundary,
                       meta={"generator": "circle_domain", "region": ("disk", *c0, R),
                             "disks": [(z.tolist(), r) for z, r in disks]})


def weighted(base: MMSpace, density: Callable[[np.ndarray], float]) -> MMSpace:
    w = base.weights * np.asarray([density(p) for p in base.coords], dtype=float)
    if np.any(w < 0):
        raise SpaceError("density produced a negative weight", index=int(np.flatnonzero(w < 0)[0]))
    return MMSpace(base.coords, w, base.metric, base.boundary, base.pitch, base.shell,
                   {**base.meta, "weighted": True})


def _check_res(n: int) -> None:
    if n < 8:
        raise SpaceError(f"resolution must be at least 8, got {n}")


def step_density(x: np.ndarray) -> float:
    """Heavy right half: 4 for ``x > 1/2``, 1 otherwise."""
    return 4.0 if x[0] > 0.5 else 1.0


DENSITIES = {
    "step": step_density,
    "radial2": lambda p: float(p[0] ** 2 + p[1] ** 2),
}


def parse_generator(text: str) -> MMSpace:
    """Build a space from strings like ``square(32)``, ``annulus(1,2,64)``,
    ``snowflake(1/2):square(32)`` or ``weighted(step):square(32)``."""
    text = text.replace(" ", "")
    m = re.fullmatch(r"(\w+)\(([^)]*)\):(.+)", text)
    if m:
        head, arg, rest = m.groups()
        base = parse_generator(rest)
        if head == "snowflake":
            return base.snowflake(eval_number(arg))
        if head == "weighted":
            if arg not in DENSITIES:
                raise SpaceError(f"unknown density {arg!r}; choose from {sorted(DENSITIES)}")
            return weighted(base, DENSITIES[arg])
        raise SpaceError(f"unknown modifier {head!r}")
    m = re.fullmatch(r"(\w+)\(([^)]*)\)", text)
    if not m:
        raise SpaceError(f"cannot parse generator {text!r}")
    name, args = m.group(1), [eval_number(a) for a in m.group(2).split(",") if a]
    if name == "square":
        return square(int(args[0]), *(args[1:]))
    if name == "rectangle":
        return rectangle(int(args[0]), int(args[1]), args[2], args[3])
    if name == "annulus":
        return annulus(args[0], args[1], int(args[2]))
    raise SpaceError(f"unknown generator {name!r}")


def generate(spec: str | Mapping) -> MMSpace:
    """Generator entry point accepting a string or a mapping.

    Mapping form: ``{"kind": "circle_domain", "disks": [...], "n": 64,
    "outer": [[x, y], R]}``; other kinds mirror :func:`parse_generator`.
    """
    if isinstance(spec, str):
        return parse_generator(spec)
    kind = spec["kind"]
    if kind == "square":
        return square(int(spec["n"]), float(spec.get("side", 1.0)))
    if kind == "annulus":
        return annulus(float(spec["r"]), float(spec["R"]), int(spec["n"]))
    if kind == "circle_domain":
        disks = [(d["z"], d["r"]) if isinstance(d, Mapping) else (d[0], d[1]) for d in spec["disks"]]
        outer = spec.get("outer")
        if isinstance(outer, Mapping):
            outer = (outer["z"], outer["r"])
        return circle_domain_space(disks, int(spec["n"]), outer)
    if kind == "weighted":
        return weighted(generate(spec["base"]), DENSITIES[spec["density"]])
    raise SpaceError(f"unknown generator kind {kind!r}")


def pairs_from(ids: Iterable[int]) -> np.ndarray:
    ids = np.asarray(list(ids), dtype=np.int64)
    i, j = np.triu_indices(len(ids), k=1)
    return np.column_stack([ids[i], ids[j]])
