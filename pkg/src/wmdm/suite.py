"""Measured constants and the full inequality battery on one space."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import chain_metric as cm
from . import layers, regularity
from .mmspace import MMSpace, SpaceError
from .reports import skipped

log = logging.getLogger(__name__)

CONSTANT_NAMES = ("C_W", "C_D", "lam", "C_S")


@dataclass
class SuiteResult:
    ledger: cm.ConstantLedger
    regularity: dict
    reports: list
    layer_runs: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.status != "fail" for r in self.reports)


def measure_constants(space: MMSpace, Q: np.ndarray, *, pairs: int = 2000, seed: int = 0):
    """Constants measured on ``space`` with the all-pairs chain metric ``Q``."""
    sample = cm.sample_pairs(space, pairs, seed)
    dd = regularity.doubling_constant(space)
    llc = regularity.llc_check(space)
    C_W = cm.wmdm_constant(space, Q, sample).value
    rev = cm.reverse_constant(space, Q, sample)
    ledger = cm.ConstantLedger(C_W, dd.C_D, max(1.0, llc.lam), rev.C_S)
    reg = {"C_D": dd.C_D, "C_D_witness": dd.worst_case.get("C_D"), "lambda": llc.lam,
           "lambda_inner": llc.lam_inner, "lambda_outer": llc.lam_outer}
    return ledger, reg, rev.r_x


def _nearest(space: MMSpace, p) -> int:
    return int(np.argmin(np.hypot(*(space.coords - np.asarray(p, float)).T)))


def inequality_suite(space: MMSpace, *, pairs: int = 2000, seed: int = 0, overrides=None,
                     layer_pairs: int = 2, delta: float | None = None) -> SuiteResult:
    """Ball comparison, separating-layer and connecting-continuum reports with
    constants measured on the same space (``overrides`` replaces any of
    ``C_W``, ``C_D``, ``lam``, ``C_S``)."""
    delta = cm.finest_delta(space) if delta is None else delta
    g = cm.chain_graph(space, delta)
    Q = cm.q_matrix(g)
    ledger, reg, r_x = measure_constants(space, Q, pairs=pairs, seed=seed)
    for k, v in (overrides or {}).items():
        if k not in CONSTANT_NAMES:
            raise SpaceError(f"unknown constant {k!r}")
        setattr(ledger, k, float(v))
    consts = {"C_W": ledger.C_W, "C_S": ledger.C_S, "C_D": ledger.C_D, "lam": ledger.lam}
    reports = regularity.ball_comparison_check(space, Q, consts, r_x=r_x, seed=seed)
    runs = []
    if space.has_coords and space.pitch:
        snow = space.metric.kind == "snowflake"
        lo, hi = space.coords.min(axis=0), space.coords.max(axis=0)
        mid = 0.5 * (lo + hi)
        x = _nearest(space, mid)
        r = float(space.from_base(0.02 * float(np.max(hi - lo))))
        try:
            dec = layers.separating_layer(space, x, r, constants=consts, q=Q, check_region=not snow)
            reports.extend(dec.reports)
            runs.append(dec)
        except SpaceError as exc:
            reports.append(skipped("separating_layer", str(exc), consts))
        h = space.pitch
        offsets = [(h, h), (-h, 2 * h), (2 * h, -h)] if snow else [(2 * h, 3 * h), (-3 * h, 2 * h), (3 * h, -2 * h)]
        for off in offsets[:layer_pairs]:
            y = _nearest(space, space.coords[x] + np.asarray(off))
            if y == x:
                continue
            try:
                res = layers.connecting_continuum(space, x, y, Q, consts, check_region=not snow)
            except SpaceError as exc:
                reports.append(skipped("connecting_continuum", str(exc), consts, {"pair": [x, y]}))
                continue
            reports.extend(res.reports)
            runs.append(res)
    return SuiteResult(ledger, reg, reports, runs)


@dataclass
class CircleSuiteResult:
    constants: dict
    alpha: float
    reports: list
    connectors: dict

    @property
    def passed(self) -> bool:
        return all(r.status != "fail" for r in self.reports)


HARAKKA_ALPHAS = (0.05, 0.2, 0.5, 1.0)


def circle_suite(dom, constants=None, *, seed: int = 0, continua: int = 10, connectors: int = 100,
                 alpha_T: float = 0.3, n: int = 48, separation: bool = True, tol: float = 0.02,
                 alphas=HARAKKA_ALPHAS):
    """Free-radius bound, connector paths, key estimates and (optionally) the
    separation check on one circle domain.

    The free-radius bound is checked at the domain's own separation constant
    when it is representable as a float, and at each of ``alphas``.
    """
    from . import circle_domain as cd
    from .reports import compare

    C = dict(constants) if constants else cd.measured_constants(dom, seed=seed)
    alpha = cd.alpha_constant(C["C_W"], C["C_D"], C["C_X"], dom.M)
    rng = np.random.default_rng(seed)
    reports = []
    for a in ([alpha] if alpha > 0 else []) + list(alphas):
        reports.extend(cd.harakka_check(dom, a))
    pairs = [cd.random_continua(dom, rng) for _ in range(continua)]
    built = failed = 0
    witness = None
    per = max(1, math.ceil(connectors / max(1, len(pairs))))
    for E1, E2 in pairs:
        zc = cd.find_center(E1, E2)
        if zc is None:
            continue
        z0, r0 = zc
        for _ in range(per):
            if built + failed >= connectors:
                break
            T = cd.random_T(dom, alpha_T, rng)
            try:
                p = cd.connector_path(dom, T, z0, r0, E1, E2)
                ok = p.injective and bool(np.all(dom.contains(p.polyline(), margin=-1e-9)))
            except cd.DomainError as exc:
                ok, witness = False, str(exc)
            built += ok
            failed += not ok
    reports.append(compare("connector", failed, 0, witness=witness,
                           samples={"checked": built + failed, "failed": failed}))
    for E1, E2 in pairs:
        reports.append(cd.key_estimate_check(dom, E1, E2, C, n=n, tol=tol))
    if separation:
        reports.extend(cd.separation_check(dom, C, n=n, tol=tol))
    return CircleSuiteResult(C, alpha, reports, {"built": built, "failed": failed})


@dataclass
class QSSuiteResult:
    qs: object
    envelope: object
    reports: list

    @property
    def passed(self) -> bool:
        return all(r.status != "fail" for r in self.reports)


def qs_suite(fmap, *, seed: int = 0, gate=0.1, t_max=None, count: int = 100_000, constants=None):
    """Weak quasisymmetry constant, stratified ratio envelope and, for grid
    sources, the annulus density bound at the centre."""
    from . import qs_check as qs

    rep, reports = qs.qs_reports(fmap, gate=gate, t_max=t_max, seed=seed)
    env = qs.eta_estimate(fmap, count=count, seed=seed, stratified=fmap.source.has_coords)
    src = fmap.source
    if src.has_coords and src.pitch and src.meta.get("region", ("",))[0] == "rect":
        g = cm.chain_graph(src, cm.finest_delta(src))
        Q = cm.q_matrix(g)
        if constants is None:
            ledger, _, _ = measure_constants(src, Q, seed=seed)
            constants = {"C_W": ledger.C_W, "C_S": ledger.C_S, "C_D": ledger.C_D}
        lo, hi = src.coords.min(axis=0), src.coords.max(axis=0)
        ext = float(np.max(hi - lo))
        c = _nearest(src, 0.5 * (lo + hi))
        try:
            lamA, B = (float(src.from_base(f * ext)) for f in (0.03, 0.45))
            ab = qs.annulus_density_bound(src, src.with_metric(Q), c, lamA, B, constants)
            reports.extend(ab.reports)
        except SpaceError as exc:
            log.info("annulus density bound skipped: %s", exc)
    return QSSuiteResult(rep, env, reports)
