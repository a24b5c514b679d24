"""Command-line pipeline.

    wmdm gen     --generator "square(32)" --out run/
    wmdm qmetric --input run/space.json --format csv
    wmdm verify  --input run/space.json --set C_W=0.01
    wmdm modulus --generator "annulus(1,2,48)"
    wmdm circle  --input domain.json
    wmdm qs      --input map.json --format svg
    wmdm all     --generator "snowflake(1/2):square(32)"

Exit status: 0 when every report passes (or is skipped), 1 when one fails,
2 on malformed input.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import chain_metric as cm
from . import io, suite
from .mmspace import SpaceError, generate
from .reports import compare

log = logging.getLogger("wmdm")

COMMANDS = ("gen", "qmetric", "verify", "modulus", "circle", "qs", "all")
FORMATS = ("json", "csv", "svg")


class Failed(Exception):
    """At least one report failed; carries the report files."""


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wmdm", description=__doc__.split("\n\n")[0])
    p.add_argument("--version", action="version", version=f"wmdm {__version__}")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--input", help="space, domain (circle) or map (qs) JSON file")
    p.add_argument("--generator", help='space generator, e.g. "square(32)" or "snowflake(1/2):square(32)"')
    p.add_argument("--delta-schedule", help="comma separated, strictly decreasing chain scales")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--samples", type=int, default=2000, help="pairs for constant estimates (default 2000)")
    p.add_argument("--out", default="wmdm-out", help="output directory (default wmdm-out)")
    p.add_argument("--format", action="append", choices=FORMATS,
                   help="output formats, repeatable (default json)")
    p.add_argument("--tol", type=float, default=0.02, help="modulus duality-gap tolerance (default 0.02)")
    p.add_argument("--families", help="path family JSON for modulus")
    p.add_argument("--set", action="append", default=[], metavar="NAME=VALUE",
                   help="override a measured constant (C_W, C_D, lam, C_S, C_X) or t_max")
    p.add_argument("--gate", type=float, default=0.1, help="weak quasisymmetry gate (default 0.1)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _overrides(items) -> dict:
    out = {}
    for it in items:
        name, sep, val = it.partition("=")
        if not sep:
            raise io.InputError(f"expected NAME=VALUE, got {it!r}", "--set")
        try:
            out[name.strip()] = float(val)
        except ValueError as exc:
            raise io.InputError(f"not a number: {val!r}", f"--set {name}") from exc
    return out


def _schedule(text):
    if not text:
        return None
    try:
        s = [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise io.InputError(str(exc), "--delta-schedule") from exc
    if not s or any(b >= a for a, b in zip(s, s[1:])):
        raise io.InputError("schedule must be strictly decreasing", "--delta-schedule")
    return s


def _space(args):
    if args.input:
        return io.read_space(args.input)
    if args.generator:
        try:
            return generate(args.generator)
        except SpaceError as exc:
            raise io.InputError(str(exc), "--generator") from exc
    raise io.InputError("give --input or --generator")


def _finish(reports, stem, fmts) -> list:
    paths = io.write_reports(reports, stem, fmts)
    bad = [r for r in reports if r.status == "fail"]
    for r in bad:
        log.error("FAIL %s: lhs=%.6g rhs=%.6g", r.inequality, r.lhs, r.rhs)
    if bad:
        raise Failed(", ".join(map(str, paths)))
    return paths


def cmd_gen(args, out: Path):
    space = _space(args)
    io.write_space(space, out / "space.json")
    print(f"wrote {out / 'space.json'} ({space.n} points)")
    return space


def _rx_summary(r_x) -> dict:
    v = np.array(list(r_x.values()) if isinstance(r_x, dict) else r_x, float)
    fin = v[np.isfinite(v)]
    return {"points": int(v.size), "finite": int(fin.size),
            "min": float(fin.min()) if fin.size else None}


def cmd_qmetric(args, out: Path, space=None):
    space = space or _space(args)
    sched = _schedule(args.delta_schedule) or cm.default_schedule(space)
    fine = cm.finest_delta(space)
    delta = [d for d in sched if d >= fine * (1 - 1e-9)]
    if not delta:
        raise io.InputError(f"no scale reaches the resolution floor {fine:g}", "--delta-schedule")
    Qs = [cm.q_matrix(cm.chain_graph(space, d)) for d in delta]
    Q = Qs[-1]
    pairs = cm.sample_pairs(space, args.samples, args.seed)
    vals = np.array([q[pairs[:, 0], pairs[:, 1]] for q in Qs])
    mono = bool(np.all(vals[1:] >= vals[:-1] * (1 - 1e-12)))
    ledger, reg, r_x = suite.measure_constants(space, Q, pairs=args.samples, seed=args.seed)
    fmts = args.format
    if "csv" in fmts:
        io.write_matrix_csv(Q, out / "q.csv")
    if "json" in fmts:
        io.write_json({"delta": delta[-1], "q": Q}, out / "q.json")
    io.write_json({"ledger": ledger.to_json(), "regularity": reg, "r_x": _rx_summary(r_x),
                   "schedule": delta, "monotone": mono}, out / "ledger.json")
    print(f"q at delta={delta[-1]:.6g}: C_W={ledger.C_W:.4g} C_D={ledger.C_D:.4g} "
          f"lambda={ledger.lam:.4g} C_S={ledger.C_S:.4g}")
    rep = compare("delta_monotone", 0.0 if mono else 1.0, 0.0,
                  samples={"pairs": len(pairs), "scales": len(delta)})
    return _finish([rep], out / "qmetric_reports", fmts)


def cmd_verify(args, out: Path, space=None):
    space = space or _space(args)
    over = {k: v for k, v in _overrides(args.set).items() if k in suite.CONSTANT_NAMES}
    res = suite.inequality_suite(space, pairs=args.samples, seed=args.seed, overrides=over)
    io.write_json({"ledger": res.ledger.to_json(), "regularity": res.regularity}, out / "constants.json")
    n_fail = sum(r.status == "fail" for r in res.reports)
    print(f"verify: {len(res.reports)} reports, {n_fail} failed")
    return _finish(res.reports, out / "verify_reports", args.format)


def _default_families(space):
    from .modulus import PathFamily, side_family

    b = space.boundary
    if "inner" in b and "outer" in b:
        return {"inner-outer": PathFamily(b["inner"], b["outer"])}
    if space.meta.get("region", ("",))[0] == "rect":
        return {"left-right": side_family(space)}
    raise io.InputError("no default family for this space; pass --families", "--families")


def cmd_modulus(args, out: Path, space=None):
    from .modulus import admissibility_check, domain_graph, modulus_solve

    space = space or _space(args)
    fams = io.read_families(args.families, space) if args.families else _default_families(space)
    g = domain_graph(space)
    results, reports = {}, []
    for name, fam in fams.items():
        r = modulus_solve(g, fam, args.tol)
        ok, L, path = admissibility_check(g, fam, r.density.rho / np.sqrt(1 - args.tol))
        results[name] = r.to_json()
        reports.append(compare(f"admissible[{name}]", 1.0, L, witness={"path": path}, rtol=1e-9))
        print(f"modulus[{name}] = {r.value:.6g} (lower {r.lower:.6g}, upper {r.upper:.6g})")
        if "csv" in args.format:
            rows = [(i, *map(float, space.coords[i]), float(v)) for i, v in enumerate(r.density.rho)]
            io.write_rows_csv(("id", "x", "y", "rho"), rows, out / f"density_{name}.csv")
    io.write_json(results, out / "modulus.json")
    return _finish(reports, out / "modulus_reports", args.format)


def cmd_circle(args, out: Path):
    if not args.input:
        raise io.InputError("circle needs --input domain.json")
    dom = io.read_domain(args.input)
    over = _overrides(args.set)
    C = None
    if over:
        from .circle_domain import measured_constants

        C = {**measured_constants(dom, seed=args.seed), **{k: over[k] for k in ("C_W", "C_D", "C_X") if k in over}}
    res = suite.circle_suite(dom, C, seed=args.seed, tol=args.tol)
    io.write_json({"constants": res.constants, "alpha": res.alpha, "connectors": res.connectors},
                  out / "circle.json")
    print(f"circle: M={dom.M} alpha={res.alpha:.4g} connectors {res.connectors}")
    return _finish(res.reports, out / "circle_reports", args.format)


def _default_map(space):
    """Identity from the planar model (same points, Euclidean metric) onto ``space``."""
    from .mmspace import Metric, MMSpace
    from .qs_check import DiscreteMap

    base = MMSpace(space.coords, space.weights, Metric(), space.boundary, space.pitch,
                   space.shell, {k: v for k, v in space.meta.items() if k != "theta"})
    return DiscreteMap.identity(base, space)


def cmd_qs(args, out: Path, space=None):
    if args.input and space is None:
        fmap = io.read_map(args.input)
    else:
        fmap = _default_map(space or _space(args))
    over = _overrides(args.set)
    consts = None
    if all(k in over for k in ("C_W", "C_S", "C_D")):
        consts = {k: over[k] for k in ("C_W", "C_S", "C_D")}
    res = suite.qs_suite(fmap, seed=args.seed, gate=args.gate, t_max=over.get("t_max"), constants=consts)
    io.write_json(res.qs.to_json(), out / "qs.json")
    if "csv" in args.format:
        io.write_rows_csv(("s", "eta", "envelope"), res.envelope.rows(), out / "eta.csv")
    if "svg" in args.format:
        io.eta_svg(res.envelope, out / "eta.svg")
    print(f"qs: t={res.qs.t:.6g} over {res.qs.centers} centres")
    return _finish(res.reports, out / "qs_reports", args.format)


def cmd_all(args, out: Path):
    space = cmd_gen(args, out)
    failed = []
    steps = [cmd_qmetric, cmd_verify]
    b = space.boundary
    if ("inner" in b and "outer" in b) or space.meta.get("region", ("",))[0] == "rect" or args.families:
        steps.append(cmd_modulus)
    if space.has_coords:
        steps.append(cmd_qs)
    for step in steps:
        try:
            step(args, out, space)
        except Failed as exc:
            failed.append(str(exc))
    if failed:
        raise Failed("; ".join(failed))


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    args.format = sorted(set(args.format or ["json"]))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    handlers = {"gen": cmd_gen, "qmetric": cmd_qmetric, "verify": cmd_verify, "modulus": cmd_modulus,
                "circle": cmd_circle, "qs": cmd_qs, "all": cmd_all}
    try:
        handlers[args.command](args, out)
    except Failed as exc:
        print(f"failed reports written to {exc}", file=sys.stderr)
        return 1
    except (io.InputError, SpaceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
