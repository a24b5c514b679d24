"""Reading and writing spaces, domains, maps, families and report bundles.

Every loader raises :class:`InputError` naming the file and, where known, the
line or JSON field at fault. Writers are deterministic: JSON keys are sorted
and floats use ``repr`` precision, so a fixed seed gives identical bytes.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .mmspace import MMSpace, SpaceError, build_space, generate
from .reports import _plain

__all__ = [
    "InputError",
    "load_json",
    "space_from_json",
    "read_space",
    "write_json",
    "write_space",
    "write_matrix_csv",
    "write_rows_csv",
    "write_reports",
    "read_domain",
    "read_map",
    "read_families",
    "eta_svg",
]


class InputError(SpaceError):
    """Malformed input file. ``where`` is ``path:line:col`` or ``path:field``."""

    def __init__(self, message: str, where: str = ""):
        super().__init__(f"{where}: {message}" if where else message)
        self.where = where


def load_json(path) -> object:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InputError(f"cannot read file ({exc.strerror})", str(path)) from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(exc.msg, f"{path}:{exc.lineno}:{exc.colno}") from exc


def _field(obj, key, where, kind=None):
    if not isinstance(obj, dict):
        raise InputError("expected a JSON object", where)
    if key not in obj:
        raise InputError(f"missing field {key!r}", where)
    v = obj[key]
    if kind is not None and not isinstance(v, kind):
        raise InputError(f"field has the wrong type ({type(v).__name__})", f"{where}.{key}")
    return v


def space_from_json(obj, where: str = "space") -> MMSpace:
    """Inverse of :meth:`MMSpace.to_json`; also accepts ``{"generator": ...}``."""
    if isinstance(obj, dict) and "generator" in obj:
        try:
            return generate(obj["generator"])
        except (SpaceError, KeyError, TypeError, ValueError) as exc:
            raise InputError(str(exc), f"{where}.generator") from exc
    metric = _field(obj, "metric", where, dict)
    kind = _field(metric, "kind", f"{where}.metric", str)
    if kind == "euclidean":
        m = "euclidean"
    elif kind == "snowflake":
        m = ("snowflake", float(_field(metric, "theta", f"{where}.metric", (int, float))))
    elif kind == "matrix":
        m = _field(metric, "matrix", f"{where}.metric", list)
    else:
        raise InputError(f"unknown metric kind {kind!r}", f"{where}.metric.kind")
    points = obj.get("points")
    weights = _field(obj, "weights", where)
    try:
        return build_space(points, m, weights, pitch=obj.get("pitch"),
                           boundary=obj.get("boundary") or {}, shell=obj.get("shell", "half"), meta=obj.get("meta"))
    except SpaceError as exc:
        sub = "weights" if "weight" in str(exc) else ("boundary" if "boundary" in str(exc) else "points")
        if exc.index is not None and not isinstance(exc.index, (tuple, str)):
            sub += f"[{exc.index}]"
        raise InputError(str(exc), f"{where}.{sub}") from exc
    except (TypeError, ValueError) as exc:
        raise InputError(str(exc), where) from exc


def read_space(path) -> MMSpace:
    return space_from_json(load_json(path), str(path))


def write_json(obj, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(_plain(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def write_space(space: MMSpace, path) -> Path:
    return write_json(space.to_json(), path)


def write_matrix_csv(Q: np.ndarray, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        for row in np.asarray(Q, float):
            w.writerow([repr(float(v)) for v in row])
    return path


def write_rows_csv(header, rows, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    return path


REPORT_COLUMNS = ("inequality", "status", "lhs", "rhs", "margin", "note")


def write_reports(reports, stem, formats=("json",)) -> list[Path]:
    """``stem.json`` (schema form) and/or ``stem.csv`` (one row per report)."""
    stem = Path(stem)
    out = []
    if "json" in formats:
        out.append(write_json([r.to_json() for r in reports], stem.with_suffix(".json")))
    if "csv" in formats:
        rows = [[r.to_json()[k] for k in REPORT_COLUMNS] for r in reports]
        out.append(write_rows_csv(REPORT_COLUMNS, rows, stem.with_suffix(".csv")))
    return out


def read_domain(path):
    from .circle_domain import CircleDomain, DomainError

    obj = load_json(path)
    try:
        return CircleDomain.from_json(obj)
    except DomainError as exc:
        sub = "disks" if exc.index is None else f"disks[{exc.index}]"
        raise InputError(str(exc), f"{path}:{sub}") from exc
    except (TypeError, ValueError) as exc:
        raise InputError(str(exc), f"{path}:disks") from exc


def read_map(path):
    """``{"source": space, "target": space, "f": [...]}``; ``f`` defaults to the
    identity and either space may be ``{"generator": ...}``."""
    from .qs_check import DiscreteMap

    obj = load_json(path)
    src = space_from_json(_field(obj, "source", str(path)), f"{path}:source")
    tgt = space_from_json(_field(obj, "target", str(path)), f"{path}:target")
    f = obj.get("f", list(range(src.n)))
    try:
        return DiscreteMap(src, tgt, f)
    except SpaceError as exc:
        sub = "f" if exc.index is None else f"f[{exc.index}]"
        raise InputError(str(exc), f"{path}:{sub}") from exc


def read_families(path, space: MMSpace) -> dict:
    """``{"families": {name: {"A": [...], "B": [...], "mask": [...]}}}``.
    ``A``/``B`` may also name boundary components of ``space``."""
    from .modulus import PathFamily

    obj = load_json(path)
    fams = _field(obj, "families", str(path), dict)
    out = {}
    for name in sorted(fams):
        spec = dict(fams[name])
        where = f"{path}:families.{name}"
        for key in ("A", "B"):
            v = spec.get(key)
            if isinstance(v, str):
                if v not in space.boundary:
                    raise InputError(f"unknown boundary component {v!r}", f"{where}.{key}")
                spec[key] = np.asarray(space.boundary[v]).tolist()
        try:
            out[name] = PathFamily.from_json(spec, space.n)
        except (KeyError, SpaceError, IndexError) as exc:
            raise InputError(str(exc), where) from exc
    return out


def eta_svg(envelope, path, reference_power: float | None = None) -> Path:
    """Log-log plot of the observed ratios and their running maximum."""
    try:
        import matplotlib
    except ImportError as exc:
        raise InputError("svg output needs matplotlib (install the 'plot' extra)", "--format") from exc

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "wmdm"
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.loglog(envelope.s, envelope.observed, ",", color="0.6", label="observed")
    ax.loglog(envelope.s, envelope.envelope, "-", color="k", lw=1, label="envelope")
    if reference_power is not None:
        ax.loglog(envelope.s, envelope.s ** reference_power, "--", lw=1, label=f"s^{reference_power:g}")
    ax.set_xlabel("s")
    ax.set_ylabel("eta")
    ax.legend(loc="lower right")
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def out_dir(path) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p

