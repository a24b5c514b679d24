"""Verification reports.

Every report states a claim of the form ``lhs <= rhs``; lower-bound
inequalities are oriented so that this holds. ``margin`` is the relative
slack ``1 - lhs / rhs`` (positive when the claim holds).
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from importlib import resources

STATUSES = ("pass", "fail", "skipped")


@dataclass
class VerificationReport:
    inequality: str
    lhs: float
    rhs: float
    margin: float
    witness: object
    status: str
    constants: dict = field(default_factory=dict)
    samples: dict = field(default_factory=dict)
    note: str = ""

    @property
    def passed(self) -> bool:
        return self.status == "pass"

    def to_json(self) -> dict:
        d = asdict(self)
        for k in ("lhs", "rhs", "margin"):
            d[k] = _finite(d[k])
        d["witness"] = _plain(d["witness"])
        d["constants"] = {k: _finite(v) if isinstance(v, float) else _plain(v)
                          for k, v in d["constants"].items()}
        d["samples"] = _plain(d["samples"])
        return d


def _finite(x):
    if x is None:
        return None
    x = float(x)
    if math.isfinite(x):
        return x
    return "inf" if x > 0 else ("-inf" if x < 0 else "nan")


def _plain(obj):
    import numpy as np

    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _finite(float(obj))
    return obj


def relative_margin(lhs: float, rhs: float) -> float:
    if rhs > 0:
        return 1.0 - lhs / rhs
    if rhs == 0:
        return 0.0 if lhs <= 0 else -math.inf
    return -math.inf


def compare(name: str, lhs: float, rhs: float, witness=None, constants=None,
            samples=None, note: str = "", rtol: float = 1e-12) -> VerificationReport:
    """Report for ``lhs <= rhs`` with a relative round-off allowance."""
    ok = lhs <= rhs + rtol * abs(rhs)
    return VerificationReport(name, float(lhs), float(rhs), relative_margin(lhs, rhs), witness,
                              "pass" if ok else "fail", dict(constants or {}), dict(samples or {}),
                              note)


def skipped(name: str, reason: str, constants=None, samples=None) -> VerificationReport:
    return VerificationReport(name, math.nan, math.nan, math.nan, None, "skipped",
                              dict(constants or {}), dict(samples or {}), reason)


def worst(name: str, lhs, rhs, witnesses, constants=None, skipped_count: int = 0,
          note: str = "", rtol: float = 1e-12) -> VerificationReport:
    """Summarise many ``lhs <= rhs`` samples by the one with least margin."""
    import numpy as np

    lhs = np.asarray(lhs, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    if lhs.size == 0:
        return skipped(name, note or "no samples inside the hypothesis", constants,
                       {"checked": 0, "skipped": skipped_count})
    with np.errstate(divide="ignore", invalid="ignore"):
        m = np.where(rhs > 0, 1.0 - lhs / rhs, np.where(lhs <= 0, 0.0, -np.inf))
    k = int(np.argmin(m))
    failed = int(np.sum(lhs > rhs + rtol * np.abs(rhs)))
    samples = {"checked": int(lhs.size), "failed": failed, "skipped": int(skipped_count)}
    return compare(name, float(lhs[k]), float(rhs[k]), witnesses[k], constants, samples, note, rtol)


def schema() -> dict:
    return json.loads(resources.files("wmdm").joinpath("schemas/report.schema.json").read_text())


def dump_reports(reports, path) -> None:
    with open(path, "w") as fh:
        json.dump([r.to_json() for r in reports], fh, indent=2, sort_keys=True)
        fh.write("\n")
