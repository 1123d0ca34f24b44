"""Pass/fail records produced by every verification check."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Any


class KernelMismatch(ValueError):
    """A closed-form check was requested for a kernel it does not apply to."""


class PreconditionViolated(ValueError):
    pass


@dataclass
class OracleReport:
    check: str
    residual: float | None
    tolerance: float | None
    passed: bool
    skipped: bool = False
    message: str = ""
    context: dict[str, Any] = field(default_factory=dict)

    @classmethod
    def from_residual(cls, check, residual, tolerance, message="", **context):
        return cls(check, float(residual), float(tolerance),
                   bool(residual <= tolerance), message=message, context=context)

    @classmethod
    def skip(cls, check, reason, **context):
        return cls(check, None, None, passed=False, skipped=True, message=reason, context=context)

    @property
    def status(self) -> str:
        if self.skipped:
            return "skipped"
        return "pass" if self.passed else "fail"

    def to_dict(self) -> dict:
        out = asdict(self)
        out["status"] = self.status
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "OracleReport":
        data = dict(data)
        data.pop("status", None)
        return cls(**data)

    def line(self) -> str:
        res = "-" if self.residual is None else f"{self.residual:.3e}"
        tol = "-" if self.tolerance is None else f"{self.tolerance:.1e}"
        text = f"[{self.status.upper():7s}] {self.check}: residual={res} tol={tol}"
        return text + (f"  ({self.message})" if self.message else "")


def _json_default(obj):
    if hasattr(obj, "tolist"):
        return obj.tolist()
    if isinstance(obj, (set, frozenset)):
        return sorted(obj)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _encode_floats(obj):
    # 17 significant digits survive a float round trip; non-finite values
    # become strings so the file stays strict JSON
    if isinstance(obj, float):
        if not math.isfinite(obj):
            return repr(obj)
        return float(f"{obj:.17g}")
    if isinstance(obj, dict):
        return {k: _encode_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_encode_floats(v) for v in obj]
    return obj


def dump_reports(reports, path) -> None:
    payload = _encode_floats([r.to_dict() for r in reports])
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, default=_json_default)
        fh.write("\n")


def load_reports(path) -> list[OracleReport]:
    with open(path) as fh:
        return [OracleReport.from_dict(d) for d in json.load(fh)]
