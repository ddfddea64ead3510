"""Check records shared by every verification routine."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Any, Iterable


@dataclass
class Check:
    name: str
    lhs: float
    rhs: float
    tolerance: float
    passed: bool
    note: str = ""

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pass"] = d.pop("passed")
        for k in ("lhs", "rhs", "tolerance"):
            if not math.isfinite(d[k]):
                d[k] = None
                d["pass"] = False
        return d

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] {self.name}: lhs={self.lhs:.6g} rhs={self.rhs:.6g} tol={self.tolerance:.1e}" + (
            f" ({self.note})" if self.note else ""
        )


def _real(x) -> float:
    x = complex(x)
    return x.real if x.imag == 0 else abs(x)


def identity_check(name: str, lhs, rhs, tol: float, relative: bool = False, note: str = "") -> Check:
    """``|lhs - rhs| <= tol`` (times ``1 + |lhs|`` when ``relative``)."""
    diff = abs(complex(lhs) - complex(rhs))
    scale = 1 + abs(complex(lhs)) if relative else 1
    ok = bool(math.isfinite(diff) and diff <= tol * scale)
    return Check(name, _real(lhs), _real(rhs), tol, ok, note)


def residual_check(name: str, residual: float, tol: float, note: str = "") -> Check:
    residual = float(residual)
    return Check(name, residual, 0.0, tol, bool(math.isfinite(residual) and residual <= tol), note)


def bound_check(name: str, value: float, bound: float, slack: float = 0.0, note: str = "") -> Check:
    """``value <= bound + slack``."""
    value, bound = float(value), float(bound)
    ok = bool(math.isfinite(value) and math.isfinite(bound) and value <= bound + slack)
    return Check(name, value, bound, slack, ok, note)


def floor_check(name: str, value: float, floor: float, note: str = "") -> Check:
    """``value > floor``."""
    value = float(value)
    return Check(name, value, floor, floor, bool(math.isfinite(value) and value > floor), note)


def exceed_check(name: str, value: float, threshold: float, note: str = "") -> Check:
    """Witness check: ``value > threshold``."""
    value = float(value)
    return Check(name, value, threshold, threshold, bool(math.isfinite(value) and value > threshold), note)


@dataclass
class CheckReport:
    """A list of checks plus free-form numeric data."""

    checks: list[Check] = field(default_factory=list)
    data: dict[str, Any] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, check: Check) -> Check:
        self.checks.append(check)
        return check

    def extend(self, checks: Iterable[Check]):
        self.checks.extend(checks)

    def worst(self) -> float:
        return max((c.lhs for c in self.checks), default=0.0)

    def __iter__(self):
        return iter(self.checks)
