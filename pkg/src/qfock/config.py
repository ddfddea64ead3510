"""Run configuration: a YAML document validated into a :class:`RunConfig`.

Example::

    kind: mixed          # or araki-woods
    N: 5
    Q: [[0.5, 0.2], [0.2, -0.3]]     # or: d: 2 plus q: 0.5
    seed: 7
    tolerances: {identity: 1.0e-9}
    params: {order: 10}

For ``kind: araki-woods`` give ``blocks: [{pair: 4.0}, {invariant: 1}]`` and a
scalar ``q``.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Any

import yaml

from .errors import DomainError
from .fock import DEFAULT_BUDGET

KINDS = ("mixed", "araki-woods")
PRECISIONS = ("float", "exact")

DEFAULT_TOLERANCES = {
    "identity": 1e-9,
    "bound_slack": 1e-12,
    "positivity_floor": 1e-12,
    "gram_agreement": 1e-10,
    "adjoint": 1e-9,
    "vacuum": 1e-10,
    "crossing": 1e-9,
    "commutant": 1e-8,
    "trace": 1e-8,
    "structure": 1e-10,
    "ir": 1e-9,
    "modular": 1e-8,
    "centralizer": 1e-8,
    "chain": 1e-9,
    "hypothesis_slack": 1e-10,
    "nontracial": 1e-3,
}

KNOWN_KEYS = {"kind", "d", "dim_R", "N", "Q", "q", "blocks", "seed", "tolerances", "params", "cache", "precision", "budget", "command"}


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending entry."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"field '{field_name}': {message}")
        self.field = field_name


@dataclass
class RunConfig:
    kind: str
    N: int
    d: int
    Q: Any = None  # QMatrix for mixed models
    q: float | None = None
    blocks: list | None = None
    seed: int = 0
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    params: dict = field(default_factory=dict)
    cache: str | None = None
    precision: str = "float"
    budget: int = DEFAULT_BUDGET
    raw: dict = field(default_factory=dict)

    def echo(self) -> dict:
        out = dict(self.raw)
        out.update(kind=self.kind, N=self.N, d=self.d, seed=self.seed, precision=self.precision)
        if self.Q is not None:
            out["Q"] = self.Q.entries.tolist()
        return out


def _int(raw: dict, key: str, default=None, minimum=None) -> int:
    if key not in raw:
        if default is None:
            raise ConfigError(key, "is required")
        return default
    v = raw[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(key, f"must be an integer, got {v!r}")
    if minimum is not None and v < minimum:
        raise ConfigError(key, f"must be >= {minimum}, got {v}")
    return v


def parse_config(raw: dict, overrides: dict | None = None) -> RunConfig:
    """Validate a mapping (already loaded from YAML) into a :class:`RunConfig`."""
    from .qgram import QMatrix

    if not isinstance(raw, dict):
        raise ConfigError("<root>", "config must be a mapping")
    raw = dict(raw)
    for k, v in (overrides or {}).items():
        if v is not None:
            raw[k] = v
    unknown = sorted(set(raw) - KNOWN_KEYS)
    if unknown:
        raise ConfigError(unknown[0], "unknown key")
    kind = raw.get("kind", "mixed")
    if kind not in KINDS:
        raise ConfigError("kind", f"must be one of {KINDS}, got {kind!r}")
    N = _int(raw, "N", minimum=1)
    seed = _int(raw, "seed", 0, minimum=0)
    if seed >= 2**64:
        raise ConfigError("seed", "must fit in 64 bits")
    budget = _int(raw, "budget", DEFAULT_BUDGET, minimum=1)
    precision = raw.get("precision", "float")
    if precision not in PRECISIONS:
        raise ConfigError("precision", f"must be float or exact, got {precision!r}")
    tolerances = dict(DEFAULT_TOLERANCES)
    tol_raw = raw.get("tolerances") or {}
    if not isinstance(tol_raw, dict):
        raise ConfigError("tolerances", "must be a mapping")
    for k, v in tol_raw.items():
        if k not in DEFAULT_TOLERANCES:
            raise ConfigError(f"tolerances.{k}", "unknown tolerance")
        try:
            v = float(v)
        except (TypeError, ValueError):
            raise ConfigError(f"tolerances.{k}", f"must be a number, got {v!r}") from None
        if not v >= 0:
            raise ConfigError(f"tolerances.{k}", f"must be >= 0, got {v}")
        tolerances[k] = v
    params = raw.get("params") or {}
    if not isinstance(params, dict):
        raise ConfigError("params", "must be a mapping")
    cache = raw.get("cache")
    cfg = RunConfig(kind, N, 0, seed=seed, tolerances=tolerances, params=params, cache=cache, precision=precision, budget=budget, raw=raw)

    if kind == "mixed":
        if "blocks" in raw:
            raise ConfigError("blocks", "only valid for kind araki-woods")
        if "Q" in raw:
            Q_raw = raw["Q"]
            if not isinstance(Q_raw, list) or not all(isinstance(r, list) for r in Q_raw):
                raise ConfigError("Q", "must be a list of rows")
            try:
                cfg.Q = QMatrix(Q_raw)
            except DomainError as exc:
                raise ConfigError("Q", str(exc)) from None
            except (TypeError, ValueError, ZeroDivisionError) as exc:
                raise ConfigError("Q", f"unreadable entry ({exc})") from None
            if "d" in raw and raw["d"] != cfg.Q.d:
                raise ConfigError("d", f"is {raw['d']} but Q is {cfg.Q.d}x{cfg.Q.d}")
        elif "q" in raw:
            d = _int(raw, "d", minimum=1)
            try:
                cfg.Q = QMatrix.constant(d, raw["q"])
            except (DomainError, TypeError, ValueError) as exc:
                raise ConfigError("q", str(exc)) from None
        else:
            raise ConfigError("Q", "mixed models need Q (or d and a constant q)")
        cfg.d = cfg.Q.d
        cfg.q = float(cfg.Q.entries[0, 0]) if cfg.Q.is_constant else None
    else:
        if "Q" in raw:
            raise ConfigError("Q", "araki-woods models take a scalar q, not a matrix")
        if "blocks" not in raw:
            raise ConfigError("blocks", "is required for araki-woods models")
        from .arakiwoods import _parse_blocks

        try:
            blocks = _parse_blocks(raw["blocks"])
        except (DomainError, TypeError, ValueError) as exc:
            raise ConfigError("blocks", str(exc)) from None
        cfg.blocks = raw["blocks"]
        cfg.d = sum(2 if k == "pair" else 1 for k, _ in blocks)
        for key in ("d", "dim_R"):
            if key in raw and raw[key] != cfg.d:
                raise ConfigError(key, f"is {raw[key]} but the blocks give {cfg.d}")
        try:
            q = float(raw.get("q", 0.0))
        except (TypeError, ValueError):
            raise ConfigError("q", f"must be a number, got {raw.get('q')!r}") from None
        if not -1 < q < 1:
            raise ConfigError("q", f"must lie in (-1, 1), got {q}")
        cfg.q = q
    return cfg


def load_config(path: str | os.PathLike, overrides: dict | None = None) -> RunConfig:
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError("--config", f"cannot read {path}: {exc.strerror}") from None
    except yaml.YAMLError as exc:
        raise ConfigError("--config", f"invalid YAML: {exc}") from None
    return parse_config(raw or {}, overrides)
