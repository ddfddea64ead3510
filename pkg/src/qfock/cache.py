"""On-disk cache of float Gram blocks.

File layout (all little-endian)::

    b"QFGRAM1\\0"            8 bytes magic
    d                        uint32
    n                        uint32
    fnv1a64(Q as <f8 rows)   uint64
    P_n                      (d**n)**2 float64, row-major

Files are named ``gram_d{d}_n{n}_{hash:016x}.bin``.  A small ``index.json``
next to them remembers the rows of each hashed ``Q`` and a SHA-256 digest of
every payload written, so loads skip damaged files and ``verify`` can rebuild
blocks and detect corrupted payloads, not only corrupted headers.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import struct
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import CacheError

log = logging.getLogger(__name__)

MAGIC = b"QFGRAM1\0"
HEADER = struct.Struct("<8sIIQ")
_NAME = re.compile(r"^gram_d(\d+)_n(\d+)_([0-9a-f]{16})\.bin$")

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3


def fnv1a64(data: bytes) -> int:
    h = FNV_OFFSET
    for b in data:
        h ^= b
        h = (h * FNV_PRIME) & 0xFFFFFFFFFFFFFFFF
    return h


def encode_block(d: int, n: int, qhash: int, matrix: np.ndarray) -> bytes:
    m = np.ascontiguousarray(matrix, dtype="<f8")
    if m.shape != (d**n, d**n):
        raise CacheError(f"block shape {m.shape} does not match d={d}, n={n}")
    return HEADER.pack(MAGIC, d, n, qhash) + m.tobytes()


def decode_block(data: bytes, expect_hash: int | None = None) -> tuple[int, int, int, np.ndarray]:
    if len(data) < HEADER.size:
        raise CacheError("file shorter than header")
    magic, d, n, qhash = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise CacheError(f"bad magic {magic!r}")
    if expect_hash is not None and qhash != expect_hash:
        raise CacheError(f"Q hash mismatch: file {qhash:016x}, expected {expect_hash:016x}")
    D = d**n
    payload = data[HEADER.size:]
    if len(payload) != D * D * 8:
        raise CacheError(f"payload has {len(payload)} bytes, expected {D * D * 8}")
    m = np.frombuffer(payload, dtype="<f8").reshape(D, D).astype(float)
    return d, n, qhash, m


@dataclass
class CacheEntry:
    path: Path
    d: int
    n: int
    qhash: int


@dataclass
class CacheReport:
    action: str
    entries: list[dict] = field(default_factory=list)
    problems: list[dict] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.problems

    def to_dict(self) -> dict:
        return {
            "action": self.action,
            "entries": self.entries,
            "problems": self.problems,
            "warnings": self.warnings,
            "pass": self.ok,
        }


class GramCache:
    def __init__(self, directory: str | os.PathLike):
        self.dir = Path(directory)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.hits = 0
        self.misses = 0

    def path_for(self, d: int, n: int, qhash: int) -> Path:
        return self.dir / f"gram_d{d}_n{n}_{qhash:016x}.bin"

    # index of Q rows by hash, so verify can recompute payloads
    def _index_path(self) -> Path:
        return self.dir / "index.json"

    def _read_index(self) -> dict:
        try:
            idx = json.loads(self._index_path().read_text())
        except (OSError, ValueError):
            idx = {}
        if not isinstance(idx, dict):
            idx = {}
        idx.setdefault("q", {})
        idx.setdefault("sha256", {})
        return idx

    def _remember(self, Q, path: Path, payload: bytes):
        idx = self._read_index()
        idx["q"].setdefault(f"{Q.hash():016x}", Q.entries.tolist())
        idx["sha256"][path.name] = hashlib.sha256(payload).hexdigest()
        self._atomic_write(self._index_path(), json.dumps(idx, indent=1).encode())

    def _digest_ok(self, idx: dict, path: Path, data: bytes) -> bool | None:
        """``None`` when no digest was recorded for ``path``."""
        want = idx["sha256"].get(path.name)
        if want is None:
            return None
        return hashlib.sha256(data[HEADER.size :]).hexdigest() == want

    def _atomic_write(self, path: Path, data: bytes):
        fd, tmp = tempfile.mkstemp(dir=self.dir, prefix=".tmp-")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(data)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise

    def load(self, Q, n: int) -> np.ndarray | None:
        qhash = Q.hash()
        path = self.path_for(Q.d, n, qhash)
        if not path.exists():
            self.misses += 1
            return None
        try:
            data = path.read_bytes()
            _, _, _, m = decode_block(data, expect_hash=qhash)
            if self._digest_ok(self._read_index(), path, data) is False:
                raise CacheError("payload digest mismatch")
        except (CacheError, OSError) as exc:
            log.warning("ignoring cache file %s: %s", path, exc)
            self.misses += 1
            return None
        self.hits += 1
        return m

    def store(self, Q, n: int, matrix: np.ndarray):
        qhash = Q.hash()
        path = self.path_for(Q.d, n, qhash)
        data = encode_block(Q.d, n, qhash, matrix)
        self._atomic_write(path, data)
        self._remember(Q, path, data[HEADER.size :])

    def entries(self) -> list[CacheEntry]:
        out = []
        for p in sorted(self.dir.iterdir()):
            m = _NAME.match(p.name)
            if m:
                out.append(CacheEntry(p, int(m[1]), int(m[2]), int(m[3], 16)))
        return out

    def list(self) -> CacheReport:
        rep = CacheReport("list")
        for e in self.entries():
            rep.entries.append({"file": e.path.name, "d": e.d, "n": e.n, "hash": f"{e.qhash:016x}"})
        return rep

    def verify(self, tol: float = 1e-12) -> CacheReport:
        from .qgram import GramSeries, QMatrix

        rep = CacheReport("verify")
        idx = self._read_index()
        rebuilt: dict[str, GramSeries] = {}
        for e in self.entries():
            info = {"file": e.path.name, "d": e.d, "n": e.n, "hash": f"{e.qhash:016x}"}
            try:
                data = e.path.read_bytes()
            except OSError as exc:
                rep.warnings.append(f"{e.path.name}: unreadable ({exc})")
                rep.problems.append({**info, "problem": "unreadable"})
                continue
            try:
                d, n, qhash, m = decode_block(data, expect_hash=e.qhash)
                if (d, n) != (e.d, e.n):
                    raise CacheError(f"header (d={d}, n={n}) disagrees with file name")
            except CacheError as exc:
                rep.problems.append({**info, "problem": str(exc)})
                continue
            if self._digest_ok(idx, e.path, data) is False:
                rep.problems.append({**info, "problem": "payload digest mismatch"})
                continue
            key = f"{qhash:016x}"
            if key in idx["q"]:
                Q = QMatrix(idx["q"][key])
                if Q.hash() != qhash:
                    rep.problems.append({**info, "problem": "index rows do not hash to file hash"})
                    continue
                series = rebuilt.setdefault(key, GramSeries(Q))
                dev = float(np.max(np.abs(series.block(n) - m))) if m.size else 0.0
                info["max_deviation"] = dev
                if not dev <= tol:
                    rep.problems.append({**info, "problem": f"payload differs from recomputed block by {dev:.3e}"})
                    continue
            else:
                rep.warnings.append(f"{e.path.name}: Q rows unknown, payload not recomputed")
                if not np.allclose(m, m.T, atol=tol, rtol=0):
                    rep.problems.append({**info, "problem": "payload not symmetric"})
                    continue
            rep.entries.append(info)
        return rep

    def purge(self) -> CacheReport:
        rep = CacheReport("purge")
        for e in self.entries():
            try:
                e.path.unlink()
                rep.entries.append({"file": e.path.name, "deleted": True})
            except OSError as exc:
                rep.warnings.append(f"{e.path.name}: {exc}")
        if self._index_path().exists():
            self._index_path().unlink()
        return rep


def cache_admin(directory, action: str) -> CacheReport:
    if action not in ("list", "verify", "purge"):
        raise ValueError(f"unknown cache action {action!r}")
    if not Path(directory).is_dir():
        rep = CacheReport(action)
        rep.warnings.append(f"{directory}: no such cache directory")
        return rep
    cache = GramCache(directory)
    if action == "list":
        return cache.list()
    if action == "verify":
        return cache.verify()
    if action == "purge":
        return cache.purge()
    raise ValueError(f"unknown cache action {action!r}")
