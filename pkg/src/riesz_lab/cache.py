"""On-disk cache for quadrature rules and Hermite tables.

Each artifact is a little-endian binary file with a sha256 sidecar.  A
missing or mismatching checksum means the file is rebuilt (with a warning),
never trusted.  The cache root comes from ``RIESZ_LAB_CACHE`` and defaults to
``~/.cache/riesz_lab``; ``RIESZ_LAB_NO_CACHE=1`` turns persistence off.
"""

from __future__ import annotations

import hashlib
import os
import struct
import threading
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .hermite import HermiteTable
from .quadrature import QuadratureRule, build_rule

ENV_ROOT = "RIESZ_LAB_CACHE"
ENV_DISABLE = "RIESZ_LAB_NO_CACHE"

RULE_MAGIC = b"QRUL"
RULE_VERSION = 1
_RULE_HEADER = struct.Struct("<4sIQIQdd")  # magic, version, K, order, node count, weight exponent, halfwidth


def default_root() -> Path:
    env = os.environ.get(ENV_ROOT)
    return Path(env).expanduser() if env else Path.home() / ".cache" / "riesz_lab"


def cache_disabled_by_env() -> bool:
    return os.environ.get(ENV_DISABLE, "").strip().lower() in {"1", "true", "yes", "on"}


def rule_to_bytes(rule: QuadratureRule, order: int) -> bytes:
    head = _RULE_HEADER.pack(
        RULE_MAGIC, RULE_VERSION, rule.design_degree, order, rule.size, rule.weight_exponent, rule.domain_halfwidth
    )
    return head + rule.nodes.astype("<f8").tobytes() + rule.weights.astype("<f8").tobytes()


def rule_from_bytes(blob: bytes) -> QuadratureRule:
    if len(blob) < _RULE_HEADER.size:
        raise ValueError("truncated quadrature rule header")
    magic, version, K, order, m, alpha, L = _RULE_HEADER.unpack_from(blob)
    if magic != RULE_MAGIC or version != RULE_VERSION:
        raise ValueError("not a quadrature rule file")
    if len(blob) != _RULE_HEADER.size + 16 * m:
        raise ValueError("quadrature rule payload has the wrong length")
    off = _RULE_HEADER.size
    nodes = np.frombuffer(blob, "<f8", m, off).astype(float)
    weights = np.frombuffer(blob, "<f8", m, off + 8 * m).astype(float)
    return QuadratureRule(nodes, weights, L, int(K), alpha, m // order)


@dataclass
class CacheEntry:
    name: str
    size: int
    valid: bool


class ArtifactCache:
    """Get-or-build store keyed by (K, weight exponent, quadrature order)."""

    def __init__(self, root: str | Path | None = None, enabled: bool | None = None):
        self.root = Path(root) if root is not None else default_root()
        self.enabled = (not cache_disabled_by_env()) if enabled is None else enabled
        self._lock = threading.Lock()

    @staticmethod
    def _digest(blob: bytes) -> str:
        return hashlib.sha256(blob).hexdigest()

    def _path(self, kind: str, K: int, weight_exponent: float, order: int) -> Path:
        return self.root / "artifacts" / f"{kind}-K{K}-a{weight_exponent:g}-o{order}.bin"

    def _load(self, path: Path) -> bytes | None:
        side = path.with_suffix(".sha256")
        if not path.exists():
            return None
        blob = path.read_bytes()
        expected = side.read_text().strip() if side.exists() else ""
        if expected != self._digest(blob):
            warnings.warn(f"cache entry {path.name} failed its checksum; rebuilding")
            return None
        return blob

    def _store(self, path: Path, blob: bytes) -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(".tmp")
        tmp.write_bytes(blob)
        os.replace(tmp, path)
        path.with_suffix(".sha256").write_text(self._digest(blob) + "\n")

    def rule(self, K: int, weight_exponent: float = 0.0, order: int = 24) -> QuadratureRule:
        if not self.enabled:
            return build_rule(K, weight_exponent, order=order)
        path = self._path("rule", K, weight_exponent, order)
        with self._lock:
            blob = self._load(path)
            if blob is not None:
                try:
                    return rule_from_bytes(blob)
                except ValueError as exc:
                    warnings.warn(f"cache entry {path.name} unreadable ({exc}); rebuilding")
            rule = build_rule(K, weight_exponent, order=order)
            self._store(path, rule_to_bytes(rule, order))
            return rule

    def hermite_table(self, K: int, weight_exponent: float = 0.0, order: int = 24) -> HermiteTable:
        """h_0..h_K on the nodes of the matching quadrature rule."""
        if not self.enabled:
            return HermiteTable.build(K, build_rule(K, weight_exponent, order=order).nodes)
        rule = self.rule(K, weight_exponent, order)
        path = self._path("table", K, weight_exponent, order)
        with self._lock:
            blob = self._load(path)
            if blob is not None:
                try:
                    return HermiteTable.from_bytes(blob)
                except ValueError as exc:
                    warnings.warn(f"cache entry {path.name} unreadable ({exc}); rebuilding")
            table = HermiteTable.build(K, rule.nodes)
            self._store(path, table.to_bytes())
            return table

    def entries(self) -> list[CacheEntry]:
        base = self.root / "artifacts"
        if not base.exists():
            return []
        out = []
        for p in sorted(base.glob("*.bin")):
            side = p.with_suffix(".sha256")
            valid = side.exists() and side.read_text().strip() == self._digest(p.read_bytes())
            out.append(CacheEntry(p.name, p.stat().st_size, valid))
        return out

    def clear(self) -> int:
        base = self.root / "artifacts"
        count = 0
        if base.exists():
            for p in base.iterdir():
                p.unlink()
                count += 1
        return count
