"""Hermite functions, tensor eigenfunctions and eigenlevels of H = -Δ + |x|².

The 1-D functions are generated by the normalized three-term recurrence

    h_{k+1}(t) = t sqrt(2/(k+1)) h_k(t) - sqrt(k/(k+1)) h_{k-1}(t)

with the Gaussian carried as a separate log-scale per node, so neither the
polynomial part nor the Gaussian ever leaves the double range.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

PI_QUARTER = math.pi ** -0.25

# rescale the running recurrence pair once it gets this large
_BIG = 1e150
_LOG_BIG = math.log(_BIG)

TABLE_MAGIC = b"HRMT"
TABLE_VERSION = 1
_HEADER = struct.Struct("<4sIQQ")


def as_multi_index(mu: Sequence[int], n: int | None = None) -> tuple[int, ...]:
    """Validate a multi-index and return it as a tuple of ints."""
    out = tuple(int(m) for m in mu)
    if len(out) == 0:
        raise ValueError("multi-index must have at least one entry")
    if any(m < 0 for m in out):
        raise ValueError(f"multi-index entries must be non-negative, got {out}")
    if n is not None and len(out) != n:
        raise ValueError(f"multi-index {out} does not have dimension {n}")
    return out


def level_indices(k: int, n: int) -> list[tuple[int, ...]]:
    """All multi-indices μ in N_0^n with |μ| = k, first entry descending."""
    if k < 0 or n < 1:
        raise ValueError("need k >= 0 and n >= 1")
    if n == 1:
        return [(k,)]
    out = []
    for first in range(k, -1, -1):
        for rest in level_indices(k - first, n - 1):
            out.append((first,) + rest)
    return out


@lru_cache(maxsize=64)
def multi_indices(n: int, K: int) -> np.ndarray:
    """Graded list of all μ with |μ| <= K as a read-only (M, n) integer array."""
    rows = [mu for k in range(K + 1) for mu in level_indices(k, n)]
    out = np.array(rows, dtype=np.int64).reshape(len(rows), n)
    out.setflags(write=False)
    return out


def eigenvalue(mu: Sequence[int]) -> int:
    mu = as_multi_index(mu)
    return 2 * sum(mu) + len(mu)


def level_multiplicity(k: int, n: int) -> int:
    if k < 0 or n < 1:
        raise ValueError("need k >= 0 and n >= 1")
    return math.comb(k + n - 1, n - 1)


@dataclass(frozen=True)
class Eigenlevel:
    k: int
    n: int

    def __post_init__(self):
        if self.k < 0 or self.n < 1:
            raise ValueError("need k >= 0 and n >= 1")

    @property
    def eigenvalue(self) -> int:
        return 2 * self.k + self.n

    @property
    def multiplicity(self) -> int:
        return level_multiplicity(self.k, self.n)

    def indices(self) -> list[tuple[int, ...]]:
        return level_indices(self.k, self.n)


def _iterate(K: int, t: np.ndarray) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    """Yield (mantissa, log-scale) pairs with h_k = mantissa * exp(log-scale)."""
    a_prev = np.zeros_like(t)
    a = np.full_like(t, PI_QUARTER)
    logscale = -0.5 * t * t
    yield a, logscale
    for k in range(K):
        a_next = math.sqrt(2.0 / (k + 1)) * t * a - math.sqrt(k / (k + 1)) * a_prev
        big = np.abs(a_next) > _BIG
        if big.any():
            a_next = np.where(big, a_next / _BIG, a_next)
            a = np.where(big, a / _BIG, a)
            logscale = logscale + np.where(big, _LOG_BIG, 0.0)
        a_prev, a = a, a_next
        yield a, logscale


def _check_degree(k: int) -> int:
    if int(k) != k or k < 0:
        raise ValueError(f"degree must be a non-negative integer, got {k}")
    return int(k)


def hermite_1d(k: int, t):
    """Evaluate the normalized Hermite function h_k at t (scalar or array)."""
    k = _check_degree(k)
    arr = np.asarray(t, dtype=float)
    flat = np.atleast_1d(arr).ravel()
    for a, logscale in _iterate(k, flat):
        pass
    out = a * np.exp(logscale)
    out = out.reshape(arr.shape)
    return float(out) if np.ndim(t) == 0 else out


def log_hermite_1d(k: int, t) -> tuple[np.ndarray, np.ndarray]:
    """Return (log|h_k(t)|, sign h_k(t)); usable far beyond the underflow range."""
    k = _check_degree(k)
    flat = np.atleast_1d(np.asarray(t, dtype=float)).ravel()
    for a, logscale in _iterate(k, flat):
        pass
    with np.errstate(divide="ignore"):
        return np.log(np.abs(a)) + logscale, np.sign(a)


def hermite_all(K: int, t) -> np.ndarray:
    """Rows h_0..h_K evaluated at the nodes t; shape (K+1, len(t))."""
    K = _check_degree(K)
    flat = np.atleast_1d(np.asarray(t, dtype=float)).ravel()
    out = np.empty((K + 1, flat.size))
    for k, (a, logscale) in enumerate(_iterate(K, flat)):
        out[k] = a * np.exp(logscale)
    return out


def hermite_nd(mu: Sequence[int], x) -> np.ndarray | float:
    """Tensor-product eigenfunction Φ_μ at points x of shape (..., n)."""
    mu = as_multi_index(mu)
    pts = np.asarray(x, dtype=float)
    if pts.shape[-1:] != (len(mu),):
        raise ValueError(f"points of shape {pts.shape} do not match dimension {len(mu)}")
    out = np.ones(pts.shape[:-1])
    for i, m in enumerate(mu):
        out = out * hermite_1d(m, pts[..., i])
    return float(out) if out.ndim == 0 else out


def hermite_asymptotic(k: int, x):
    """Main term of the oscillatory-region asymptotic of h_k.

    With N = 2k+1 and θ = arccos(x/√N) the main term is
    (2/π)^{1/2} (N - x²)^{-1/4} cos((N(2θ - sin 2θ) - π)/4), valid for
    0 <= x <= √N - N^{-1/6} with remainder O(N^{1/2} (N - x²)^{-7/4}).
    Meant as a test oracle for :func:`hermite_1d`, never as a production path.
    """
    k = _check_degree(k)
    N = 2 * k + 1
    xs = np.asarray(x, dtype=float)
    upper = math.sqrt(N) - N ** (-1.0 / 6.0)
    if np.any(xs < 0) or np.any(xs > upper):
        raise ValueError(f"x must lie in [0, {upper:.6g}] for k={k}")
    theta = np.arccos(xs / math.sqrt(N))
    val = math.sqrt(2 / math.pi) * (N - xs * xs) ** -0.25 * np.cos(
        (N * (2 * theta - np.sin(2 * theta)) - math.pi) / 4
    )
    return float(val) if xs.ndim == 0 else val


def hermite_asymptotic_error_scale(k: int, x):
    """Size N^{1/2}(N - x²)^{-7/4} of the asymptotic remainder."""
    N = 2 * k + 1
    xs = np.asarray(x, dtype=float)
    return math.sqrt(N) * (N - xs * xs) ** -1.75


@dataclass(frozen=True, eq=False)
class HermiteTable:
    """Values h_k(node_j) for k <= max_degree on a fixed sorted node set."""

    max_degree: int
    nodes: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != (self.max_degree + 1, self.nodes.size):
            raise ValueError("table shape does not match degree and node count")
        self.nodes.setflags(write=False)
        self.values.setflags(write=False)

    @classmethod
    def build(cls, K: int, nodes) -> "HermiteTable":
        nodes = np.sort(np.asarray(nodes, dtype=float).ravel())
        return cls(K, nodes, hermite_all(K, nodes))

    def row(self, k: int) -> np.ndarray:
        return self.values[k]

    def to_bytes(self) -> bytes:
        head = _HEADER.pack(TABLE_MAGIC, TABLE_VERSION, self.max_degree, self.nodes.size)
        return (
            head
            + self.nodes.astype("<f8").tobytes()
            + self.values.astype("<f8").tobytes(order="C")
        )

    @classmethod
    def from_bytes(cls, blob: bytes) -> "HermiteTable":
        if len(blob) < _HEADER.size:
            raise ValueError("truncated Hermite table header")
        magic, version, K, m = _HEADER.unpack_from(blob)
        if magic != TABLE_MAGIC or version != TABLE_VERSION:
            raise ValueError("not a Hermite table file (bad magic or version)")
        expected = _HEADER.size + 8 * (m + (K + 1) * m)
        if len(blob) != expected:
            raise ValueError(f"Hermite table payload has {len(blob)} bytes, expected {expected}")
        off = _HEADER.size
        nodes = np.frombuffer(blob, "<f8", m, off).astype(float)
        values = np.frombuffer(blob, "<f8", (K + 1) * m, off + 8 * m).astype(float)
        return cls(int(K), nodes, values.reshape(K + 1, m))

    def save(self, path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path) -> "HermiteTable":
        return cls.from_bytes(Path(path).read_bytes())


def iter_levels(K: int, n: int) -> Iterator[Eigenlevel]:
    return (Eigenlevel(k, n) for k in range(K + 1))

