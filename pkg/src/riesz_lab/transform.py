"""Truncated Hermite expansions and the analysis/synthesis transform."""

from __future__ import annotations

import io
from math import comb
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .hermite import as_multi_index, hermite_all, multi_indices
from .quadrature import QuadratureRule


@dataclass(frozen=True, eq=False)
class Expansion:
    """Coefficients c(μ) for all |μ| <= K in dimension n (graded order).

    ``indices`` always holds the full graded index set, so a missing
    coefficient is stored as an explicit zero.
    """

    n: int
    K: int
    coeffs: np.ndarray

    def __post_init__(self):
        if self.n < 1 or self.K < 0:
            raise ValueError("need n >= 1 and K >= 0")
        if self.coeffs.shape != (_index_count(self.n, self.K),):
            raise ValueError(
                f"expected {_index_count(self.n, self.K)} coefficients for n={self.n}, K={self.K}"
            )
        self.coeffs.setflags(write=False)

    @classmethod
    def zeros(cls, n: int, K: int, dtype=float) -> "Expansion":
        return cls(n, K, np.zeros(_index_count(n, K), dtype=dtype))

    @classmethod
    def from_dict(cls, n: int, K: int, coeffs: Mapping[Sequence[int], complex]) -> "Expansion":
        lookup = index_lookup(n, K)
        dtype = complex if any(np.iscomplexobj(v) and np.imag(v) != 0 for v in coeffs.values()) else float
        out = np.zeros(len(lookup), dtype=dtype)
        for mu, c in coeffs.items():
            mu = as_multi_index(mu, n)
            if sum(mu) > K:
                raise ValueError(f"index {mu} exceeds truncation K={K}")
            out[lookup[mu]] = c
        return cls(n, K, out)

    @classmethod
    def unit(cls, mu: Sequence[int], K: int | None = None) -> "Expansion":
        mu = as_multi_index(mu)
        K = sum(mu) if K is None else K
        return cls.from_dict(len(mu), K, {mu: 1.0})

    @property
    def indices(self) -> np.ndarray:
        return multi_indices(self.n, self.K)

    @property
    def levels(self) -> np.ndarray:
        return self.indices.sum(axis=1)

    @property
    def eigenvalues(self) -> np.ndarray:
        return 2 * self.levels + self.n

    def coefficient(self, mu: Sequence[int]) -> complex:
        mu = as_multi_index(mu, self.n)
        if sum(mu) > self.K:
            return 0.0
        return self.coeffs[index_lookup(self.n, self.K)[mu]]

    def with_coeffs(self, coeffs) -> "Expansion":
        return Expansion(self.n, self.K, np.asarray(coeffs))

    def level_mass(self) -> np.ndarray:
        """‖P_k f‖₂² for k = 0..K."""
        return np.bincount(self.levels, weights=np.abs(self.coeffs) ** 2, minlength=self.K + 1)

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.coeffs) ** 2)))

    def to_dict(self) -> dict[tuple[int, ...], complex]:
        return {tuple(int(m) for m in mu): c for mu, c in zip(self.indices, self.coeffs) if c != 0}

    def coefficient_tensor(self) -> np.ndarray:
        """Dense (K+1)^n array with entry c(μ) at position μ."""
        T = np.zeros((self.K + 1,) * self.n, dtype=self.coeffs.dtype)
        T[tuple(self.indices.T)] = self.coeffs
        return T


_LOOKUP_CACHE: dict[tuple[int, int], dict] = {}


def _index_count(n: int, K: int) -> int:
    return comb(K + n, n)


def index_lookup(n: int, K: int) -> dict[tuple[int, ...], int]:
    key = (n, K)
    if key not in _LOOKUP_CACHE:
        _LOOKUP_CACHE[key] = {tuple(int(m) for m in mu): i for i, mu in enumerate(multi_indices(n, K))}
    return _LOOKUP_CACHE[key]


def random_expansion(n: int, K: int, rng: np.random.Generator, decay: float = 0.0) -> Expansion:
    """Gaussian random real coefficients, optionally damped like (1+|μ|)^{-decay}."""
    idx = multi_indices(n, K)
    c = rng.standard_normal(len(idx)) * (1.0 + idx.sum(axis=1)) ** (-decay)
    return Expansion(n, K, c)


def _grid_samples(f, n: int, nodes: np.ndarray) -> np.ndarray:
    if callable(f):
        grids = np.meshgrid(*([nodes] * n), indexing="ij")
        pts = np.stack(grids, axis=-1)
        vals = np.asarray(f(pts))
        if vals.shape != pts.shape[:-1]:
            raise ValueError(f"function returned shape {vals.shape}, expected {pts.shape[:-1]}")
        return vals
    vals = np.asarray(f)
    if vals.shape != (nodes.size,) * n:
        raise ValueError(f"samples must have shape {(nodes.size,) * n}, got {vals.shape}")
    return vals


def analyze(
    f: Callable[[np.ndarray], np.ndarray] | np.ndarray,
    n: int,
    K: int,
    rule: QuadratureRule,
    table: np.ndarray | None = None,
) -> Expansion:
    """Coefficients ⟨f, Φ_μ⟩ for |μ| <= K.

    ``f`` is either a callable on points of shape (..., n) or its samples on
    the n-fold tensor grid of ``rule.nodes``.  The contraction runs one axis
    at a time, so the cost is m^n (K+1) rather than m^n times the index count.
    """
    if rule.design_degree < K:
        raise ValueError(f"rule designed for degree {rule.design_degree} < requested K={K}")
    vals = _grid_samples(f, n, rule.nodes)
    H = hermite_all(K, rule.nodes) if table is None else table[: K + 1]
    B = H * rule.weights
    T = vals
    for _ in range(n):
        # contract the leading spatial axis, append the new degree axis at the end
        T = np.tensordot(T, B, axes=([0], [1]))
    idx = multi_indices(n, K)
    return Expansion(n, K, np.ascontiguousarray(T[tuple(idx.T)]))


def synthesize(e: Expansion, x) -> np.ndarray:
    """Σ c(μ) Φ_μ(x) at scattered points x of shape (p, n) (or (p,) when n = 1)."""
    pts = np.asarray(x, dtype=float)
    if e.n == 1 and pts.ndim <= 1:
        pts = pts.reshape(-1, 1)
    if pts.shape[-1] != e.n:
        raise ValueError(f"points of dimension {pts.shape[-1]} for an expansion in dimension {e.n}")
    lead = pts.shape[:-1]
    pts = pts.reshape(-1, e.n)
    idx = e.indices
    prod = np.ones((len(idx), pts.shape[0]))
    for i in range(e.n):
        H = hermite_all(e.K, pts[:, i])
        prod *= H[idx[:, i]]
    return (e.coeffs @ prod).reshape(lead)


def synthesize_grid(e: Expansion, grid) -> np.ndarray:
    """Values on the tensor grid grid × ... × grid (or a list of per-axis grids)."""
    axes = list(grid) if isinstance(grid, (list, tuple)) else [np.asarray(grid)] * e.n
    if len(axes) != e.n:
        raise ValueError(f"{len(axes)} grid axes for an expansion in dimension {e.n}")
    T = e.coefficient_tensor()
    for ax in axes:
        H = hermite_all(e.K, np.asarray(ax, dtype=float))
        T = np.tensordot(T, H, axes=([0], [0]))
    return T


def level_values(e: Expansion, x) -> np.ndarray:
    """P_k f at scattered points, one row per level k = 0..K."""
    pts = np.asarray(x, dtype=float)
    if e.n == 1 and pts.ndim <= 1:
        pts = pts.reshape(-1, 1)
    idx = e.indices
    prod = np.ones((len(idx), pts.shape[0]))
    for i in range(e.n):
        prod *= hermite_all(e.K, pts[:, i])[idx[:, i]]
    out = np.zeros((e.K + 1, pts.shape[0]), dtype=np.result_type(e.coeffs, float))
    np.add.at(out, e.levels, e.coeffs[:, None] * prod)
    return out


def write_expansion(e: Expansion, stream=None) -> str:
    """Text form: header "n K", then "μ_1 … μ_n re im" for every nonzero c(μ)."""
    buf = io.StringIO()
    buf.write(f"{e.n} {e.K}\n")
    for mu, c in zip(e.indices, e.coeffs):
        if c == 0:
            continue
        c = complex(c)
        buf.write(" ".join(str(int(m)) for m in mu) + f" {c.real!r} {c.imag!r}\n")
    text = buf.getvalue()
    if stream is not None:
        stream.write(text)
    return text


def read_expansion(text: str) -> Expansion:
    lines = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines:
        raise ValueError("empty expansion text")
    head = lines[0].split()
    if len(head) != 2:
        raise ValueError(f"header must be 'n K', got {lines[0]!r}")
    n, K = int(head[0]), int(head[1])
    coeffs = {}
    for ln in lines[1:]:
        parts = ln.split()
        if len(parts) != n + 2:
            raise ValueError(f"expected {n} indices plus re im, got {ln!r}")
        mu = tuple(int(p) for p in parts[:n])
        coeffs[mu] = complex(float(parts[n]), float(parts[n + 1]))
    if all(c.imag == 0 for c in coeffs.values()):
        coeffs = {mu: c.real for mu, c in coeffs.items()}
    return Expansion.from_dict(n, K, coeffs)
