"""Composite Gauss-Legendre rules for Hermite inner products with power weights.

Gauss-Hermite rules lose their exactness once a factor (1+|x|)^{±α} enters the
integrand, so everything here is built from fixed-order Legendre panels on a
symmetric window [-L, L] with a panel edge at 0 (where |x| has its kink).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

MAX_DEGREE = 20000

# distance beyond the turning point sqrt(2K+1), in units of (2K+1)^{-1/6},
# after which the Airy-type tail of h_K is below 1e-15
_TAIL_AIRY_UNITS = 12.0
_TAIL_EXTRA = 1.0


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray
    domain_halfwidth: float
    design_degree: int
    weight_exponent: float = 0.0
    panels: int = field(default=0)

    def __post_init__(self):
        if self.nodes.shape != self.weights.shape:
            raise ValueError("nodes and weights differ in shape")
        if np.any(self.weights <= 0):
            raise ValueError("quadrature weights must be positive")
        self.nodes.setflags(write=False)
        self.weights.setflags(write=False)

    @property
    def size(self) -> int:
        return self.nodes.size

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, values))

    def tensor(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        """Flattened n-fold tensor grid: points (m^n, n) and weights (m^n,)."""
        grids = np.meshgrid(*([self.nodes] * n), indexing="ij")
        pts = np.stack([g.ravel() for g in grids], axis=-1)
        w = np.ones(1)
        for _ in range(n):
            w = np.multiply.outer(w, self.weights).ravel()
        return pts, w


def halfwidth_for(K: int, weight_exponent: float = 0.0) -> float:
    N = 2 * K + 1
    L = math.sqrt(N) + _TAIL_AIRY_UNITS * N ** (-1.0 / 6.0) + _TAIL_EXTRA
    if weight_exponent > 0:
        # (1+|x|)^α amplifies the Gaussian tail; widen a little to compensate
        L += 0.5 * weight_exponent
    return L


def gauss_legendre_panels(edges, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of order-``order`` Gauss-Legendre on each [edges[i], edges[i+1]]."""
    edges = np.asarray(edges, dtype=float)
    x, w = np.polynomial.legendre.leggauss(order)
    a, b = edges[:-1, None], edges[1:, None]
    half = 0.5 * (b - a)
    nodes = (a + b) / 2 + half * x
    weights = half * w
    return nodes.ravel(), weights.ravel()


def build_rule(
    K: int,
    weight_exponent: float = 0.0,
    *,
    order: int = 24,
    oversample: float = 1.0,
    halfwidth: float | None = None,
    max_width: float = 0.5,
    max_degree: int = MAX_DEGREE,
) -> QuadratureRule:
    """Rule integrating h_j h_k (1+|x|)^{±α}, j, k <= K, to ~1e-12.

    Panel width is ``2π / (oversample · sqrt(2K+1))``, i.e. about two periods of
    the fastest product h_j h_k per panel.  ``weight_exponent`` is the largest
    |α| the rule is validated for; it only widens the window for growing weights.
    ``max_width`` caps the panel width for small K; raising it (with a lower
    ``order``) gives compact rules for tensor grids in n >= 3.
    """
    if int(K) != K or K < 0:
        raise ValueError(f"K must be a non-negative integer, got {K}")
    if K > max_degree:
        raise ValueError(f"K={K} exceeds the configured maximum degree {max_degree}")
    if weight_exponent < 0:
        raise ValueError("weight_exponent is a magnitude and must be >= 0")
    K = int(K)
    L = halfwidth_for(K, weight_exponent) if halfwidth is None else float(halfwidth)
    width = min(max_width, 2 * math.pi / (oversample * math.sqrt(2 * K + 1)))
    per_side = max(1, math.ceil(L / width))
    half_edges = np.linspace(0.0, L, per_side + 1)
    edges = np.concatenate([-half_edges[::-1], half_edges[1:]])
    nodes, weights = gauss_legendre_panels(edges, order)
    return QuadratureRule(nodes, weights, L, K, float(weight_exponent), len(edges) - 1)


def interval_rule(a: float, b: float, panels: int, order: int = 24) -> tuple[np.ndarray, np.ndarray]:
    """Composite rule on a finite interval, used for boxes and radial integrals."""
    if not b > a:
        raise ValueError("need b > a")
    return gauss_legendre_panels(np.linspace(a, b, panels + 1), order)


def power_weight(x, alpha: float, sign: int = -1) -> np.ndarray:
    """(1+|x|)^{sign·α} for points x; the last axis is the coordinate axis if 2-D."""
    x = np.asarray(x, dtype=float)
    r = np.abs(x) if x.ndim <= 1 else np.sqrt(np.sum(x * x, axis=-1))
    return (1.0 + r) ** (sign * alpha)
