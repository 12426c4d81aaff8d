"""Weighted L² norms, band-projection operator norms and scaling fits.

Level-k band projections have finite rank, so their weighted operator norms
are exact finite eigenproblems: the largest eigenvalue of the Gram matrix
∫Φ_μΦ_ν w over |μ| = |ν| = k.  In ℝ² a radial weight is diagonal in the
polar (Laguerre) basis of the level, which avoids the dense Gram altogether.
"""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from .hermite import hermite_1d, hermite_all, level_indices, level_multiplicity
from .laguerre import polar_level_spectrum
from .quadrature import QuadratureRule, build_rule, interval_rule, power_weight
from .transform import Expansion, synthesize

MAX_DENSE_MULTIPLICITY = 1024


@dataclass(frozen=True)
class WeightSpec:
    """Weight (1+|x|)^{sign·α} on ℝⁿ."""

    alpha: float
    sign: int = -1
    n: int = 1

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("α is a magnitude and must be >= 0")
        if self.sign not in (-1, 1):
            raise ValueError("sign must be +1 or -1")
        if self.n < 1:
            raise ValueError("dimension must be >= 1")

    @property
    def in_theorem_range(self) -> bool:
        """0 <= α < n for decaying weights."""
        return self.sign == 1 or self.alpha < self.n

    def __call__(self, x):
        return power_weight(x, self.alpha, self.sign)


def weighted_norm(values, w: WeightSpec, rule: QuadratureRule) -> float:
    """(∫|f|² (1+|x|)^{sign α})^{1/2} for samples on the n-fold tensor grid of ``rule``."""
    if w.sign == 1 and w.alpha > rule.weight_exponent:
        raise ValueError(
            f"rule validated for growing weights up to α={rule.weight_exponent}, asked for {w.alpha}"
        )
    vals = np.asarray(values)
    if vals.size != rule.size**w.n:
        raise ValueError(f"expected {rule.size ** w.n} samples on the tensor grid, got {vals.size}")
    pts, q = rule.tensor(w.n)
    wt = w(pts if w.n > 1 else pts[:, 0])
    return float(np.sqrt(np.dot(q * wt, np.abs(vals.ravel()) ** 2)))


def hermite_weighted_moment(k: int, alpha: float, sign: int = 1, rule: QuadratureRule | None = None) -> float:
    """∫ h_k² (1+|x|)^{sign α} dx."""
    if alpha < 0:
        raise ValueError("α must be >= 0")
    rule = build_rule(k, alpha) if rule is None else rule
    if rule.design_degree < k:
        raise ValueError("quadrature rule does not resolve degree k")
    if sign == 1 and alpha > rule.weight_exponent:
        raise ValueError("growing weight beyond the rule's validated exponent")
    hk = hermite_1d(k, rule.nodes)
    return float(np.dot(rule.weights * power_weight(rule.nodes, alpha, sign), hk * hk))


@dataclass
class OperatorNormEstimate:
    """‖χ_{[k,k+1)}(H)‖ between L² and a power-weighted L²."""

    value: float
    k: int
    n: int
    alpha: float
    sign: int
    method: str
    multiplicity: int
    spectrum: np.ndarray = field(repr=False, default_factory=lambda: np.zeros(0))


def _level_matrix(k: int, n: int, pts: np.ndarray) -> np.ndarray:
    """Φ_μ(points) for |μ| = k, one row per μ."""
    idx = np.array(level_indices(k, n))
    prod = np.ones((len(idx), pts.shape[0]))
    for i in range(n):
        prod *= hermite_all(k, pts[:, i])[idx[:, i]]
    return prod


def level_gram(
    k: int, n: int, weight: Callable[[np.ndarray], np.ndarray], rule: QuadratureRule | None = None, block: int = 1 << 16
) -> np.ndarray:
    """Dense Gram G_μν = ∫ Φ_μ Φ_ν w over |μ| = |ν| = k on the tensor grid.

    Accumulated over blocks of ``block`` grid points to bound memory.
    """
    m = level_multiplicity(k, n)
    if m > MAX_DENSE_MULTIPLICITY:
        raise ValueError(f"multiplicity {m} exceeds the dense eigensolve limit {MAX_DENSE_MULTIPLICITY}")
    rule = build_rule(k, 4.0) if rule is None else rule
    idx = np.array(level_indices(k, n))
    H = hermite_all(k, rule.nodes)
    shape = (rule.size,) * n
    total = rule.size**n
    G = np.zeros((m, m))
    for start in range(0, total, block):
        sel = np.stack(np.unravel_index(np.arange(start, min(total, start + block)), shape), axis=1)
        pts = rule.nodes[sel]
        q = np.prod(rule.weights[sel], axis=1)
        A = np.ones((m, sel.shape[0]))
        for i in range(n):
            A *= H[idx[:, i]][:, sel[:, i]]
        G += (A * (q * weight(pts))) @ A.T
    return G


def compact_rule(k: int, alpha: float, sign: int) -> QuadratureRule:
    """Coarser panels for tensor grids: order 12, width up to 1.5, 6 units past the turning point.

    In n >= 3 the weight's cone point at the origin, not the rule, limits
    accuracy to roughly 1e-8 for decaying weights.
    """
    if sign == 1:
        return build_rule(k, alpha, order=12, max_width=1.5)
    return build_rule(k, 0.0, order=12, max_width=1.5, halfwidth=math.sqrt(2 * k + 1) + 6.0)


def band_projection_weighted_norm(
    k: int, n: int, alpha: float, sign: int = -1, method: str = "auto"
) -> OperatorNormEstimate:
    """‖χ_{[k,k+1)}(H)‖_{L²→L²((1+|x|)^{-α})} (sign = -1) or the L²((1+|x|)^α)-valued analogue.

    ``method`` is "moment" (n = 1), "polar" (n = 2, radial weight diagonal in
    the Laguerre basis), "gram" (dense tensor Gram) or "auto".
    """
    if k < 0 or alpha < 0:
        raise ValueError("need k >= 0 and α >= 0")
    if method == "auto":
        method = {1: "moment", 2: "polar"}.get(n, "gram")
    mult = level_multiplicity(k, n)
    if method == "moment":
        if n != 1:
            raise ValueError("the moment route is one-dimensional")
        spec = np.array([hermite_weighted_moment(k, alpha, sign)])
    elif method == "polar":
        if n != 2:
            raise ValueError("the polar route is two-dimensional")
        spec = np.array(list(polar_level_spectrum(k, lambda r: (1.0 + r) ** (sign * alpha)).values()))
    elif method == "gram":
        rule = compact_rule(k, alpha, sign) if n >= 3 else build_rule(k, alpha if sign == 1 else 0.0)
        G = level_gram(k, n, lambda p: power_weight(p if n > 1 else p[:, 0], alpha, sign), rule)
        spec = np.linalg.eigvalsh(G)
    else:
        raise ValueError(f"unknown method {method!r}")
    return OperatorNormEstimate(float(np.sqrt(spec.max())), k, n, alpha, sign, method, mult, np.sort(spec))


def dual_band_projection_norm(k: int, n: int, alpha: float, rule: QuadratureRule | None = None) -> float:
    """‖χ_{[k,k+1)}(H)‖_{L²((1+|x|)^α)→L²} from the SVD of the discretized operator.

    With g = (1+|x|)^{-α/2} h the norm is the top singular value of
    h ↦ P_k((1+|x|)^{-α/2} h), discretized as Φ_μ(x_q) (1+|x_q|)^{-α/2} √q.
    """
    rule = build_rule(k, alpha) if rule is None else rule
    pts, q = rule.tensor(n)
    A = _level_matrix(k, n, pts) * (np.sqrt(q) * power_weight(pts if n > 1 else pts[:, 0], alpha / 2, -1))
    return float(np.linalg.svd(A, compute_uv=False)[0])


def box_gram_1d(K: int, M: float) -> np.ndarray:
    """B_ab = ∫_{-M}^{M} h_a h_b for a, b <= K."""
    panels = max(4, math.ceil(2 * M / min(0.5, 2 * math.pi / math.sqrt(2 * K + 1))))
    x, w = interval_rule(-M, M, panels)
    H = hermite_all(K, x)
    return (H * w) @ H.T


def local_band_mass(k: int, n: int, M: float) -> float:
    """max over unit f of ∫_{[-M,M]^n} |χ_{[k,k+1)}(H) f|², a Gram eigenvalue on the box."""
    if M <= 0:
        raise ValueError("box half-width must be positive")
    if n == 1:
        panels = max(4, math.ceil(2 * M / min(0.5, 2 * math.pi / math.sqrt(2 * k + 1))))
        x, w = interval_rule(-M, M, panels)
        hk = hermite_1d(k, x)
        return float(np.dot(w, hk * hk))
    mult = level_multiplicity(k, n)
    if mult > MAX_DENSE_MULTIPLICITY:
        raise ValueError(f"multiplicity {mult} exceeds the dense eigensolve limit")
    B = box_gram_1d(k, M)
    idx = np.array(level_indices(k, n))
    G = np.ones((mult, mult))
    for i in range(n):
        G *= B[np.ix_(idx[:, i], idx[:, i])]
    return float(np.linalg.eigvalsh(G).max())


def sobolev_weight_ratio(f: Expansion, alpha: float, rule: QuadratureRule | None = None) -> float:
    """‖(1+|x|)^{2α} f‖₂ / ‖(1+H)^α f‖₂."""
    if alpha < 0:
        raise ValueError("α must be >= 0")
    if alpha == 0:
        return 1.0
    rule = build_rule(f.K, 4 * alpha) if rule is None else rule
    pts, q = rule.tensor(f.n)
    vals = synthesize(f, pts if f.n > 1 else pts[:, 0])
    wt = power_weight(pts if f.n > 1 else pts[:, 0], 4 * alpha, 1)
    top = math.sqrt(float(np.dot(q * wt, np.abs(vals) ** 2)))
    bottom = math.sqrt(float(np.sum((1.0 + f.eigenvalues) ** (2 * alpha) * np.abs(f.coeffs) ** 2)))
    return top / bottom


# ------------------------------------------------------------ sup of P_k kernel


@dataclass
class SupNormResult:
    value: float
    argmax: float
    refinement_delta: float
    coarse: bool


def _diagonal_along_ray(k: int, n: int, r: np.ndarray) -> np.ndarray:
    """Σ_{|μ|=k} Φ_μ(r, 0, …, 0)²."""
    H = hermite_all(k, r)
    if n == 1:
        return H[k] ** 2
    h0 = hermite_all(k, np.zeros(1))[:, 0] ** 2
    # s_j = Σ over (n-1)-multi-indices of size j of Π h_{ν_i}(0)²
    s = np.zeros(k + 1)
    s[0] = 1.0
    for _ in range(n - 1):
        s = np.convolve(s, h0)[: k + 1]
    return np.einsum("ar,a->r", H**2, s[k - np.arange(k + 1)])


def _golden_max(fn, a: float, b: float, iters: int = 60) -> tuple[float, float]:
    g = (math.sqrt(5) - 1) / 2
    c, d = b - g * (b - a), a + g * (b - a)
    fc, fd = fn(c), fn(d)
    for _ in range(iters):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = fn(d)
    return (c, fc) if fc >= fd else (d, fd)


def restriction_sup_norm(k: int, n: int, box: float | None = None, points_per_wavelength: int = 24, rounds: int = 3, tol: float = 1e-6) -> SupNormResult:
    """sup_x (Σ_{|μ|=k} Φ_μ(x)²)^{1/2}, the L²→L^∞ norm of P_k.

    The kernel diagonal is rotation invariant, so it is maximized along one
    ray; for n = 1 this is sup |h_k| (on [-box, box] if given).  The grid max
    is refined around every grid peak within 25% of the best: a shared local
    grid picks the winning ripple, then golden-section search runs ``rounds``
    times with shrinking brackets.
    """
    if k < 0 or n < 1:
        raise ValueError("need k >= 0 and n >= 1")
    N = 2 * k + n
    rmax = math.sqrt(N) + 6 * N ** (-1 / 6) + 1 if box is None else float(box)
    h = 2 * math.pi / (math.sqrt(N) * points_per_wavelength)
    r = np.linspace(0.0, rmax, max(16, math.ceil(rmax / h)) + 1)
    h = r[1] - r[0]
    vals = _diagonal_along_ray(k, n, r)
    grid_best = float(vals.max())
    # several ripples can have nearly equal peaks, so refine every local grid max close to the best
    pad = np.concatenate([[-np.inf], vals, [-np.inf]])
    peaks = np.flatnonzero((vals >= pad[:-2]) & (vals >= pad[2:]) & (vals >= 0.75 * grid_best))

    # screen all candidate peaks together on a local grid, then golden-section the winner
    centers = r[peaks]
    local = np.linspace(-1.0, 1.0, 17)
    pts = np.clip(centers[:, None] + h * local, 0.0, rmax)
    sample = _diagonal_along_ray(k, n, pts.ravel()).reshape(pts.shape)
    j = np.unravel_index(int(np.argmax(sample)), sample.shape)
    best_r, best = float(pts[j]), float(sample[j])

    def fn(t):
        return float(_diagonal_along_ray(k, n, np.array([t]))[0])

    width = h / 8
    for _ in range(rounds):
        cand_r, cand = _golden_max(fn, max(0.0, best_r - width), min(rmax, best_r + width))
        if cand > best:
            best_r, best = cand_r, cand
        width /= 4
    delta = (best - grid_best) / best if best > 0 else 0.0
    coarse = delta > tol
    if delta > 1e-2:
        warnings.warn(f"sup-norm grid too coarse for k={k}: refinement moved the max by {delta:.2e}")
    return SupNormResult(math.sqrt(best), float(best_r), float(delta), coarse)


# ------------------------------------------------------------------- N²,q norm


@dataclass
class NkqNorm:
    N: int
    q: float
    value: float


def rescale_profile(F: Callable[[np.ndarray], np.ndarray], N: float) -> Callable[[np.ndarray], np.ndarray]:
    """s ↦ F(N s), taking a profile supported in [N/4, N] to one supported in [1/4, 1]."""
    return lambda s: F(N * np.asarray(s, dtype=float))


def nk2q_norm(F: Callable[[np.ndarray], np.ndarray], N: int, q: float, samples_per_cell: int = 33) -> NkqNorm:
    """((1/N²) Σ_ℓ sup_{[(ℓ-1)/N², ℓ/N²)} |F|^q)^{1/q}; q = ∞ gives sup |F| on [0, 1].

    Cell suprema are taken over ``samples_per_cell`` equispaced points per cell.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    if q < 2:
        raise ValueError("q must lie in [2, ∞]")
    cells = N * N
    s = (np.arange(cells)[:, None] + np.arange(samples_per_cell)[None, :] / samples_per_cell) / cells
    sup = np.abs(np.asarray(F(s.ravel()), dtype=float)).reshape(cells, samples_per_cell).max(axis=1)
    if math.isinf(q):
        return NkqNorm(N, q, float(sup.max()))
    return NkqNorm(N, q, float(np.mean(sup**q) ** (1 / q)))


# --------------------------------------------------------------- slope fitting


@dataclass
class ScalingReport:
    """Least-squares fit of log value against log k."""

    ks: list[float]
    values: list[float]
    slope: float
    intercept: float
    residual: float
    stderr: float
    ci95: tuple[float, float]

    @property
    def k_range(self) -> tuple[float, float]:
        return (self.ks[0], self.ks[-1])

    def within(self, target: float, tol: float) -> bool:
        return abs(self.slope - target) <= tol

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["k", "value"])
        for k, v in zip(self.ks, self.values):
            wr.writerow([repr(float(k)), repr(float(v))])
        return buf.getvalue()

    def summary(self, target: float | None = None, tol: float | None = None) -> dict:
        out = {
            "slope": self.slope,
            "intercept": self.intercept,
            "residual": self.residual,
            "stderr": self.stderr,
            "ci95": list(self.ci95),
            "k_range": list(self.k_range),
            "samples": len(self.ks),
        }
        if target is not None and tol is not None:
            out.update(target=target, tolerance=tol, verdict="pass" if self.within(target, tol) else "fail")
        return out

    def to_json(self, target: float | None = None, tol: float | None = None) -> str:
        return json.dumps(self.summary(target, tol), sort_keys=True)


def fit_slope(ks: Sequence[float], values: Sequence[float]) -> ScalingReport:
    ks = [float(k) for k in ks]
    values = [float(v) for v in values]
    if len(ks) != len(values):
        raise ValueError("ks and values differ in length")
    if len(ks) < 4:
        raise ValueError("a scaling fit needs at least 4 samples")
    if any(b <= a for a, b in zip(ks, ks[1:])):
        raise ValueError("k must be strictly increasing")
    if any(v <= 0 or not math.isfinite(v) for v in values) or any(k <= 0 for k in ks):
        raise ValueError("log-log fits need positive values")
    lx, ly = np.log(ks), np.log(values)
    fit = stats.linregress(lx, ly)
    resid = float(np.sqrt(np.mean((ly - fit.intercept - fit.slope * lx) ** 2)))
    tcrit = float(stats.t.ppf(0.975, len(ks) - 2))
    ci = (float(fit.slope - tcrit * fit.stderr), float(fit.slope + tcrit * fit.stderr))
    return ScalingReport(ks, values, float(fit.slope), float(fit.intercept), resid, float(fit.stderr), ci)
