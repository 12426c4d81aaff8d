"""Laguerre functions, radial Hermite projections and the sharpness families.

Radial functions on ℝⁿ only see the even levels of H, and the level-2k
projection of f(x) = f0(|x|) is R_k · 𝔏_k(r) with

    𝔏_k(r) = L_k^{n/2-1}(r²) e^{-r²/2} = D_k · ℓ̃_k(r²),  D_k = (Γ(k+n/2)/Γ(k+1))^{1/2},

where ℓ̃ is the normalized Laguerre function without its x^{α/2} factor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterator

import numpy as np
from scipy.optimize import brentq

from .hermite import hermite_1d
from .quadrature import build_rule, gauss_legendre_panels, halfwidth_for, power_weight

_BIG = 1e150
_LOG_BIG = math.log(_BIG)


def _check_type(alpha: float):
    if not alpha > -1:
        raise ValueError(f"Laguerre type must exceed -1, got {alpha}")


def _iterate(K: int, alpha: float, x: np.ndarray, include_power: bool) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    """Yield (mantissa, log-scale) of the normalized Laguerre functions of degree 0..K."""
    with np.errstate(divide="ignore"):
        logscale = -0.5 * x - 0.5 * math.lgamma(alpha + 1)
        if include_power and alpha != 0:
            logscale = logscale + 0.5 * alpha * np.log(x)
    a_prev = np.zeros_like(x)
    a = np.ones_like(x)
    yield a, logscale
    for k in range(K):
        a_next = ((2 * k + 1 + alpha - x) * a - math.sqrt(k * (k + alpha)) * a_prev) / math.sqrt(
            (k + 1) * (k + alpha + 1)
        )
        big = np.abs(a_next) > _BIG
        if big.any():
            a_next = np.where(big, a_next / _BIG, a_next)
            a = np.where(big, a / _BIG, a)
            logscale = logscale + np.where(big, _LOG_BIG, 0.0)
        a_prev, a = a, a_next
        yield a, logscale


def _finish(a, logscale):
    with np.errstate(invalid="ignore"):
        out = a * np.exp(logscale)
    return np.where(np.isneginf(logscale), 0.0, out)


def laguerre_fn(k: int, alpha: float, x, include_power: bool = True):
    """Normalized Laguerre function (k!/Γ(k+α+1))^{1/2} e^{-x/2} x^{α/2} L_k^α(x).

    With ``include_power=False`` the x^{α/2} factor is left out.
    """
    _check_type(alpha)
    if int(k) != k or k < 0:
        raise ValueError(f"degree must be a non-negative integer, got {k}")
    arr = np.asarray(x, dtype=float)
    flat = np.atleast_1d(arr).ravel()
    if np.any(flat < 0):
        raise ValueError("Laguerre functions are evaluated on x >= 0")
    for a, logscale in _iterate(int(k), alpha, flat, include_power):
        pass
    out = _finish(a, logscale).reshape(arr.shape)
    return float(out) if arr.ndim == 0 else out


def laguerre_all(K: int, alpha: float, x, include_power: bool = True) -> np.ndarray:
    """Rows for degrees 0..K; shape (K+1, len(x))."""
    _check_type(alpha)
    flat = np.atleast_1d(np.asarray(x, dtype=float)).ravel()
    out = np.empty((K + 1, flat.size))
    for k, (a, logscale) in enumerate(_iterate(K, alpha, flat, include_power)):
        out[k] = _finish(a, logscale)
    return out


def radial_scale(k: int, n: int) -> float:
    """D_k = (Γ(k+n/2)/Γ(k+1))^{1/2}."""
    return math.exp(0.5 * (math.lgamma(k + n / 2) - math.lgamma(k + 1)))


def radial_laguerre(k: int, n: int, r) -> np.ndarray:
    """𝔏_k(r) = L_k^{n/2-1}(r²) e^{-r²/2}."""
    r = np.asarray(r, dtype=float)
    return radial_scale(k, n) * laguerre_fn(k, n / 2 - 1, r * r, include_power=False)


def radial_rule(k: int, n: int, rmax: float | None = None, order: int = 24) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre panels on [0, rmax] resolving 𝔏_k; rmax defaults past the turning point."""
    N = 4 * k + n
    if rmax is None:
        rmax = halfwidth_for(2 * k + n) + 1.0
    width = min(0.25, 2 * math.pi / math.sqrt(N))
    panels = max(4, math.ceil(rmax / width))
    return gauss_legendre_panels(np.linspace(0.0, rmax, panels + 1), order)


@dataclass(frozen=True)
class RadialProfile:
    """f(x) = f0(|x|) on ℝⁿ."""

    f0: Callable[[np.ndarray], np.ndarray]
    n: int

    def __call__(self, r):
        return np.asarray(self.f0(np.asarray(r, dtype=float)))

    def on_points(self, x):
        x = np.asarray(x, dtype=float)
        return self(np.sqrt(np.sum(x * x, axis=-1)))


@dataclass
class RadialProjection:
    k: int
    n: int
    coefficient: float

    def __call__(self, r):
        """P_{2k} f at radius r."""
        return self.coefficient * radial_laguerre(self.k, self.n, r)


def _diverges_at_origin(f: RadialProfile, k: int, r0: float) -> bool:
    """Dyadic pieces of ∫ f0 𝔏_k r^{n-1} dr towards 0 stop shrinking when the integral diverges."""
    edges = r0 * 2.0 ** -np.arange(41)[::-1]
    x, w = gauss_legendre_panels(edges, 8)
    with np.errstate(all="ignore"):
        g = np.abs(f(x) * radial_laguerre(k, f.n, x) * x ** (f.n - 1)) * w
    if not np.all(np.isfinite(g)):
        return True
    pieces = g.reshape(40, 8).sum(axis=1)  # pieces[0] is the one closest to 0
    return bool(pieces[0] > 1e-300 and pieces[0] >= 0.5 * pieces[10])


def radial_project(f: RadialProfile, k: int, rmax: float | None = None) -> RadialProjection:
    """R_k = (2Γ(k+1)/Γ(k+n/2)) ∫ f0 𝔏_k r^{n-1} dr, so that P_{2k} f = R_k 𝔏_k(|x|)."""
    r, w = radial_rule(k, f.n, rmax)
    vals = f(r)
    if not np.all(np.isfinite(vals)):
        raise ValueError("radial profile is not finite on the quadrature nodes")
    integral = float(np.dot(w, vals * radial_laguerre(k, f.n, r) * r ** (f.n - 1)))
    if not math.isfinite(integral) or _diverges_at_origin(f, k, float(r[r > 0].min())):
        raise ValueError("radial integral diverges")
    return RadialProjection(k, f.n, 2.0 * integral / radial_scale(k, f.n) ** 2)


def laguerre_norm(k: int, q: float, n: int) -> float:
    """‖𝔏_k‖ in L^q([0, ∞), r^{n-1} dr); q = ∞ gives the sup-norm."""
    if q < 1:
        raise ValueError("q must be >= 1")
    r, w = radial_rule(k, n)
    vals = np.abs(radial_laguerre(k, n, r))
    if math.isinf(q):
        return float(vals.max())
    return float(np.dot(w, vals**q * r ** (n - 1)) ** (1 / q))


def laguerre_asymptotic(k: int, alpha: float, r):
    """Main term (2/π)^{1/2} (νr)^{-1/4} cos((νr)^{1/2} - απ/2 - π/4), ν = 4k+2α+2, 1/ν <= r <= 1."""
    _check_type(alpha)
    nu = 4 * k + 2 * alpha + 2
    rs = np.asarray(r, dtype=float)
    if np.any(rs < 1 / nu) or np.any(rs > 1):
        raise ValueError(f"r must lie in [1/ν, 1] = [{1 / nu:.4g}, 1]")
    val = math.sqrt(2 / math.pi) * (nu * rs) ** -0.25 * np.cos(np.sqrt(nu * rs) - alpha * math.pi / 2 - math.pi / 4)
    return float(val) if rs.ndim == 0 else val


def laguerre_asymptotic_error_scale(k: int, alpha: float, r):
    """Size (νr)^{-1/4} ν^{-1/2} r^{-1/2} of the asymptotic remainder."""
    nu = 4 * k + 2 * alpha + 2
    r = np.asarray(r, dtype=float)
    return (nu * r) ** -0.25 * (nu * r) ** -0.5


# ------------------------------------------------------------------ cosine sets


def _good_phase_intervals(lo: float, hi: float, half_width: float, center_period: float, centers_offset: float = 0.0):
    """Intervals of φ in [lo, hi] with dist(φ - offset, period·ℤ) <= half_width."""
    j0 = math.floor((lo - centers_offset) / center_period) - 1
    j1 = math.ceil((hi - centers_offset) / center_period) + 1
    out = []
    for j in range(j0, j1 + 1):
        c = centers_offset + j * center_period
        a, b = max(lo, c - half_width), min(hi, c + half_width)
        if b > a:
            out.append((a, b))
    return out


def _measure_from_phase(phase, inverse, x0, x1, intervals_fn):
    p0, p1 = phase(x0), phase(x1)
    lo, hi = min(p0, p1), max(p0, p1)
    total = 0.0
    for a, b in intervals_fn(lo, hi):
        total += abs(inverse(b) - inverse(a))
    return total


def laguerre_cosine_set_measure(k: int, alpha: float, interval: tuple[float, float] = (0.5, 1.0)) -> float:
    """|{r in interval : |cos(√ν r - απ/2 - π/4)| >= √2/2}|, ν = 4k+2α+2.

    The phase is linear in r, so the set is a union of explicit intervals.
    """
    _check_type(alpha)
    a, b = interval
    if not b > a:
        raise ValueError("need a non-empty interval")
    s = math.sqrt(4 * k + 2 * alpha + 2)
    shift = alpha * math.pi / 2 + math.pi / 4
    return _measure_from_phase(
        lambda r: s * r - shift,
        lambda p: (p + shift) / s,
        a,
        b,
        lambda lo, hi: _good_phase_intervals(lo, hi, math.pi / 4, math.pi),
    )


def hermite_phase(N: float, x):
    """(N(2θ - sin 2θ) - π)/4 with θ = arccos(x/√N)."""
    theta = np.arccos(np.asarray(x, dtype=float) / math.sqrt(N))
    return (N * (2 * theta - np.sin(2 * theta)) - math.pi) / 4


def hermite_cosine_set_measure(N: int, interval: tuple[float, float] | None = None) -> float:
    """|{x in [√N/2, √N/√2] : cos(phase_N(x)) >= √2/2}|.

    The phase decreases strictly in x, so each admissible phase window maps
    back to one x-interval found by bracketed root finding.
    """
    sq = math.sqrt(N)
    a, b = interval if interval is not None else (sq / 2, sq / math.sqrt(2))
    if not 0 <= a < b <= sq:
        raise ValueError("interval must lie inside [0, √N]")

    def inverse(p):
        pa, pb = float(hermite_phase(N, a)), float(hermite_phase(N, b))
        if abs(p - pa) < 1e-13 * max(1.0, abs(pa)):
            return a
        if abs(p - pb) < 1e-13 * max(1.0, abs(pb)):
            return b
        return brentq(lambda x: float(hermite_phase(N, x)) - p, a, b, xtol=1e-14, rtol=1e-15)

    return _measure_from_phase(
        lambda x: float(hermite_phase(N, x)),
        inverse,
        a,
        b,
        lambda lo, hi: _good_phase_intervals(lo, hi, math.pi / 4, 2 * math.pi),
    )


# ------------------------------------------------------------ counterexamples


@dataclass
class RadialCounterexample:
    k: int
    n: int
    p: float
    pairing: float  # ∫ f_k 𝔏_k r^{n-1} dr
    dual_norm_power: float  # ‖𝔏_k‖_{p'}^{p'}
    fk_norm: float  # ‖f_k‖_p
    quantity: float  # D_k^{-1} k^{-1/4} · pairing / ‖f_k‖_p

    @property
    def reference_exponent(self) -> float:
        return self.n * (0.5 - 1 / self.p) / 2 - 0.25


def counterexample_fk(p: float, n: int, k: int) -> RadialCounterexample:
    """f_k = sign(𝔏_k)|𝔏_k|^{1/(p-1)} and its normalized pairing with 𝔏_k."""
    if not p > 2:
        raise ValueError("the radial family is built for p > 2")
    if k < 1:
        raise ValueError("k must be >= 1")
    pp = p / (p - 1)
    r, w = radial_rule(k, n)
    L = radial_laguerre(k, n, r)
    fk = np.sign(L) * np.abs(L) ** (1 / (p - 1))
    rw = w * r ** (n - 1)
    pairing = float(np.dot(rw, fk * L))
    dual = float(np.dot(rw, np.abs(L) ** pp))
    fk_norm = float(np.dot(rw, np.abs(fk) ** p) ** (1 / p))
    q = pairing / fk_norm / radial_scale(k, n) / k**0.25
    return RadialCounterexample(k, n, p, pairing, dual, fk_norm, q)


@dataclass
class WeightedCounterexample:
    k: int
    n: int
    alpha: float
    diagonal_coefficient: float  # ⟨G_k, Φ_(k,0..0)⟩
    level_norm: float  # ‖χ_k(H) G_k‖₂
    level_weighted_norm: float  # ‖χ_k(H) G_k‖ in L²((1+|x|)^α)
    g_weighted_norm: float  # ‖g_k‖ in L²((1+|x|)^{-α}) = ‖G_k‖ in L²((1+|x|)^α)


def counterexample_gk(k: int, alpha: float, n: int = 2, y_halfwidth: float = 10.0, block: int = 256) -> WeightedCounterexample:
    """Level-k data of G_k = h_k(x₁)h_0(x₂)(1+|x|)^{-α} in ℝ² (n = 1 also accepted).

    Coefficients only need x₂ where h_0 lives, so they use a narrow x₂ window;
    the weighted norm of χ_k(H)G_k is summed in row blocks over the full grid.
    """
    if n not in (1, 2):
        raise ValueError("the weighted family is implemented for n = 1 and n = 2")
    if alpha < 0 or k < 0:
        raise ValueError("need k >= 0 and α >= 0")
    from .hermite import hermite_all

    rule = build_rule(k, alpha)
    x, wx = rule.nodes, rule.weights
    hk = hermite_1d(k, x)
    if n == 1:
        G = hk * power_weight(x, alpha)
        c = float(np.dot(wx, G * hk))
        lw = math.sqrt(c**2 * float(np.dot(wx, hk**2 * power_weight(x, alpha, +1))))
        return WeightedCounterexample(k, 1, alpha, c, abs(c), lw, math.sqrt(c))

    width = min(0.5, 2 * math.pi / math.sqrt(2 * k + 1))
    y, wy = gauss_legendre_panels(np.linspace(-y_halfwidth, y_halfwidth, 2 * math.ceil(y_halfwidth / width) + 1), 24)
    Hx = hermite_all(k, x)
    Hy_narrow = hermite_all(k, y)
    h0y = Hy_narrow[0]
    R = np.sqrt(x[:, None] ** 2 + y[None, :] ** 2)
    G = hk[:, None] * h0y[None, :] * (1.0 + R) ** (-alpha)
    M = (Hx * wx) @ G  # (k+1, len(y)): ∫ h_a(x₁) G dx₁
    b = np.arange(k + 1)
    coeffs = np.einsum("by,by->b", M[k - b], Hy_narrow[b] * wy)
    g_w = math.sqrt(float(np.einsum("x,xy,y->", wx, (hk[:, None] * h0y[None, :]) ** 2 * (1.0 + R) ** (-alpha), wy)))

    # χ_k(H)G_k = Σ_b c_b h_{k-b}(x₁) h_b(x₂) on the full tensor grid
    Hy = Hx
    left = (Hx[k - b] * coeffs[:, None]).T  # (len(x), k+1)
    total = 0.0
    for start in range(0, x.size, block):
        rows = slice(start, min(start + block, x.size))
        F = left[rows] @ Hy[b]
        wt = wx[rows, None] * wx[None, :] * (1.0 + np.hypot(x[rows, None], x[None, :])) ** alpha
        total += float(np.sum(F * F * wt))
    return WeightedCounterexample(k, 2, alpha, float(coeffs[0]), float(np.linalg.norm(coeffs)), math.sqrt(total), g_w)


# --------------------------------------------------------- polar level spectra


def polar_level_spectrum(k: int, weight: Callable[[np.ndarray], np.ndarray], rule_degree: int | None = None) -> dict[int, float]:
    """Eigenvalues of f ↦ P_k(w f) on the level-k eigenspace in ℝ² for a radial weight w(r).

    In polar form the level-k space is spanned by r^{|m|}L_j^{|m|}(r²)e^{-r²/2}e^{imθ}
    with 2j + |m| = k, and a radial weight is diagonal there.  The eigenvalue
    for |m| is ∫₀^∞ 𝓛_j^{|m|}(u)² w(√u) du, integrated in r with u = r².
    """
    rule = build_rule(k if rule_degree is None else rule_degree, 4.0)
    pos = rule.nodes > 0
    r, w = rule.nodes[pos], rule.weights[pos]
    u = r * r
    wr = weight(r) * 2 * r * w
    out = {}
    for m in range(k % 2, k + 1, 2):
        j = (k - m) // 2
        vals = laguerre_fn(j, float(m), u)
        out[m] = float(np.dot(wr, vals * vals))
    return out
