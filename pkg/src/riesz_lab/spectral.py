"""Functional calculus of H on truncated expansions.

A multiplier m acts by c(μ) ↦ m(2|μ|+n) c(μ).  On top of that sit the
Bochner-Riesz means, their maximal function over a finite R grid, the
square function built from narrow spectral bumps, dyadic Littlewood-Paley
pieces, the truncated wave kernel and the ν = 1 Weyl reconstruction of F(H)
from Riesz means of order 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from .hermite import hermite_all, multi_indices
from .quadrature import QuadratureRule, gauss_legendre_panels, halfwidth_for, power_weight
from .transform import Expansion, level_values

ArrayFn = Callable[[np.ndarray], np.ndarray]


def _mollifier(u):
    """exp(1 - 1/(1-u²)) on (-1, 1), zero outside; peak value 1 at u = 0."""
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    inside = np.abs(u) < 1
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - u[inside] ** 2))
    return out


def _mollifier_prime(u):
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    inside = np.abs(u) < 1
    ui = u[inside]
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - ui**2)) * (-2.0 * ui / (1.0 - ui**2) ** 2)
    return out


def square_bump(s):
    """The fixed bump φ of the square function: smooth, |φ| <= 1, supp φ = [1/8, 1/2]."""
    return _mollifier((np.asarray(s, dtype=float) - 5 / 16) / (3 / 16))


def _smooth_step(s):
    """C^∞ cutoff: 1 for s <= 1, 0 for s >= 3/2."""
    s = np.asarray(s, dtype=float)

    def g(u):
        return np.where(u > 0, np.exp(-1.0 / np.where(u > 0, u, 1.0)), 0.0)

    a, b = g(1.5 - s), g(s - 1.0)
    return a / (a + b)


def lp_bump(s):
    """Littlewood-Paley bump supported in [1, 3] with Σ_j φ(2^j s) = 1 for s > 0."""
    s = np.asarray(s, dtype=float)
    return _smooth_step(s / 2) - _smooth_step(s)


@dataclass(frozen=True)
class MultiplierProfile:
    """A scalar function m(E) on the spectrum, tagged with how it was built."""

    evaluator: ArrayFn
    kind: str = "custom"
    params: dict = field(default_factory=dict)

    def __call__(self, E):
        return np.asarray(self.evaluator(np.asarray(E, dtype=float)))


def positive_power(x, lam: float):
    """x_+^λ with the convention x_+^0 = 1 for x > 0 and 0 for x <= 0."""
    x = np.asarray(x, dtype=float)
    pos = x > 0
    out = np.zeros_like(x)
    out[pos] = x[pos] ** lam
    return out


def riesz_profile(lam: float, R: float) -> MultiplierProfile:
    if lam < 0:
        raise ValueError("Riesz means need λ >= 0; (1 - E/R²)_+^λ is undefined at E = R² for λ < 0")
    if R <= 0:
        raise ValueError("radius R must be positive")
    return MultiplierProfile(lambda E: positive_power(1.0 - E / R**2, lam), "riesz", {"lam": lam, "R": R})


def band_profile(a: float, b: float) -> MultiplierProfile:
    """Indicator of [a, b)."""
    return MultiplierProfile(lambda E: ((E >= a) & (E < b)).astype(float), "band", {"a": a, "b": b})


def _check_delta(delta: float):
    if not 0 < delta <= 0.5:
        raise ValueError(f"δ must lie in (0, 1/2], got {delta}")


def _check_support(phi: ArrayFn, lo: float, hi: float, name: str):
    probe = np.concatenate([np.linspace(lo - 2, lo, 200, endpoint=False), np.linspace(hi, hi + 4, 400)[1:]])
    probe = probe[(probe < lo) | (probe > hi)]
    if np.any(np.asarray(phi(probe)) != 0):
        raise ValueError(f"{name} must vanish outside [{lo}, {hi}]")
    inside = np.linspace(lo, hi, 401)
    if np.any(np.abs(np.asarray(phi(inside))) > 1 + 1e-12):
        raise ValueError(f"{name} must satisfy |φ| <= 1")


def bump_profile(delta: float, t: float, phi: ArrayFn = square_bump) -> MultiplierProfile:
    """φ(δ^{-1}(1 - E/t²)), the integrand of the square function at scale t."""
    _check_delta(delta)
    return MultiplierProfile(lambda E: phi((1.0 - E / t**2) / delta), "bump", {"delta": delta, "t": t})


def lp_profile(j: int, phi: ArrayFn = lp_bump) -> MultiplierProfile:
    return MultiplierProfile(lambda E: phi(2.0 ** (-j) * np.sqrt(E)), "lp", {"j": j})


def custom_profile(fn: ArrayFn, name: str = "custom") -> MultiplierProfile:
    return MultiplierProfile(fn, "custom", {"name": name})


def profile_from_config(kind: str, params: dict) -> MultiplierProfile:
    """Build a profile from a name + parameter mapping (CLI and service use)."""
    params = dict(params)
    if kind == "riesz":
        return riesz_profile(float(params["lam"]), float(params["R"]))
    if kind == "band":
        return band_profile(float(params["a"]), float(params["b"]))
    if kind == "bump":
        return bump_profile(float(params["delta"]), float(params["t"]))
    if kind == "lp":
        return lp_profile(int(params["j"]))
    if kind == "power":
        s = float(params["s"])
        return MultiplierProfile(lambda E: E**s, "power", {"s": s})
    raise ValueError(f"unknown multiplier profile {kind!r}")


def apply_multiplier(e: Expansion, m: MultiplierProfile | ArrayFn) -> Expansion:
    vals = np.asarray(m(e.eigenvalues.astype(float)))
    if not np.all(np.isfinite(vals)):
        raise ValueError("multiplier is not finite on the occurring eigenvalues")
    return e.with_coeffs(vals * e.coeffs)


def bochner_riesz(e: Expansion, lam: float, R: float) -> Expansion:
    return apply_multiplier(e, riesz_profile(lam, R))


def _as_fraction(p) -> Fraction | None:
    """None stands for p = ∞."""
    if isinstance(p, str):
        if p.strip().lower() in {"inf", "infinity", "∞"}:
            return None
        return Fraction(p.strip())
    if isinstance(p, float) and math.isinf(p):
        return None if p > 0 else Fraction(-1)
    if isinstance(p, float):
        return Fraction(str(p))
    return Fraction(p)


def critical_index(p, n: int) -> Fraction:
    """λ(p) = max{n|1/2 - 1/p| - 1/2, 0} as an exact fraction."""
    if n < 1:
        raise ValueError("dimension must be >= 1")
    pf = _as_fraction(p)
    if pf is not None and pf < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    inv = Fraction(0) if pf is None else 1 / pf
    return max(n * abs(Fraction(1, 2) - inv) - Fraction(1, 2), Fraction(0))


def ae_threshold(p, n: int) -> Fraction:
    """Order above which S_R^λ(H)f → f a.e. for f in L^p, p >= 2: λ(p)/2."""
    return critical_index(p, n) / 2


def riesz_factors(eigs, lam: float, radii) -> np.ndarray:
    """Matrix of (1 - E/R²)_+^λ, one row per radius."""
    eigs = np.asarray(eigs, dtype=float)
    radii = np.asarray(radii, dtype=float)
    return positive_power(1.0 - eigs[None, :] / radii[:, None] ** 2, lam)


def riesz_r_grid(K: int, n: int, per_octave: int = 8, kink_points: int = 6) -> np.ndarray:
    """Geometric R grid with extra radii just above each kink √(2k+n), plus a far radius."""
    lo, hi = math.sqrt(n) * 0.9, math.sqrt(2 * K + n) * 2.0
    octaves = math.log2(hi / lo)
    base = lo * 2.0 ** (np.arange(int(math.ceil(octaves * per_octave)) + 1) / per_octave)
    kinks = np.sqrt(2 * np.arange(K + 1) + n)
    offsets = np.geomspace(1e-3, 0.5, kink_points)
    near = (kinks[:, None] * np.sqrt(1 + offsets[None, :])).ravel()
    far = np.array([math.sqrt(2 * K + n) * 1e4])
    return np.unique(np.concatenate([base, near, far]))


@dataclass
class MaximalResult:
    values: np.ndarray
    r_grid: np.ndarray
    converged: bool
    refinement_delta: float


def riesz_maximal(e: Expansion, lam: float, r_grid, x) -> np.ndarray:
    """max over R in ``r_grid`` of |S_R^λ(H) f(x)| at points x."""
    r_grid = np.asarray(r_grid, dtype=float)
    if r_grid.size == 0:
        raise ValueError("empty R grid")
    if np.any(np.diff(r_grid) <= 0):
        raise ValueError("R grid must be strictly increasing")
    P = level_values(e, x)
    if P.shape[1] == 0:
        raise ValueError("empty x grid")
    kinds = 2 * np.arange(e.K + 1) + e.n
    F = riesz_factors(kinds, lam, r_grid)
    return np.abs(F @ P).max(axis=0)


def riesz_maximal_refined(e: Expansion, lam: float, x, tol: float = 1e-6) -> MaximalResult:
    """Maximal means on the default grid, compared against a twice-finer grid."""
    coarse = riesz_r_grid(e.K, e.n)
    fine = riesz_r_grid(e.K, e.n, per_octave=16, kink_points=12)
    v0 = riesz_maximal(e, lam, coarse, x)
    v1 = riesz_maximal(e, lam, fine, x)
    scale = max(float(np.max(np.abs(v1))), 1e-300)
    delta = float(np.max(np.abs(v1 - v0))) / scale
    return MaximalResult(v1, fine, delta <= tol, delta)


# ---------------------------------------------------------------- square function


def _bump_support_t(E, delta):
    """t-interval on which φ(δ^{-1}(1 - E/t²)) can be nonzero."""
    E = np.asarray(E, dtype=float)
    return np.sqrt(E / (1 - delta / 8)), np.sqrt(E / (1 - delta / 2))


def _pair_integrals(Ek, El, a, b, delta, phi, order, tol, max_panels=1024):
    """∫_a^b φ(δ^{-1}(1-Ek/t²)) φ(δ^{-1}(1-El/t²)) dt/t, vectorized over pairs."""
    x, w = np.polynomial.legendre.leggauss(order)
    prev = None
    panels = 1
    while True:
        u = (np.arange(panels)[:, None] + (x[None, :] + 1) / 2) / panels
        wt = np.tile(w / (2 * panels), panels)
        t = a[:, None] + (b - a)[:, None] * u.ravel()[None, :]
        f = phi((1 - Ek[:, None] / t**2) / delta) * phi((1 - El[:, None] / t**2) / delta) / t
        val = (f * wt[None, :]).sum(axis=1) * (b - a)
        if prev is not None:
            scale = max(float(np.max(np.abs(val), initial=0.0)), 1e-300)
            if float(np.max(np.abs(val - prev), initial=0.0)) <= tol * scale:
                return val
        if panels >= max_panels:
            return val
        prev = val
        panels *= 2


@dataclass
class SquareKernel:
    """t-integrated bump products A_kl for levels k, l, split at t = δ^{-1/2}."""

    delta: float
    eigs: np.ndarray
    total: np.ndarray
    low: np.ndarray
    high: np.ndarray


def square_function_kernel(
    eigs, delta: float, phi: ArrayFn = square_bump, order: int = 16, tol: float = 1e-8
) -> SquareKernel:
    _check_delta(delta)
    if phi is not square_bump:
        _check_support(phi, 1 / 8, 1 / 2, "φ")
    eigs = np.asarray(eigs, dtype=float)
    lo, hi = _bump_support_t(eigs, delta)
    k, l = np.triu_indices(eigs.size)
    a = np.maximum(lo[k], lo[l])
    b = np.minimum(hi[k], hi[l])
    keep = b > a
    k, l, a, b = k[keep], l[keep], a[keep], b[keep]
    t0 = delta**-0.5
    out = {}
    for name, aa, bb in (("low", a, np.minimum(b, t0)), ("high", np.maximum(a, t0), b)):
        mat = np.zeros((eigs.size, eigs.size))
        sel = bb > aa
        if sel.any():
            vals = _pair_integrals(eigs[k[sel]], eigs[l[sel]], aa[sel], bb[sel], delta, phi, order, tol)
            mat[k[sel], l[sel]] = vals
            mat[l[sel], k[sel]] = vals
        out[name] = mat
    return SquareKernel(delta, eigs, out["low"] + out["high"], out["low"], out["high"])


def bump_energy(E: float, delta: float, phi: ArrayFn = square_bump) -> float:
    """∫ |φ(δ^{-1}(1 - E/t²))|² dt/t for a single eigenvalue E."""
    return float(square_function_kernel([E], delta, phi).total[0, 0])


@dataclass
class SquareFunctionValues:
    total: np.ndarray
    low: np.ndarray
    high: np.ndarray


def _quad_form(A, P):
    # Re Σ_kl A_kl P_k conj(P_l), columnwise
    return np.real(np.einsum("kp,kl,lp->p", P, A, np.conj(P)))


def square_function(e: Expansion, delta: float, x, phi: ArrayFn = square_bump) -> SquareFunctionValues:
    """𝔖_δ f at points x, together with its low (t < δ^{-1/2}) and high parts."""
    P = level_values(e, x)
    ker = square_function_kernel(2 * np.arange(e.K + 1) + e.n, delta, phi)
    vals = [np.sqrt(np.maximum(_quad_form(A, P), 0.0)) for A in (ker.total, ker.low, ker.high)]
    return SquareFunctionValues(*vals)


def weighted_level_gram(e: Expansion, rule: QuadratureRule, alpha: float, sign: int) -> np.ndarray:
    """G_kl = ∫ P_k f conj(P_l f) (1+|x|)^{sign α} dx on the tensor grid of ``rule``."""
    pts, w = rule.tensor(e.n)
    P = level_values(e, pts)
    ww = w * power_weight(pts if e.n > 1 else pts[:, 0], alpha, sign)
    return (P * ww) @ np.conj(P).T


@dataclass
class SquareNorms:
    total: float
    low: float
    high: float
    f_norm_sq: float


def square_function_weighted_norms(
    e: Expansion,
    delta: float,
    alpha: float,
    rule: QuadratureRule,
    sign: int = -1,
    phi: ArrayFn = square_bump,
    kernel: SquareKernel | None = None,
    gram: np.ndarray | None = None,
) -> SquareNorms:
    """‖𝔖_δ f‖² in L²((1+|x|)^{sign α}) (total/low/high) and ‖f‖² in the same space."""
    G = weighted_level_gram(e, rule, alpha, sign) if gram is None else gram
    ker = square_function_kernel(2 * np.arange(e.K + 1) + e.n, delta, phi) if kernel is None else kernel
    return SquareNorms(
        float(np.real(np.sum(ker.total * G))),
        float(np.real(np.sum(ker.low * G))),
        float(np.real(np.sum(ker.high * G))),
        float(np.real(np.sum(G))),
    )


def square_bound_factor(delta: float, alpha: float, n: int, eps: float = 0.05) -> float:
    """δ · A^ε_{α,n}(δ): δ^{1-ε} for n = 1, δ^{1 + (1-α)/2} for n >= 2, α > 1."""
    if n == 1:
        return delta ** (1 - eps)
    if alpha <= 1:
        raise ValueError("for n >= 2 the square-function bound is stated for 1 < α < n")
    return delta * delta ** (0.5 - alpha / 2)


# ------------------------------------------------------------- Littlewood-Paley


def littlewood_paley(e: Expansion, j: int, phi: ArrayFn = lp_bump) -> Expansion:
    """Apply φ(2^{-j} √H)."""
    if phi is not lp_bump:
        _check_support(phi, 1.0, 3.0, "Littlewood-Paley φ")
    return apply_multiplier(e, lp_profile(j, phi))


def lp_scales(K: int, n: int) -> range:
    """Scales j for which some φ(2^{-j}√E), E <= 2K+n, can be nonzero."""
    lo = math.floor(math.log2(math.sqrt(n) / 3)) - 1
    hi = math.ceil(math.log2(math.sqrt(2 * K + n))) + 1
    return range(lo, hi + 1)


# ------------------------------------------------------------------ wave kernel


def _eigen_matrix(K: int, pts: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Rows Φ_μ(points) for |μ| <= K and the matching eigenvalues."""
    if n == 1:
        pts = np.asarray(pts, dtype=float).reshape(-1)
        return hermite_all(K, pts), 2.0 * np.arange(K + 1) + 1
    pts = np.asarray(pts, dtype=float).reshape(-1, n)
    idx = multi_indices(n, K)
    prod = np.ones((len(idx), pts.shape[0]))
    for i in range(n):
        prod *= hermite_all(K, pts[:, i])[idx[:, i]]
    return prod, 2.0 * idx.sum(axis=1) + n


def wave_kernel(t: float, grid, K: int, n: int = 1, taper: ArrayFn | None = None) -> np.ndarray:
    """Σ_{k<=K} cos(t√(2k+n)) Σ_{|μ|=k} Φ_μ(x)Φ_μ(y) on grid × grid.

    ``taper``, if given, multiplies the spectral weights by taper(E / (2K+n));
    the default is the plain sharp truncation.
    """
    if t < 0:
        raise ValueError("time must be non-negative")
    Phi, E = _eigen_matrix(K, grid, n)
    c = np.cos(t * np.sqrt(E))
    if taper is not None:
        c = c * taper(E / (2 * K + n))
    return (Phi.T * c) @ Phi


@dataclass
class WaveMass:
    K: int
    t: float
    radius: float
    outside: float
    total: float

    @property
    def relative(self) -> float:
        return self.outside / self.total


def wave_outside_mass(
    t: float, K: int, margin: float = 0.1, taper: ArrayFn | None = None, block: int = 512
) -> WaveMass:
    """Hilbert-Schmidt mass of the n = 1 truncated kernel of cos(t√H) off |x - y| <= t + margin.

    Uses a uniform grid with spacing π / (3√(2K+1)) on [-L, L]; the kernel
    is assembled in row blocks so memory stays at block × grid size.
    """
    if t < 0:
        raise ValueError("time must be non-negative")
    L = halfwidth_for(K)
    h = math.pi / (3 * math.sqrt(2 * K + 1))
    m = int(math.ceil(2 * L / h)) + 1
    x = np.linspace(-L, L, m)
    h = x[1] - x[0]
    Phi = hermite_all(K, x)
    E = 2.0 * np.arange(K + 1) + 1
    c = np.cos(t * np.sqrt(E))
    if taper is not None:
        c = c * taper(E / (2 * K + 1))
    radius = t + margin
    outside = total = 0.0
    right = Phi * c[:, None]
    for start in range(0, m, block):
        rows = slice(start, min(start + block, m))
        Kb = Phi[:, rows].T @ right
        sq = Kb * Kb
        total += sq.sum()
        far = np.abs(x[rows, None] - x[None, :]) > radius
        outside += sq[far].sum()
    return WaveMass(K, t, radius, outside * h * h, total * h * h)


# -------------------------------------------------------------- Weyl identity


@dataclass(frozen=True)
class CompactProfile:
    """Function F with compact support [a, b] ⊂ [0, ∞) and its derivative."""

    func: ArrayFn
    deriv: ArrayFn
    support: tuple[float, float]

    def __call__(self, s):
        return self.func(np.asarray(s, dtype=float))


def shifted_bump(center: float, radius: float = 1.0, height: float = 1.0) -> CompactProfile:
    """η((s - center)/radius) with η(0) = 1, supp η = [-1, 1]."""
    return CompactProfile(
        lambda s: height * _mollifier((np.asarray(s, dtype=float) - center) / radius),
        lambda s: height * _mollifier_prime((np.asarray(s, dtype=float) - center) / radius) / radius,
        (center - radius, center + radius),
    )


def riesz_from_weyl(
    F: CompactProfile, e: Expansion, nu: int = 1, order: int = 32, subdivisions: int = 8
) -> Expansion:
    """Rebuild F(H)f as ∫ F^{(1)}(R) S^0_{√R}(H) f dR with F^{(1)} = -F'.

    The R integral uses Gauss-Legendre panels on supp F split at every
    eigenvalue, where R ↦ S^0_{√R}(H) jumps.  Each piece is cut into
    ``subdivisions`` panels since bump profiles flatten sharply near their
    support ends.
    """
    if nu != 1:
        raise ValueError("only the order-one Weyl derivative is implemented")
    a, b = F.support
    if not (math.isfinite(a) and math.isfinite(b)) or a < 0 or b <= a:
        raise ValueError("F must have compact support inside [0, ∞)")
    eigs = np.unique(e.eigenvalues.astype(float))
    edges = np.unique(np.concatenate([[a, b], eigs[(eigs > a) & (eigs < b)]]))
    edges = np.unique(np.concatenate([np.linspace(lo, hi, subdivisions + 1) for lo, hi in zip(edges[:-1], edges[1:])]))
    R, w = gauss_legendre_panels(edges, order)
    weyl = -np.asarray(F.deriv(R))
    acc = np.zeros_like(e.coeffs, dtype=np.result_type(e.coeffs, float))
    for Rq, wq in zip(R, w * weyl):
        if wq == 0:
            continue
        acc = acc + wq * bochner_riesz(e, 0.0, math.sqrt(Rq)).coeffs
    return e.with_coeffs(acc)
