import math
from fractions import Fraction

import numpy as np
import pytest
import sympy as sp
from scipy import integrate

from riesz_lab.hermite import hermite_1d, hermite_nd
from riesz_lab.quadrature import build_rule
from riesz_lab.spectral import (
    MultiplierProfile,
    ae_threshold,
    apply_multiplier,
    band_profile,
    bochner_riesz,
    bump_energy,
    critical_index,
    custom_profile,
    littlewood_paley,
    lp_bump,
    lp_scales,
    profile_from_config,
    riesz_from_weyl,
    riesz_maximal,
    riesz_maximal_refined,
    riesz_r_grid,
    shifted_bump,
    CompactProfile,
    square_bump,
    square_function,
    square_function_kernel,
    square_function_weighted_norms,
    wave_kernel,
    wave_outside_mass,
)
from riesz_lab.transform import Expansion, random_expansion, synthesize


def test_identity_multiplier(rng):
    e = random_expansion(2, 6, rng)
    out = apply_multiplier(e, custom_profile(lambda E: np.ones_like(E)))
    np.testing.assert_array_equal(out.coeffs, e.coeffs)


def test_band_keeps_one_level(rng):
    e = random_expansion(1, 10, rng)
    out = apply_multiplier(e, band_profile(7, 8))
    keep = e.eigenvalues == 7
    np.testing.assert_array_equal(out.coeffs[keep], e.coeffs[keep])
    assert np.all(out.coeffs[~keep] == 0)


def test_composition_law(rng):
    e = random_expansion(2, 8, rng)
    inv = custom_profile(lambda E: 1 / E)
    twice = apply_multiplier(apply_multiplier(e, inv), inv)
    once = apply_multiplier(e, custom_profile(lambda E: E**-2.0))
    np.testing.assert_allclose(twice.coeffs, once.coeffs, rtol=1e-15)


def test_non_finite_multiplier_rejected():
    with pytest.raises(ValueError), np.errstate(divide="ignore"):
        apply_multiplier(Expansion.unit((0,)), custom_profile(lambda E: 1 / (E - 1)))


def test_riesz_factor_half():
    out = bochner_riesz(Expansion.unit((0,)), 1.0, math.sqrt(2))
    assert out.coeffs[0] == pytest.approx(0.5, rel=1e-15)


def test_riesz_truncates_above_radius(rng):
    e = random_expansion(1, 12, rng)
    out = bochner_riesz(e, 0.7, 3.0)
    assert np.all(out.coeffs[e.eigenvalues >= 9] == 0)


def test_riesz_order_zero_large_radius_is_identity(rng):
    e = random_expansion(2, 7, rng)
    out = bochner_riesz(e, 0.0, math.sqrt(2 * 7 + 2) + 0.01)
    np.testing.assert_array_equal(out.coeffs, e.coeffs)


def test_riesz_rejects_negative_order():
    with pytest.raises(ValueError):
        bochner_riesz(Expansion.unit((0,)), -0.5, 2.0)


def test_riesz_monotone_convergence_with_rate(rng):
    e = random_expansion(1, 20, rng)
    lam, Emax = 1.5, 41
    prev = np.zeros_like(e.coeffs)
    for R in [7.0, 9.0, 15.0, 40.0, 200.0]:
        c = bochner_riesz(e, lam, R).coeffs
        assert np.all(np.abs(c) >= np.abs(prev) - 1e-15)
        err = np.linalg.norm(c - e.coeffs)
        assert err <= (1 - (1 - Emax / R**2) ** lam) * e.norm() + 1e-14
        prev = c


@pytest.mark.parametrize(
    "p,n,lam",
    [(2, 1, Fraction(0)), (2, 7, Fraction(0)), ("inf", 2, Fraction(1, 2)), (4, 3, Fraction(1, 4)), (1, 3, Fraction(1))],
)
def test_critical_index_values(p, n, lam):
    assert critical_index(p, n) == lam
    assert ae_threshold(p, n) == lam / 2


def test_critical_index_float_and_errors():
    assert critical_index(math.inf, 2) == Fraction(1, 2)
    assert critical_index(4.0, 3) == Fraction(1, 4)
    with pytest.raises(ValueError):
        critical_index(0.5, 2)


def test_critical_index_symbolic_oracle():
    P, N = sp.symbols("p n", positive=True)
    formula = sp.Max(N * sp.Abs(sp.Rational(1, 2) - 1 / P) - sp.Rational(1, 2), 0)
    for n in range(1, 7):
        for p in [1, Fraction(4, 3), 2, Fraction(5, 2), 3, 4, 6, 10]:
            exact = formula.subs({P: sp.Rational(p.numerator, p.denominator) if isinstance(p, Fraction) else p, N: n})
            assert critical_index(p, n) == Fraction(str(sp.nsimplify(exact)))


def test_riesz_maximal_single_eigenfunction():
    e = Expansion.unit((3,), K=3)
    x = np.linspace(-3, 3, 13)
    vals = riesz_maximal(e, 1.0, riesz_r_grid(3, 1), x)
    np.testing.assert_allclose(vals, np.abs(hermite_1d(3, x)), rtol=1e-7, atol=1e-15)


def test_riesz_maximal_order_zero_dominates(rng):
    e = random_expansion(1, 10, rng)
    x = np.linspace(-4, 4, 31)
    vals = riesz_maximal(e, 0.0, riesz_r_grid(10, 1), x)
    assert np.all(vals >= np.abs(synthesize(e, x)) - 1e-13)


def test_riesz_maximal_brute_force_grid():
    e = Expansion.from_dict(1, 1, {(0,): 1.0, (1,): -0.7})
    radii = [math.sqrt(2), math.sqrt(3), math.sqrt(5)]
    x = np.linspace(-2, 2, 9)
    brute = np.max([np.abs(synthesize(bochner_riesz(e, 0.5, R), x)) for R in radii], axis=0)
    np.testing.assert_allclose(riesz_maximal(e, 0.5, radii, x), brute, rtol=1e-15)


def test_riesz_maximal_grid_errors():
    e = Expansion.unit((0,))
    with pytest.raises(ValueError):
        riesz_maximal(e, 1.0, [], [0.0])
    with pytest.raises(ValueError):
        riesz_maximal(e, 1.0, [2.0, 1.0], [0.0])


def test_riesz_maximal_refinement_monotone(rng):
    e = random_expansion(1, 8, rng)
    res = riesz_maximal_refined(e, 1.0, np.linspace(-3, 3, 21))
    coarse = riesz_maximal(e, 1.0, riesz_r_grid(8, 1), np.linspace(-3, 3, 21))
    assert np.all(res.values >= coarse - 1e-15)
    assert res.refinement_delta >= 0


def test_square_bump_properties():
    s = np.linspace(-1, 2, 3001)
    v = square_bump(s)
    assert np.all(v[(s <= 1 / 8) | (s >= 1 / 2)] == 0)
    assert np.max(np.abs(v)) <= 1
    assert square_bump(5 / 16) == pytest.approx(1.0)


def test_square_function_zero():
    sv = square_function(Expansion.zeros(1, 5), 0.2, np.linspace(-2, 2, 5))
    assert np.all(sv.total == 0)


def test_square_function_eigenfunction_oracle():
    E, d = 9, 0.15
    e = Expansion.unit((4,), K=6)
    energy = integrate.quad(
        lambda t: square_bump((1 - E / t**2) / d) ** 2 / t, math.sqrt(E / (1 - d / 8)), math.sqrt(E / (1 - d / 2)),
        epsabs=1e-15, epsrel=1e-13,
    )[0]
    x = np.linspace(-3, 3, 11)
    sv = square_function(e, d, x)
    np.testing.assert_allclose(sv.total, np.abs(hermite_1d(4, x)) * math.sqrt(energy), rtol=1e-8, atol=1e-15)
    assert bump_energy(E, d) == pytest.approx(energy, rel=1e-8)


def test_square_function_kernel_finite_and_symmetric():
    ker = square_function_kernel(2 * np.arange(20) + 1, 0.3)
    assert np.all(np.isfinite(ker.total))
    np.testing.assert_allclose(ker.total, ker.total.T, atol=1e-16)


def test_square_function_kernel_is_split_exactly():
    ker = square_function_kernel(2 * np.arange(40) + 1, 0.05)
    np.testing.assert_allclose(ker.total, ker.low + ker.high, atol=1e-16)


def test_square_function_errors():
    e = Expansion.unit((0,))
    with pytest.raises(ValueError):
        square_function(e, 0.7, [0.0])
    with pytest.raises(ValueError):
        square_function(e, 0.0, [0.0])
    with pytest.raises(ValueError):
        square_function(e, 0.2, [0.0], phi=lambda s: np.where((s > 0) & (s < 1), 0.5, 0.0))


def test_square_weighted_norm_matches_pointwise(rng):
    e = random_expansion(1, 20, rng)
    rule = build_rule(20, 1.0)
    norms = square_function_weighted_norms(e, 0.1, 1.0, rule)
    sv = square_function(e, 0.1, rule.nodes)
    direct = rule.integrate(sv.total**2 * (1 + np.abs(rule.nodes)) ** -1.0)
    assert norms.total == pytest.approx(direct, rel=1e-10)


def test_wave_kernel_time_zero_reproduces_bandlimited(rng):
    K = 12
    rule = build_rule(K)
    Kmat = wave_kernel(0.0, rule.nodes, K)
    e = random_expansion(1, K, rng)
    f = synthesize(e, rule.nodes)
    np.testing.assert_allclose(Kmat @ (rule.weights * f), f, atol=1e-12)


def test_wave_kernel_two_terms_by_hand():
    x = np.linspace(-2, 2, 7)
    t = 0.8
    hand = np.cos(t) * np.outer(hermite_1d(0, x), hermite_1d(0, x)) + np.cos(t * math.sqrt(3)) * np.outer(
        hermite_1d(1, x), hermite_1d(1, x)
    )
    np.testing.assert_allclose(wave_kernel(t, x, 1), hand, atol=1e-15)


def test_wave_kernel_two_dimensional_points():
    pts = np.array([[0.1, -0.3], [1.0, 0.5], [-0.7, 0.2]])
    K = 3
    Kmat = wave_kernel(0.4, pts, K, n=2)
    hand = np.zeros((3, 3))
    for a in range(K + 1):
        for b in range(K + 1 - a):
            v = hermite_nd((a, b), pts)
            hand += math.cos(0.4 * math.sqrt(2 * (a + b) + 2)) * np.outer(v, v)
    np.testing.assert_allclose(Kmat, hand, atol=1e-14)


def test_wave_kernel_rejects_negative_time():
    with pytest.raises(ValueError):
        wave_kernel(-1.0, np.zeros(3), 2)


def test_wave_mass_decreases_for_several_times():
    for t in (0.5, 1.0, 2.0):
        masses = [wave_outside_mass(t, K).relative for K in (64, 256)]
        assert masses[1] < masses[0]


def test_lp_partition_of_unity(rng):
    e = random_expansion(1, 60, rng)
    total = sum(littlewood_paley(e, j).coeffs for j in lp_scales(60, 1))
    np.testing.assert_allclose(total, e.coeffs, atol=1e-10)


def test_lp_bump_support():
    s = np.linspace(0, 5, 5001)
    v = lp_bump(s)
    assert np.all(v[(s <= 1) | (s >= 3)] == 0)
    s = np.geomspace(0.01, 100, 500)
    np.testing.assert_allclose(sum(lp_bump(2.0**j * s) for j in range(-10, 10)), 1.0, atol=1e-14)


def test_lp_disjoint_scales(rng):
    e = random_expansion(1, 200, rng)
    for j in range(0, 6):
        for k in range(j + 2, 8):
            a = littlewood_paley(e, j).coeffs != 0
            b = littlewood_paley(e, k).coeffs != 0
            assert not np.any(a & b)


def test_lp_single_level_hits_at_most_two_scales():
    for level in range(0, 300, 7):
        e = Expansion.unit((level,))
        hits = [j for j in lp_scales(level, 1) if littlewood_paley(e, j).coeffs[-1] != 0]
        assert 1 <= len(hits) <= 2
        assert len(hits) < 2 or hits[1] == hits[0] + 1


def test_lp_support_violation():
    with pytest.raises(ValueError):
        littlewood_paley(Expansion.unit((0,)), 0, phi=lambda s: np.exp(-s * s))


def test_weyl_single_eigenvalue_reproduces_value():
    F = shifted_bump(5.3, 1.0)
    e = Expansion.unit((2,))
    out = riesz_from_weyl(F, e)
    assert out.coeffs[-1] == pytest.approx(float(F(5.0)), abs=1e-10)


def test_weyl_bump_selects_level(rng):
    e = random_expansion(1, 10, rng)
    k = 4
    F = shifted_bump(2 * k + 1, 1.0)
    out = riesz_from_weyl(F, e)
    expected = np.where(e.eigenvalues == 2 * k + 1, e.coeffs, 0.0)
    np.testing.assert_allclose(out.coeffs, expected, atol=1e-9)


def test_weyl_zero_profile(rng):
    Z = CompactProfile(lambda s: np.zeros_like(s), lambda s: np.zeros_like(s), (0.0, 4.0))
    out = riesz_from_weyl(Z, random_expansion(1, 5, rng))
    assert np.all(out.coeffs == 0)


def test_weyl_errors():
    bad = CompactProfile(lambda s: s, lambda s: np.ones_like(s), (0.0, math.inf))
    with pytest.raises(ValueError):
        riesz_from_weyl(bad, Expansion.unit((0,)))
    with pytest.raises(ValueError):
        riesz_from_weyl(shifted_bump(3.0), Expansion.unit((0,)), nu=2)


def test_profile_from_config():
    e = Expansion.unit((1,))
    assert apply_multiplier(e, profile_from_config("riesz", {"lam": 1, "R": 2})).coeffs[-1] == pytest.approx(0.25)
    assert isinstance(profile_from_config("band", {"a": 0, "b": 4}), MultiplierProfile)
    with pytest.raises(ValueError):
        profile_from_config("nope", {})
