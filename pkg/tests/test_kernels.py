"""Kernel evaluation oracles and structural properties."""
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stableheat.kernels import (
    KernelParams,
    QuadratureSpec,
    TruncatedEstimate,
    correlation_integral_full,
    correlation_integral_full_exact,
    correlation_integral_truncated,
    kernel_closed_form,
    kernel_sample,
    kernel_spectral,
    riesz,
    riesz_fourier_constant,
    suggest_quadrature,
)

RNG = np.random.default_rng

# Closed-form values frozen from high-precision evaluation of the Gaussian
# and Cauchy densities.
CLOSED_FORM_CASES = [
    # (alpha, nu, dim, t, point, value)
    (2.0, 1.0, 1, 1.0, [0.0], 0.282094791774),
    (2.0, 1.0, 1, 1.0, [2.0], 0.103776874355),
    (1.0, 1.0, 1, 1.0, [0.0], 0.318309886184),
    (1.0, 1.0, 1, 1.0, [10.0], 0.00315158303152),
    (1.0, 1.0, 1, 0.5, [1.0], 0.127323954474),
    (2.0, 1.0, 2, 1.0, [0.0, 0.0], 0.0795774715459),
    (2.0, 1.0, 2, 0.5, [1.0, 1.0], 0.0585498315243),
]


@pytest.mark.parametrize("alpha,nu,dim,t,point,value", CLOSED_FORM_CASES)
def test_closed_form_oracles(alpha, nu, dim, t, point, value):
    kp = KernelParams(alpha=alpha, nu=nu, dim=dim)
    got = kernel_closed_form(t, point, kp)
    assert got == pytest.approx(value, rel=1e-10)


@pytest.mark.parametrize("alpha,nu,dim,t,point,value", CLOSED_FORM_CASES)
def test_spectral_matches_closed_forms(alpha, nu, dim, t, point, value):
    kp = KernelParams(alpha=alpha, nu=nu, dim=dim)
    quad = suggest_quadrature(t, kp)
    got = float(kernel_spectral(t, point, kp, quad)[0])
    assert got == pytest.approx(value, rel=1e-6)


def test_no_closed_form_outside_special_cases():
    with pytest.raises(ValueError):
        kernel_closed_form(1.0, [0.0], KernelParams(alpha=1.5))
    with pytest.raises(ValueError):
        kernel_closed_form(1.0, [0.0, 0.0], KernelParams(alpha=1.0, dim=2))


def test_rejects_nonpositive_time():
    kp = KernelParams(alpha=2.0)
    quad = QuadratureSpec(mode_count=64, cutoff=20.0)
    with pytest.raises(ValueError):
        kernel_spectral(0.0, [0.0], kp, quad)
    with pytest.raises(ValueError):
        kernel_closed_form(-1.0, [0.0], kp)


def test_rejects_unresolvable_cutoff():
    kp = KernelParams(alpha=2.0)
    # at t=1e-4 a cutoff of 20 leaves most of the spectral mass outside
    quad = QuadratureSpec(mode_count=256, cutoff=20.0)
    with pytest.raises(ValueError):
        kernel_spectral(1e-4, [0.0], kp, quad)


def test_warns_on_coarse_spacing():
    kp = KernelParams(alpha=2.0)
    quad = QuadratureSpec(mode_count=16, cutoff=200.0)  # spacing 25
    with pytest.warns(RuntimeWarning):
        kernel_spectral(1e-2, [0.0], kp, quad)


def test_kernel_positive_symmetric_unimodal():
    kp = KernelParams(alpha=1.5)
    quad = suggest_quadrature(0.7, kp, mode_count=2 ** 18)
    xs = np.linspace(0.0, 8.0, 33)
    vals = kernel_spectral(0.7, xs, kp, quad)
    mirror = kernel_spectral(0.7, -xs, kp, quad)
    assert np.all(vals > 0.0)
    assert np.allclose(vals, mirror, rtol=1e-12, atol=1e-15)
    assert np.all(np.diff(vals) < 0.0)


def test_kernel_mass_one():
    # integrate the spectral evaluation over x; heavy tail handled by the
    # known t*|x|^-(1+alpha) envelope beyond the numeric window
    kp = KernelParams(alpha=1.5)
    quad = suggest_quadrature(1.0, kp, mode_count=2 ** 18)
    xs = np.linspace(0.0, 60.0, 2001)
    vals = kernel_spectral(1.0, xs, kp, quad)
    mass = 2.0 * np.trapezoid(vals, xs)
    # tail integral estimate from the asymptotic envelope c*t/|x|^(1+alpha)
    c = math.sin(math.pi * kp.alpha / 2) * math.gamma(1 + kp.alpha) / math.pi
    tail = 2.0 * c / (kp.alpha * 60.0 ** kp.alpha)
    assert mass + tail == pytest.approx(1.0, abs=5e-4)


def test_scaling_identity_shared_rule():
    # p_t(x) = a^d p_{a^alpha t}(a x) evaluated under one shared rule
    quad = QuadratureSpec(mode_count=2 ** 20, cutoff=100.0)
    for alpha in (0.7, 1.5, 2.0):
        kp = KernelParams(alpha=alpha)
        lhs = kernel_spectral(1.3, [0.5], kp, quad)[0]
        rhs = 1.6 * kernel_spectral(1.6 ** alpha * 1.3, [1.6 * 0.5], kp, quad)[0]
        assert lhs == pytest.approx(rhs, abs=5e-7)


def test_sampler_matches_density():
    # empirical CDF of CMS draws against the numeric density, alpha=1.5
    kp = KernelParams(alpha=1.5)
    t = 1.0
    draws = kernel_sample(t, kp, 200_000, RNG(7))
    quad = suggest_quadrature(t, kp, mode_count=2 ** 18)
    for x in (0.5, 2.0):
        xs = np.linspace(-40.0, x, 4001)
        cdf = np.trapezoid(kernel_spectral(t, xs, kp, quad), xs)
        # missing lower tail below -40
        c = math.sin(math.pi * 0.75) * math.gamma(2.5) / math.pi
        cdf += c / (1.5 * 40.0 ** 1.5)
        emp = (draws <= x).mean()
        se = math.sqrt(cdf * (1 - cdf) / draws.size)
        assert abs(emp - cdf) < 5 * se + 1e-4


@given(st.floats(0.05, 0.95), st.floats(0.1, 10.0))
@settings(max_examples=50, deadline=None)
def test_riesz_scaling_property(beta, r):
    # f(c x) = c^-beta f(x)
    base = riesz([[r]], beta)[0]
    assert riesz([[2.0 * r]], beta)[0] == pytest.approx(2.0 ** -beta * base)
    assert base > 0.0


def test_riesz_rejects_origin_and_bad_beta():
    with pytest.raises(ValueError):
        riesz([[0.0]], 0.5)
    with pytest.raises(ValueError):
        riesz([[1.0]], 1.5)
    with pytest.raises(ValueError):
        riesz([[1.0, 1.0]], 2.5)


def test_riesz_fourier_constant_values():
    assert riesz_fourier_constant(1, 0.5) == pytest.approx(
        math.sqrt(2.0 * math.pi), rel=1e-12)
    assert riesz_fourier_constant(2, 1.0) == pytest.approx(
        2.0 * math.pi, rel=1e-12)


# Frozen from the exact radial reduction of int p_2t f (Gamma closed form).
FULL_ORACLES = [
    # (t, alpha, beta, nu, dim, value)
    (1.0, 2.0, 0.5, 1.0, 1, 1.21628021426),
    (2.0, 2.0, 0.5, 1.0, 1, 1.02276567211),
    (1.0, 1.5, 0.5, 1.0, 1, 1.13101462263),
    (1.0, 2.0, 1.0, 1.0, 2, 0.626657068658),
]


@pytest.mark.parametrize("t,alpha,beta,nu,dim,value", FULL_ORACLES)
def test_full_integral_exact_oracles(t, alpha, beta, nu, dim, value):
    kp = KernelParams(alpha=alpha, nu=nu, dim=dim)
    assert correlation_integral_full_exact(t, kp, beta) == pytest.approx(
        value, rel=1e-10)


@pytest.mark.parametrize("t,alpha,beta,nu,dim,value", FULL_ORACLES)
def test_full_integral_quadrature(t, alpha, beta, nu, dim, value):
    kp = KernelParams(alpha=alpha, nu=nu, dim=dim)
    n = 2 ** 17 if dim == 1 else 1024
    quad = suggest_quadrature(2.0 * t, kp, mode_count=n)
    got = correlation_integral_full(t, kp, beta, quad)
    assert got == pytest.approx(value, rel=2e-3)


def test_full_integral_time_slope():
    # the overlap decays like t^(-beta/alpha)
    kp = KernelParams(alpha=2.0)
    beta = 0.5
    ts = np.array([0.5, 1.0, 2.0, 4.0])
    vals = [correlation_integral_full(t, kp, beta,
                                      suggest_quadrature(2 * t, kp, 2 ** 16))
            for t in ts]
    slope = np.polyfit(np.log(ts), np.log(vals), 1)[0]
    assert slope == pytest.approx(-beta / kp.alpha, abs=0.01)


def test_truncated_outer_outer_limits():
    # R -> 0 recovers the full integral; outer_inner collapses instead
    kp = KernelParams(alpha=2.0)
    beta = 0.5
    full = correlation_integral_full_exact(1.0, kp, beta)
    est = correlation_integral_truncated(1.0, 1e-9, kp, beta, "outer_outer",
                                         400_000, RNG(11))
    assert est.value == pytest.approx(full, rel=0.05)
    inner = correlation_integral_truncated(1.0, 1e-9, kp, beta, "outer_inner",
                                           400_000, RNG(11))
    assert inner.value < 0.01 * full


def test_truncated_cases_partition():
    # outer_outer + outer_inner = outer x everything, same draws
    kp = KernelParams(alpha=2.0)
    a = correlation_integral_truncated(1.0, 2.0, kp, 0.5, "outer_outer",
                                       200_000, RNG(3))
    b = correlation_integral_truncated(1.0, 2.0, kp, 0.5, "outer_inner",
                                       200_000, RNG(3))
    # same seed means same draws, so the sum equals the unrestricted mean
    # over the outer-y event exactly
    g = RNG(3)
    y = kernel_sample(1.0, kp, 200_000, g)
    w = kernel_sample(1.0, kp, 200_000, g)
    ref = (np.abs(y - w) ** -0.5 * (np.abs(y) > 2.0)).mean()
    assert a.value + b.value == pytest.approx(ref, rel=1e-12)


def test_truncated_asymptotic_slopes_alpha_below_two():
    # for alpha < 2 the kernel tail is polynomial: the outer_outer integral
    # decays at its envelope rate -(2 alpha + beta), while outer_inner
    # decays at the true rate -(alpha + beta), strictly inside its -alpha
    # envelope (one side stays in the bulk, contributing |y|^-beta mass)
    kp = KernelParams(alpha=1.5)
    beta = 0.5
    radii = np.array([6.0, 12.0, 24.0])
    rng = RNG(2024)
    oo, oi = [], []
    for r in radii:
        oo.append(correlation_integral_truncated(
            1.0, r, kp, beta, "outer_outer", 4_000_000, rng).value)
        oi.append(correlation_integral_truncated(
            1.0, r, kp, beta, "outer_inner", 4_000_000, rng).value)
    s_oo = np.polyfit(np.log(radii), np.log(oo), 1)[0]
    s_oi = np.polyfit(np.log(radii), np.log(oi), 1)[0]
    assert s_oo == pytest.approx(-(2 * kp.alpha + beta), abs=0.6)
    assert s_oi == pytest.approx(-(kp.alpha + beta), abs=0.4)
    # envelope consistency: measured decay at least as fast as the bounds
    assert s_oo < -(2 * kp.alpha + beta) + 0.6
    assert s_oi < -kp.alpha


def test_truncated_reports_unresolved():
    kp = KernelParams(alpha=2.0)
    est = correlation_integral_truncated(0.05, 12.0, kp, 0.5, "outer_outer",
                                         10_000, RNG(5))
    assert isinstance(est, TruncatedEstimate)
    assert est.hits == 0 and not est.resolved


def test_truncated_rejects_bad_input():
    kp = KernelParams(alpha=2.0)
    with pytest.raises(ValueError):
        correlation_integral_truncated(1.0, -1.0, kp, 0.5, "outer_outer",
                                       100, RNG(0))
    with pytest.raises(ValueError):
        correlation_integral_truncated(1.0, 1.0, kp, 0.5, "bogus", 100, RNG(0))
    with pytest.raises(ValueError):
        correlation_integral_truncated(
            1.0, 1.0, KernelParams(alpha=2.0, dim=2), 0.5, "outer_outer",
            100, RNG(0))


def test_quadrature_spec_validation():
    with pytest.raises(ValueError):
        QuadratureSpec(mode_count=15, cutoff=10.0)
    with pytest.raises(ValueError):
        QuadratureSpec(mode_count=14, cutoff=10.0)
    with pytest.raises(ValueError):
        QuadratureSpec(mode_count=64, cutoff=0.0)
    with pytest.raises(ValueError):
        KernelParams(alpha=2.5)
    with pytest.raises(ValueError):
        KernelParams(alpha=2.0, nu=0.0)
    with pytest.raises(ValueError):
        KernelParams(alpha=2.0, dim=3)
