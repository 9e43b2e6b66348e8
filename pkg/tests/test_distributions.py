import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate as sp_integrate
from scipy import special

from contest_opt.distributions import (
    DistributionSpec,
    DomainError,
    ParameterError,
    cdf,
    convexity_threshold,
    efficient_allocation,
    efficient_allocation_slope,
    efficient_tail_integral,
    integrate,
    make_grid,
    pdf,
    quantile,
    sample_types,
)

UNIFORM = DistributionSpec("uniform")
POWER2 = DistributionSpec("power", p=2.0)
KINKED = DistributionSpec("piecewise", knots=((0.0, 0.0), (0.5, 0.8), (1.0, 1.0)))
FAMILIES = [UNIFORM, POWER2, DistributionSpec("power", p=0.5, support=(1.0, 3.0)), KINKED]


def test_cdf_examples():
    assert cdf(UNIFORM, 0.3) == pytest.approx(0.3, abs=1e-15)
    assert cdf(POWER2, 0.5) == pytest.approx(0.25, abs=1e-15)
    assert quantile(KINKED, 0.8) == pytest.approx(0.5, abs=1e-15)


@pytest.mark.parametrize("spec", FAMILIES)
def test_cdf_endpoints_and_monotone(spec):
    t = np.linspace(spec.lo, spec.hi, 1001)
    F = spec.cdf(t)
    assert F[0] == 0.0 and F[-1] == pytest.approx(1.0, abs=1e-15)
    assert np.all(np.diff(F) >= 0)


@pytest.mark.parametrize("spec", FAMILIES)
def test_pdf_is_derivative_of_cdf(spec):
    h = 1e-6
    t = np.linspace(spec.lo, spec.hi, 97)[1:-1]
    t = t[np.all(np.abs(t[:, None] - spec.breakpoints()[None, :]) > 1e-3, axis=1)]
    fd = (spec.cdf(t + h) - spec.cdf(t - h)) / (2 * h)
    np.testing.assert_allclose(spec.pdf(t), fd, atol=1e-5, rtol=1e-6)
    assert np.all(spec.pdf(t) > 0)


@pytest.mark.parametrize("spec", FAMILIES)
def test_quantile_inverts_cdf_on_grid(spec):
    g = make_grid(spec, 500)
    np.testing.assert_allclose(spec.quantile(spec.cdf(g.points)), g.points, atol=1e-9)


def test_domain_errors():
    with pytest.raises(DomainError):
        cdf(UNIFORM, 1.5)
    with pytest.raises(DomainError):
        pdf(POWER2, -0.1)
    with pytest.raises(DomainError):
        quantile(UNIFORM, 1.2)
    with pytest.raises(ParameterError):
        DistributionSpec("power", p=-1.0)
    with pytest.raises(ParameterError):
        DistributionSpec("lognormal")


def test_json_round_trip():
    for spec in FAMILIES:
        assert DistributionSpec.from_dict(spec.to_dict()) == spec
    d = {"family": "power", "p": 2.0, "support": [0.0, 1.0]}
    assert DistributionSpec.from_dict(d) == POWER2


def test_grid_weights_and_endpoints():
    for spec in FAMILIES:
        g = make_grid(spec, 2000)
        assert g.points[0] == spec.lo and g.points[-1] == spec.hi
        assert g.weights.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.all(np.diff(g.points) > 0)


def test_efficient_allocation_examples():
    assert efficient_allocation(UNIFORM, 2, 1, 0.7) == pytest.approx(0.7, abs=1e-15)
    assert efficient_allocation(POWER2, 2, 1, 0.5) == pytest.approx(0.25, abs=1e-15)
    assert efficient_allocation(UNIFORM, 3, 2, 0.5) == pytest.approx(0.75, abs=1e-15)
    with pytest.raises(ParameterError):
        efficient_allocation(UNIFORM, 2, 2, 0.5)


def test_efficient_allocation_monte_carlo_order_statistics():
    # A type θ wins one of k=2 items against two opponents unless both beat it.
    rng = np.random.default_rng(7)
    opp = rng.random((10**6, 2))
    wins = (np.sum(opp > 0.5, axis=1) < 2).astype(float)
    se = wins.std() / math.sqrt(wins.size)
    assert abs(wins.mean() - 0.75) <= 3 * se


@pytest.mark.parametrize("n,k", [(2, 1), (3, 2), (10, 3), (61, 5), (100, 50), (300, 1), (400, 7)])
@pytest.mark.parametrize("spec", FAMILIES)
def test_efficient_allocation_matches_incomplete_beta(spec, n, k):
    t = np.linspace(spec.lo, spec.hi, 301)
    oracle = special.betainc(n - k, k, spec.cdf(t))
    got = efficient_allocation(spec, n, k, t)
    np.testing.assert_allclose(got, oracle, atol=1e-12)
    assert got[0] == 0.0 and got[-1] == pytest.approx(1.0, abs=1e-12)
    assert np.all(np.diff(got) >= -1e-12)


@pytest.mark.parametrize("n,k", [(2, 1), (5, 2), (100, 50), (200, 1)])
def test_efficient_slope_matches_finite_difference(n, k):
    t = np.linspace(0.05, 0.95, 37)
    h = 1e-6
    fd = (efficient_allocation(POWER2, n, k, t + h) - efficient_allocation(POWER2, n, k, t - h)) / (2 * h)
    np.testing.assert_allclose(efficient_allocation_slope(POWER2, n, k, t), fd, rtol=1e-5, atol=1e-7)


def test_tail_integral_examples():
    assert efficient_tail_integral(UNIFORM, 2, 1, 0.0) == pytest.approx(0.5, abs=1e-12)
    for spec in FAMILIES:
        assert efficient_tail_integral(spec, 4, 2, spec.hi) == pytest.approx(0.0, abs=1e-15)
    # ∫_{1/3}^1 z^2 * 2z dz = 1/2 - (1/3)^4 / 2 = 1/2 - 1/162.
    exact = 0.5 - 1.0 / 162.0
    quad, _ = sp_integrate.quad(lambda z: z**2 * 2 * z, 1 / 3, 1, epsabs=1e-13)
    assert quad == pytest.approx(exact, abs=1e-12)
    assert efficient_tail_integral(POWER2, 2, 1, 1 / 3) == pytest.approx(exact, abs=1e-12)


@pytest.mark.parametrize("spec", FAMILIES)
@pytest.mark.parametrize("n,k", [(2, 1), (5, 3), (80, 20)])
def test_tail_integral_against_quadrature(spec, n, k):
    assert efficient_tail_integral(spec, n, k, spec.lo) == pytest.approx(k / n, abs=1e-12)
    for theta in np.linspace(spec.lo, spec.hi, 7):
        f = lambda z: efficient_allocation(spec, n, k, z) * spec.pdf(z)
        pts = [p for p in spec.breakpoints() if theta < p < spec.hi]
        quad, _ = sp_integrate.quad(f, theta, spec.hi, points=pts or None, limit=200, epsabs=1e-12)
        assert efficient_tail_integral(spec, n, k, theta) == pytest.approx(quad, abs=1e-8)


@pytest.mark.parametrize("spec", FAMILIES)
def test_tail_integral_derivative(spec):
    n, k = 6, 2
    h = 1e-6
    t = np.linspace(spec.lo, spec.hi, 41)[1:-1]
    t = t[np.all(np.abs(t[:, None] - spec.breakpoints()[None, :]) > 1e-3, axis=1)]
    fd = (efficient_tail_integral(spec, n, k, t + h) - efficient_tail_integral(spec, n, k, t - h)) / (2 * h)
    np.testing.assert_allclose(fd, -efficient_allocation(spec, n, k, t) * spec.pdf(t), atol=1e-4)
    vals = efficient_tail_integral(spec, n, k, np.linspace(spec.lo, spec.hi, 200))
    assert np.all(np.diff(vals) <= 1e-15)


def test_integrate_against_scipy_quad():
    for spec in FAMILIES:
        f = lambda x: np.sin(3 * x) + x**5
        ref, _ = sp_integrate.quad(f, spec.lo, spec.hi)
        assert integrate(spec, f, spec.lo, spec.hi) == pytest.approx(ref, abs=1e-12)


def test_sampling_means_and_determinism():
    s = sample_types(UNIFORM, 1, 10**5, seed=3)
    assert abs(s.mean() - 0.5) < 0.005
    p = sample_types(POWER2, 1, 10**5, seed=3)
    assert abs(p.mean() - 2 / 3) < 0.005
    np.testing.assert_array_equal(sample_types(POWER2, 3, 1000, seed=11), sample_types(POWER2, 3, 1000, seed=11))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        sample_types(KINKED, 2, 20000, seed=5)


def test_convexity_threshold_values():
    assert convexity_threshold(UNIFORM) == 2.0
    assert convexity_threshold(POWER2) == 2.0
    assert convexity_threshold(DistributionSpec("power", p=0.5)) == math.inf


@pytest.mark.parametrize("spec", [UNIFORM, POWER2, DistributionSpec("power", p=3.0, support=(0.5, 2.0))])
@given(n=st.integers(min_value=2, max_value=300))
@settings(max_examples=25, deadline=None)
def test_efficient_allocation_convex_beyond_threshold(spec, n):
    if n < convexity_threshold(spec):
        return
    q = efficient_allocation(spec, n, 1, np.linspace(spec.lo, spec.hi, 2001))
    assert np.min(np.diff(q, 2)) >= -1e-8


@given(n=st.integers(2, 200), k=st.integers(1, 199), m=st.integers(10, 400))
@settings(max_examples=60, deadline=None)
def test_efficient_allocation_monotone_on_any_grid(n, k, m):
    if k >= n:
        return
    q = efficient_allocation(POWER2, n, k, np.linspace(0, 1, m))
    assert np.all(np.diff(q) >= -1e-12)


@pytest.mark.parametrize("spec", FAMILIES)
def test_partial_moments_against_quad(spec):
    for a, b in [(spec.lo, spec.hi), (spec.lo + 0.1 * spec.width, spec.lo + 0.77 * spec.width)]:
        pts = [p for p in spec.breakpoints() if a < p < b]
        ref, _ = sp_integrate.quad(lambda z: z * spec.pdf(z), a, b, points=pts or None, epsabs=1e-13)
        assert spec.partial_mean(a, b) == pytest.approx(ref, abs=1e-10)
        ref2, _ = sp_integrate.quad(lambda z: z**2 * spec.cdf(z) ** 3 * spec.pdf(z), a, b,
                                    points=pts or None, epsabs=1e-13)
        got = spec.expect_between(lambda z: z**2 * spec.cdf(z) ** 3, a, b)
        assert got == pytest.approx(ref2, abs=1e-9)
    assert spec.partial_mean(spec.hi, spec.lo) == 0.0
