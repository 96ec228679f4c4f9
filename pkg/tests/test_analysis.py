import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from nsmc.analysis import (DensityBounds, ExtentDensity, density_bounds, log_unit_sphere_area,
                           log_unit_sphere_volume, moment_bounds, moment_ratio, numeric_moment,
                           predicted_relative_error, sample_count_bound, unit_sphere_area,
                           unit_sphere_volume)
from nsmc.errors import DomainError, UnsupportedDensityError


# -- sphere constants ----------------------------------------------------------

def test_unit_sphere_area_small_dims():
    assert unit_sphere_area(2) == pytest.approx(2 * math.pi, rel=1e-15)
    assert unit_sphere_area(3) == pytest.approx(4 * math.pi, rel=1e-15)
    assert unit_sphere_area(5) == pytest.approx(8 * math.pi**2 / 3, rel=1e-15)


def test_unit_sphere_volume_small_dims():
    assert unit_sphere_volume(1) == pytest.approx(2.0, rel=1e-15)
    assert unit_sphere_volume(2) == pytest.approx(math.pi, rel=1e-15)
    assert unit_sphere_volume(3) == pytest.approx(4 * math.pi / 3, rel=1e-15)


def test_log_volume_500_identity():
    n = 500
    expected = 0.5 * n * math.log(math.pi) - math.lgamma(0.5 * n + 1)
    assert log_unit_sphere_volume(n) == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("n", [1, 2, 7, 40, 333])
def test_area_volume_relation(n):
    # s_n = n v_n
    assert log_unit_sphere_area(n) == pytest.approx(math.log(n) + log_unit_sphere_volume(n),
                                                    rel=1e-13, abs=1e-13)


def test_materialized_constants_refuse_overflow():
    with pytest.raises(OverflowError):
        unit_sphere_volume(10**6)
    with pytest.raises(DomainError):
        unit_sphere_volume(0)


# -- densities -----------------------------------------------------------------

DENSITIES = [
    ExtentDensity.uniform(0, 1), ExtentDensity.uniform(0.5, 1), ExtentDensity.uniform(0.2, 3),
    ExtentDensity.beta(2, 2), ExtentDensity.beta(0.7, 3.5), ExtentDensity.arcsine(),
    ExtentDensity.polynomial(0), ExtentDensity.polynomial(2.5), ExtentDensity.polynomial(-0.5),
    ExtentDensity.u_quadratic(),
]


@pytest.mark.parametrize("density", DENSITIES, ids=lambda d: d.label)
@pytest.mark.parametrize("k", [1, 2, 5, 20, 60])
def test_closed_form_moments_match_quadrature(density, k):
    assert density.moment(k) == pytest.approx(numeric_moment(density, k), rel=1e-10)


@pytest.mark.parametrize("density", DENSITIES, ids=lambda d: d.label)
def test_pdf_integrates_to_one(density):
    lo, hi = density.support
    total, _ = integrate.quad(density.pdf, lo, hi, limit=200)
    assert total == pytest.approx(1.0, rel=1e-6)


def test_delta_density():
    d = ExtentDensity.delta(0.7)
    assert np.all(d.sample(10, np.random.default_rng(0)) == 0.7)
    assert d.moment(3) == pytest.approx(0.343, rel=1e-15)
    with pytest.raises(UnsupportedDensityError):
        d.pdf(0.7)


def test_uniform_sample_mean():
    x = ExtentDensity.uniform(0, 1).sample(10**6, np.random.default_rng(1))
    assert abs(x.mean() - 0.5) < 0.002


def test_beta22_sample_variance():
    x = ExtentDensity.beta(2, 2).sample(10**6, np.random.default_rng(2))
    assert abs(x.var() - 0.05) < 0.002


@pytest.mark.parametrize("density", [ExtentDensity.polynomial(1.5), ExtentDensity.u_quadratic()],
                         ids=lambda d: d.label)
def test_inverse_cdf_sampling_matches_density(density):
    x = density.sample(20000, np.random.default_rng(3))
    # CDF tabulated by quadrature of the pdf, then interpolated
    grid = np.linspace(0.0, 1.0, 401)
    table = np.concatenate([[0.0], np.cumsum(
        [integrate.quad(density.pdf, a, b)[0] for a, b in zip(grid[:-1], grid[1:])])])
    assert stats.kstest(x, lambda t: np.interp(t, grid, table)).pvalue > 1e-3


def test_density_validation():
    with pytest.raises(DomainError):
        ExtentDensity.uniform(1, 1)
    with pytest.raises(DomainError):
        ExtentDensity.beta(0, 1)
    with pytest.raises(DomainError):
        ExtentDensity.polynomial(-1)
    with pytest.raises(DomainError):
        ExtentDensity("triangle", ())


def test_scaled_density():
    d = ExtentDensity.uniform(0.5, 1).scaled(2)
    assert d.params == (1.0, 2.0)
    with pytest.raises(UnsupportedDensityError):
        ExtentDensity.beta(2, 2).scaled(2)


# -- moment ratios --------------------------------------------------------------

def test_moment_ratio_uniform_k1():
    assert moment_ratio(ExtentDensity.uniform(0, 1), 1) == pytest.approx(1 / math.sqrt(3))


@pytest.mark.parametrize("k", [1, 3, 10, 80])
def test_polynomial_m0_equals_uniform(k):
    assert moment_ratio(ExtentDensity.polynomial(0), k) == pytest.approx(
        moment_ratio(ExtentDensity.uniform(0, 1), k), rel=1e-14)


def test_u_quadratic_large_k():
    assert moment_ratio(ExtentDensity.u_quadratic(), 60) == pytest.approx(math.sqrt(10), rel=0.05)


@pytest.mark.parametrize("density", DENSITIES, ids=lambda d: d.label)
@pytest.mark.parametrize("k", [1, 4, 25])
def test_moment_ratio_closed_forms_match_moments(density, k):
    # independent route: Var(R^k) / E[R^k]^2 from quadrature moments
    m1, m2 = numeric_moment(density, k), numeric_moment(density, 2 * k)
    expected = math.sqrt(m2 / (m1 * m1) - 1.0)
    assert moment_ratio(density, k) == pytest.approx(expected, rel=1e-7)


def test_moment_ratio_delta_is_zero():
    assert moment_ratio(ExtentDensity.delta(2.0), 7) == 0.0


def test_predicted_relative_error():
    u = ExtentDensity.uniform(0, 1)
    assert predicted_relative_error(u, 10, 10**4) == pytest.approx(10 / math.sqrt(21) / 100)
    assert predicted_relative_error(u, 10, 4 * 10**4) == pytest.approx(
        0.5 * predicted_relative_error(u, 10, 10**4))
    assert predicted_relative_error(ExtentDensity.delta(1), 30, 1) == 0.0
    with pytest.raises(DomainError):
        predicted_relative_error(u, 10, 0)


# -- bounds --------------------------------------------------------------------

def test_moment_bounds_examples():
    lo, hi = moment_bounds(DensityBounds(2, 2, 2), 1)
    assert lo == pytest.approx(0.75) and hi == pytest.approx(0.75)
    assert ExtentDensity.uniform(0.5, 1).moment(1) == pytest.approx(0.75)
    lo, hi = moment_bounds(DensityBounds(2, 1, 3), 2)
    assert lo == pytest.approx(7 / 24) and hi == pytest.approx(0.875)


@settings(max_examples=60, deadline=None)
@given(lam=st.floats(1.2, 20.0), k=st.integers(1, 50))
def test_bounded_density_moment_inside_bounds(lam, k):
    # a linear density on [1/lam, 1], bounded between its end values
    a = 1.0 / lam
    w = 1.0 - a
    # f(x) = c (1 + x), normalized on [a, 1]
    c = 1.0 / (w + 0.5 * (1 - a * a))
    f_min, f_max = c * (1 + a), 2 * c
    m, _ = integrate.quad(lambda x: x**k * c * (1 + x), a, 1, epsrel=1e-12)
    lo, hi = moment_bounds(DensityBounds(lam, f_min, f_max), k)
    assert lo * (1 - 1e-9) <= m <= hi * (1 + 1e-9)


def test_density_bounds_cases():
    assert density_bounds(ExtentDensity.uniform(0, 1)) == DensityBounds(math.inf, 1.0, 1.0)
    b = density_bounds(ExtentDensity.uniform(0.5, 1))
    assert b.lam == 2 and b.f_min == b.f_max == 2
    assert density_bounds(ExtentDensity.beta(2, 2)) is None
    assert density_bounds(ExtentDensity.u_quadratic()) is None


def test_sample_count_bound():
    b = sample_count_bound(DensityBounds(math.inf, 1, 1), 10, 0.1)
    assert b.value == pytest.approx(1000) and b.valid
    b2 = sample_count_bound(DensityBounds(math.inf, 1, 1), 20, 0.1)
    assert b2.value == pytest.approx(2 * b.value)


def test_sample_count_bound_validity_flag():
    bounds = DensityBounds(1.5, 2, 2)  # 10 / (lam - 1) = 20
    assert not sample_count_bound(bounds, 10, 0.1).valid
    assert sample_count_bound(bounds, 20, 0.1).valid
    with pytest.raises(DomainError):
        sample_count_bound(bounds, 10, 0)


def test_bounds_validation():
    with pytest.raises(DomainError):
        DensityBounds(1.0, 1, 1)
    with pytest.raises(DomainError):
        DensityBounds(2.0, 2, 1)
