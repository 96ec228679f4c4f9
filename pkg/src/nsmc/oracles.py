"""Closed-form volumes and integrals used as ground truth.

Each oracle returns an :class:`OracleValue` carrying both the linear and
the log value, plus a tag naming the formula so benchmark records can be
audited. Integral oracles assume a domain whose extents are uniformly
distributed on ``[0, r0]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .analysis import (ExtentDensity, LOG_MATERIALIZE_LIMIT, log_unit_sphere_area,
                       log_unit_sphere_volume)
from .errors import DomainError
from .special import log_lower_gamma, signed_logsumexp

# r^3 - 1.5 r^2 + 0.6875 r - 0.09375, lowest degree first
DEFAULT_POLYNOMIAL = (-0.09375, 0.6875, -1.5, 1.0)


@dataclass(frozen=True)
class OracleValue:
    log_value: float
    formula_tag: str
    sign: int = 1

    @property
    def value(self):
        if self.sign == 0:
            return 0.0
        if self.log_value >= LOG_MATERIALIZE_LIMIT:
            return self.sign * math.inf
        return self.sign * math.exp(self.log_value)

    def as_dict(self):
        """JSON-ready form; ``value`` is None when it would overflow or underflow."""
        value = self.value
        lost = not math.isfinite(value) or (value == 0.0 and self.sign != 0)
        return {
            "value": None if lost else value,
            "log_value": self.log_value,
            "sign": self.sign,
            "formula_tag": self.formula_tag,
        }


def _positive(name, x):
    if not x > 0 or not math.isfinite(x):
        raise DomainError(f"{name} must be positive and finite, got {x}")


def volume_sphere(n, radius):
    _positive("radius", radius)
    return OracleValue(log_unit_sphere_volume(n) + n * math.log(radius), "sphere")


def volume_uniform_extents(n, a, b):
    """``v_n / (n+1) * sum_k a^k b^(n-k)`` for extents uniform on ``[a, b]``."""
    if not (0 <= a <= b) or not b > 0:
        raise DomainError(f"need 0 <= a <= b and b > 0, got a={a}, b={b}")
    if a == b:
        return OracleValue(volume_sphere(n, b).log_value, "uniform-extents")
    # a < b here, so the density form of the moment applies
    log_m = ExtentDensity.uniform(a, b).log_moment(n)
    return OracleValue(log_unit_sphere_volume(n) + log_m, "uniform-extents")


def volume_beta_extents(n, alpha, beta):
    """``v_n prod_{i<n} (alpha + i) / (alpha + beta + i)``."""
    density = ExtentDensity.beta(alpha, beta)
    return OracleValue(log_unit_sphere_volume(n) + density.log_moment(n), "beta-extents")


def volume_density(n, density):
    """``v_n E[R^n]`` for any supported extent density."""
    if density.family == "uniform":
        return volume_uniform_extents(n, *density.params)
    if density.family in ("beta", "arcsine"):
        tag = "arcsine-extents" if density.family == "arcsine" else "beta-extents"
        return OracleValue(volume_beta_extents(n, *density.params).log_value, tag)
    return OracleValue(log_unit_sphere_volume(n) + density.log_moment(n),
                       f"{density.family}-extents")


def volume_cube(n, edge):
    _positive("edge", edge)
    return OracleValue(n * math.log(edge), "cube")


def volume_ellipsoid(semi_axes):
    axes = np.asarray(semi_axes, dtype=float)
    if axes.ndim != 1 or axes.size == 0 or not np.all(axes > 0):
        raise DomainError(f"semi-axes must be positive, got {semi_axes}")
    return OracleValue(log_unit_sphere_volume(axes.size) + float(np.sum(np.log(axes))),
                       "ellipsoid")


def volume_shell(n, r_in, r_out):
    if not 0 <= r_in < r_out:
        raise DomainError(f"need 0 <= r_in < r_out, got {r_in}, {r_out}")
    log_gap = math.log(-math.expm1(n * (math.log(r_in) - math.log(r_out)))) if r_in else 0.0
    return OracleValue(log_unit_sphere_volume(n) + n * math.log(r_out) + log_gap, "shell")


def area_sectors(bounds, radii, notches=()):
    """Area of a planar body made of circular sectors minus annular-sector notches."""
    bounds = np.asarray(bounds, dtype=float)
    radii = np.asarray(radii, dtype=float)
    area = 0.5 * float(np.sum(np.diff(bounds) * radii**2))
    for t0, t1, lo, hi in notches:
        area -= 0.5 * (t1 - t0) * (hi * hi - lo * lo)
    return OracleValue(math.log(area), "sectors")


def partial_gaussian(n, S):
    """``2^(n/2-1) gamma(n/2, S^2/2)``: radial integral of ``exp(-r^2/2)`` to ``S``."""
    if S < 0:
        raise DomainError(f"extent must be non-negative, got {S}")
    if S == 0:
        return 0.0
    return math.exp(log_partial_gaussian(n, S))


def log_partial_gaussian(n, S):
    return (0.5 * n - 1.0) * math.log(2.0) + log_lower_gamma(0.5 * n, 0.5 * S * S)


def integral_gaussian(n, r0=1.0):
    """Integral of ``exp(-|x|^2/2)`` over a domain with extents uniform on ``[0, r0]``.

    ``2^((n-1)/2) s_n / r0 * [r0/sqrt(2) gamma(n/2, x) - gamma((n+1)/2, x)]``
    with ``x = r0^2 / 2``.
    """
    _positive("r0", r0)
    x = 0.5 * r0 * r0
    log_bracket, sign = signed_logsumexp(
        [math.log(r0) - 0.5 * math.log(2.0) + log_lower_gamma(0.5 * n, x),
         log_lower_gamma(0.5 * (n + 1), x)],
        [1, -1],
    )
    log_value = 0.5 * (n - 1) * math.log(2.0) + log_unit_sphere_area(n) - math.log(r0)
    return OracleValue(log_value + log_bracket, "gaussian-integrand", sign)


def _poly_terms(coeffs):
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.ndim != 1 or coeffs.size == 0 or not np.all(np.isfinite(coeffs)):
        raise DomainError(f"coefficients must be a non-empty finite list, got {coeffs}")
    k = np.arange(coeffs.size, dtype=float)
    with np.errstate(divide="ignore"):
        return k, np.log(np.abs(coeffs)), np.sign(coeffs)


def _exact_log_sum(terms):
    """``(log|sum|, sign)`` of rational terms, summed exactly."""
    total = sum(terms, Fraction(0))
    if total == 0:
        return -math.inf, 0
    sign = 1 if total > 0 else -1
    total = abs(total)
    return math.log(total.numerator) - math.log(total.denominator), sign


def log_partial_polynomial(n, S, coeffs=DEFAULT_POLYNOMIAL):
    """``(log|i|, sign)`` of ``sum_k a_k S^(n+k) / (n+k)``.

    The terms cancel badly near a root of the polynomial, so the sum
    ``sum_k a_k S^k / (n+k)`` is formed exactly from the binary inputs.
    """
    if S < 0:
        raise DomainError(f"extent must be non-negative, got {S}")
    _poly_terms(coeffs)
    if S == 0:
        return -math.inf, 0
    r = Fraction(float(S))
    log_sum, sign = _exact_log_sum(Fraction(float(a)) * r**k / (n + k)
                                   for k, a in enumerate(coeffs))
    if sign == 0:
        return -math.inf, 0
    return n * math.log(S) + log_sum, sign


def partial_polynomial(n, S, coeffs=DEFAULT_POLYNOMIAL):
    """Radial integral of ``rho^(n-1) sum_k a_k rho^k`` from 0 to ``S``."""
    log_i, sign = log_partial_polynomial(n, S, coeffs)
    return sign * math.exp(log_i) if sign else 0.0


def integral_polynomial(n, r0=1.0, coeffs=DEFAULT_POLYNOMIAL):
    """``s_n r0^n sum_k a_k r0^k / ((n+k)(n+k+1))``.

    The sum is formed in exact rational arithmetic from the binary values of
    the inputs, so an integral that vanishes exactly is reported with sign 0.
    """
    _positive("r0", r0)
    _poly_terms(coeffs)
    r = Fraction(float(r0))
    log_sum, sign = _exact_log_sum(Fraction(float(a)) * r**k / ((n + k) * (n + k + 1))
                                   for k, a in enumerate(coeffs))
    if sign == 0:
        return OracleValue(-math.inf, "polynomial-integrand", 0)
    return OracleValue(log_unit_sphere_area(n) + n * math.log(r0) + log_sum,
                       "polynomial-integrand", sign)


def integral_xcoord(n, r0=1.0):
    """Integral of ``|x_1|``: ``s_(n+3) r0^(n+1) / (2 pi^2 (n+2))``."""
    _positive("r0", r0)
    log_value = (log_unit_sphere_area(n + 3) + (n + 1) * math.log(r0)
                 - math.log(2.0 * math.pi**2 * (n + 2)))
    return OracleValue(log_value, "xcoord-integrand")


def integral_constant(n, c, r0=1.0):
    """A constant integrand ``c``: ``c`` times the uniform-extent volume."""
    vol = volume_uniform_extents(n, 0.0, r0)
    if c == 0:
        return OracleValue(-math.inf, "constant-integrand", 0)
    return OracleValue(vol.log_value + math.log(abs(c)), "constant-integrand",
                       1 if c > 0 else -1)


def area_by_grid(member, lo, hi, resolution=2000):
    """Planar area from counting cell centres of a ``resolution`` x ``resolution``
    grid over the box ``[lo, hi]^2`` that satisfy the batched predicate ``member``."""
    if resolution < 1 or not hi > lo:
        raise DomainError("need resolution >= 1 and hi > lo")
    h = (hi - lo) / resolution
    centres = lo + h * (np.arange(resolution) + 0.5)
    inside = 0
    for y in centres:
        row = np.column_stack([centres, np.full(resolution, y)])
        inside += int(np.count_nonzero(member(row)))
    return OracleValue(math.log(inside * h * h), "grid-count")
