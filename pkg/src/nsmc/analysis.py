"""Unit-sphere constants, extent densities and the error theory of NSMC.

An extent density is the distribution of distances from the reference point
to the boundary under uniformly random directions. The volume is
``v_n * E[R^n]``, so the relative error of an ``N``-sample estimate is
``sqrt(Var R^n) / E[R^n] / sqrt(N)``. This module evaluates that ratio in
closed form where possible, the moment bounds it is controlled by, and the
resulting linear-in-``n`` sample count bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .errors import DomainError, UnsupportedDensityError

LOG_MATERIALIZE_LIMIT = 700.0

FAMILIES = ("delta", "uniform", "beta", "arcsine", "polynomial", "u-quadratic")


def _check_dim(n):
    if int(n) != n or n < 1:
        raise DomainError(f"dimension must be a positive integer, got {n}")
    return int(n)


def _materialize(log_value):
    if abs(log_value) >= LOG_MATERIALIZE_LIMIT and math.isfinite(log_value):
        raise OverflowError(
            f"value exp({log_value:.1f}) is not representable; use the log form"
        )
    return math.exp(log_value)


def log_unit_sphere_area(n):
    """``log s_n`` where ``s_n = n pi^(n/2) / Gamma(n/2 + 1)``."""
    n = _check_dim(n)
    return math.log(n) + 0.5 * n * math.log(math.pi) - math.lgamma(0.5 * n + 1.0)


def log_unit_sphere_volume(n):
    """``log v_n`` where ``v_n = pi^(n/2) / Gamma(n/2 + 1)``."""
    n = _check_dim(n)
    return 0.5 * n * math.log(math.pi) - math.lgamma(0.5 * n + 1.0)


def unit_sphere_area(n):
    """Surface area of the unit sphere in ``n`` dimensions (2*pi for n=2)."""
    return _materialize(log_unit_sphere_area(n))


def unit_sphere_volume(n):
    """Volume of the unit ball in ``n`` dimensions (pi for n=2)."""
    return _materialize(log_unit_sphere_volume(n))


@dataclass(frozen=True)
class ExtentDensity:
    """A parametric extent density.

    Use the classmethod constructors rather than building one directly;
    they validate the parameters.
    """

    family: str
    params: tuple = ()

    def __post_init__(self):
        fam, p = self.family, self.params
        if fam not in FAMILIES:
            raise DomainError(f"unknown density family {fam!r}")
        if fam == "delta":
            if len(p) != 1 or not p[0] > 0 or not math.isfinite(p[0]):
                raise DomainError(f"delta density needs r0 > 0, got {p}")
        elif fam == "uniform":
            if len(p) != 2 or not 0 <= p[0] < p[1] or not math.isfinite(p[1]):
                raise DomainError(f"uniform density needs 0 <= a < b, got {p}")
        elif fam in ("beta", "arcsine"):
            if len(p) != 2 or not (p[0] > 0 and p[1] > 0):
                raise DomainError(f"beta density needs alpha, beta > 0, got {p}")
        elif fam == "polynomial":
            # m < -1 is not normalizable on [0, 1]
            if len(p) != 1 or not p[0] > -1:
                raise DomainError(f"polynomial density needs m > -1, got {p}")

    @classmethod
    def delta(cls, r0=1.0):
        return cls("delta", (float(r0),))

    @classmethod
    def uniform(cls, a=0.0, b=1.0):
        return cls("uniform", (float(a), float(b)))

    @classmethod
    def beta(cls, alpha, beta):
        return cls("beta", (float(alpha), float(beta)))

    @classmethod
    def arcsine(cls):
        return cls("arcsine", (0.5, 0.5))

    @classmethod
    def polynomial(cls, m):
        return cls("polynomial", (float(m),))

    @classmethod
    def u_quadratic(cls):
        return cls("u-quadratic", ())

    @property
    def label(self):
        if not self.params or self.family == "arcsine":
            return self.family
        return f"{self.family}:" + ",".join(f"{v:g}" for v in self.params)

    @property
    def support(self):
        if self.family == "delta":
            return (self.params[0], self.params[0])
        if self.family == "uniform":
            return self.params
        return (0.0, 1.0)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        lo, hi = self.support
        inside = (x >= lo) & (x <= hi)
        fam, p = self.family, self.params
        with np.errstate(divide="ignore", invalid="ignore"):
            if fam == "delta":
                raise UnsupportedDensityError("the delta density has no pdf")
            if fam == "uniform":
                f = np.full_like(x, 1.0 / (p[1] - p[0]))
            elif fam in ("beta", "arcsine"):
                f = x ** (p[0] - 1) * (1 - x) ** (p[1] - 1) / special.beta(*p)
            elif fam == "polynomial":
                f = (p[0] + 1) * x ** p[0]
            else:
                f = 12.0 * (x - 0.5) ** 2
        return np.where(inside, f, 0.0)

    def sample(self, size, rng):
        """Draw ``size`` iid extents."""
        fam, p = self.family, self.params
        if fam == "delta":
            return np.full(size, p[0])
        if fam == "uniform":
            return rng.uniform(p[0], p[1], size)
        if fam in ("beta", "arcsine"):
            return rng.beta(p[0], p[1], size)
        u = rng.random(size)
        if fam == "polynomial":
            return u ** (1.0 / (p[0] + 1.0))
        # inverse of F(x) = 4 (x - 1/2)^3 + 1/2
        return 0.5 + np.cbrt((u - 0.5) / 4.0)

    def log_moment(self, k):
        """``log E[R^k]`` in closed form."""
        if k < 0:
            raise DomainError(f"moment order must be non-negative, got {k}")
        fam, p = self.family, self.params
        if k == 0:
            return 0.0
        if fam == "delta":
            return k * math.log(p[0])
        if fam == "uniform":
            a, b = p
            return k * math.log(b) + _log_geometric_sum(a / b, k) - math.log(k + 1)
        if fam in ("beta", "arcsine"):
            if int(k) == k:
                # E[R^k] = prod_{i<k} (alpha + i) / (alpha + beta + i)
                i = np.arange(int(k), dtype=float)
                return float(np.sum(np.log(p[0] + i) - np.log(p[0] + p[1] + i)))
            return (special.gammaln(p[0] + k) - special.gammaln(p[0])
                    + special.gammaln(p[0] + p[1]) - special.gammaln(p[0] + p[1] + k))
        if fam == "polynomial":
            m = p[0]
            return math.log(m + 1) - math.log(m + k + 1)
        # 12 * int x^k (x - 1/2)^2 = 3 (k^2 + k + 2) / ((k+1)(k+2)(k+3))
        return (math.log(3.0) + math.log(k * k + k + 2)
                - math.log(k + 1) - math.log(k + 2) - math.log(k + 3))

    def moment(self, k):
        return math.exp(self.log_moment(k))

    def scaled(self, a):
        """The density of ``a * R``; only families with a free scale support this."""
        if self.family == "delta":
            return ExtentDensity.delta(a * self.params[0])
        if self.family == "uniform":
            return ExtentDensity.uniform(a * self.params[0], a * self.params[1])
        raise UnsupportedDensityError(f"{self.family} density has fixed support [0, 1]")


def _log_geometric_sum(q, k):
    # log sum_{j=0}^{k} q^j for 0 <= q <= 1
    if q == 1.0:
        return math.log(k + 1)
    if q == 0.0:
        return 0.0
    return math.log(-math.expm1((k + 1) * math.log(q))) - math.log1p(-q)


def numeric_moment(density, k):
    """``E[R^k]`` by adaptive quadrature, independent of the closed forms."""
    fam, p = density.family, density.params
    opts = dict(epsabs=0.0, epsrel=1e-12, limit=500)
    if fam == "delta":
        return p[0] ** k
    if fam == "uniform":
        a, b = p
        val, _ = integrate.quad(lambda x: x**k, a, b, **opts)
        return val / (b - a)
    if fam == "arcsine":
        # x = sin^2(phi) removes both endpoint singularities:
        # E[X^k] = (2/pi) int_0^{pi/2} sin^{2k}(phi) dphi
        val, _ = integrate.quad(lambda t: math.sin(t) ** (2 * k), 0.0, math.pi / 2, **opts)
        return 2.0 * val / math.pi
    if fam == "beta":
        val, _ = integrate.quad(lambda x: x**k, 0.0, 1.0, weight="alg",
                                wvar=(p[0] - 1.0, p[1] - 1.0), **opts)
        return val / special.beta(*p)
    if fam == "polynomial":
        m = p[0]
        val, _ = integrate.quad(lambda x: (m + 1) * x**k, 0.0, 1.0, weight="alg",
                                wvar=(m, 0.0), **opts)
        return val
    val, _ = integrate.quad(lambda x: 12.0 * x**k * (x - 0.5) ** 2, 0.0, 1.0,
                            points=[0.5], **opts)
    return val


def moment_ratio(density, k):
    """``sqrt(Var R^k) / E[R^k]``, the per-sample relative spread of ``R^k``."""
    if k < 1:
        raise DomainError(f"k must be >= 1, got {k}")
    fam, p = density.family, density.params
    if fam == "delta":
        return 0.0
    if fam == "uniform" and p == (0.0, 1.0):
        return k / math.sqrt(2 * k + 1)
    if fam == "polynomial":
        m = p[0]
        return k / math.sqrt((m + 1) * (m + 2 * k + 1))
    if fam == "u-quadratic":
        num = (2 * k * k + k + 1) * (k + 1) * (k + 2) ** 2 * (k + 3) ** 2
        den = 3 * (2 * k + 1) * (2 * k + 3) * (k * k + k + 2) ** 2
        return math.sqrt(num / den - 1.0)
    excess = math.expm1(density.log_moment(2 * k) - 2 * density.log_moment(k))
    return math.sqrt(max(excess, 0.0))


def predicted_relative_error(density, n, N):
    """Predicted relative RMS error of an ``N``-sample volume estimate in ``n`` dims."""
    if N < 1:
        raise DomainError(f"N must be >= 1, got {N}")
    return moment_ratio(density, n) / math.sqrt(N)


@dataclass(frozen=True)
class DensityBounds:
    """Support ``[1/lam, 1]`` with ``f_min <= f <= f_max`` on it.

    ``lam = inf`` stands for support ``[0, 1]``.
    """

    lam: float
    f_min: float
    f_max: float

    def __post_init__(self):
        if not self.lam > 1:
            raise DomainError(f"extent ratio must exceed 1, got {self.lam}")
        if not self.f_min > 0 or self.f_max < self.f_min:
            raise DomainError(f"need 0 < f_min <= f_max, got {self.f_min}, {self.f_max}")


def density_bounds(density):
    """Bounds for densities that meet the positive, bounded hypothesis, else None."""
    fam, p = density.family, density.params
    if fam == "uniform":
        a, b = p
        lam = math.inf if a == 0 else b / a
        f = b / (b - a)
        return DensityBounds(lam, f, f)
    if fam == "polynomial" and p[0] == 0:
        return DensityBounds(math.inf, 1.0, 1.0)
    if fam == "beta" and p == (1.0, 1.0):
        return DensityBounds(math.inf, 1.0, 1.0)
    return None


def moment_bounds(bounds, k):
    """Lower and upper bounds on ``E[X^k]`` for a density within ``bounds``."""
    if k < 1:
        raise DomainError(f"k must be >= 1, got {k}")
    if not bounds.lam > 1:
        raise DomainError(f"extent ratio must exceed 1, got {bounds.lam}")
    shape = -math.expm1(-(k + 1) * math.log(bounds.lam)) / (k + 1)
    return bounds.f_min * shape, bounds.f_max * shape


@dataclass(frozen=True)
class SampleCountBound:
    value: float
    valid: bool
    min_valid_dimension: float


def sample_count_bound(bounds, n, tol):
    """Upper bound ``(f_max / f_min^2) n / tol^2`` on the samples needed.

    ``valid`` is False when ``n`` is not well above ``1 / (lam - 1)``, the
    regime in which the square-root-of-``n`` ratio bound holds; "well above"
    is taken as a factor of ten.
    """
    if not tol > 0:
        raise DomainError(f"tolerance must be positive, got {tol}")
    n = _check_dim(n)
    threshold = 10.0 / (bounds.lam - 1.0)
    value = bounds.f_max / bounds.f_min**2 * n / tol**2
    return SampleCountBound(value, n >= threshold, threshold)
