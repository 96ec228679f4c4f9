"""NSMC estimators for volumes and integrals.

Volumes are estimated as ``v_n * mean(R_i^n)`` over extents ``R_i`` along
uniformly random directions. Rays that cross the boundary several times
contribute the alternating sum of crossing powers. Integrals are estimated
as ``s_n * mean(i(s_k))``, where ``i(s)`` is the radial integral of
``rho^(n-1) h(rho s)`` from 0 to the extent, evaluated by Gauss-Legendre
quadrature.

Every summand travels as ``(log|x|, sign)`` and the running sums are kept
as log-sum-exp accumulators, so nothing overflows at ``n`` in the hundreds.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import kernels
from .analysis import log_unit_sphere_area, log_unit_sphere_volume
from .errors import (DomainError, IllConditionedWarning, IntegrandEvaluationError,
                     RecentreError)
from .oracles import OracleValue
from .sampling import DirectionStream

CANCELLATION_LIMIT = 1e6
MAX_HALVINGS = 60
_POINT_BUDGET = 1 << 22

_MODES = {"fixed": kernels.MODE_FIXED, "oracle": kernels.MODE_ORACLE,
          "se": kernels.MODE_SE}


@dataclass(frozen=True)
class StoppingRule:
    """When to stop drawing directions.

    ``fixed`` draws exactly ``max_samples``. ``oracle`` stops once
    ``consecutive`` running estimates in a row are within relative ``tol``
    of ``oracle``. ``se`` stops once the relative standard error is at most
    ``tol`` with at least ``min_samples`` drawn. ``max_samples`` is the
    budget for the last two.
    """

    mode: str = "fixed"
    max_samples: int = 100_000
    tol: float = 0.1
    consecutive: int = 1000
    oracle: object = None
    min_samples: int = 100

    def __post_init__(self):
        if self.mode not in _MODES:
            raise DomainError(f"unknown stop mode {self.mode!r}")
        if self.max_samples < 1:
            raise DomainError("max_samples must be >= 1")
        if self.mode != "fixed" and not self.tol > 0:
            raise DomainError("tol must be positive")
        if self.mode == "oracle":
            if self.oracle is None:
                raise DomainError("oracle stopping needs an oracle value")
            if self.consecutive < 1:
                raise DomainError("consecutive must be >= 1")
            if self.target[1] == 0:
                raise DomainError("oracle value must be non-zero")

    @classmethod
    def fixed(cls, samples):
        return cls("fixed", int(samples))

    @classmethod
    def oracle_consecutive(cls, oracle, tol, consecutive=1000, max_samples=10_000_000):
        return cls("oracle", int(max_samples), tol, int(consecutive), oracle)

    @classmethod
    def se_threshold(cls, tol, max_samples=10_000_000, min_samples=100):
        return cls("se", int(max_samples), tol, min_samples=int(min_samples))

    @property
    def target(self):
        """``(log|oracle|, sign)``."""
        o = self.oracle
        if isinstance(o, OracleValue):
            return o.log_value, o.sign
        o = float(o)
        if o == 0:
            return -math.inf, 0
        return math.log(abs(o)), (1 if o > 0 else -1)


class Estimate:
    """Running estimate ``exp(log_prefactor) * mean(summands)``.

    Summands are fed as ``(log|x|, sign)``. Means are formed from split
    positive/negative log-sum-exp accumulators; the spread comes from a
    Welford recurrence in a frame rescaled by the largest ``|x|`` so far.
    """

    def __init__(self, log_prefactor=0.0, tag=""):
        self.log_prefactor = float(log_prefactor)
        self.tag = tag
        self.state = kernels.new_state()
        self.stopped_at = None
        self.budget_exceeded = False
        self.stop_mode = None

    def __repr__(self):
        if self.count == 0:
            return f"Estimate({self.tag!r}, N=0)"
        return (f"Estimate({self.tag!r}, N={self.count}, mean={self.mean:.6g}, "
                f"rse={self.relative_std_error:.3g})")

    @property
    def count(self):
        return int(self.state[kernels.STATE_COUNT])

    def _require_samples(self):
        if self.count == 0:
            raise DomainError("estimate has no samples yet")

    def _log_sum(self):
        lp = self.state[kernels.STATE_LOG_POS]
        ln = self.state[kernels.STATE_LOG_NEG]
        if ln == -math.inf:
            return lp, (0 if lp == -math.inf else 1)
        if lp == -math.inf:
            return ln, -1
        top = max(lp, ln)
        diff = math.exp(lp - top) - math.exp(ln - top)
        if diff == 0:
            return -math.inf, 0
        return top + math.log(abs(diff)), (1 if diff > 0 else -1)

    @property
    def log_scale_mean(self):
        """``(log|mean summand|, sign)``, before the prefactor."""
        self._require_samples()
        log_sum, sign = self._log_sum()
        return log_sum - math.log(self.count), sign

    @property
    def log_mean(self):
        """``(log|estimate|, sign)``."""
        log_m, sign = self.log_scale_mean
        return log_m + self.log_prefactor, sign

    @property
    def mean(self):
        log_m, sign = self.log_mean
        if sign == 0:
            return 0.0
        return sign * math.exp(log_m) if log_m < 709 else sign * math.inf

    @property
    def second_moment_accum(self):
        """Log of the Welford sum of squared deviations of the summands."""
        m2 = self.state[kernels.STATE_M2]
        if m2 <= 0:
            return -math.inf
        return math.log(m2) + 2.0 * self.state[kernels.STATE_SHIFT]

    @property
    def sample_variance(self):
        """Unbiased sample variance of the summands (before the prefactor)."""
        self._require_samples()
        if self.count < 2:
            return 0.0
        m2 = max(self.state[kernels.STATE_M2], 0.0)
        if m2 == 0.0:
            return 0.0
        log_var = math.log(m2 / (self.count - 1)) + 2.0 * self.state[kernels.STATE_SHIFT]
        return math.exp(log_var) if log_var < 709 else math.inf

    @property
    def relative_std_error(self):
        """Sample std of the summands over ``|mean| sqrt(N)``; 0 when nothing varies."""
        self._require_samples()
        m2 = max(self.state[kernels.STATE_M2], 0.0)
        n = self.count
        if m2 == 0.0 or n < 2:
            return 0.0
        log_m, sign = self.log_scale_mean
        if sign == 0:
            return math.inf
        mean_in_frame = math.exp(log_m - self.state[kernels.STATE_SHIFT])
        return math.sqrt(m2 / (n - 1)) / (mean_in_frame * math.sqrt(n))

    @property
    def cancellation_ratio(self):
        """``(|positive sum| + |negative sum|) / |total|``; 1 without cancellation."""
        lp = self.state[kernels.STATE_LOG_POS]
        ln = self.state[kernels.STATE_LOG_NEG]
        if lp == -math.inf or ln == -math.inf:
            return 1.0
        log_sum, sign = self._log_sum()
        if sign == 0:
            return math.inf
        return math.exp(np.logaddexp(lp, ln) - log_sum)

    def update(self, log_mag, sign):
        """Fold one summand ``sign * exp(log_mag)`` in."""
        self.update_block(np.array([float(log_mag)]), np.array([float(sign)]))
        return self

    def update_block(self, logs, signs):
        kernels.accumulate(self.state, np.ascontiguousarray(logs, dtype=float),
                           np.ascontiguousarray(signs, dtype=float),
                           kernels.MODE_FIXED, 0.0, 0.0, 1.0, 0.0, 1, 0)
        return self

    def merge(self, other):
        """Combine with an estimate over disjoint samples (same prefactor)."""
        a, b = self.state, other.state
        out = Estimate(self.log_prefactor, self.tag)
        na, nb = a[kernels.STATE_COUNT], b[kernels.STATE_COUNT]
        if nb == 0:
            out.state[:] = a
            return out
        if na == 0:
            out.state[:] = b
            return out
        shift = max(a[kernels.STATE_SHIFT], b[kernels.STATE_SHIFT])
        s = out.state
        s[kernels.STATE_COUNT] = na + nb
        s[kernels.STATE_LOG_POS] = np.logaddexp(a[kernels.STATE_LOG_POS],
                                                b[kernels.STATE_LOG_POS])
        s[kernels.STATE_LOG_NEG] = np.logaddexp(a[kernels.STATE_LOG_NEG],
                                                b[kernels.STATE_LOG_NEG])
        s[kernels.STATE_SHIFT] = shift
        if shift > -math.inf:
            fa = math.exp(a[kernels.STATE_SHIFT] - shift)
            fb = math.exp(b[kernels.STATE_SHIFT] - shift)
            ma, mb = a[kernels.STATE_MEAN] * fa, b[kernels.STATE_MEAN] * fb
            delta = mb - ma
            total = na + nb
            s[kernels.STATE_MEAN] = ma + delta * nb / total
            s[kernels.STATE_M2] = (a[kernels.STATE_M2] * fa * fa + b[kernels.STATE_M2] * fb * fb
                                   + delta * delta * na * nb / total)
        return out

    def as_record(self):
        log_m, sign = self.log_mean
        return {
            "N": self.count,
            "mean": self.mean,
            "log_mean": log_m,
            "sign": sign,
            "relative_std_error": self.relative_std_error,
            "stopped_at": self.stopped_at,
            "budget_exceeded": self.budget_exceeded,
            "stop_mode": self.stop_mode,
        }


def update_estimate(state, log_mag, sign):
    """Functional form of :meth:`Estimate.update`; returns ``state``."""
    return state.update(log_mag, sign)


# -- summand producers -------------------------------------------------------

def _volume_summands(body):
    n = body.n

    def make(dirs, rng):
        r = body.extents(dirs, rng)
        with np.errstate(divide="ignore"):
            logs = n * np.log(r)
        return logs, (r > 0).astype(float)
    return make


def alternating_log_powers(crossings, n):
    """``(log|x|, sign)`` of ``sum_j (-1)^(J-j) R_j^n`` per row of NaN-padded crossings.

    The outermost crossing always counts positively; with an odd count this
    is ``sum_j (-1)^(j+1) R_j^n``, with an even count (reference outside) it
    is the same sum negated.
    """
    c = np.atleast_2d(crossings)
    present = np.isfinite(c)
    counts = present.sum(axis=1)
    j = np.arange(c.shape[1])
    signs = np.where(present, np.where((counts[:, None] - 1 - j) % 2 == 0, 1.0, -1.0), 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        logs = np.where(present, n * np.log(np.where(present, c, 1.0)), -math.inf)
    return kernels.signed_row_logsumexp(np.ascontiguousarray(logs), signs)


def _multivalued_summands(body):
    def make(dirs, rng):
        return alternating_log_powers(body.crossings(dirs, rng), body.n)
    return make


# -- integrands and radial quadrature -------------------------------------------

class Integrand:
    """An integrand ``h`` over points, with an optional fast path along rays.

    ``fn`` maps a ``(k, n)`` array of points to ``k`` values. ``on_rays``, when
    given, maps radii ``rho`` of shape ``(m, q)`` and directions ``(m, n)`` to
    ``h(rho * s)`` of shape ``(m, q)`` without materializing the points.
    """

    def __init__(self, fn, on_rays=None, name="custom"):
        self.fn = fn
        self.on_rays = on_rays
        self.name = name

    def __call__(self, points):
        return self.fn(np.atleast_2d(points))

    def __repr__(self):
        return f"Integrand({self.name})"

    def along(self, rho, dirs):
        if self.on_rays is not None:
            return self.on_rays(rho, dirs)
        m, q = rho.shape
        n = dirs.shape[1]
        out = np.empty((m, q))
        step = max(1, _POINT_BUDGET // max(q * n, 1))
        for lo in range(0, m, step):
            hi = min(m, lo + step)
            pts = rho[lo:hi, :, None] * dirs[lo:hi, None, :]
            out[lo:hi] = np.asarray(self.fn(pts.reshape(-1, n)), dtype=float).reshape(hi - lo, q)
        return out


def gaussian_integrand():
    """``h(x) = exp(-|x|^2 / 2)``."""
    return Integrand(lambda x: np.exp(-0.5 * np.einsum("ij,ij->i", x, x)),
                     lambda rho, dirs: np.exp(-0.5 * rho * rho), "gaussian")


def polynomial_integrand(coeffs):
    """``h(x) = sum_k coeffs[k] |x|^k``."""
    coeffs = np.asarray(coeffs, dtype=float)
    poly = np.polynomial.polynomial.polyval
    return Integrand(lambda x: poly(np.linalg.norm(x, axis=1), coeffs),
                     lambda rho, dirs: poly(rho, coeffs), "polynomial")


def xcoord_integrand():
    """``h(x) = |x_1|``."""
    return Integrand(lambda x: np.abs(x[:, 0]),
                     lambda rho, dirs: rho * np.abs(dirs[:, :1]), "xcoord")


def constant_integrand(c=1.0):
    c = float(c)
    return Integrand(lambda x: np.full(x.shape[0], c),
                     lambda rho, dirs: np.full(rho.shape, c), "constant")


@lru_cache(maxsize=64)
def gauss_legendre(m):
    """Nodes and weights of the ``m``-point Gauss-Legendre rule on ``[-1, 1]``."""
    x, w = np.polynomial.legendre.leggauss(m)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def default_nodes(n):
    """``ceil((n + 3) / 2)`` nodes: exact for a cubic ``h`` against ``rho^(n-1)``."""
    return (n + 4) // 2


@dataclass(frozen=True)
class RadialIntegrand:
    """Integrand ``h`` in ``n`` dimensions with an ``nodes``-point radial rule."""

    h: Integrand
    n: int
    nodes: int = None

    def __post_init__(self):
        if self.nodes is None:
            object.__setattr__(self, "nodes", default_nodes(self.n))
        if self.nodes < 1:
            raise DomainError("need at least one quadrature node")
        if not isinstance(self.h, Integrand):
            object.__setattr__(self, "h", Integrand(self.h))


def log_partial_integrals(extents, dirs, integrand):
    """``(log|i(s)|, sign)`` of the radial integrals for a batch of directions."""
    extents = np.asarray(extents, dtype=float)
    dirs = np.atleast_2d(dirs)
    n = integrand.n
    x, w = gauss_legendre(integrand.nodes)
    half = 0.5 * extents
    rho = half[:, None] * (x[None, :] + 1.0)
    h = np.asarray(integrand.h.along(rho, dirs), dtype=float)
    bad = ~np.isfinite(h)
    if bad.any():
        i, j = np.argwhere(bad)[0]
        raise IntegrandEvaluationError(
            f"integrand is {h[i, j]} at rho={rho[i, j]:.17g} along direction {dirs[i].tolist()}")
    with np.errstate(divide="ignore"):
        logs = (np.log(w)[None, :] + np.log(half)[:, None] + (n - 1) * np.log(rho)
                + np.log(np.abs(h)))
    return kernels.signed_row_logsumexp(np.ascontiguousarray(logs),
                                        np.ascontiguousarray(np.sign(h)))


def radial_partial_integral(body, s, integrand, rng=None):
    """``i(s)``: integral of ``rho^(n-1) h(rho s)`` from 0 to the extent along ``s``."""
    s = np.asarray(s, dtype=float)[None, :]
    extent = body.extents(s, rng)
    log_i, sign = log_partial_integrals(extent, s, integrand)
    return float(sign[0] * math.exp(log_i[0])) if sign[0] else 0.0


def _integral_summands(body, integrand):
    def make(dirs, rng):
        return log_partial_integrals(body.extents(dirs, rng), dirs, integrand)
    return make


# -- driver ------------------------------------------------------------------

def _as_streams(stream):
    if isinstance(stream, DirectionStream):
        return [stream]
    streams = list(stream)
    if not streams:
        raise DomainError("need at least one direction stream")
    return streams


def _draw(make, stream, limit):
    dirs, rng = stream.take_block()
    if dirs.shape[0] > limit:
        # return the unused tail to the stream
        stream.counter -= dirs.shape[0] - limit
        dirs = dirs[:limit]
    logs, signs = make(dirs, rng)
    return np.ascontiguousarray(logs, dtype=float), np.ascontiguousarray(signs, dtype=float)


def _run_fixed_worker(make, stream, budget, log_prefactor, tag):
    est = Estimate(log_prefactor, tag)
    remaining = budget
    while remaining > 0:
        logs, signs = _draw(make, stream, remaining)
        est.update_block(logs, signs)
        remaining -= logs.size
    return est


def _drive(make, streams, stop, log_prefactor, tag, n):
    for st in streams:
        if st.n != n:
            raise DomainError(f"stream dimension {st.n} does not match body dimension {n}")
    workers = len(streams)
    pool = ThreadPoolExecutor(workers) if workers > 1 else None
    try:
        if stop.mode == "fixed":
            base, extra = divmod(stop.max_samples, workers)
            budgets = [base + (w < extra) for w in range(workers)]
            args = [(make, st, b, log_prefactor, tag) for st, b in zip(streams, budgets)]
            if pool is None:
                parts = [_run_fixed_worker(*a) for a in args]
            else:
                parts = list(pool.map(lambda a: _run_fixed_worker(*a), args))
            est = parts[0]
            for part in parts[1:]:
                est = est.merge(part)
            est.stopped_at = est.count
            est.stop_mode = "fixed"
            return est
        est = Estimate(log_prefactor, tag)
        est.stop_mode = stop.mode
        mode = _MODES[stop.mode]
        log_target, target_sign = stop.target if stop.mode == "oracle" else (0.0, 1)
        remaining = stop.max_samples
        stopped = False
        while remaining > 0 and not stopped:
            if pool is None:
                blocks = [_draw(make, streams[0], remaining)]
            else:
                blocks = list(pool.map(lambda st: _draw(make, st, remaining), streams))
            for logs, signs in blocks:
                take = min(logs.size, remaining)
                consumed = kernels.accumulate(
                    est.state, logs[:take], signs[:take], mode, log_prefactor,
                    log_target, float(target_sign), float(stop.tol),
                    int(stop.consecutive), int(stop.min_samples))
                remaining -= consumed
                if consumed < take or _criterion_met(est, stop):
                    stopped = True
                    break
                if remaining <= 0:
                    break
        if stopped:
            est.stopped_at = (int(est.state[kernels.STATE_STREAK_AT])
                              if stop.mode == "oracle" else est.count)
        else:
            est.budget_exceeded = True
            est.stopped_at = est.count
        return est
    finally:
        if pool is not None:
            pool.shutdown()


def _criterion_met(est, stop):
    # the kernel reports a stop by consuming fewer than offered; this catches a
    # stop landing exactly on the last summand of a block
    if stop.mode == "oracle":
        return est.state[kernels.STATE_STREAK] >= stop.consecutive
    if stop.mode == "se":
        return est.count >= max(stop.min_samples, 2) and est.relative_std_error <= stop.tol
    return False


def _warn_if_cancelling(est):
    if est.count and est.cancellation_ratio > CANCELLATION_LIMIT:
        warnings.warn(
            f"signed summands cancel by a factor {est.cancellation_ratio:.3g}; "
            "the estimate is ill-conditioned", IllConditionedWarning, stacklevel=3)


def estimate_volume(body, stream, stop):
    """Volume of a body with single-valued extents.

    ``stream`` is a :class:`DirectionStream` or a sequence of them, one per
    worker. With several workers the result depends only on the seeds, the
    worker count and the budget.
    """
    if body.multivalued:
        raise DomainError("body has multi-valued extents; use estimate_volume_multivalued")
    est = _drive(_volume_summands(body), _as_streams(stream), stop,
                 log_unit_sphere_volume(body.n), "volume", body.n)
    return est


def estimate_volume_multivalued(body, stream, stop):
    """Volume from alternating sums of crossing powers along each ray."""
    est = _drive(_multivalued_summands(body), _as_streams(stream), stop,
                 log_unit_sphere_volume(body.n), "volume", body.n)
    _warn_if_cancelling(est)
    return est


def estimate_integral(body, integrand, stream, stop):
    """Integral of ``integrand.h`` over ``body``."""
    if body.multivalued:
        raise DomainError("integration over multi-valued bodies is not supported")
    if integrand.n != body.n:
        raise DomainError(f"integrand dimension {integrand.n} != body dimension {body.n}")
    est = _drive(_integral_summands(body, integrand), _as_streams(stream), stop,
                 log_unit_sphere_area(body.n), "integral", body.n)
    _warn_if_cancelling(est)
    return est


# -- reference recentring -----------------------------------------------------

def recentre_reference(body, stream, pairs, passes=1):
    """Move the reference point towards the body's nominal centre.

    Each pass measures extents along ``pairs`` antithetic direction pairs
    ``(s, -s)``, takes the two chord endpoints of every pair, and moves the
    reference to the centre of their axis-aligned bounding box. That is
    exact in the limit for any centrally symmetric body. If the new point
    fails the membership test the step is halved, up to 60 times.
    """
    if pairs < 1 or passes < 1:
        raise DomainError("pairs and passes must be >= 1")
    if body.multivalued or body.needs_rng:
        raise DomainError(f"cannot recentre a {body.kind} body")
    current = body
    p = body.reference.copy()
    for _ in range(passes):
        dirs = stream.take(pairs)
        r_plus = current.extents(dirs)
        r_minus = current.extents(-dirs)
        ends = np.concatenate([p + r_plus[:, None] * dirs, p - r_minus[:, None] * dirs])
        step = 0.5 * (ends.max(axis=0) + ends.min(axis=0)) - p
        for _ in range(MAX_HALVINGS):
            candidate = p + step
            if current.contains(candidate[None, :])[0]:
                try:
                    current = current.with_reference(candidate)
                except DomainError:
                    # on the boundary: analytic bodies want a strict interior
                    pass
                else:
                    p = candidate
                    break
            step = 0.5 * step
        else:
            raise RecentreError(f"reference left the body after {MAX_HALVINGS} halvings")
    return p
