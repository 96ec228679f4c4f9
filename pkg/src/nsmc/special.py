"""Log-domain special functions.

The lower incomplete gamma function uses the usual regime split: a power
series below ``x = a + 1`` and a Lentz continued fraction for the upper
function above it. Everything is returned as a logarithm so that large
orders (``a ~ 500``) neither overflow nor underflow.
"""

import math

import numpy as np

from .errors import DomainError

_EPS = 1e-16
_TINY = 1e-300
_MAX_ITER = 100_000


def _log_series(a, x):
    # log of sum_k x^k / (a (a+1) ... (a+k)); every term is positive
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(_MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if term < total * _EPS:
            return math.log(total)
    raise ArithmeticError(f"series for gamma({a}, {x}) did not converge")


def _log_continued_fraction(a, x):
    # log of the continued fraction in Gamma(a, x) = e^-x x^a * cf
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return math.log(h)
    raise ArithmeticError(f"continued fraction for Gamma({a}, {x}) did not converge")


def log_lower_gamma(a, x):
    """Return ``log gamma(a, x)``, the log of the lower incomplete gamma function.

    ``x = 0`` gives ``-inf``.
    """
    a = float(a)
    x = float(x)
    if not a > 0.0:
        raise DomainError(f"gamma order must be positive, got {a}")
    if x < 0.0 or math.isnan(x):
        raise DomainError(f"gamma argument must be non-negative, got {x}")
    if x == 0.0:
        return -math.inf
    if math.isinf(x):
        return math.lgamma(a)
    prefix = -x + a * math.log(x)
    if x < a + 1.0:
        return prefix + _log_series(a, x)
    # gamma = Gamma(a) - Gamma(a, x), with Gamma(a, x) < Gamma(a) here
    log_upper = prefix + _log_continued_fraction(a, x)
    lg = math.lgamma(a)
    return lg + math.log1p(-math.exp(log_upper - lg))


def regularized_lower_gamma(a, x):
    """Regularized ``P(a, x) = gamma(a, x) / Gamma(a)``."""
    return math.exp(log_lower_gamma(a, x) - math.lgamma(a))


def signed_logsumexp(logs, signs):
    """Sum ``sign_i * exp(log_i)`` and return ``(log|total|, sign)``.

    Zero-sign entries and ``-inf`` logs are ignored. An exact cancellation
    returns ``(-inf, 0)``.
    """
    logs = np.asarray(logs, dtype=float)
    signs = np.asarray(signs, dtype=float)
    keep = (signs != 0) & np.isfinite(logs)
    if not keep.any():
        return -math.inf, 0
    logs = logs[keep]
    signs = signs[keep]
    top = logs.max()
    total = math.fsum((signs * np.exp(logs - top)).tolist())
    if total == 0.0:
        return -math.inf, 0
    return top + math.log(abs(total)), (1 if total > 0 else -1)
