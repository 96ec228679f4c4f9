"""Hot inner loops, each in a numba flavour and a pure-numpy flavour.

The public names at the bottom of the module bind to the numba versions
when numba is importable and ``NSMC_NUMBA`` is not ``0``; both flavours stay
importable under their ``*_numba`` / ``*_numpy`` names for testing and
benchmarking.

Accumulator state layout (``STATE_*`` indices into a float64 vector):

    count       samples folded in so far
    log_pos     log of the sum of positive summands
    log_neg     log of the sum of |negative summands|
    shift       log scale of the Welford frame (running max of log|x|)
    mean, m2    Welford mean and sum of squared deviations of x * exp(-shift)
    streak      current run of in-tolerance running estimates
    streak_at   1-based sample index at which that run began
"""

import math

import numpy as np

from ._accel import USE_NUMBA, njit

STATE_COUNT, STATE_LOG_POS, STATE_LOG_NEG, STATE_SHIFT = 0, 1, 2, 3
STATE_MEAN, STATE_M2, STATE_STREAK, STATE_STREAK_AT = 4, 5, 6, 7
STATE_SIZE = 8

MODE_FIXED, MODE_ORACLE, MODE_SE = 0, 1, 2

NEG_INF = -math.inf


def new_state():
    state = np.zeros(STATE_SIZE)
    state[STATE_LOG_POS] = NEG_INF
    state[STATE_LOG_NEG] = NEG_INF
    state[STATE_SHIFT] = NEG_INF
    return state


# -- box extents ----------------------------------------------------------------

def box_extents_numpy(offset, half, dirs):
    with np.errstate(divide="ignore", invalid="ignore"):
        face = np.where(dirs > 0, half - offset, -half - offset)
        t = np.where(dirs != 0, face / dirs, np.inf)
    return t.min(axis=1)


@njit
def box_extents_numba(offset, half, dirs):
    m, n = dirs.shape
    out = np.empty(m)
    for i in range(m):
        best = np.inf
        for j in range(n):
            s = dirs[i, j]
            if s > 0:
                t = (half[j] - offset[j]) / s
            elif s < 0:
                t = (-half[j] - offset[j]) / s
            else:
                continue
            if t < best:
                best = t
        out[i] = best
    return out


# -- signed log-sum-exp over rows -------------------------------------------------

def signed_row_logsumexp_numpy(logs, signs):
    live = (signs != 0) & ~np.isnan(logs) & (logs > NEG_INF)
    safe = np.where(live, logs, NEG_INF)
    top = safe.max(axis=1)
    finite_top = np.where(np.isfinite(top), top, 0.0)
    with np.errstate(invalid="ignore"):
        total = np.sum(np.where(live, signs * np.exp(safe - finite_top[:, None]), 0.0),
                       axis=1)
    with np.errstate(divide="ignore"):
        out_log = np.where(total != 0, finite_top + np.log(np.abs(total)), NEG_INF)
    return out_log, np.sign(total)


@njit
def signed_row_logsumexp_numba(logs, signs):
    m, k = logs.shape
    out_log = np.empty(m)
    out_sign = np.empty(m)
    for i in range(m):
        top = NEG_INF
        for j in range(k):
            v = logs[i, j]
            if signs[i, j] != 0 and not np.isnan(v) and v > top:
                top = v
        if top == NEG_INF:
            out_log[i] = NEG_INF
            out_sign[i] = 0.0
            continue
        total = 0.0
        for j in range(k):
            v = logs[i, j]
            if signs[i, j] != 0 and not np.isnan(v) and v > NEG_INF:
                total += signs[i, j] * math.exp(v - top)
        if total == 0.0:
            out_log[i] = NEG_INF
            out_sign[i] = 0.0
        else:
            out_log[i] = top + math.log(abs(total))
            out_sign[i] = 1.0 if total > 0 else -1.0
    return out_log, out_sign


# -- streaming accumulation with stop checks ---------------------------------------

@njit
def _logaddexp(a, b):
    if a == NEG_INF:
        return b
    if b == NEG_INF:
        return a
    if a > b:
        return a + math.log1p(math.exp(b - a))
    return b + math.log1p(math.exp(a - b))


@njit
def accumulate_numba(state, logs, signs, mode, log_prefactor, log_target,
                     target_sign, tol, consecutive, min_count):
    """Fold summands into ``state`` in place; return how many were consumed.

    Stops early (consumed < len) once the stop criterion of ``mode`` holds.
    """
    count = state[0]
    lp = state[1]
    ln = state[2]
    shift = state[3]
    mean = state[4]
    m2 = state[5]
    streak = state[6]
    streak_at = state[7]
    m = logs.shape[0]
    consumed = m
    for i in range(m):
        l = logs[i]
        sg = signs[i]
        count += 1.0
        if sg > 0:
            lp = _logaddexp(lp, l)
        elif sg < 0:
            ln = _logaddexp(ln, l)
        if sg == 0 or l == NEG_INF:
            x = 0.0
        else:
            if l > shift:
                f = math.exp(shift - l)
                mean *= f
                m2 *= f * f
                shift = l
            x = sg * math.exp(l - shift)
        delta = x - mean
        mean += delta / count
        m2 += delta * (x - mean)
        if mode == 1:
            base = log_prefactor - math.log(count) - log_target
            ratio = target_sign * (math.exp(lp + base) - math.exp(ln + base))
            if abs(ratio - 1.0) <= tol:
                if streak == 0:
                    streak_at = count
                streak += 1
                if streak >= consecutive:
                    consumed = i + 1
                    break
            else:
                streak = 0
                streak_at = 0.0
        elif mode == 2 and count >= min_count and count > 1:
            lk = math.log(count)
            if shift == NEG_INF:
                est = 0.0
            else:
                est = abs(math.exp(lp - lk - shift) - math.exp(ln - lk - shift))
            if est > 0:
                rse = math.sqrt(max(m2, 0.0) / (count - 1.0)) / (est * math.sqrt(count))
                if rse <= tol:
                    consumed = i + 1
                    break
    state[0] = count
    state[1] = lp
    state[2] = ln
    state[3] = shift
    state[4] = mean
    state[5] = m2
    state[6] = streak
    state[7] = streak_at
    return consumed


def _merge_welford(state, logs, signs):
    """Fold a whole block into the Welford part of ``state`` (vectorized)."""
    live = (signs != 0) & (logs > NEG_INF)
    block_top = logs[live].max() if live.any() else NEG_INF
    shift0 = state[STATE_SHIFT]
    shift = max(shift0, block_top)
    n0 = state[STATE_COUNT]
    nb = float(logs.size)
    if shift == NEG_INF:
        return shift, 0.0, 0.0
    f = math.exp(shift0 - shift)
    mean0 = state[STATE_MEAN] * f
    m2_0 = state[STATE_M2] * f * f
    x = np.where(live, signs * np.exp(np.where(live, logs, shift) - shift), 0.0)
    mb = x.mean()
    m2b = float(np.sum((x - mb) ** 2))
    total = n0 + nb
    delta = mb - mean0
    return shift, mean0 + delta * nb / total, m2_0 + m2b + delta * delta * n0 * nb / total


def accumulate_numpy(state, logs, signs, mode, log_prefactor, log_target,
                     target_sign, tol, consecutive, min_count):
    m = logs.shape[0]
    if m == 0:
        return 0
    count0 = state[STATE_COUNT]
    k = count0 + np.arange(1, m + 1, dtype=float)
    pos = np.where(signs > 0, logs, NEG_INF)
    neg = np.where(signs < 0, logs, NEG_INF)
    lp = np.logaddexp.accumulate(np.concatenate(([state[STATE_LOG_POS]], pos)))[1:]
    ln = np.logaddexp.accumulate(np.concatenate(([state[STATE_LOG_NEG]], neg)))[1:]
    consumed = m
    streak_out = None
    if mode == MODE_ORACLE:
        base = log_prefactor - np.log(k) - log_target
        ratio = target_sign * (np.exp(lp + base) - np.exp(ln + base))
        ok = np.abs(ratio - 1.0) <= tol
        idx = np.arange(m)
        last_fail = np.maximum.accumulate(np.where(ok, -1, idx))
        run = np.where(last_fail < 0, idx + 1 + state[STATE_STREAK], idx - last_fail)
        hits = np.nonzero(run >= consecutive)[0]
        if hits.size:
            consumed = int(hits[0]) + 1
        r = run[consumed - 1]
        streak_out = (r, k[consumed - 1] - r + 1 if r > 0 else 0.0)
    elif mode == MODE_SE:
        shift = max(state[STATE_SHIFT], logs[(signs != 0)].max() if np.any(signs != 0)
                    else NEG_INF)
        if shift > NEG_INF:
            f = math.exp(state[STATE_SHIFT] - shift)
            mean0, m2_0 = state[STATE_MEAN] * f, state[STATE_M2] * f * f
            x = np.where(signs != 0, signs * np.exp(np.where(signs != 0, logs, shift) - shift),
                         0.0)
            nb = np.arange(1, m + 1, dtype=float)
            sb = np.cumsum(x)
            mb = sb / nb
            m2b = np.maximum(np.cumsum(x * x) - sb * mb, 0.0)
            delta = mb - mean0
            m2 = m2_0 + m2b + delta * delta * count0 * nb / k
            with np.errstate(divide="ignore", invalid="ignore"):
                est = np.abs(np.exp(lp - np.log(k) - shift) - np.exp(ln - np.log(k) - shift))
                rse = np.sqrt(m2 / (k - 1.0)) / (est * np.sqrt(k))
            hits = np.nonzero((k >= min_count) & (k > 1) & (est > 0) & (rse <= tol))[0]
            if hits.size:
                consumed = int(hits[0]) + 1
    shift, mean, m2 = _merge_welford(state, logs[:consumed], signs[:consumed])
    state[STATE_COUNT] = k[consumed - 1]
    state[STATE_LOG_POS] = lp[consumed - 1]
    state[STATE_LOG_NEG] = ln[consumed - 1]
    state[STATE_SHIFT] = shift
    state[STATE_MEAN] = mean
    state[STATE_M2] = m2
    if streak_out is not None:
        state[STATE_STREAK], state[STATE_STREAK_AT] = streak_out
    return consumed


if USE_NUMBA:
    box_extents = box_extents_numba
    signed_row_logsumexp = signed_row_logsumexp_numba
    accumulate = accumulate_numba
else:
    box_extents = box_extents_numpy
    signed_row_logsumexp = signed_row_logsumexp_numpy
    accumulate = accumulate_numpy

BACKEND = "numba" if USE_NUMBA else "numpy"
