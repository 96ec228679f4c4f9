import math
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nsmc import kernels
from nsmc._accel import HAVE_NUMBA

needs_numba = pytest.mark.skipif(not HAVE_NUMBA, reason="numba not installed")

FLAVOURS = [kernels.accumulate_numpy]
if HAVE_NUMBA:
    FLAVOURS.append(kernels.accumulate_numba)


def _feed(fn, blocks, mode, log_target=0.0, tol=0.1, consecutive=5, min_count=3):
    state = kernels.new_state()
    consumed = []
    for logs, signs in blocks:
        c = fn(state, logs, signs, mode, 0.0, log_target, 1.0, tol, consecutive, min_count)
        consumed.append(c)
        if c < logs.size:
            break
    return state, consumed


def _blocks(rng, sizes, signed=False):
    out = []
    for m in sizes:
        logs = rng.normal(0, 3, m)
        signs = np.where(rng.random(m) < 0.3, -1.0, 1.0) if signed else np.ones(m)
        out.append((logs, signs))
    return out


@pytest.mark.parametrize("fn", FLAVOURS, ids=lambda f: f.__name__)
def test_fixed_mode_statistics(fn):
    rng = np.random.default_rng(0)
    blocks = _blocks(rng, [7, 100, 1, 33], signed=True)
    state, consumed = _feed(fn, blocks, kernels.MODE_FIXED)
    assert consumed == [7, 100, 1, 33]
    x = np.concatenate([s * np.exp(l) for l, s in blocks])
    assert state[kernels.STATE_COUNT] == x.size
    pos, neg = x[x > 0].sum(), -x[x < 0].sum()
    assert state[kernels.STATE_LOG_POS] == pytest.approx(math.log(pos), rel=1e-13)
    assert state[kernels.STATE_LOG_NEG] == pytest.approx(math.log(neg), rel=1e-13)
    shift = state[kernels.STATE_SHIFT]
    assert shift == pytest.approx(np.max(np.concatenate([l for l, _ in blocks])))
    scale = math.exp(shift)
    assert state[kernels.STATE_MEAN] * scale == pytest.approx(x.mean(), rel=1e-11)
    assert state[kernels.STATE_M2] * scale**2 == pytest.approx(
        np.sum((x - x.mean()) ** 2), rel=1e-10)


@needs_numba
@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10**6), sizes=st.lists(st.integers(1, 300), min_size=1, max_size=6),
       mode=st.sampled_from([kernels.MODE_FIXED, kernels.MODE_ORACLE, kernels.MODE_SE]),
       consecutive=st.integers(1, 40), tol=st.floats(0.05, 2.0))
def test_numba_and_numpy_agree(seed, sizes, mode, consecutive, tol):
    rng = np.random.default_rng(seed)
    blocks = _blocks(rng, sizes, signed=bool(seed % 2))
    # target near the typical mean so oracle mode actually stops sometimes
    x = np.concatenate([s * np.exp(l) for l, s in blocks])
    target = math.log(abs(x.mean())) if x.mean() != 0 else 0.0
    a, ca = _feed(kernels.accumulate_numpy, blocks, mode, target, tol, consecutive)
    b, cb = _feed(kernels.accumulate_numba, blocks, mode, target, tol, consecutive)
    assert ca == cb
    assert np.allclose(a, b, rtol=1e-10, atol=1e-12, equal_nan=True)


@pytest.mark.parametrize("fn", FLAVOURS, ids=lambda f: f.__name__)
def test_oracle_streak_spans_blocks(fn):
    # summands exactly at the target: every running estimate is in tolerance
    blocks = [(np.zeros(4), np.ones(4)), (np.zeros(4), np.ones(4))]
    state, consumed = _feed(fn, blocks, kernels.MODE_ORACLE, 0.0, 0.01, consecutive=6)
    assert consumed == [4, 2]
    assert state[kernels.STATE_STREAK] == 6
    assert state[kernels.STATE_STREAK_AT] == 1


@pytest.mark.parametrize("fn", FLAVOURS, ids=lambda f: f.__name__)
def test_oracle_streak_resets(fn):
    # running means 1, 1, 1.5, 1.25, 1.2, ...: tolerance 0.3 around 1 fails at sample 3
    logs = np.log(np.array([1.0, 1.0, 2.5, 0.5, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0]))
    state, consumed = _feed(fn, [(logs, np.ones(10))], kernels.MODE_ORACLE, 0.0, 0.3,
                            consecutive=3)
    means = np.cumsum(np.exp(logs)) / np.arange(1, 11)
    ok = np.abs(means - 1) <= 0.3
    # first index where three in a row are ok, counting from a fresh start
    run, expected_stop = 0, None
    for i, flag in enumerate(ok):
        run = run + 1 if flag else 0
        if run == 3:
            expected_stop = i + 1
            break
    assert expected_stop == 6
    assert consumed == [expected_stop]
    assert state[kernels.STATE_STREAK_AT] == 4


@pytest.mark.parametrize("fn", FLAVOURS, ids=lambda f: f.__name__)
def test_se_mode_stops_on_threshold(fn):
    rng = np.random.default_rng(1)
    x = rng.uniform(0.5, 1.5, 5000)
    state, consumed = _feed(fn, [(np.log(x), np.ones_like(x))], kernels.MODE_SE, tol=0.01,
                            min_count=100)
    k = consumed[0]
    rse = lambda m: x[:m].std(ddof=1) / (x[:m].mean() * math.sqrt(m))
    assert k >= 100 and rse(k) <= 0.01 and rse(k - 1) > 0.01


@pytest.mark.parametrize("flavour", ["numpy", "numba"])
def test_box_extents(flavour):
    if flavour == "numba" and not HAVE_NUMBA:
        pytest.skip("numba not installed")
    fn = getattr(kernels, f"box_extents_{flavour}")
    dirs = np.array([[1.0, 0.0], [0.0, -1.0], [math.sqrt(0.5), math.sqrt(0.5)]])
    out = fn(np.array([0.25, 0.0]), np.array([0.5, 0.5]), dirs)
    assert np.allclose(out, [0.25, 0.5, 0.25 / math.sqrt(0.5)])


@needs_numba
def test_row_logsumexp_flavours_agree():
    rng = np.random.default_rng(2)
    logs = rng.normal(0, 50, (200, 5))
    logs[rng.random(logs.shape) < 0.2] = np.nan
    signs = rng.choice([-1.0, 0.0, 1.0], size=logs.shape)
    a = kernels.signed_row_logsumexp_numpy(logs, signs)
    b = kernels.signed_row_logsumexp_numba(logs, signs)
    assert np.allclose(a[0], b[0], rtol=1e-12, equal_nan=True)
    assert np.array_equal(a[1], b[1])


def test_row_logsumexp_values():
    logs = np.log(np.array([[3.0, 1.0, np.nan], [1.0, 1.0, 1.0]]))
    signs = np.array([[1.0, -1.0, 1.0], [1.0, -1.0, 0.0]])
    out_log, out_sign = kernels.signed_row_logsumexp(logs, signs)
    assert math.exp(out_log[0]) == pytest.approx(2.0) and out_sign[0] == 1
    assert out_log[1] == -math.inf and out_sign[1] == 0


@pytest.mark.parametrize("value,expected", [("0", "numpy"), ("off", "numpy"),
                                            ("1", "numba" if HAVE_NUMBA else "numpy")])
def test_env_flag_selects_backend(value, expected):
    env = dict(os.environ, NSMC_NUMBA=value)
    out = subprocess.run([sys.executable, "-c", "from nsmc import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == expected
