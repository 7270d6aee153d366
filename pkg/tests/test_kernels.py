import os
import subprocess
import sys

import numpy as np
import pytest

from newsgraph import kernels

NP = kernels.numpy_backend
NB = kernels.numba_backend
BACKENDS = [pytest.param(NP, id="numpy")]
if NB is not None:
    BACKENDS.append(pytest.param(NB, id="numba"))

needs_numba = pytest.mark.skipif(NB is None, reason="numba backend not available")
RNG = np.random.default_rng(7)


def lstm_case(T=5, B=4, D=3, H=6, scale=0.7):
    x = RNG.normal(size=(T, B, D))
    wx = RNG.normal(scale=scale, size=(D, 4 * H))
    wh = RNG.normal(scale=scale, size=(H, 4 * H))
    b = RNG.normal(scale=scale, size=4 * H)
    return x, wx, wh, b


@needs_numba
def test_lstm_backends_agree():
    x, wx, wh, b = lstm_case(T=21, B=33, D=9, H=16)
    fa, fb = NP.lstm_forward(x, wx, wh, b), NB.lstm_forward(x, wx, wh, b)
    for a, c in zip(fa, fb):
        np.testing.assert_allclose(a, c, rtol=0, atol=1e-13)
    dh = RNG.normal(size=(33, 16))
    ga, gb = NP.lstm_backward(dh, x, wx, wh, *fa), NB.lstm_backward(dh, x, wx, wh, *fa)
    for a, c in zip(ga, gb):
        np.testing.assert_allclose(a, c, rtol=0, atol=1e-12)


@pytest.mark.parametrize("be", BACKENDS)
def test_lstm_saturation_is_finite(be):
    x, wx, wh, b = lstm_case(scale=200.0)
    h, c, tc, gates = be.lstm_forward(x, wx, wh, b)
    assert np.all(np.isfinite(h)) and np.all(np.abs(h) <= 1.0)
    assert np.all((gates >= 0) & (gates <= 1) | (np.abs(gates) <= 1))


@pytest.mark.parametrize("be", BACKENDS)
def test_scatter_add_accumulates_duplicates(be):
    out = np.zeros((4, 2))
    idx = np.array([0, 3, 0, 0], dtype=np.int64)
    src = np.arange(8, dtype=float).reshape(4, 2)
    be.scatter_add_rows(out, idx, src)
    assert out.tolist() == [[10.0, 13.0], [0.0, 0.0], [0.0, 0.0], [2.0, 3.0]]


@pytest.mark.parametrize("be", BACKENDS)
def test_forward_fill_oracle(be):
    values = RNG.normal(size=(3, 7, 2))
    present = RNG.random((3, 7)) > 0.4
    present[2] = False
    present[2, 4] = True
    filled, imputed = be.forward_fill(values, present)
    assert np.array_equal(imputed, ~present)
    for i in range(3):
        obs = [t for t in range(7) if present[i, t]]
        for t in range(7):
            prior = [s for s in obs if s <= t]
            src = prior[-1] if prior else (obs[0] if obs else t)
            assert np.array_equal(filled[i, t], values[i, src])


@pytest.mark.parametrize("be", BACKENDS)
def test_max_drawdown_scan_oracle(be):
    assert be.max_drawdown(np.array([1.0, 1.2, 0.9, 1.1])) == 0.25
    assert be.max_drawdown(np.array([])) == 0.0
    for _ in range(50):
        eq = np.cumprod(1 + RNG.normal(0, 0.05, size=30))
        brute = max((eq[i] - eq[j]) / eq[i] for i in range(30) for j in range(i, 30))
        assert be.max_drawdown(eq) == pytest.approx(brute, abs=1e-15)


@pytest.mark.parametrize("be", BACKENDS)
def test_confusion_counts_tally(be):
    t = RNG.integers(0, 3, size=200).astype(np.int64)
    p = RNG.integers(0, 3, size=200).astype(np.int64)
    cm = be.confusion_counts(t, p, 3)
    ref = np.zeros((3, 3), dtype=np.int64)
    for a, b in zip(t, p):
        ref[a, b] += 1
    assert np.array_equal(cm, ref)


@pytest.mark.parametrize("be", BACKENDS)
def test_portfolio_returns(be):
    w = RNG.normal(size=(6, 4))
    r = RNG.normal(size=(6, 4))
    np.testing.assert_allclose(be.portfolio_returns(w, r), [sum(w[d] * r[d]) for d in range(6)], atol=1e-15)


def test_dispatch_wrappers_accept_noncontiguous():
    x, wx, wh, b = lstm_case()
    h, *_ = kernels.lstm_forward(x[:, ::-1], wx, wh, b)
    h_ref, *_ = NP.lstm_forward(np.ascontiguousarray(x[:, ::-1]), wx, wh, b)
    np.testing.assert_allclose(h, h_ref, atol=1e-13)


def test_env_flag_forces_numpy():
    code = "from newsgraph import kernels; print(kernels.BACKEND_NAME, kernels.numba_backend is None)"
    env = dict(os.environ, NEWSGRAPH_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.split() == ["numpy", "True"]


@needs_numba
def test_default_backend_is_numba(monkeypatch):
    if os.environ.get("NEWSGRAPH_DISABLE_NUMBA"):
        pytest.skip("flag set in this environment")
    assert kernels.BACKEND_NAME == "numba"
