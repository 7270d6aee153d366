"""Time every hot kernel on the numba and numpy backends.

    python3 benchmarks/bench_kernels.py [--repeat 20]

Shapes match one training batch on the bundled 30-ticker fixture. Each row
reports the best-of-``repeat`` wall time in milliseconds and the max absolute
difference between the two backends' outputs.
"""

import argparse
import time

import numpy as np

from newsgraph import kernels

NP = kernels.numpy_backend
NB = kernels.numba_backend


def best_of(fn, args, repeat):
    fn(*args)  # warm-up (numba compile / cache load)
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best * 1e3, out


def max_diff(a, b):
    if isinstance(a, tuple):
        return max(max_diff(x, y) for x, y in zip(a, b))
    return float(np.max(np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))))


def cases(rng):
    T, B, D, H = 21, 128, 41, 64
    x = rng.normal(size=(T, B, D))
    wx = rng.normal(scale=0.1, size=(D, 4 * H))
    wh = rng.normal(scale=0.1, size=(H, 4 * H))
    b = rng.normal(scale=0.1, size=4 * H)
    state = NP.lstm_forward(x, wx, wh, b)
    dh = rng.normal(size=(B, H))
    idx = rng.integers(0, 9000, size=T * B).astype(np.int64)
    src = rng.normal(size=(T * B, 32))
    values = rng.normal(size=(30, 300, 9))
    present = rng.random((30, 300)) > 0.05
    equity = np.cumprod(1.0 + rng.normal(0, 0.01, size=100_000))
    true = rng.integers(0, 3, size=100_000).astype(np.int64)
    pred = rng.integers(0, 3, size=100_000).astype(np.int64)
    weights = rng.random((2_000, 30))
    rets = rng.normal(0, 0.01, size=(2_000, 30))

    def scatter(mod):
        def run(idx, src):
            out = np.zeros((9000, 32))
            mod.scatter_add_rows(out, idx, src)
            return out
        return run

    return [
        ("lstm_forward", lambda m: m.lstm_forward, (x, wx, wh, b)),
        ("lstm_backward", lambda m: m.lstm_backward, (dh, x, wx, wh) + state),
        ("scatter_add_rows", scatter, (idx, src)),
        ("forward_fill", lambda m: m.forward_fill, (values, present)),
        ("max_drawdown", lambda m: m.max_drawdown, (equity,)),
        ("confusion_counts", lambda m: m.confusion_counts, (true, pred, 3)),
        ("portfolio_returns", lambda m: m.portfolio_returns, (weights, rets)),
    ]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args(argv)
    if NB is None:
        print("numba backend unavailable (not installed or NEWSGRAPH_DISABLE_NUMBA set)")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<20}{'numpy ms':>10}{'numba ms':>10}{'speedup':>9}{'max |diff|':>13}")
    for name, pick, fargs in cases(rng):
        t_np, out_np = best_of(pick(NP), fargs, args.repeat)
        if NB is None:
            print(f"{name:<20}{t_np:>10.3f}{'-':>10}{'-':>9}{'-':>13}")
            continue
        t_nb, out_nb = best_of(pick(NB), fargs, args.repeat)
        print(f"{name:<20}{t_np:>10.3f}{t_nb:>10.3f}{t_np / t_nb:>8.2f}x{max_diff(out_np, out_nb):>13.2e}")


if __name__ == "__main__":
    main()
