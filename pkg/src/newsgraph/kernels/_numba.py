"""numba-compiled twins of the kernels in ``_numpy``.

Signatures and results match the numpy versions; floating-point sums may
differ in the last few ulps because of loop order.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def _sigmoid(z):
    # exp is several times cheaper than tanh in scalar libm
    return 1.0 / (1.0 + np.exp(-z))


@njit(cache=True)
def _tanh(z):
    return 2.0 / (1.0 + np.exp(-2.0 * z)) - 1.0


@njit(cache=True)
def lstm_forward(x, wx, wh, b):
    T, B, D = x.shape
    H = wh.shape[0]
    h = np.zeros((T + 1, B, H))
    c = np.zeros((T + 1, B, H))
    tc = np.zeros((T + 1, B, H))
    gates = np.empty((T, B, 4 * H))
    xw = np.dot(x.reshape(T * B, D), wx).reshape(T, B, 4 * H)
    for t in range(T):
        z = np.dot(h[t], wh)
        for r in range(B):
            for k in range(H):
                gi = _sigmoid(xw[t, r, k] + z[r, k] + b[k])
                gf = _sigmoid(xw[t, r, H + k] + z[r, H + k] + b[H + k])
                gg = _tanh(xw[t, r, 2 * H + k] + z[r, 2 * H + k] + b[2 * H + k])
                go = _sigmoid(xw[t, r, 3 * H + k] + z[r, 3 * H + k] + b[3 * H + k])
                cn = gf * c[t, r, k] + gi * gg
                tcn = _tanh(cn)
                c[t + 1, r, k] = cn
                tc[t + 1, r, k] = tcn
                h[t + 1, r, k] = go * tcn
                gates[t, r, k] = gi
                gates[t, r, H + k] = gf
                gates[t, r, 2 * H + k] = gg
                gates[t, r, 3 * H + k] = go
    return h, c, tc, gates


@njit(cache=True)
def lstm_backward(dh_last, x, wx, wh, h, c, tc, gates):
    T, B, D = x.shape
    H = wh.shape[0]
    dz_all = np.empty((T, B, 4 * H))
    dh = dh_last.copy()
    dc = np.zeros((B, H))
    whT = np.ascontiguousarray(wh.T)
    for t in range(T - 1, -1, -1):
        for r in range(B):
            for k in range(H):
                gi = gates[t, r, k]
                gf = gates[t, r, H + k]
                gg = gates[t, r, 2 * H + k]
                go = gates[t, r, 3 * H + k]
                tcn = tc[t + 1, r, k]
                d = dc[r, k] + dh[r, k] * go * (1.0 - tcn * tcn)
                dz_all[t, r, k] = d * gg * gi * (1.0 - gi)
                dz_all[t, r, H + k] = d * c[t, r, k] * gf * (1.0 - gf)
                dz_all[t, r, 2 * H + k] = d * gi * (1.0 - gg * gg)
                dz_all[t, r, 3 * H + k] = dh[r, k] * tcn * go * (1.0 - go)
                dc[r, k] = d * gf
        dh = np.dot(dz_all[t], whT)
    flat = dz_all.reshape(T * B, 4 * H)
    dwx = np.dot(np.ascontiguousarray(x.reshape(T * B, D).T), flat)
    dwh = np.dot(np.ascontiguousarray(h[:T].reshape(T * B, H).T), flat)
    db = np.zeros(4 * H)
    for r in range(T * B):
        for k in range(4 * H):
            db[k] += flat[r, k]
    dx = np.dot(flat, np.ascontiguousarray(wx.T)).reshape(T, B, D)
    return dx, dwx, dwh, db


@njit(cache=True)
def scatter_add_rows(out, idx, src):
    D = out.shape[1]
    for k in range(idx.shape[0]):
        row = idx[k]
        for j in range(D):
            out[row, j] += src[k, j]
    return out


@njit(cache=True)
def forward_fill(values, present):
    N, T, F = values.shape
    filled = values.copy()
    imputed = np.zeros((N, T), dtype=np.bool_)
    for i in range(N):
        first = -1
        for t in range(T):
            if present[i, t]:
                first = t
                break
        if first < 0:
            for t in range(T):
                imputed[i, t] = True
            continue
        last = first
        for t in range(T):
            if present[i, t]:
                last = t
            else:
                imputed[i, t] = True
                for f in range(F):
                    filled[i, t, f] = values[i, last, f]
    return filled, imputed


@njit(cache=True)
def max_drawdown(equity):
    if equity.shape[0] == 0:
        return 0.0
    peak = equity[0]
    worst = 0.0
    for k in range(equity.shape[0]):
        if equity[k] > peak:
            peak = equity[k]
        dd = 1.0 - equity[k] / peak
        if dd > worst:
            worst = dd
    return worst


@njit(cache=True)
def confusion_counts(true, pred, n_classes):
    out = np.zeros((n_classes, n_classes), dtype=np.int64)
    for k in range(true.shape[0]):
        out[true[k], pred[k]] += 1
    return out


@njit(cache=True)
def portfolio_returns(weights, returns):
    D, N = weights.shape
    out = np.zeros(D)
    for d in range(D):
        s = 0.0
        for n in range(N):
            s += weights[d, n] * returns[d, n]
        out[d] = s
    return out
