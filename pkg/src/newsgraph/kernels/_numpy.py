"""Pure-numpy reference kernels. Always importable; used when numba is off."""

import numpy as np


def lstm_forward(x, wx, wh, b):
    """Run an LSTM over ``x`` [T, B, D] from zero state.

    Gate layout along the last axis of ``wx``/``wh``/``b`` is (input, forget,
    cell, output). Returns ``(h, c, tc, gates)``: ``h`` and ``c`` are
    [T+1, B, H] with the zero initial state at index 0, ``tc`` caches
    tanh(c) and ``gates`` holds the activated gates [T, B, 4H].
    """
    T, B, _ = x.shape
    H = wh.shape[0]
    h = np.zeros((T + 1, B, H))
    c = np.zeros((T + 1, B, H))
    tc = np.zeros((T + 1, B, H))
    gates = np.empty((T, B, 4 * H))
    xw = (x.reshape(T * B, -1) @ wx).reshape(T, B, 4 * H)
    xw += b
    for t in range(T):
        z = xw[t] + h[t] @ wh
        g = gates[t]
        # sigmoid(z) = (1 + tanh(z/2)) / 2 on all four blocks, then the cell block
        np.multiply(z, 0.5, out=g)
        np.tanh(g, out=g)
        g += 1.0
        g *= 0.5
        np.tanh(z[:, 2 * H:3 * H], out=g[:, 2 * H:3 * H])
        np.multiply(g[:, H:2 * H], c[t], out=c[t + 1])
        c[t + 1] += g[:, :H] * g[:, 2 * H:3 * H]
        np.tanh(c[t + 1], out=tc[t + 1])
        np.multiply(g[:, 3 * H:], tc[t + 1], out=h[t + 1])
    return h, c, tc, gates


def lstm_backward(dh_last, x, wx, wh, h, c, tc, gates):
    """Backpropagate a gradient on the final hidden state through time."""
    T, B, D = x.shape
    H = wh.shape[0]
    dz_all = np.empty((T, B, 4 * H))
    dh = dh_last.copy()
    dc = np.zeros((B, H))
    for t in range(T - 1, -1, -1):
        g = gates[t]
        gi, gf, gg, go = g[:, :H], g[:, H:2 * H], g[:, 2 * H:3 * H], g[:, 3 * H:]
        dz = dz_all[t]
        dc += dh * go * (1.0 - tc[t + 1] * tc[t + 1])
        dz[:, :H] = dc * gg * gi * (1.0 - gi)
        dz[:, H:2 * H] = dc * c[t] * gf * (1.0 - gf)
        dz[:, 2 * H:3 * H] = dc * gi * (1.0 - gg * gg)
        dz[:, 3 * H:] = dh * tc[t + 1] * go * (1.0 - go)
        dh = dz @ wh.T
        dc *= gf
    flat = dz_all.reshape(T * B, 4 * H)
    dwx = x.reshape(T * B, D).T @ flat
    dwh = h[:-1].reshape(T * B, H).T @ flat
    db = flat.sum(axis=0)
    dx = (flat @ wx.T).reshape(T, B, D)
    return dx, dwx, dwh, db


def scatter_add_rows(out, idx, src):
    """``out[idx[k]] += src[k]`` for every k, accumulating duplicates."""
    np.add.at(out, idx, src)
    return out


def forward_fill(values, present):
    """Fill missing cells along the date axis.

    ``values`` is [N, T, F], ``present`` a boolean [N, T]. Each missing cell
    takes the last present value; cells before a ticker's first observation
    take the first present value. Returns ``(filled, imputed)``.
    """
    filled = values.copy()
    N, T, _ = values.shape
    imputed = ~present
    for i in range(N):
        obs = np.flatnonzero(present[i])
        if obs.size == 0:
            continue
        # index of most recent observation at or before t, else the first one
        src = np.maximum.accumulate(np.where(present[i], np.arange(T), -1))
        src[src < 0] = obs[0]
        filled[i] = values[i, src]
    return filled, imputed


def max_drawdown(equity):
    equity = np.asarray(equity, dtype=np.float64)
    if equity.size == 0:
        return 0.0
    peak = np.maximum.accumulate(equity)
    # 1 - v/peak rounds more kindly than (peak - v)/peak, e.g. 1.2 -> 0.9 gives 0.25 exactly
    return float(np.max(1.0 - equity / peak))


def confusion_counts(true, pred, n_classes):
    flat = np.asarray(true, dtype=np.int64) * n_classes + np.asarray(pred, dtype=np.int64)
    return np.bincount(flat, minlength=n_classes * n_classes).reshape(n_classes, n_classes)


def portfolio_returns(weights, returns):
    """Row-wise dot product of [D, N] weights and realized returns."""
    return np.einsum("dn,dn->d", weights, returns)
