"""Pure numpy LSTM sequence kernels (fallback backend).

Layout is time-major: sequences are [T x B x features]. The input
projection for all timesteps is batched into one matmul; only the
recurrent part runs step by step.

The cache is the tuple (X, H, G, C, TC, h0, c0) with post-activation
gates G stacked [i, f, g, o] along the last axis and TC = tanh(C). The
compiled backend produces an identical structure.
"""

from __future__ import annotations

import numpy as np

NAME = "python"


def _sigmoid(x: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-x))


def lstm_layer_forward(X, w_ih, w_hh, b, h0, c0):
    """Run one LSTM layer over a [T x B x F] sequence.

    Returns (H, cache) with H the [T x B x hidden] output sequence.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    T, B, F = X.shape
    hd = w_hh.shape[1]

    pre_x = (X.reshape(T * B, F) @ w_ih.T).reshape(T, B, 4 * hd)
    H = np.empty((T, B, hd))
    G = np.empty((T, B, 4 * hd))
    C = np.empty((T, B, hd))
    TC = np.empty((T, B, hd))

    h = h0
    c = c0
    for t in range(T):
        pre = pre_x[t] + h @ w_hh.T + b
        i = _sigmoid(pre[:, :hd])
        f = _sigmoid(pre[:, hd : 2 * hd])
        g = np.tanh(pre[:, 2 * hd : 3 * hd])
        o = _sigmoid(pre[:, 3 * hd :])
        c = f * c + i * g
        tc = np.tanh(c)
        h = o * tc
        G[t, :, :hd] = i
        G[t, :, hd : 2 * hd] = f
        G[t, :, 2 * hd : 3 * hd] = g
        G[t, :, 3 * hd :] = o
        C[t] = c
        TC[t] = tc
        H[t] = h
    return H, (X, H, G, C, TC, h0, c0)


def lstm_layer_backward(w_ih, w_hh, cache, dH):
    """Exact gradients of one layer given upstream dH [T x B x hidden].

    Returns (dX, dw_ih, dw_hh, db).
    """
    X, H, G, C, TC, h0, c0 = cache
    T, B, F = X.shape
    hd = w_hh.shape[1]

    dpre_all = np.empty((T, B, 4 * hd))
    dh = np.zeros((B, hd))
    dc = np.zeros((B, hd))
    for t in range(T - 1, -1, -1):
        i = G[t, :, :hd]
        f = G[t, :, hd : 2 * hd]
        g = G[t, :, 2 * hd : 3 * hd]
        o = G[t, :, 3 * hd :]
        tc = TC[t]
        c_prev = C[t - 1] if t > 0 else c0

        dht = dH[t] + dh
        dcur = dc + dht * o * (1.0 - tc * tc)
        dpre = dpre_all[t]
        dpre[:, 3 * hd :] = dht * tc * o * (1.0 - o)
        dpre[:, :hd] = dcur * g * i * (1.0 - i)
        dpre[:, hd : 2 * hd] = dcur * c_prev * f * (1.0 - f)
        dpre[:, 2 * hd : 3 * hd] = dcur * i * (1.0 - g * g)
        dh = dpre @ w_hh
        dc = dcur * f

    flat = dpre_all.reshape(T * B, 4 * hd)
    h_prev = np.concatenate([h0[None, :, :], H[:-1]], axis=0)
    dw_ih = flat.T @ X.reshape(T * B, F)
    dw_hh = flat.T @ h_prev.reshape(T * B, hd)
    db = flat.sum(axis=0)
    dX = (flat @ w_ih).reshape(T, B, F)
    return dX, dw_ih, dw_hh, db
