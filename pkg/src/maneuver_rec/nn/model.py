"""Stacked-LSTM classifier: forward pass, loss, and exact gradients.

The network runs two (by default) LSTM layers over each window, keeps
the final hidden state of the top layer, and classifies it through two
ReLU layers and a linear output layer.  Inverted dropout is applied
between LSTM layers and after each ReLU layer during training; masks
are drawn from ``dropout_seed`` in a fixed order (inter-layer masks
first, then fc1, then fc2) so backward can replay them exactly.

Gradients are computed by hand (reverse-mode through the head, then
backpropagation through time inside the kernel backends) and returned
keyed like ``ManeuverModelParams.tensors()``.
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError, DataError
from . import backend
from .params import LstmLayerParams, ManeuverModelParams


def lstm_cell_forward(
    x: np.ndarray,
    h: np.ndarray,
    c: np.ndarray,
    layer: LstmLayerParams,
) -> tuple[np.ndarray, np.ndarray]:
    """One LSTM timestep: (x, h, c) -> (h_new, c_new).

    Gate blocks in the preactivation vector follow GATE_ORDER: input,
    forget, cell candidate, output.
    """
    x = np.asarray(x, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    hd = layer.hidden_size
    if x.shape[-1] != layer.input_size:
        raise DataError(f"input has {x.shape[-1]} features, layer expects {layer.input_size}")
    if h.shape[-1] != hd or c.shape[-1] != hd:
        raise DataError(f"state width must be {hd}, got h {h.shape[-1]}, c {c.shape[-1]}")
    pre = x @ layer.w_ih.T + h @ layer.w_hh.T + layer.b
    i = _sigmoid(pre[..., :hd])
    f = _sigmoid(pre[..., hd : 2 * hd])
    g = np.tanh(pre[..., 2 * hd : 3 * hd])
    o = _sigmoid(pre[..., 3 * hd :])
    c_new = f * c + i * g
    h_new = o * np.tanh(c_new)
    return h_new, c_new


def _sigmoid(x: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-x))


def _check_input(params: ManeuverModelParams, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 3:
        raise DataError(f"expected input of shape [batch, time, features], got ndim={X.ndim}")
    if X.shape[2] != params.config.n_features:
        raise DataError(
            f"input has {X.shape[2]} features, model expects {params.config.n_features}"
        )
    if X.shape[1] < 1:
        raise DataError("input windows must contain at least one time step")
    return X


def _draw_masks(params: ManeuverModelParams, T: int, B: int, dropout_seed: int):
    """Inverted-dropout masks in their fixed draw order.

    Returns (inter_masks, fc1_mask, fc2_mask).  inter_masks[i] scales
    the output of LSTM layer i before it feeds layer i+1.
    """
    cfg = params.config
    rng = np.random.Generator(np.random.PCG64(int(dropout_seed)))
    inter = []
    for _ in range(cfg.n_lstm_layers - 1):
        keep = rng.random((T, B, cfg.hidden_size)) >= cfg.lstm_dropout
        inter.append(keep.astype(np.float64) / (1.0 - cfg.lstm_dropout))
    keep1 = rng.random((B, cfg.fc1_size)) >= cfg.fc_dropout
    keep2 = rng.random((B, cfg.fc2_size)) >= cfg.fc_dropout
    scale = 1.0 - cfg.fc_dropout
    return inter, keep1.astype(np.float64) / scale, keep2.astype(np.float64) / scale


def _forward_full(params: ManeuverModelParams, X: np.ndarray, mode: str, dropout_seed: int):
    """Full forward pass keeping every intermediate needed by backward."""
    if mode not in ("train", "eval"):
        raise ConfigError(f"unknown mode {mode!r}; expected 'train' or 'eval'")
    X = _check_input(params, X)
    cfg = params.config
    B, T = X.shape[0], X.shape[1]
    kern = backend.get_kernels()

    if mode == "train":
        inter_masks, fc1_mask, fc2_mask = _draw_masks(params, T, B, dropout_seed)
    else:
        inter_masks, fc1_mask, fc2_mask = None, None, None

    seq = np.ascontiguousarray(X.transpose(1, 0, 2))  # time-major [T, B, F]
    caches = []
    for li, layer in enumerate(params.lstm_layers):
        h0 = np.zeros((B, cfg.hidden_size))
        c0 = np.zeros((B, cfg.hidden_size))
        H, cache = kern.lstm_layer_forward(seq, layer.w_ih, layer.w_hh, layer.b, h0, c0)
        caches.append(cache)
        if li < len(params.lstm_layers) - 1:
            seq = H * inter_masks[li] if mode == "train" else H
            seq = np.ascontiguousarray(seq)
        else:
            seq = H

    h_last = seq[-1]  # [B, hidden]
    a1 = np.maximum(h_last @ params.fc1.w.T + params.fc1.b, 0.0)
    d1 = a1 * fc1_mask if mode == "train" else a1
    a2 = np.maximum(d1 @ params.fc2.w.T + params.fc2.b, 0.0)
    d2 = a2 * fc2_mask if mode == "train" else a2
    logits = d2 @ params.classifier.w.T + params.classifier.b
    ctx = {
        "caches": caches,
        "inter_masks": inter_masks,
        "fc1_mask": fc1_mask,
        "fc2_mask": fc2_mask,
        "h_last": h_last,
        "a1": a1,
        "d1": d1,
        "a2": a2,
        "d2": d2,
        "T": T,
        "B": B,
    }
    return logits, ctx


def forward(
    params: ManeuverModelParams,
    X: np.ndarray,
    *,
    mode: str = "eval",
    dropout_seed: int = 0,
) -> np.ndarray:
    """Class logits for a batch of windows, shape [batch, n_classes].

    X is batch-major [batch, time, features].  In train mode dropout
    masks are derived from dropout_seed; eval mode applies none.
    """
    if mode not in ("train", "eval"):
        raise ConfigError(f"unknown mode {mode!r}; expected 'train' or 'eval'")
    X = _check_input(params, X)
    if X.shape[0] == 0:
        return np.zeros((0, params.config.n_classes))
    logits, _ = _forward_full(params, X, mode, dropout_seed)
    return logits


def softmax_cross_entropy(
    logits: np.ndarray, targets: np.ndarray
) -> tuple[float, np.ndarray]:
    """Mean cross-entropy over the batch and its gradient w.r.t. logits.

    Stabilised by max subtraction; the gradient is
    (softmax - onehot) / batch, so summing per-example losses and
    gradients stays consistent.
    """
    logits = np.asarray(logits, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.int64)
    if logits.ndim != 2 or targets.ndim != 1 or logits.shape[0] != targets.shape[0]:
        raise DataError("logits must be [batch, n_classes] with one target per row")
    B, C = logits.shape
    if B == 0:
        raise DataError("cannot compute a loss over an empty batch")
    if targets.min() < 0 or targets.max() >= C:
        raise DataError(f"target codes must lie in [0, {C})")
    shifted = logits - logits.max(axis=1, keepdims=True)
    exps = np.exp(shifted)
    sumexp = exps.sum(axis=1, keepdims=True)
    log_probs = shifted - np.log(sumexp)
    loss = float(-log_probs[np.arange(B), targets].mean())
    dlogits = exps / sumexp
    dlogits[np.arange(B), targets] -= 1.0
    return loss, dlogits / B


def backward(
    params: ManeuverModelParams,
    X: np.ndarray,
    targets: np.ndarray,
    *,
    dropout_seed: int = 0,
) -> tuple[float, dict[str, np.ndarray]]:
    """Training loss and exact parameter gradients for one batch.

    Runs the train-mode forward pass (dropout active, masks from
    dropout_seed), then reverse-mode through the head and BPTT through
    the LSTM stack.  Gradient keys match params.tensors().
    """
    X = _check_input(params, X)
    if X.shape[0] == 0:
        raise DataError("cannot compute gradients over an empty batch")
    logits, ctx = _forward_full(params, X, "train", dropout_seed)
    loss, dlogits = softmax_cross_entropy(logits, targets)
    grads = _backward_from(params, ctx, dlogits)
    return loss, grads


def _backward_from(
    params: ManeuverModelParams, ctx: dict, dlogits: np.ndarray
) -> dict[str, np.ndarray]:
    kern = backend.get_kernels()
    grads: dict[str, np.ndarray] = {}

    d2, a2, d1, a1, h_last = ctx["d2"], ctx["a2"], ctx["d1"], ctx["a1"], ctx["h_last"]
    grads["classifier.w"] = dlogits.T @ d2
    grads["classifier.b"] = dlogits.sum(axis=0)
    dd2 = dlogits @ params.classifier.w

    da2 = dd2 * ctx["fc2_mask"]
    dpre2 = da2 * (a2 > 0.0)
    grads["fc2.w"] = dpre2.T @ d1
    grads["fc2.b"] = dpre2.sum(axis=0)
    dd1 = dpre2 @ params.fc2.w

    da1 = dd1 * ctx["fc1_mask"]
    dpre1 = da1 * (a1 > 0.0)
    grads["fc1.w"] = dpre1.T @ h_last
    grads["fc1.b"] = dpre1.sum(axis=0)
    dh_last = dpre1 @ params.fc1.w

    T, B = ctx["T"], ctx["B"]
    hd = params.config.hidden_size
    dH = np.zeros((T, B, hd))
    dH[-1] = dh_last
    for li in range(len(params.lstm_layers) - 1, -1, -1):
        layer = params.lstm_layers[li]
        dX, dw_ih, dw_hh, db = kern.lstm_layer_backward(
            layer.w_ih, layer.w_hh, ctx["caches"][li], dH
        )
        grads[f"lstm{li}.w_ih"] = dw_ih
        grads[f"lstm{li}.w_hh"] = dw_hh
        grads[f"lstm{li}.b"] = db
        if li > 0:
            # the layer below saw its output through the dropout mask
            dH = dX * ctx["inter_masks"][li - 1]
    return grads
