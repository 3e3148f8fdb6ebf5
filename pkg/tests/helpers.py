"""Shared test oracles: scalar reference forward and finite differences.

The reference evaluator is a deliberately independent re-implementation:
pure-Python loops over scalars, no shared code with the library's
vectorized kernels beyond the parameter container.
"""

import math

import numpy as np

from maneuver_rec.nn.model import backward
from maneuver_rec.nn.params import ModelConfig, init_params


def ref_forward_eval(params, X):
    """Eval-mode logits computed scalar-by-scalar."""
    X = np.asarray(X, dtype=np.float64)
    B, T, F = X.shape
    logits = []
    for b in range(B):
        seq = [[float(X[b, t, f]) for f in range(F)] for t in range(T)]
        for layer in params.lstm_layers:
            H = layer.hidden_size
            h = [0.0] * H
            c = [0.0] * H
            outs = []
            for t in range(len(seq)):
                x = seq[t]
                pre = []
                for r in range(4 * H):
                    acc = float(layer.b[r])
                    for f in range(len(x)):
                        acc += float(layer.w_ih[r, f]) * x[f]
                    for j in range(H):
                        acc += float(layer.w_hh[r, j]) * h[j]
                    pre.append(acc)
                new_h, new_c = [], []
                for j in range(H):
                    gi = 1.0 / (1.0 + math.exp(-pre[j]))
                    gf = 1.0 / (1.0 + math.exp(-pre[H + j]))
                    gg = math.tanh(pre[2 * H + j])
                    go = 1.0 / (1.0 + math.exp(-pre[3 * H + j]))
                    cc = gf * c[j] + gi * gg
                    new_c.append(cc)
                    new_h.append(go * math.tanh(cc))
                h, c = new_h, new_c
                outs.append(list(h))
            seq = outs

        def dense(w, bias, vec, relu):
            out = []
            for r in range(w.shape[0]):
                acc = float(bias[r])
                for k in range(len(vec)):
                    acc += float(w[r, k]) * vec[k]
                out.append(max(acc, 0.0) if relu else acc)
            return out

        v1 = dense(params.fc1.w, params.fc1.b, seq[-1], True)
        v2 = dense(params.fc2.w, params.fc2.b, v1, True)
        logits.append(dense(params.classifier.w, params.classifier.b, v2, False))
    return np.array(logits)


def fd_gradient_check(params, X, y, dropout_seed, coord_rng, coords_per_tensor=6, h=1e-5):
    """Max relative error between analytic and central-difference gradients.

    Relative error uses a 1e-4 denominator floor: genuinely tiny
    gradients must agree absolutely to 1e-8, everything else relatively.
    """
    _, grads = backward(params, X, y, dropout_seed=dropout_seed)
    worst = 0.0
    for key, tensor in params.tensors().items():
        flat = tensor.reshape(-1)
        n = flat.size
        count = min(coords_per_tensor, n)
        idxs = coord_rng.choice(n, size=count, replace=False)
        for ix in idxs:
            old = flat[ix]
            flat[ix] = old + h
            lp, _ = backward(params, X, y, dropout_seed=dropout_seed)
            flat[ix] = old - h
            lm, _ = backward(params, X, y, dropout_seed=dropout_seed)
            flat[ix] = old
            numeric = (lp - lm) / (2.0 * h)
            analytic = float(grads[key].reshape(-1)[ix])
            rel = abs(numeric - analytic) / max(abs(numeric), abs(analytic), 1e-4)
            worst = max(worst, rel)
    return worst


def make_tiny_model(rng, dropout_allowed=True):
    """Random small configuration plus a matching random batch.

    All tensors get jittered after init: the stock zero bias puts ReLU
    kinks exactly at the finite-difference evaluation point whenever an
    input row is fully dead, and FD is meaningless at a kink.
    """
    n_features = int(rng.integers(2, 4))
    n_classes = int(rng.integers(2, 4))
    lstm_dropout = float(rng.choice([0.0, 0.3, 0.5])) if dropout_allowed else 0.0
    fc_dropout = float(rng.choice([0.0, 0.25])) if dropout_allowed else 0.0
    cfg = ModelConfig(
        n_classes=n_classes,
        n_features=n_features,
        hidden_size=int(rng.integers(2, 5)),
        n_lstm_layers=int(rng.integers(1, 4)),
        lstm_dropout=lstm_dropout,
        fc_dropout=fc_dropout,
        fc1_size=int(rng.integers(2, 5)),
        fc2_size=int(rng.integers(2, 4)),
        init_seed=int(rng.integers(0, 2**31)),
    )
    params = init_params(cfg)
    for tensor in params.tensors().values():
        tensor += rng.normal(size=tensor.shape) * 0.1
    B = int(rng.integers(1, 4))
    T = int(rng.integers(2, 6))
    X = rng.normal(size=(B, T, n_features))
    y = rng.integers(0, n_classes, size=B)
    return params, X, y
