"""Throughput comparison of the compiled and numpy LSTM kernel backends.

Runs forward and forward+backward over a grid of batch/hidden shapes,
checks that both backends agree numerically, and prints per-call times.
The compiled path pays off where the per-timestep interpreter overhead
dominates (small batches, small hidden sizes); at large shapes both
backends converge on BLAS throughput.

Usage: python benchmarks/backend_bench.py [--repeats N]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from maneuver_rec.nn import available_backends, backend_name, set_backend
from maneuver_rec.nn.model import backward, forward
from maneuver_rec.nn.params import ModelConfig, init_params

SHAPES = [
    # (batch, time, hidden, layers)
    (1, 14, 16, 2),
    (8, 14, 32, 2),
    (64, 14, 64, 2),
    (256, 14, 64, 2),
    (32, 50, 32, 1),
    (16, 100, 64, 2),
]


def time_case(batch: int, T: int, hidden: int, layers: int, repeats: int):
    cfg = ModelConfig(
        n_classes=8,
        n_features=8,
        hidden_size=hidden,
        n_lstm_layers=layers,
        fc1_size=hidden,
        fc2_size=max(hidden // 2, 1),
        init_seed=0,
    )
    params = init_params(cfg)
    rng = np.random.default_rng(0)
    X = rng.normal(size=(batch, T, 8))
    y = rng.integers(0, 8, size=batch)

    results = {}
    for name in available_backends():
        set_backend(name)
        forward(params, X, mode="eval")  # warmup
        t0 = time.perf_counter()
        for _ in range(repeats):
            logits = forward(params, X, mode="eval")
        fwd = (time.perf_counter() - t0) / repeats

        backward(params, X, y, dropout_seed=1)  # warmup
        t0 = time.perf_counter()
        for _ in range(repeats):
            loss, grads = backward(params, X, y, dropout_seed=1)
        bwd = (time.perf_counter() - t0) / repeats
        results[name] = (fwd, bwd, logits, grads)

    names = list(results)
    if len(names) == 2:
        la, lb = results[names[0]][2], results[names[1]][2]
        ga, gb = results[names[0]][3], results[names[1]][3]
        assert np.allclose(la, lb, atol=1e-12), "backend logits diverge"
        for key in ga:
            assert np.allclose(ga[key], gb[key], atol=1e-10), f"backend grads diverge at {key}"
    return {name: (fwd, bwd) for name, (fwd, bwd, _, _) in results.items()}


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=20)
    args = parser.parse_args()

    print(f"available backends: {', '.join(available_backends())}")
    header = f"{'batch':>5} {'time':>5} {'hidden':>6} {'layers':>6}"
    for name in available_backends():
        header += f" | {name + ' fwd (ms)':>14} {name + ' fwd+bwd (ms)':>18}"
    if len(available_backends()) == 2:
        header += " | speedup fwd  speedup bwd"
    print(header)
    for batch, T, hidden, layers in SHAPES:
        times = time_case(batch, T, hidden, layers, args.repeats)
        row = f"{batch:>5} {T:>5} {hidden:>6} {layers:>6}"
        for name in available_backends():
            fwd, bwd = times[name]
            row += f" | {fwd * 1e3:>14.3f} {bwd * 1e3:>18.3f}"
        if "ext" in times and "python" in times:
            row += (
                f" | {times['python'][0] / times['ext'][0]:>11.2f}x"
                f" {times['python'][1] / times['ext'][1]:>11.2f}x"
            )
        print(row)
    set_backend("auto")
    print(f"active backend restored to: {backend_name()}")


if __name__ == "__main__":
    main()
