"""Minibatch training loop, evaluation, and prediction.

Datasets are (windows, codes) pairs: float64 windows shaped
[n, time, features] and int64 class codes shaped [n].  Each epoch
shuffles with a seeded permutation and consumes every sample once; the
last batch may be short.  Per-batch dropout seeds are drawn from the
same per-epoch stream as the permutation, so (init seed, shuffle seed,
data) fully determine the final parameters.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError
from .nn.model import backward, forward, softmax_cross_entropy
from .nn.optim import AdamState, adam_step, init_adam_state, sgd_step
from .nn.params import ManeuverModelParams

# domain tag separating per-epoch streams from other seeded streams
_EPOCH = 0x53

_EVAL_CHUNK = 256

_HISTORY_HEADER = ("epoch", "train_loss", "val_loss", "val_accuracy")


@dataclass(frozen=True)
class TrainConfig:
    """Settings for one fit: loop sizes, optimiser, and shuffle seed."""

    epochs: int = 80
    batch_size: int = 64
    learning_rate: float = 1e-3
    shuffle_seed: int = 0
    loss: str = "cross_entropy"
    optimizer: str = "adam"

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if not np.isfinite(self.learning_rate) or self.learning_rate < 0:
            raise ConfigError(f"learning_rate must be finite and >= 0, got {self.learning_rate}")
        if self.loss != "cross_entropy":
            raise ConfigError(f"unsupported loss {self.loss!r}; expected 'cross_entropy'")
        if self.optimizer not in ("adam", "sgd"):
            raise ConfigError(f"unsupported optimizer {self.optimizer!r}; expected 'adam' or 'sgd'")

    def to_dict(self) -> dict:
        return {
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "learning_rate": self.learning_rate,
            "shuffle_seed": self.shuffle_seed,
            "loss": self.loss,
            "optimizer": self.optimizer,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f: d[f] for f in cls.__dataclass_fields__ if f in d}
        unknown = sorted(set(d) - set(cls.__dataclass_fields__))
        if unknown:
            raise ConfigError(f"unknown training settings: {', '.join(unknown)}")
        return cls(**known)


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    val_accuracy: float


@dataclass
class TrainingHistory:
    """One record per completed epoch, serializable to CSV."""

    records: list[EpochRecord] = field(default_factory=list)

    def append(self, record: EpochRecord) -> None:
        self.records.append(record)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def to_csv(self, path) -> None:
        # repr() keeps float round trips bit-exact
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(_HISTORY_HEADER)
            for r in self.records:
                writer.writerow(
                    [r.epoch, repr(r.train_loss), repr(r.val_loss), repr(r.val_accuracy)]
                )

    @classmethod
    def from_csv(cls, path) -> "TrainingHistory":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows or tuple(rows[0]) != _HISTORY_HEADER:
            raise DataError(f"{path}: expected history header {','.join(_HISTORY_HEADER)}")
        records = []
        for row in rows[1:]:
            if len(row) != 4:
                raise DataError(f"{path}: malformed history row {row!r}")
            records.append(
                EpochRecord(int(row[0]), float(row[1]), float(row[2]), float(row[3]))
            )
        return cls(records)


@dataclass(frozen=True)
class EvalResult:
    mean_loss: float
    accuracy: float
    predictions: np.ndarray


def _check_dataset(X: np.ndarray, y: np.ndarray, n_features: int) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 3 or y.ndim != 1 or X.shape[0] != y.shape[0]:
        raise DataError("dataset must pair [n, time, features] windows with n class codes")
    if X.shape[2] != n_features:
        raise DataError(f"dataset has {X.shape[2]} features, model expects {n_features}")
    return X, y


def _epoch_rng(shuffle_seed: int, epoch_index: int) -> np.random.Generator:
    return np.random.Generator(
        np.random.PCG64(np.random.SeedSequence([shuffle_seed, _EPOCH, epoch_index]))
    )


def train_epoch(
    params: ManeuverModelParams,
    optimizer_state: AdamState | None,
    train_set: tuple[np.ndarray, np.ndarray],
    cfg: TrainConfig,
    epoch_index: int,
) -> tuple[ManeuverModelParams, AdamState | None, float]:
    """One full shuffled pass; one optimiser step per minibatch.

    Returns the (mutated in place) params, the optimiser state, and the
    batch-size-weighted mean training loss.
    """
    X, y = _check_dataset(train_set[0], train_set[1], params.config.n_features)
    n = X.shape[0]
    if n == 0:
        raise DataError("cannot train on an empty dataset")
    if cfg.optimizer == "adam" and optimizer_state is None:
        raise ConfigError("adam requires an optimizer state; use init_adam_state")

    rng = _epoch_rng(cfg.shuffle_seed, epoch_index)
    perm = rng.permutation(n)
    loss_sum = 0.0
    for start in range(0, n, cfg.batch_size):
        idx = perm[start : start + cfg.batch_size]
        dropout_seed = int(rng.integers(0, 2**63))
        loss, grads = backward(params, X[idx], y[idx], dropout_seed=dropout_seed)
        if cfg.optimizer == "adam":
            adam_step(params, grads, optimizer_state, cfg.learning_rate)
        else:
            sgd_step(params, grads, cfg.learning_rate)
        loss_sum += loss * idx.shape[0]
    return params, optimizer_state, loss_sum / n


def evaluate(
    params: ManeuverModelParams,
    dataset: tuple[np.ndarray, np.ndarray],
) -> EvalResult:
    """Eval-mode mean loss, accuracy, and per-sample predicted codes."""
    X, y = _check_dataset(dataset[0], dataset[1], params.config.n_features)
    n = X.shape[0]
    if n == 0:
        raise DataError("cannot evaluate on an empty dataset")
    loss_sum = 0.0
    preds = np.empty(n, dtype=np.int64)
    for start in range(0, n, _EVAL_CHUNK):
        stop = min(start + _EVAL_CHUNK, n)
        logits = forward(params, X[start:stop], mode="eval")
        loss, _ = softmax_cross_entropy(logits, y[start:stop])
        loss_sum += loss * (stop - start)
        preds[start:stop] = np.argmax(logits, axis=1)  # ties -> lowest code
    accuracy = float(np.mean(preds == y))
    return EvalResult(loss_sum / n, accuracy, preds)


def fit_model(
    params: ManeuverModelParams,
    train_set: tuple[np.ndarray, np.ndarray],
    val_set: tuple[np.ndarray, np.ndarray],
    train_cfg: TrainConfig,
) -> tuple[ManeuverModelParams, TrainingHistory]:
    """Fixed-epoch fit: train_epoch then evaluate, one record per epoch.

    No early stopping; over/underfitting is assessed from the history
    curves afterwards.
    """
    state = init_adam_state(params) if train_cfg.optimizer == "adam" else None
    history = TrainingHistory()
    for epoch_index in range(train_cfg.epochs):
        params, state, train_loss = train_epoch(params, state, train_set, train_cfg, epoch_index)
        result = evaluate(params, val_set)
        history.append(
            EpochRecord(epoch_index + 1, train_loss, result.mean_loss, result.accuracy)
        )
    return params, history


def predict(params: ManeuverModelParams, windows: np.ndarray) -> np.ndarray:
    """Predicted class codes, argmax ties broken by lowest code."""
    windows = np.asarray(windows, dtype=np.float64)
    if windows.ndim != 3:
        raise DataError("windows must be shaped [n, time, features]")
    n = windows.shape[0]
    if n == 0:
        return np.empty(0, dtype=np.int64)
    preds = np.empty(n, dtype=np.int64)
    for start in range(0, n, _EVAL_CHUNK):
        stop = min(start + _EVAL_CHUNK, n)
        logits = forward(params, windows[start:stop], mode="eval")
        preds[start:stop] = np.argmax(logits, axis=1)
    return preds
