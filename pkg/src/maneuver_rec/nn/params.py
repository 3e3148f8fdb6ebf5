"""Model configuration, parameter containers, and initialization."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields
from typing import Mapping

import numpy as np

from ..errors import CompatibilityError, ConfigError

# Slice order of the stacked gate dimension in every [4H x ...] tensor.
GATE_ORDER = ("input", "forget", "cell", "output")


@dataclass(frozen=True)
class ModelConfig:
    """Architecture plus initialization seed.

    Defaults mirror the demonstration setup: two stacked LSTM layers with
    dropout 0.7 in between, two fully connected layers with dropout 0.3,
    and a linear classifier on top.
    """

    n_classes: int
    n_features: int = 8
    hidden_size: int = 64
    n_lstm_layers: int = 2
    lstm_dropout: float = 0.7
    fc_dropout: float = 0.3
    fc1_size: int = 64
    fc2_size: int = 32
    init_seed: int = 0

    def __post_init__(self):
        for name in ("n_classes", "n_features", "hidden_size", "n_lstm_layers", "fc1_size", "fc2_size"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        for name in ("lstm_dropout", "fc_dropout"):
            rate = getattr(self, name)
            if not 0.0 <= rate < 1.0:
                raise ConfigError(f"{name} must be in [0, 1), got {rate}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Mapping) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown model config keys: {', '.join(unknown)}")
        return cls(**dict(data))


@dataclass
class LstmLayerParams:
    """One LSTM layer: input weights [4H x F], recurrent weights [4H x H], bias [4H]."""

    w_ih: np.ndarray
    w_hh: np.ndarray
    b: np.ndarray

    @property
    def hidden_size(self) -> int:
        return self.w_hh.shape[1]

    @property
    def input_size(self) -> int:
        return self.w_ih.shape[1]


@dataclass
class DenseParams:
    """Affine layer: weights [out x in], bias [out]."""

    w: np.ndarray
    b: np.ndarray


@dataclass
class ManeuverModelParams:
    """All trainable tensors of the LSTM stack, head, and classifier."""

    config: ModelConfig
    lstm_layers: list[LstmLayerParams]
    fc1: DenseParams
    fc2: DenseParams
    classifier: DenseParams

    def tensors(self) -> dict[str, np.ndarray]:
        """Live (mutable) views of every parameter tensor, in a fixed order."""
        out: dict[str, np.ndarray] = {}
        for i, layer in enumerate(self.lstm_layers):
            out[f"lstm{i}.w_ih"] = layer.w_ih
            out[f"lstm{i}.w_hh"] = layer.w_hh
            out[f"lstm{i}.b"] = layer.b
        for name, dense in (("fc1", self.fc1), ("fc2", self.fc2), ("classifier", self.classifier)):
            out[f"{name}.w"] = dense.w
            out[f"{name}.b"] = dense.b
        return out

    def copy(self) -> "ManeuverModelParams":
        return ManeuverModelParams(
            config=self.config,
            lstm_layers=[
                LstmLayerParams(w_ih=l.w_ih.copy(), w_hh=l.w_hh.copy(), b=l.b.copy())
                for l in self.lstm_layers
            ],
            fc1=DenseParams(w=self.fc1.w.copy(), b=self.fc1.b.copy()),
            fc2=DenseParams(w=self.fc2.w.copy(), b=self.fc2.b.copy()),
            classifier=DenseParams(w=self.classifier.w.copy(), b=self.classifier.b.copy()),
        )


def _expected_shapes(cfg: ModelConfig) -> dict[str, tuple[int, ...]]:
    shapes: dict[str, tuple[int, ...]] = {}
    h = cfg.hidden_size
    f_in = cfg.n_features
    for i in range(cfg.n_lstm_layers):
        shapes[f"lstm{i}.w_ih"] = (4 * h, f_in)
        shapes[f"lstm{i}.w_hh"] = (4 * h, h)
        shapes[f"lstm{i}.b"] = (4 * h,)
        f_in = h
    shapes["fc1.w"] = (cfg.fc1_size, h)
    shapes["fc1.b"] = (cfg.fc1_size,)
    shapes["fc2.w"] = (cfg.fc2_size, cfg.fc1_size)
    shapes["fc2.b"] = (cfg.fc2_size,)
    shapes["classifier.w"] = (cfg.n_classes, cfg.fc2_size)
    shapes["classifier.b"] = (cfg.n_classes,)
    return shapes


def init_params(cfg: ModelConfig) -> ManeuverModelParams:
    """Seeded uniform init, bound 1/sqrt(fan), forget-gate bias 1.

    LSTM weights use 1/sqrt(hidden_size); dense layers 1/sqrt(fan_in).
    Biases start at zero except the forget-gate slice, which starts at 1
    so early gradients are not squashed by a closed forget gate.
    """
    rng = np.random.Generator(np.random.PCG64(cfg.init_seed))
    h = cfg.hidden_size

    layers = []
    bound = 1.0 / np.sqrt(h)
    f_in = cfg.n_features
    for _ in range(cfg.n_lstm_layers):
        w_ih = rng.uniform(-bound, bound, size=(4 * h, f_in))
        w_hh = rng.uniform(-bound, bound, size=(4 * h, h))
        b = np.zeros(4 * h)
        b[h : 2 * h] = 1.0
        layers.append(LstmLayerParams(w_ih=w_ih, w_hh=w_hh, b=b))
        f_in = h

    def dense(n_out: int, n_in: int) -> DenseParams:
        limit = 1.0 / np.sqrt(n_in)
        return DenseParams(w=rng.uniform(-limit, limit, size=(n_out, n_in)), b=np.zeros(n_out))

    return ManeuverModelParams(
        config=cfg,
        lstm_layers=layers,
        fc1=dense(cfg.fc1_size, h),
        fc2=dense(cfg.fc2_size, cfg.fc1_size),
        classifier=dense(cfg.n_classes, cfg.fc2_size),
    )


def params_from_tensors(cfg: ModelConfig, tensors: Mapping[str, np.ndarray]) -> ManeuverModelParams:
    """Rebuild a parameter container, refusing on any dimension mismatch."""
    expected = _expected_shapes(cfg)
    missing = sorted(set(expected) - set(tensors))
    if missing:
        raise CompatibilityError(f"missing parameter tensors: {missing}")
    for name, shape in expected.items():
        if tuple(tensors[name].shape) != shape:
            raise CompatibilityError(
                f"tensor {name!r} has shape {tuple(tensors[name].shape)}, expected {shape}"
            )
    layers = [
        LstmLayerParams(
            w_ih=np.array(tensors[f"lstm{i}.w_ih"], dtype=np.float64),
            w_hh=np.array(tensors[f"lstm{i}.w_hh"], dtype=np.float64),
            b=np.array(tensors[f"lstm{i}.b"], dtype=np.float64),
        )
        for i in range(cfg.n_lstm_layers)
    ]

    def dense(name: str) -> DenseParams:
        return DenseParams(
            w=np.array(tensors[f"{name}.w"], dtype=np.float64),
            b=np.array(tensors[f"{name}.b"], dtype=np.float64),
        )

    return ManeuverModelParams(
        config=cfg, lstm_layers=layers, fc1=dense("fc1"), fc2=dense("fc2"), classifier=dense("classifier")
    )
