"""Persistence for prepared datasets and trained models.

Both artifacts use the byte-stable tensor container, so equal inputs
produce byte-identical files.  Dataset archives carry the windows,
codes, and window provenance next to everything needed to interpret
them (split settings, codec labels, scaler statistics, road types).
Model files carry the parameter tensors plus the preprocessing recipe
(window geometry, scaler, codec, road types), making prediction
self-contained: a saved model can window and scale a raw stream
without the original dataset.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .container import read_container, write_container
from .datamodel import N_FEATURES, RoadTypeMap
from .errors import CompatibilityError
from .nn.params import GATE_ORDER, ManeuverModelParams, ModelConfig, params_from_tensors
from .preprocessing import (
    LabelCodec,
    RobustScaler,
    SplitConfig,
    WindowedDataset,
    WindowSample,
)

_DATASET_KIND = "windowed-dataset"
_MODEL_KIND = "maneuver-model"


def _scaler_to_meta(scaler: RobustScaler | None) -> dict | None:
    return None if scaler is None else scaler.to_lists()


def _scaler_from_meta(data: dict | None) -> RobustScaler | None:
    return None if data is None else RobustScaler.from_lists(data)


def save_dataset(
    path,
    dataset: WindowedDataset,
    road_types: RoadTypeMap | None = None,
) -> None:
    """Write a prepared dataset as one container file."""
    driver_ids = sorted(
        {s.source[0] for s in dataset.train} | {s.source[0] for s in dataset.test}
    )
    driver_index = {d: i for i, d in enumerate(driver_ids)}

    def pack(samples):
        X, y = _arrays(samples, dataset.config.window_length)
        src = np.array(
            [[driver_index[s.source[0]], s.source[1], s.source[2]] for s in samples],
            dtype=np.int64,
        ).reshape(len(samples), 3)
        return X, y, src

    train_X, train_y, train_src = pack(dataset.train)
    test_X, test_y, test_src = pack(dataset.test)
    meta = {
        "kind": _DATASET_KIND,
        "format": 1,
        "split": dataset.config.to_dict(),
        "labels": list(dataset.codec.labels),
        "scaler": _scaler_to_meta(dataset.scaler),
        "driver_ids": driver_ids,
        "road_types": None if road_types is None else list(road_types.names),
    }
    write_container(
        path,
        meta,
        {
            "train_X": train_X,
            "train_y": train_y,
            "train_src": train_src,
            "test_X": test_X,
            "test_y": test_y,
            "test_src": test_src,
        },
    )


def _arrays(samples, window_length):
    n = len(samples)
    X = np.empty((n, window_length, N_FEATURES), dtype=np.float64)
    y = np.empty(n, dtype=np.int64)
    for i, s in enumerate(samples):
        X[i] = s.features
        y[i] = s.label_code
    return X, y


def load_dataset(path) -> tuple[WindowedDataset, RoadTypeMap | None]:
    """Inverse of save_dataset."""
    meta, tensors = read_container(path)
    if meta.get("kind") != _DATASET_KIND:
        raise CompatibilityError(
            f"{path}: expected a dataset archive, found kind {meta.get('kind')!r}"
        )
    required = {"train_X", "train_y", "train_src", "test_X", "test_y", "test_src"}
    missing = sorted(required - set(tensors))
    if missing:
        raise CompatibilityError(f"{path}: archive missing tensors: {', '.join(missing)}")
    config = SplitConfig.from_dict(meta["split"])
    codec = LabelCodec(tuple(meta["labels"]))
    scaler = _scaler_from_meta(meta.get("scaler"))
    driver_ids = list(meta["driver_ids"])

    def unpack(X, y, src):
        samples = []
        for i in range(X.shape[0]):
            di, part, start = (int(v) for v in src[i])
            samples.append(
                WindowSample(
                    features=X[i],
                    label_code=int(y[i]),
                    source=(driver_ids[di], part, start),
                )
            )
        return tuple(samples)

    dataset = WindowedDataset(
        train=unpack(tensors["train_X"], tensors["train_y"], tensors["train_src"]),
        test=unpack(tensors["test_X"], tensors["test_y"], tensors["test_src"]),
        scaler=scaler,
        codec=codec,
        config=config,
    )
    road_types = meta.get("road_types")
    return dataset, None if road_types is None else RoadTypeMap(road_types)


@dataclass(frozen=True)
class ModelBundle:
    """A trained model plus the preprocessing recipe it expects."""

    params: ManeuverModelParams
    codec: LabelCodec
    scaler: RobustScaler | None
    window_length: int
    step_size: int
    road_types: RoadTypeMap | None
    extra: dict


def save_model(
    path,
    params: ManeuverModelParams,
    *,
    codec: LabelCodec,
    scaler: RobustScaler | None,
    window_length: int,
    step_size: int,
    road_types: RoadTypeMap | None = None,
    extra: dict | None = None,
) -> None:
    """Write a self-contained model file."""
    if codec.n_classes != params.config.n_classes:
        raise CompatibilityError(
            f"codec has {codec.n_classes} labels but the model predicts "
            f"{params.config.n_classes} classes"
        )
    meta = {
        "kind": _MODEL_KIND,
        "format": 1,
        "gate_order": list(GATE_ORDER),
        "model": params.config.to_dict(),
        "labels": list(codec.labels),
        "scaler": _scaler_to_meta(scaler),
        "window_length": int(window_length),
        "step_size": int(step_size),
        "road_types": None if road_types is None else list(road_types.names),
        "extra": extra or {},
    }
    write_container(path, meta, params.tensors())


def load_model(path) -> ModelBundle:
    """Inverse of save_model; validates kind, gate order, and shapes."""
    meta, tensors = read_container(path)
    if meta.get("kind") != _MODEL_KIND:
        raise CompatibilityError(
            f"{path}: expected a model file, found kind {meta.get('kind')!r}"
        )
    if meta.get("gate_order") != list(GATE_ORDER):
        raise CompatibilityError(
            f"{path}: gate order {meta.get('gate_order')} does not match "
            f"this implementation ({list(GATE_ORDER)})"
        )
    config = ModelConfig.from_dict(meta["model"])
    params = params_from_tensors(config, tensors)
    codec = LabelCodec(tuple(meta["labels"]))
    if codec.n_classes != config.n_classes:
        raise CompatibilityError(
            f"{path}: model file lists {codec.n_classes} labels for a "
            f"{config.n_classes}-class model"
        )
    road_types = meta.get("road_types")
    return ModelBundle(
        params=params,
        codec=codec,
        scaler=_scaler_from_meta(meta.get("scaler")),
        window_length=int(meta["window_length"]),
        step_size=int(meta["step_size"]),
        road_types=None if road_types is None else RoadTypeMap(road_types),
        extra=dict(meta.get("extra") or {}),
    )
