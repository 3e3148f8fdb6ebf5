"""Command-line pipeline: synth | prepare | train | evaluate | predict.

Configuration comes from one YAML file with per-stage sections
(scenario, split, rebalance, model, train).  A top-level ``seed``
fills in any stage seed that is not set explicitly; ``--seed`` on the
command line overrides that master seed.  Every directory-producing
command writes the resolved configuration next to its outputs, so a
run can be reproduced from its artifacts alone.

Exit codes: 0 success, 2 configuration error, 3 data error,
4 compatibility error, 1 unexpected failure.  MANEUVER_REC_LOG sets
the log level.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import archive, datamodel, evaluation, preprocessing, svgplot, synthgen, training
from .errors import CompatibilityError, ConfigError, DataError
from .nn.params import ModelConfig, init_params

log = logging.getLogger("maneuver_rec")

_SECTIONS = ("scenario", "split", "rebalance", "model", "train")


@dataclass(frozen=True)
class RebalanceConfig:
    """Label dropping and majority undersampling applied after the split."""

    drop: tuple[str, ...] = ()
    undersample: dict[str, int] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self) -> None:
        for label, cap in self.undersample.items():
            if not isinstance(cap, int) or cap < 0:
                raise ConfigError(
                    f"undersample cap for {label!r} must be a non-negative integer, got {cap!r}"
                )

    def to_dict(self) -> dict:
        return {
            "drop": list(self.drop),
            "undersample": dict(self.undersample),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RebalanceConfig":
        unknown = sorted(set(d) - set(cls.__dataclass_fields__))
        if unknown:
            raise ConfigError(f"unknown rebalance settings: {', '.join(unknown)}")
        drop = d.get("drop", ())
        if isinstance(drop, str):
            drop = (drop,)
        return cls(
            drop=tuple(drop),
            undersample=dict(d.get("undersample", {})),
            seed=d.get("seed", 0),
        )


@dataclass(frozen=True)
class PipelineConfig:
    """Parsed configuration file with the master seed already applied."""

    seed: int
    scenario: dict
    split: dict
    rebalance: dict
    model: dict
    train: dict

    @classmethod
    def load(cls, path: str | None, seed_override: int | None) -> "PipelineConfig":
        raw: dict = {}
        if path is not None:
            with open(path, encoding="utf-8") as fh:
                loaded = yaml.safe_load(fh)
            if loaded is None:
                loaded = {}
            if not isinstance(loaded, dict):
                raise ConfigError(f"{path}: configuration must be a mapping")
            raw = loaded
        unknown = sorted(set(raw) - set(_SECTIONS) - {"seed"})
        if unknown:
            raise ConfigError(f"unknown configuration sections: {', '.join(unknown)}")
        master = raw.get("seed", 0)
        if seed_override is not None:
            master = seed_override
        if not isinstance(master, int) or master < 0:
            raise ConfigError(f"seed must be a non-negative integer, got {master!r}")

        sections = {}
        for name in _SECTIONS:
            section = raw.get(name, {})
            if not isinstance(section, dict):
                raise ConfigError(f"section {name!r} must be a mapping")
            sections[name] = dict(section)
        # a stage seed set explicitly in the file wins over the master seed
        sections["scenario"].setdefault("seed", master)
        sections["split"].setdefault("seed", master)
        sections["rebalance"].setdefault("seed", master)
        sections["model"].setdefault("init_seed", master)
        sections["train"].setdefault("shuffle_seed", master)
        return cls(seed=master, **sections)


def _write_yaml(path: Path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(payload, fh, sort_keys=True, default_flow_style=False)


def _out_dir(path_str: str) -> Path:
    out = Path(path_str)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_synth(args: argparse.Namespace) -> int:
    cfg = PipelineConfig.load(args.config, args.seed)
    scenario = synthgen.ScenarioConfig.from_dict(cfg.scenario)
    out = _out_dir(args.out)
    recordings = synthgen.generate(scenario)
    road_types = synthgen.road_type_map()

    files = []
    class_counts: dict[str, dict[str, int]] = {}
    for rec in recordings:
        name = f"{rec.driver_id}.csv"
        datamodel.write_csv(rec, out / name, road_types)
        files.append(name)
        counts: dict[str, int] = {}
        for label in rec.labels:
            counts[label] = counts.get(label, 0) + 1
        class_counts[rec.driver_id] = dict(sorted(counts.items()))
    manifest = {
        "scenario": scenario.to_dict(),
        "files": files,
        "road_types": list(road_types.names),
        "frame_class_counts": class_counts,
    }
    _write_yaml(out / "manifest.yaml", manifest)
    _write_yaml(out / "config_resolved.yaml", {"seed": cfg.seed, "scenario": scenario.to_dict()})
    log.info("wrote %d recordings to %s", len(recordings), out)
    return 0


def cmd_prepare(args: argparse.Namespace) -> int:
    cfg = PipelineConfig.load(args.config, args.seed)
    split_cfg = preprocessing.SplitConfig.from_dict(cfg.split)
    rebalance = RebalanceConfig.from_dict(cfg.rebalance)
    data_dir = Path(args.data)
    paths = sorted(data_dir.glob("*.csv"))
    if not paths:
        raise DataError(f"no CSV files found in {data_dir}")
    out = _out_dir(args.out)

    road_types = datamodel.RoadTypeMap()
    recordings = []
    for path in paths:
        recordings.append(datamodel.ingest_csv(path, road_types=road_types))
        log.info("ingested %s (%d frames)", path.name, len(recordings[-1]))

    dataset = preprocessing.timeseries_train_test_split(recordings, split_cfg)
    counts_before = {
        "train": dataset.class_counts("train"),
        "test": dataset.class_counts("test"),
    }
    if rebalance.drop or rebalance.undersample:
        dataset = preprocessing.remove_maneuvers(
            dataset,
            drop=rebalance.drop,
            undersample=rebalance.undersample or None,
            seed=rebalance.seed,
        )
    counts_after = {
        "train": dataset.class_counts("train"),
        "test": dataset.class_counts("test"),
    }

    archive.save_dataset(out / "dataset.mrtc", dataset, road_types)
    manifest = {
        "split": split_cfg.to_dict(),
        "rebalance": rebalance.to_dict(),
        "source_files": [p.name for p in paths],
        "labels": list(dataset.codec.labels),
        "road_types": list(road_types.names),
        "scaler": None if dataset.scaler is None else dataset.scaler.to_lists(),
        "window_counts": {"train": len(dataset.train), "test": len(dataset.test)},
        "class_counts_before_rebalance": counts_before,
        "class_counts_after_rebalance": counts_after,
    }
    _write_yaml(out / "manifest.yaml", manifest)
    _write_yaml(
        out / "config_resolved.yaml",
        {"seed": cfg.seed, "split": split_cfg.to_dict(), "rebalance": rebalance.to_dict()},
    )
    log.info(
        "prepared %d train / %d test windows into %s",
        len(dataset.train),
        len(dataset.test),
        out,
    )
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    cfg = PipelineConfig.load(args.config, args.seed)
    dataset, _road_types = archive.load_dataset(args.data)
    train_cfg = training.TrainConfig.from_dict(cfg.train)

    model_section = dict(cfg.model)
    declared = model_section.pop("n_classes", None)
    if declared is not None and declared != dataset.codec.n_classes:
        raise ConfigError(
            f"model section declares {declared} classes but the dataset codec has "
            f"{dataset.codec.n_classes}"
        )
    model_cfg = ModelConfig.from_dict(
        {"n_classes": dataset.codec.n_classes, "n_features": datamodel.N_FEATURES, **model_section}
    )

    out = _out_dir(args.out)
    params = init_params(model_cfg)
    train_set = dataset.train_arrays()
    val_set = dataset.test_arrays()
    log.info(
        "training on %d windows, validating on %d, %d epochs",
        train_set[0].shape[0],
        val_set[0].shape[0],
        train_cfg.epochs,
    )
    params, history = training.fit_model(params, train_set, val_set, train_cfg)

    archive.save_model(
        out / "model.mrtc",
        params,
        codec=dataset.codec,
        scaler=dataset.scaler,
        window_length=dataset.config.window_length,
        step_size=dataset.config.step_size,
        road_types=_road_types,
        extra={"train": train_cfg.to_dict()},
    )
    history.to_csv(out / "history.csv")
    svgplot.render_training_curves(history, out / "curves.svg")
    _write_yaml(
        out / "config_resolved.yaml",
        {"seed": cfg.seed, "model": model_cfg.to_dict(), "train": train_cfg.to_dict()},
    )
    final = history.records[-1]
    log.info(
        "final epoch %d: train loss %.4f, val loss %.4f, val accuracy %.4f",
        final.epoch,
        final.train_loss,
        final.val_loss,
        final.val_accuracy,
    )
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    bundle = archive.load_model(args.model)
    dataset, _ = archive.load_dataset(args.data)
    if tuple(dataset.codec.labels) != tuple(bundle.codec.labels):
        raise CompatibilityError(
            f"model labels {list(bundle.codec.labels)} do not match dataset labels "
            f"{list(dataset.codec.labels)}"
        )
    if dataset.config.window_length != bundle.window_length:
        raise CompatibilityError(
            f"model expects windows of {bundle.window_length} frames, dataset has "
            f"{dataset.config.window_length}"
        )
    out = _out_dir(args.out)
    X, y = dataset.test_arrays() if args.split == "test" else dataset.train_arrays()
    result = training.evaluate(bundle.params, (X, y))
    labels = bundle.codec.labels
    report = evaluation.evaluation_report(y, result.predictions, labels)

    evaluation.write_matrix_csv(out / "confusion.csv", report.confusion.counts, labels)
    evaluation.write_matrix_csv(out / "recall.csv", report.recall_matrix, labels)
    evaluation.write_matrix_csv(out / "precision.csv", report.precision_matrix, labels)
    evaluation.write_per_class_csv(out / "per_class.csv", report.per_class)
    svgplot.render_heatmap(
        report.confusion.counts.astype(np.float64), labels, "confusion", out / "confusion.svg"
    )
    svgplot.render_heatmap(report.recall_matrix, labels, "recall", out / "recall.svg")
    svgplot.render_heatmap(report.precision_matrix, labels, "precision", out / "precision.svg")

    recalls = [s.recall for s in report.per_class if s.support > 0]
    metrics = {
        "split": args.split,
        "mean_loss": float(result.mean_loss),
        "accuracy": float(result.accuracy),
        "macro_recall": float(np.mean(recalls)) if recalls else 0.0,
        "min_recall": float(min(recalls)) if recalls else 0.0,
    }
    _write_yaml(out / "metrics.yaml", metrics)
    log.info(
        "evaluated %d windows: accuracy %.4f, macro recall %.4f",
        len(y),
        metrics["accuracy"],
        metrics["macro_recall"],
    )
    return 0


def _stream_windows(features: np.ndarray, window_length: int, step_size: int) -> np.ndarray:
    """Continuous sliding windows over a scaled stream (no partitions)."""
    n = features.shape[0]
    count = 0 if n < window_length else (n - window_length) // step_size + 1
    out = np.empty((count, window_length, features.shape[1]), dtype=np.float64)
    for k in range(count):
        out[k] = features[k * step_size : k * step_size + window_length]
    return out


def cmd_predict(args: argparse.Namespace) -> int:
    bundle = archive.load_model(args.model)
    timestamps, features = datamodel.read_stream_csv(
        args.input, road_types=bundle.road_types
    )
    if bundle.scaler is not None:
        features = preprocessing.apply_scaler(features, bundle.scaler)
    windows = _stream_windows(features, bundle.window_length, bundle.step_size)
    if windows.shape[0] == 0:
        log.warning(
            "input has %d rows, shorter than one window of %d; no predictions",
            features.shape[0],
            bundle.window_length,
        )
    codes = training.predict(bundle.params, windows)
    names = bundle.codec.decode(codes)
    starts = [int(timestamps[k * bundle.step_size]) for k in range(windows.shape[0])]

    if args.out is None:
        writer = csv.writer(sys.stdout)
        writer.writerow(["window_start_ms", "maneuver"])
        for ts, name in zip(starts, names):
            writer.writerow([ts, name])
    else:
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["window_start_ms", "maneuver"])
            for ts, name in zip(starts, names):
                writer.writerow([ts, name])
        log.info("wrote %d predictions to %s", len(names), args.out)
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="maneuver-rec",
        description="Maneuver recognition pipeline over windowed telematics streams.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="YAML configuration file")
        p.add_argument("--seed", type=int, help="override the master seed")

    p = sub.add_parser("synth", help="generate synthetic labeled recordings")
    add_common(p)
    p.add_argument("--out", required=True, help="output directory for CSVs and manifest")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("prepare", help="ingest, split, window, scale, rebalance")
    add_common(p)
    p.add_argument("--data", required=True, help="directory of recording CSVs")
    p.add_argument("--out", required=True, help="output directory for the dataset archive")
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("train", help="fit the classifier on a prepared dataset")
    add_common(p)
    p.add_argument("--data", required=True, help="dataset archive from prepare")
    p.add_argument("--out", required=True, help="output directory for model and history")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="class-wise evaluation of a trained model")
    p.add_argument("--model", required=True, help="model file from train")
    p.add_argument("--data", required=True, help="dataset archive from prepare")
    p.add_argument("--split", choices=("test", "train"), default="test")
    p.add_argument("--out", required=True, help="output directory for reports")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("predict", help="label windows of an unlabeled stream")
    p.add_argument("--model", required=True, help="model file from train")
    p.add_argument("--input", required=True, help="unlabeled sensor stream CSV")
    p.add_argument("--out", help="output CSV (stdout when omitted)")
    p.set_defaults(func=cmd_predict)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get("MANEUVER_REC_LOG", "INFO").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        log.error("configuration error: %s", exc)
        return 2
    except DataError as exc:
        log.error("data error: %s", exc)
        return 3
    except OSError as exc:
        log.error("cannot read or write %s: %s", exc.filename, exc.strerror)
        return 3
    except CompatibilityError as exc:
        log.error("compatibility error: %s", exc)
        return 4
    except Exception:
        log.exception("unexpected failure")
        return 1


if __name__ == "__main__":
    sys.exit(main())
