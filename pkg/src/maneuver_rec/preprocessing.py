"""Partitioned train/test splitting, robust scaling, sliding windows,
class rebalancing, and label encoding.

The ordering of the pipeline is the whole point: recordings are first cut
into contiguous partitions, test partitions are sampled, and only then are
windows slid inside each partition separately. Windows therefore never
straddle a partition boundary, which is what keeps overlapping windows of
the training data out of the test data.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, replace
from typing import Iterable, Mapping, Sequence

import numpy as np

from .datamodel import N_FEATURES, Recording, feature_matrix
from .errors import ConfigError, DataError

# Distinct entropy domains keep seeded substreams of unrelated consumers apart.
_SPLIT = 0x51
_UNDERSAMPLE = 0x52


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def _substream(seed: int, domain: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, domain, index])))


@dataclass(frozen=True)
class SplitConfig:
    """Knobs of the split/window/scale stage."""

    n_partitions: int = 20
    test_fraction: float = 0.2
    window_length: int = 14
    step_size: int = 6
    scale: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.window_length < 1:
            raise ConfigError(f"window_length must be >= 1, got {self.window_length}")
        if self.step_size < 1:
            raise ConfigError(f"step_size must be >= 1, got {self.step_size}")
        if self.n_partitions < 2:
            raise ConfigError(f"n_partitions must be >= 2, got {self.n_partitions}")
        if not 0.0 < self.test_fraction < 1.0:
            raise ConfigError(f"test_fraction must be in (0, 1), got {self.test_fraction}")
        k = self.n_test_partitions
        if not 1 <= k <= self.n_partitions - 1:
            raise ConfigError(
                f"test_fraction {self.test_fraction} with {self.n_partitions} partitions "
                f"rounds to {k} test partitions; need between 1 and {self.n_partitions - 1}"
            )
        if self.seed < 0:
            raise ConfigError(f"seed must be non-negative, got {self.seed}")

    @property
    def n_test_partitions(self) -> int:
        return _round_half_up(self.test_fraction * self.n_partitions)

    def to_dict(self) -> dict:
        return {
            "n_partitions": self.n_partitions,
            "test_fraction": self.test_fraction,
            "window_length": self.window_length,
            "step_size": self.step_size,
            "scale": self.scale,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "SplitConfig":
        known = {f: d[f] for f in cls.__dataclass_fields__ if f in d}
        unknown = sorted(set(d) - set(cls.__dataclass_fields__))
        if unknown:
            raise ConfigError(f"unknown split settings: {', '.join(unknown)}")
        return cls(**known)


@dataclass(frozen=True)
class LabelCodec:
    """Bijection between maneuver label strings and contiguous codes."""

    labels: tuple[str, ...]

    def __post_init__(self):
        if len(set(self.labels)) != len(self.labels):
            raise DataError("codec labels must be distinct")
        if not self.labels:
            raise DataError("codec needs at least one label")

    @classmethod
    def fit(cls, values: Iterable[str]) -> "LabelCodec":
        """Distinct labels, lexicographically sorted, coded 0..K-1."""
        return cls(labels=tuple(sorted(set(values))))

    @property
    def n_classes(self) -> int:
        return len(self.labels)

    def encode(self, values: Iterable[str]) -> np.ndarray:
        index = {label: i for i, label in enumerate(self.labels)}
        codes = []
        for v in values:
            try:
                codes.append(index[v])
            except KeyError:
                raise DataError(f"unknown label {v!r}; known: {list(self.labels)}") from None
        return np.asarray(codes, dtype=np.int64)

    def decode(self, codes: Iterable[int]) -> list[str]:
        out = []
        for c in codes:
            c = int(c)
            if not 0 <= c < len(self.labels):
                raise DataError(f"code {c} out of range [0, {len(self.labels)})")
            out.append(self.labels[c])
        return out


@dataclass(frozen=True)
class RobustScaler:
    """Per-feature (median, iqr) pairs; zero iqr columns scale by 1."""

    median: np.ndarray
    iqr: np.ndarray

    def to_lists(self) -> dict[str, list[float]]:
        return {"median": self.median.tolist(), "iqr": self.iqr.tolist()}

    @classmethod
    def from_lists(cls, data: Mapping[str, Sequence[float]]) -> "RobustScaler":
        return cls(
            median=np.asarray(data["median"], dtype=np.float64),
            iqr=np.asarray(data["iqr"], dtype=np.float64),
        )


@dataclass(frozen=True)
class WindowSample:
    """Fixed-length feature window plus one encoded target label.

    ``source`` is the (driver_id, partition_index, start_frame_index)
    provenance triple; start_frame_index counts frames of the recording.
    """

    features: np.ndarray
    label_code: int
    source: tuple[str, int, int]


@dataclass(frozen=True)
class WindowedDataset:
    """Train/test window pools plus the fitted scaler and label codec."""

    train: tuple[WindowSample, ...]
    test: tuple[WindowSample, ...]
    scaler: RobustScaler | None
    codec: LabelCodec
    config: SplitConfig

    def train_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        return _stack(self.train, self.config.window_length)

    def test_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        return _stack(self.test, self.config.window_length)

    def class_counts(self, split: str = "train") -> dict[str, int]:
        samples = self.train if split == "train" else self.test
        counts = Counter(self.codec.labels[s.label_code] for s in samples)
        return {label: counts.get(label, 0) for label in self.codec.labels}


def _stack(samples: Sequence[WindowSample], window_length: int) -> tuple[np.ndarray, np.ndarray]:
    n = len(samples)
    X = np.empty((n, window_length, N_FEATURES), dtype=np.float64)
    y = np.empty(n, dtype=np.int64)
    for i, s in enumerate(samples):
        X[i] = s.features
        y[i] = s.label_code
    return X, y


def partition_ranges(n_frames: int, n_partitions: int) -> list[range]:
    """Contiguous, disjoint, covering index ranges; sizes differ by <= 1.

    The first n_frames % n_partitions partitions get the extra frame.
    """
    if n_partitions < 1:
        raise ConfigError(f"n_partitions must be >= 1, got {n_partitions}")
    if n_partitions > n_frames:
        raise ConfigError(
            f"cannot cut {n_frames} frames into {n_partitions} non-empty partitions"
        )
    base, extra = divmod(n_frames, n_partitions)
    ranges = []
    start = 0
    for p in range(n_partitions):
        size = base + (1 if p < extra else 0)
        ranges.append(range(start, start + size))
        start += size
    return ranges


def partition_recording(recording: Recording, n_partitions: int) -> list[range]:
    return partition_ranges(len(recording), n_partitions)


def sample_test_partitions(n_partitions: int, test_fraction: float, seed: int) -> frozenset[int]:
    """Seeded sample (without replacement) of partition indices for testing."""
    k = _round_half_up(test_fraction * n_partitions)
    if not 1 <= k <= n_partitions - 1:
        raise ConfigError(
            f"test_fraction {test_fraction} of {n_partitions} partitions rounds to {k}"
        )
    rng = np.random.Generator(np.random.PCG64(seed))
    chosen = rng.choice(n_partitions, size=k, replace=False)
    return frozenset(int(c) for c in chosen)


def fit_robust_scaler(training_frames: np.ndarray) -> RobustScaler:
    """Per-column median and interquartile range, linear-interpolation quantiles."""
    training_frames = np.asarray(training_frames, dtype=np.float64)
    if training_frames.ndim != 2 or training_frames.shape[0] < 2:
        raise DataError(
            f"scaler needs a 2-d matrix with at least 2 rows, got shape {training_frames.shape}"
        )
    q25, median, q75 = np.quantile(training_frames, [0.25, 0.5, 0.75], axis=0)
    iqr = q75 - q25
    iqr = np.where(iqr == 0.0, 1.0, iqr)
    return RobustScaler(median=median, iqr=iqr)


def apply_scaler(frames: np.ndarray, scaler: RobustScaler) -> np.ndarray:
    frames = np.asarray(frames, dtype=np.float64)
    if frames.shape[-1] != scaler.median.shape[0]:
        raise DataError(
            f"matrix has {frames.shape[-1]} columns, scaler was fitted on "
            f"{scaler.median.shape[0]}"
        )
    return (frames - scaler.median) / scaler.iqr


def slide_windows(
    partition_frames: np.ndarray,
    partition_labels: Sequence,
    window_length: int,
    step_size: int,
) -> list[tuple[np.ndarray, Sequence]]:
    """Complete windows at offsets 0, s, 2s, ... inside one partition.

    Partitions shorter than the window yield no windows; trailing frames
    that do not fill a window are dropped, never padded.
    """
    n = len(partition_frames)
    out = []
    if n < window_length:
        return out
    for start in range(0, n - window_length + 1, step_size):
        stop = start + window_length
        out.append((np.array(partition_frames[start:stop]), partition_labels[start:stop]))
    return out


def window_label(label_window: Sequence[int]) -> int:
    """Mode of the window; ties go to the code whose last occurrence is latest."""
    if len(label_window) == 0:
        raise DataError("window_label needs a nonempty window")
    counts: dict[int, int] = {}
    last: dict[int, int] = {}
    for pos, code in enumerate(label_window):
        code = int(code)
        counts[code] = counts.get(code, 0) + 1
        last[code] = pos
    return max(counts, key=lambda c: (counts[c], last[c]))


def timeseries_train_test_split(
    recordings: Sequence[Recording], cfg: SplitConfig
) -> WindowedDataset:
    """Partition, sample test partitions, scale, and window each recording.

    Test partitions are sampled per recording from a fresh seeded
    substream, so every driver contributes to both splits. The scaler is
    fitted on the pooled training partitions of all recordings and applied
    globally. Windowing runs per partition, so no (driver, frame) is ever
    covered by both a train window and a test window.
    """
    if not recordings:
        raise DataError("no recordings given")
    for r in recordings:
        if len(r) < cfg.n_partitions:
            raise ConfigError(
                f"recording {r.driver_id!r} has {len(r)} frames, fewer than "
                f"{cfg.n_partitions} partitions"
            )

    codec = LabelCodec.fit(label for r in recordings for label in r.labels)

    plans = []
    for i, r in enumerate(recordings):
        ranges = partition_ranges(len(r), cfg.n_partitions)
        sub_seed = int(_substream(cfg.seed, _SPLIT, i).integers(0, 2**63))
        test_parts = sample_test_partitions(cfg.n_partitions, cfg.test_fraction, sub_seed)
        plans.append((r, feature_matrix(r), ranges, test_parts))

    scaler = None
    if cfg.scale:
        train_rows = [
            matrix[block.start : block.stop]
            for _, matrix, ranges, test_parts in plans
            for p, block in enumerate(ranges)
            if p not in test_parts
        ]
        scaler = fit_robust_scaler(np.concatenate(train_rows, axis=0))

    train: list[WindowSample] = []
    test: list[WindowSample] = []
    for r, matrix, ranges, test_parts in plans:
        if scaler is not None:
            matrix = apply_scaler(matrix, scaler)
        codes = codec.encode(r.labels)
        for p, block in enumerate(ranges):
            sink = test if p in test_parts else train
            part_frames = matrix[block.start : block.stop]
            part_codes = codes[block.start : block.stop]
            for k, (wf, wl) in enumerate(
                slide_windows(part_frames, part_codes, cfg.window_length, cfg.step_size)
            ):
                start = block.start + k * cfg.step_size
                sink.append(
                    WindowSample(
                        features=wf,
                        label_code=window_label(wl),
                        source=(r.driver_id, p, start),
                    )
                )
    return WindowedDataset(
        train=tuple(train), test=tuple(test), scaler=scaler, codec=codec, config=cfg
    )


def remove_maneuvers(
    ds: WindowedDataset,
    drop: Iterable[str] = (),
    undersample: Mapping[str, int] | None = None,
    seed: int = 0,
) -> WindowedDataset:
    """Drop whole classes and undersample overrepresented ones.

    Dropped classes vanish from both splits; labels not present anywhere
    are a no-op. Undersampling keeps a seeded uniform subsample of at most
    max_count train windows per listed class and leaves the test split
    untouched, so the test distribution stays honest. The codec is
    re-fitted on the surviving labels.
    """
    drop = set(drop)
    undersample = dict(undersample or {})
    for label, max_count in undersample.items():
        if label not in ds.codec.labels:
            raise DataError(f"cannot undersample unknown label {label!r}")
        if max_count < 0:
            raise ConfigError(f"max_count for {label!r} must be >= 0, got {max_count}")

    surviving = [label for label in ds.codec.labels if label not in drop]
    if not surviving:
        raise DataError("removing these maneuvers would leave no classes")
    new_codec = LabelCodec(labels=tuple(surviving))
    remap = {ds.codec.labels.index(label): i for i, label in enumerate(surviving)}

    def keep_after_drop(samples: Sequence[WindowSample]) -> list[WindowSample]:
        return [s for s in samples if ds.codec.labels[s.label_code] not in drop]

    train = keep_after_drop(ds.train)
    test = keep_after_drop(ds.test)

    discard: set[int] = set()
    for k, label in enumerate(sorted(undersample)):
        if label in drop:
            continue
        positions = [i for i, s in enumerate(train) if ds.codec.labels[s.label_code] == label]
        max_count = undersample[label]
        if len(positions) > max_count:
            rng = _substream(seed, _UNDERSAMPLE, k)
            kept = rng.choice(len(positions), size=max_count, replace=False)
            kept_set = {positions[i] for i in kept}
            discard.update(p for p in positions if p not in kept_set)
    train = [s for i, s in enumerate(train) if i not in discard]

    def recode(samples: Sequence[WindowSample]) -> tuple[WindowSample, ...]:
        return tuple(replace(s, label_code=remap[s.label_code]) for s in samples)

    return WindowedDataset(
        train=recode(train),
        test=recode(test),
        scaler=ds.scaler,
        codec=new_codec,
        config=ds.config,
    )
