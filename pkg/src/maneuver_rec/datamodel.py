"""Sensor frame schema, labeled recordings, and CSV ingestion/serialization.

A recording is one driver's trip: an ordered sequence of multivariate
sensor frames plus one maneuver label per frame. Everything downstream
(splitting, windowing, training) consumes the fixed-order feature matrix
produced here.
"""

from __future__ import annotations

import contextlib
import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .errors import DataError, OrderingError, ParseError, SchemaError

# Column order of feature_matrix(); downstream scaler statistics index by it.
FEATURE_COLUMNS = (
    "acc_x",
    "acc_y",
    "acc_z",
    "gyro_x",
    "gyro_y",
    "gyro_z",
    "gps_speed",
    "road_type",
)

CSV_COLUMNS = ("timestamp_ms",) + FEATURE_COLUMNS + ("maneuver", "driver_id")

N_FEATURES = len(FEATURE_COLUMNS)

DEFAULT_CAPTURE_PERIOD_MS = 500


@dataclass(frozen=True)
class SensorFrame:
    """One timestamped multivariate sample.

    Accelerations in m/s^2, rotational speeds in rad/s, gps_speed in m/s,
    road_type as a small categorical code.
    """

    timestamp_ms: int
    acc_x: float
    acc_y: float
    acc_z: float
    gyro_x: float
    gyro_y: float
    gyro_z: float
    gps_speed: float
    road_type: int

    def __post_init__(self):
        for name in FEATURE_COLUMNS[:7]:
            if not math.isfinite(getattr(self, name)):
                raise DataError(f"non-finite value for {name}")
        if self.gps_speed < 0:
            raise DataError(f"gps_speed must be >= 0, got {self.gps_speed}")

    def features(self) -> tuple[float, ...]:
        return (
            self.acc_x,
            self.acc_y,
            self.acc_z,
            self.gyro_x,
            self.gyro_y,
            self.gyro_z,
            self.gps_speed,
            float(self.road_type),
        )


@dataclass(frozen=True)
class Recording:
    """Ordered per-driver frame sequence with one maneuver label per frame."""

    driver_id: str
    frames: tuple[SensorFrame, ...]
    labels: tuple[str, ...]
    capture_period_ms: int = DEFAULT_CAPTURE_PERIOD_MS

    def __post_init__(self):
        if self.capture_period_ms <= 0:
            raise DataError(f"capture_period_ms must be > 0, got {self.capture_period_ms}")
        if len(self.labels) != len(self.frames):
            raise DataError(
                f"{len(self.labels)} labels for {len(self.frames)} frames in recording "
                f"{self.driver_id!r}"
            )
        for i in range(1, len(self.frames)):
            if self.frames[i].timestamp_ms <= self.frames[i - 1].timestamp_ms:
                raise OrderingError(
                    f"timestamps not strictly increasing at frame {i} of recording "
                    f"{self.driver_id!r}",
                    row=i,
                )

    def __len__(self) -> int:
        return len(self.frames)


class RoadTypeMap:
    """First-appearance mapping between road-type names and integer codes.

    The mapping grows as new categories appear during ingestion and is
    recorded in the dataset manifest so that later ingestion (prediction
    time) can reuse the exact same codes.
    """

    def __init__(self, names: Iterable[str] = ()):
        self._names: list[str] = []
        self._codes: dict[str, int] = {}
        for name in names:
            self.code(name)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(self._names)

    def code(self, name: str) -> int:
        if name not in self._codes:
            self._codes[name] = len(self._names)
            self._names.append(name)
        return self._codes[name]

    def code_strict(self, name: str) -> int:
        """Look up a known category; unknown names are a data error."""
        try:
            return self._codes[name]
        except KeyError:
            raise DataError(
                f"unknown road type {name!r}; known: {self._names}"
            ) from None

    def name(self, code: int) -> str:
        if not 0 <= code < len(self._names):
            raise DataError(f"road-type code {code} out of range [0, {len(self._names)})")
        return self._names[code]

    def __len__(self) -> int:
        return len(self._names)

    def __eq__(self, other) -> bool:
        return isinstance(other, RoadTypeMap) and other._names == self._names


def _parse_float(cell: str, row: int, column: str) -> float:
    try:
        value = float(cell)
    except ValueError:
        raise ParseError(
            f"row {row}, column {column!r}: cannot parse {cell!r} as a number",
            row=row,
            column=column,
        ) from None
    if not math.isfinite(value):
        raise ParseError(
            f"row {row}, column {column!r}: non-finite value {cell!r}",
            row=row,
            column=column,
        )
    return value


def _parse_int(cell: str, row: int, column: str) -> int:
    try:
        return int(cell)
    except ValueError:
        raise ParseError(
            f"row {row}, column {column!r}: cannot parse {cell!r} as an integer",
            row=row,
            column=column,
        ) from None


@contextlib.contextmanager
def _open_text(path: Path):
    # csv decodes lazily, so a binary file blows up mid-iteration; turn
    # that into a DataError with the file name instead of a raw traceback
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            yield fh
    except UnicodeDecodeError as exc:
        raise ParseError(
            f"{path}: not a UTF-8 text file (bad byte at offset {exc.start})"
        ) from None


def ingest_csv(
    path: str | Path,
    schema: Mapping[str, str] | None = None,
    road_types: RoadTypeMap | None = None,
    *,
    strict_road_types: bool = False,
) -> Recording:
    """Read one driver's CSV file into a Recording.

    ``schema`` maps canonical column names to the actual header names in
    the file (unmapped columns keep their canonical name). ``road_types``
    accumulates the category-to-code mapping across files; pass the same
    instance for every file of a dataset. With ``strict_road_types`` an
    unseen category is an error instead of a new code (prediction time).

    Rows with non-finite numerics or negative speed are rejected, not
    dropped: silent drops would desynchronize frames and labels.
    """
    schema = dict(schema or {})
    colmap = {canonical: schema.get(canonical, canonical) for canonical in CSV_COLUMNS}
    if road_types is None:
        road_types = RoadTypeMap()

    path = Path(path)
    with _open_text(path) as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [actual for actual in colmap.values() if actual not in header]
        if missing:
            raise SchemaError(f"{path}: missing column(s) {missing}; header is {header}")

        frames: list[SensorFrame] = []
        labels: list[str] = []
        driver_id: str | None = None
        prev_ts: int | None = None
        for i, record in enumerate(reader, start=1):
            row = {canonical: record[actual] for canonical, actual in colmap.items()}
            ts = _parse_int(row["timestamp_ms"], i, colmap["timestamp_ms"])
            if prev_ts is not None and ts <= prev_ts:
                raise OrderingError(
                    f"{path}: timestamp {ts} at row {i} not greater than previous {prev_ts}",
                    row=i,
                )
            prev_ts = ts
            values = {
                name: _parse_float(row[name], i, colmap[name])
                for name in FEATURE_COLUMNS[:7]
            }
            if values["gps_speed"] < 0:
                raise ParseError(
                    f"{path}: row {i}: negative gps_speed {values['gps_speed']}",
                    row=i,
                    column=colmap["gps_speed"],
                )
            road = row["road_type"]
            code = road_types.code_strict(road) if strict_road_types else road_types.code(road)
            frames.append(SensorFrame(timestamp_ms=ts, road_type=code, **values))
            labels.append(row["maneuver"])
            if driver_id is None:
                driver_id = row["driver_id"]
            elif row["driver_id"] != driver_id:
                raise SchemaError(
                    f"{path}: row {i}: driver_id {row['driver_id']!r} differs from "
                    f"{driver_id!r}; one file holds one driver"
                )

    if driver_id is None:
        raise DataError(f"{path}: no data rows")
    return Recording(driver_id=driver_id, frames=tuple(frames), labels=tuple(labels))


def read_stream_csv(
    path: str | Path,
    schema: Mapping[str, str] | None = None,
    road_types: RoadTypeMap | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Read an unlabeled sensor stream for prediction.

    Same column conventions as ingest_csv, but the maneuver and
    driver_id columns are optional and ignored when present.  Road
    types are looked up strictly against the given mapping (the codes
    must match the ones the model was trained with).  Returns the int64
    timestamp vector and the [n_rows x 8] float feature matrix.
    """
    schema = dict(schema or {})
    stream_cols = ("timestamp_ms",) + FEATURE_COLUMNS
    colmap = {canonical: schema.get(canonical, canonical) for canonical in stream_cols}
    if road_types is None:
        road_types = RoadTypeMap()
        strict = False
    else:
        strict = True

    path = Path(path)
    timestamps: list[int] = []
    rows: list[tuple[float, ...]] = []
    with _open_text(path) as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [actual for actual in colmap.values() if actual not in header]
        if missing:
            raise SchemaError(f"{path}: missing column(s) {missing}; header is {header}")
        prev_ts: int | None = None
        for i, record in enumerate(reader, start=1):
            row = {canonical: record[actual] for canonical, actual in colmap.items()}
            ts = _parse_int(row["timestamp_ms"], i, colmap["timestamp_ms"])
            if prev_ts is not None and ts <= prev_ts:
                raise OrderingError(
                    f"{path}: timestamp {ts} at row {i} not greater than previous {prev_ts}",
                    row=i,
                )
            prev_ts = ts
            values = [
                _parse_float(row[name], i, colmap[name]) for name in FEATURE_COLUMNS[:7]
            ]
            if values[6] < 0:
                raise ParseError(
                    f"{path}: row {i}: negative gps_speed {values[6]}",
                    row=i,
                    column=colmap["gps_speed"],
                )
            road = row["road_type"]
            code = road_types.code_strict(road) if strict else road_types.code(road)
            timestamps.append(ts)
            rows.append(tuple(values) + (float(code),))
    return (
        np.asarray(timestamps, dtype=np.int64),
        np.asarray(rows, dtype=np.float64).reshape(len(rows), N_FEATURES),
    )


def write_csv(recording: Recording, path: str | Path, road_types: RoadTypeMap) -> None:
    """Write a Recording in the ingestible CSV format.

    Floats are serialized with repr (shortest round-trip form), so
    ingest_csv(write_csv(r)) reproduces r bit-exactly.
    """
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for frame, label in zip(recording.frames, recording.labels):
            writer.writerow(
                [
                    frame.timestamp_ms,
                    repr(frame.acc_x),
                    repr(frame.acc_y),
                    repr(frame.acc_z),
                    repr(frame.gyro_x),
                    repr(frame.gyro_y),
                    repr(frame.gyro_z),
                    repr(frame.gps_speed),
                    road_types.name(frame.road_type),
                    label,
                    recording.driver_id,
                ]
            )


def feature_matrix(recording: Recording) -> np.ndarray:
    """Project a Recording onto the fixed-order [n_frames x 8] float matrix."""
    out = np.empty((len(recording.frames), N_FEATURES), dtype=np.float64)
    for i, frame in enumerate(recording.frames):
        out[i] = frame.features()
    return out
