"""Synthetic labeled telematics recordings.

Each driver's stream is a seeded concatenation of maneuver segments.
A segment draws its class from the configured mixture weights, a
duration from the template's range, a road type from the class's road
weights, then emits the class kernel (ramps, sinusoid pulses, and flat
plateaus over the seven continuous channels) plus Gaussian channel
noise.  Kernels are pairwise separable by construction: the turn and
curve pair differ in gyro_z sign, braking is the negative-speed-ramp
mirror of acceleration, stationary is near-zero everything.

Everything is drawn from per-driver substreams of the scenario seed,
so generation is deterministic and drivers are independent.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .datamodel import Recording, RoadTypeMap, SensorFrame
from .errors import ConfigError

MANEUVER_CLASSES = (
    "acceleration from standing",
    "turn left",
    "turn right",
    "curve left",
    "curve right",
    "continuous driving",
    "targeted braking",
    "stationary",
)

ROAD_TYPES = ("city", "rural", "highway")

# continuous channel order: acc_x, acc_y, acc_z, gyro_x, gyro_y, gyro_z, gps_speed
_N_CHANNELS = 7

# domain tag separating per-driver streams from other seeded streams
_DRIVER = 0x54

_MOTION_NOISE = (0.25, 0.25, 0.25, 0.03, 0.03, 0.03, 0.30)
_STILL_NOISE = (0.05, 0.05, 0.05, 0.005, 0.005, 0.005, 0.02)


def _hump(d: int) -> np.ndarray:
    """Half-sine pulse over d frames, zero at both ends."""
    return np.sin(np.pi * (np.arange(d) + 0.5) / d)


def _plateau(d: int) -> np.ndarray:
    """Smooth-edged flat segment: half-sine clipped at 1."""
    return np.clip(2.0 * _hump(d), 0.0, 1.0)


def _ramp(d: int, start: float, stop: float) -> np.ndarray:
    return np.linspace(start, stop, d)


def _kernel(label: str, d: int) -> np.ndarray:
    """Noise-free channel signals for one segment, shape [d, 7]."""
    out = np.zeros((d, _N_CHANNELS))
    acc_x, acc_y, gyro_z, speed = 0, 1, 5, 6
    if label == "acceleration from standing":
        out[:, acc_y] = 2.6 * _hump(d)
        out[:, speed] = _ramp(d, 0.0, 11.0)
    elif label == "targeted braking":
        out[:, acc_y] = -3.4 * _hump(d)
        out[:, speed] = _ramp(d, 12.0, 0.0)
    elif label == "turn left":
        out[:, gyro_z] = 0.55 * _hump(d)
        out[:, acc_x] = -1.6 * _hump(d)
        out[:, speed] = 7.0
    elif label == "turn right":
        out[:, gyro_z] = -0.55 * _hump(d)
        out[:, acc_x] = 1.6 * _hump(d)
        out[:, speed] = 7.0
    elif label == "curve left":
        out[:, gyro_z] = 0.17 * _plateau(d)
        out[:, acc_x] = -0.9 * _plateau(d)
        out[:, speed] = 16.0
    elif label == "curve right":
        out[:, gyro_z] = -0.17 * _plateau(d)
        out[:, acc_x] = 0.9 * _plateau(d)
        out[:, speed] = 16.0
    elif label == "continuous driving":
        t = (np.arange(d) + 0.5) / d
        out[:, acc_y] = 0.25 * np.sin(2.0 * np.pi * 2.0 * t)
        out[:, gyro_z] = 0.02 * np.sin(2.0 * np.pi * t)
        out[:, speed] = 13.9 + 0.6 * np.sin(2.0 * np.pi * 1.3 * t)
    elif label == "stationary":
        pass  # all channels zero
    else:
        raise ConfigError(f"no signal kernel for maneuver {label!r}")
    return out


@dataclass(frozen=True)
class ManeuverTemplate:
    """Segment recipe: duration range, channel noise, road-type mix."""

    label: str
    duration_min: int
    duration_max: int
    noise_sigma: tuple[float, ...]
    road_weights: tuple[float, ...]

    def __post_init__(self) -> None:
        if self.label not in MANEUVER_CLASSES:
            raise ConfigError(f"unknown maneuver class {self.label!r}")
        if not (1 <= self.duration_min <= self.duration_max):
            raise ConfigError(
                f"{self.label}: duration range must satisfy 1 <= min <= max, "
                f"got [{self.duration_min}, {self.duration_max}]"
            )
        if len(self.noise_sigma) != _N_CHANNELS:
            raise ConfigError(f"{self.label}: expected {_N_CHANNELS} noise sigmas")
        if any(s < 0 for s in self.noise_sigma):
            raise ConfigError(f"{self.label}: noise sigmas must be >= 0")
        if len(self.road_weights) != len(ROAD_TYPES):
            raise ConfigError(f"{self.label}: expected {len(ROAD_TYPES)} road weights")
        if any(w < 0 for w in self.road_weights) or sum(self.road_weights) <= 0:
            raise ConfigError(f"{self.label}: road weights must be >= 0 and not all zero")


def default_templates() -> dict[str, ManeuverTemplate]:
    """Per-class defaults; durations comfortably exceed one window step."""
    table = {
        "acceleration from standing": (12, 18, _MOTION_NOISE, (0.6, 0.3, 0.1)),
        "turn left": (10, 15, _MOTION_NOISE, (0.7, 0.25, 0.05)),
        "turn right": (10, 15, _MOTION_NOISE, (0.7, 0.25, 0.05)),
        "curve left": (16, 26, _MOTION_NOISE, (0.1, 0.5, 0.4)),
        "curve right": (16, 26, _MOTION_NOISE, (0.1, 0.5, 0.4)),
        "continuous driving": (18, 30, _MOTION_NOISE, (0.1, 0.3, 0.6)),
        "targeted braking": (10, 16, _MOTION_NOISE, (0.5, 0.35, 0.15)),
        "stationary": (14, 24, _STILL_NOISE, (0.7, 0.2, 0.1)),
    }
    return {
        label: ManeuverTemplate(label, lo, hi, sigma, roads)
        for label, (lo, hi, sigma, roads) in table.items()
    }


def _normalized_weights(weights: dict[str, float]) -> np.ndarray:
    vec = np.array([weights.get(label, 0.0) for label in MANEUVER_CLASSES])
    return vec / vec.sum()


@dataclass(frozen=True)
class ScenarioConfig:
    """Scenario shape: drivers, stream length, class mixture, seed."""

    n_drivers: int = 3
    frames_per_driver: int = 4000
    class_weights: dict[str, float] = field(
        default_factory=lambda: {label: 1.0 for label in MANEUVER_CLASSES}
    )
    seed: int = 0
    capture_period_ms: int = 500

    def __post_init__(self) -> None:
        if self.n_drivers < 1:
            raise ConfigError(f"n_drivers must be >= 1, got {self.n_drivers}")
        if self.frames_per_driver < 1:
            raise ConfigError(f"frames_per_driver must be >= 1, got {self.frames_per_driver}")
        if self.capture_period_ms < 1:
            raise ConfigError(f"capture_period_ms must be >= 1, got {self.capture_period_ms}")
        unknown = sorted(set(self.class_weights) - set(MANEUVER_CLASSES))
        if unknown:
            raise ConfigError(f"unknown maneuver classes in weights: {', '.join(unknown)}")
        values = list(self.class_weights.values())
        if any(w < 0 or not np.isfinite(w) for w in values):
            raise ConfigError("class weights must be finite and >= 0")
        if sum(values) <= 0:
            raise ConfigError("at least one class weight must be positive")

    def to_dict(self) -> dict:
        return {
            "n_drivers": self.n_drivers,
            "frames_per_driver": self.frames_per_driver,
            "class_weights": dict(self.class_weights),
            "seed": self.seed,
            "capture_period_ms": self.capture_period_ms,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        known = {f: d[f] for f in cls.__dataclass_fields__ if f in d}
        unknown = sorted(set(d) - set(cls.__dataclass_fields__))
        if unknown:
            raise ConfigError(f"unknown scenario settings: {', '.join(unknown)}")
        return cls(**known)


def road_type_map() -> RoadTypeMap:
    """Code assignment for the generated road-type names."""
    return RoadTypeMap(ROAD_TYPES)


def generate(
    cfg: ScenarioConfig,
    templates: dict[str, ManeuverTemplate] | None = None,
) -> list[Recording]:
    """Deterministic labeled recordings, one per driver."""
    if templates is None:
        templates = default_templates()
    missing = sorted(
        label for label, w in cfg.class_weights.items() if w > 0 and label not in templates
    )
    if missing:
        raise ConfigError(f"no template for weighted classes: {', '.join(missing)}")
    weights = _normalized_weights(cfg.class_weights)

    recordings = []
    for di in range(cfg.n_drivers):
        rng = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence([cfg.seed, _DRIVER, di]))
        )
        signals = np.empty((0, _N_CHANNELS))
        roads: list[int] = []
        labels: list[str] = []
        while len(labels) < cfg.frames_per_driver:
            label = MANEUVER_CLASSES[int(rng.choice(len(MANEUVER_CLASSES), p=weights))]
            tpl = templates[label]
            d = int(rng.integers(tpl.duration_min, tpl.duration_max + 1))
            d = min(d, cfg.frames_per_driver - len(labels))
            road = int(rng.choice(len(ROAD_TYPES), p=np.array(tpl.road_weights) / sum(tpl.road_weights)))
            noise = rng.normal(size=(d, _N_CHANNELS)) * np.array(tpl.noise_sigma)
            seg = _kernel(label, d) + noise
            seg[:, 6] = np.maximum(seg[:, 6], 0.0)  # speed sensor never reads negative
            signals = np.vstack([signals, seg])
            roads.extend([road] * d)
            labels.extend([label] * d)
        frames = tuple(
            SensorFrame(
                timestamp_ms=k * cfg.capture_period_ms,
                acc_x=float(signals[k, 0]),
                acc_y=float(signals[k, 1]),
                acc_z=float(signals[k, 2]),
                gyro_x=float(signals[k, 3]),
                gyro_y=float(signals[k, 4]),
                gyro_z=float(signals[k, 5]),
                gps_speed=float(signals[k, 6]),
                road_type=roads[k],
            )
            for k in range(cfg.frames_per_driver)
        )
        recordings.append(
            Recording(
                driver_id=f"driver_{di:03d}",
                frames=frames,
                labels=tuple(labels),
                capture_period_ms=cfg.capture_period_ms,
            )
        )
    return recordings
