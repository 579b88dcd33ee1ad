"""Drive cycles: CSV ingestion, resampling, micro-trip segmentation and features.

A cycle CSV has a header ``t_s,v_mps[,grade_rad]`` followed by one sample per
row. Lines starting with ``#`` are comments. Timestamps must be uniformly
spaced.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import CycleFormatError, ValidationError

DT_TOL = 1e-6

# Training roster shipped with the package; the held-out evaluation cycle is
# kept separate.
TRAINING_CYCLES = (
    "udds",
    "us06",
    "hwfet",
    "wltc3_low",
    "wltc3_medium",
    "wltc3_high",
    "wltc3_extra_high",
    "wmtc_part1",
    "wmtc_part2",
)
HELDOUT_CYCLE = "nycc_like"


@dataclass(frozen=True)
class DriveCycle:
    name: str
    dt: float
    speed: np.ndarray
    grade: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        speed = np.asarray(self.speed, dtype=float)
        grade = np.zeros_like(speed) if self.grade is None else np.asarray(self.grade, dtype=float)
        if not self.dt > 0:
            raise ValidationError(f"dt must be positive, got {self.dt}")
        if speed.ndim != 1:
            raise ValidationError("speed must be one-dimensional")
        if np.any(speed < 0):
            raise ValidationError(f"negative speed in cycle {self.name!r}")
        if grade.shape != speed.shape:
            raise ValidationError("grade and speed lengths differ")
        object.__setattr__(self, "speed", speed)
        object.__setattr__(self, "grade", grade)

    def __len__(self) -> int:
        return len(self.speed)

    @property
    def duration(self) -> float:
        """Total driving time, one ``dt`` per sample."""
        return len(self.speed) * self.dt

    @property
    def span(self) -> float:
        """Time from the first to the last sample."""
        return max(len(self.speed) - 1, 0) * self.dt

    def accel(self) -> np.ndarray:
        """Forward-difference acceleration per sample; last sample gets 0."""
        a = np.zeros_like(self.speed)
        a[:-1] = np.diff(self.speed) / self.dt
        return a


@dataclass(frozen=True)
class MicroTrip:
    parent: str
    start_index: int
    samples: np.ndarray


@dataclass(frozen=True)
class TripFeatures:
    avg_speed: float
    max_accel: float

    def as_array(self) -> np.ndarray:
        return np.array([self.avg_speed, self.max_accel])


def load_cycle(path: str | Path, name: str | None = None) -> DriveCycle:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"cycle file not found: {path}")
    header = None
    times: list[float] = []
    speeds: list[float] = []
    grades: list[float] = []
    with path.open(encoding="utf-8-sig") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            cells = [c.strip() for c in line.split(",")]
            if header is None:
                if cells[:2] != ["t_s", "v_mps"] or len(cells) > 3 or (len(cells) == 3 and cells[2] != "grade_rad"):
                    raise CycleFormatError(f"expected header 't_s,v_mps[,grade_rad]', got {line!r}", lineno)
                header = cells
                continue
            if len(cells) != len(header):
                raise CycleFormatError(f"expected {len(header)} columns, got {len(cells)}", lineno)
            try:
                values = [float(c) for c in cells]
            except ValueError:
                raise CycleFormatError(f"non-numeric value in {line!r}", lineno) from None
            if not all(math.isfinite(x) for x in values):
                raise CycleFormatError("non-finite value", lineno)
            if values[1] < 0:
                raise ValidationError(f"line {lineno}: negative speed {values[1]}")
            times.append(values[0])
            speeds.append(values[1])
            if len(header) == 3:
                grades.append(values[2])
    if header is None:
        raise CycleFormatError("missing header")
    if len(speeds) < 2:
        raise ValidationError(f"cycle {path} needs at least 2 samples, got {len(speeds)}")
    deltas = np.diff(times)
    dt = float(deltas[0])
    if dt <= 0 or np.any(np.abs(deltas - dt) > DT_TOL):
        raise CycleFormatError(f"non-uniform timestamps in {path}")
    return DriveCycle(
        name=name or path.stem,
        dt=dt,
        speed=np.array(speeds),
        grade=np.array(grades) if grades else None,
    )


def save_cycle(cycle: DriveCycle, path: str | Path) -> None:
    with_grade = bool(np.any(cycle.grade != 0))
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write(f"# {cycle.name}\n")
        fh.write("t_s,v_mps,grade_rad\n" if with_grade else "t_s,v_mps\n")
        for i, v in enumerate(cycle.speed):
            row = f"{i * cycle.dt:.6g},{v:.9g}"
            if with_grade:
                row += f",{cycle.grade[i]:.9g}"
            fh.write(row + "\n")


def bundled_cycle(name: str) -> DriveCycle:
    """Load one of the drive cycles shipped in ``itemhev/data/cycles``."""
    ref = resources.files("itemhev") / "data" / "cycles" / f"{name}.csv"
    with resources.as_file(ref) as p:
        return load_cycle(p, name=name)


def bundled_names() -> list[str]:
    root = resources.files("itemhev") / "data" / "cycles"
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".csv"))


def resample(cycle: DriveCycle, dt_new: float) -> DriveCycle:
    if not dt_new > 0:
        raise ValueError(f"dt_new must be positive, got {dt_new}")
    t_old = np.arange(len(cycle.speed)) * cycle.dt
    n_new = int(math.floor(cycle.span / dt_new + 1e-9)) + 1
    t_new = np.arange(n_new) * dt_new
    return DriveCycle(
        name=cycle.name,
        dt=dt_new,
        speed=np.interp(t_new, t_old, cycle.speed),
        grade=np.interp(t_new, t_old, cycle.grade),
    )


def window_samples(window_s: float, dt: float) -> int:
    return int(math.floor(window_s / dt + 1e-9))


def segment(cycle: DriveCycle, window_s: float = 20.0) -> list[MicroTrip]:
    """Split a cycle into consecutive non-overlapping windows.

    Each window holds ``floor(window_s / dt)`` samples; a trailing partial
    window is dropped.
    """
    n = window_samples(window_s, cycle.dt)
    if n < 2:
        raise ValueError(f"window {window_s} s holds fewer than 2 samples at dt={cycle.dt}")
    count = int(math.floor(cycle.duration / window_s + 1e-9))
    count = min(count, len(cycle.speed) // n)
    return [
        MicroTrip(parent=cycle.name, start_index=i * n, samples=cycle.speed[i * n:(i + 1) * n].copy())
        for i in range(count)
    ]


def extract_features(trip: MicroTrip | np.ndarray, dt: float) -> TripFeatures:
    samples = trip.samples if isinstance(trip, MicroTrip) else np.asarray(trip, dtype=float)
    if len(samples) < 2:
        raise ValueError("a micro-trip needs at least 2 samples")
    return TripFeatures(
        avg_speed=float(np.mean(samples)),
        max_accel=float(np.max(np.diff(samples)) / dt),
    )


def stop_and_go_cycle(
    name: str = HELDOUT_CYCLE,
    duration_s: int = 598,
    n_stops: int = 11,
    v_peak: float = 12.4,
    seed: int = 2024,
) -> DriveCycle:
    """Synthetic dense-urban stop-and-go profile at 1 Hz.

    Alternates idle periods with short trapezoidal speed pulses. Defaults
    give a cycle with NYCC-like statistics (598 s, mean speed about
    3 m/s, peak 12.4 m/s).
    """
    rng = np.random.default_rng(seed)
    speed = np.zeros(duration_s + 1)
    idle = rng.uniform(8, 30, size=n_stops + 1)
    idle *= (0.35 * duration_s) / idle.sum()
    moving = (duration_s - idle.sum()) / n_stops
    peaks = rng.uniform(0.3, 0.75, size=n_stops) * v_peak
    peaks[rng.integers(n_stops)] = v_peak
    t = idle[0]
    for k in range(n_stops):
        t_acc = peaks[k] / rng.uniform(1.0, 1.8)
        t_dec = peaks[k] / rng.uniform(1.0, 2.0)
        t_cruise = max(moving - t_acc - t_dec, 0.0)
        scale = min(1.0, moving / (t_acc + t_dec))
        t_acc *= scale
        t_dec *= scale
        t0, t1, t2, t3 = t, t + t_acc, t + t_acc + t_cruise, t + t_acc + t_cruise + t_dec
        grid = np.arange(duration_s + 1, dtype=float)
        prof = np.interp(grid, [t0, t1, t2, t3], [0.0, peaks[k] * scale, peaks[k] * scale, 0.0], left=0.0, right=0.0)
        speed = np.maximum(speed, prof)
        t = t3 + idle[k + 1]
    return DriveCycle(name=name, dt=1.0, speed=np.round(speed, 4))
