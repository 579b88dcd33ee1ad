"""Per-step traces and episode summaries."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

TRACE_FIELDS = (
    "time", "speed", "fuel_rate", "P_tm", "P_cab", "P_ice", "soc", "T_bat", "T_cl", "T_cab",
    "soh", "fuel_cum", "dc_label", "ems_action", "cab_action", "reward_cab", "reward_ems",
)


@dataclass
class Trace:
    """Column-oriented step records; ``time`` is the end time of each step.

    Rollouts start the trace with an initial-state row at time 0 whose
    rates and rewards are zero, so it adds nothing to the totals.
    """

    dt: float
    columns: dict[str, list[float]] = field(default_factory=lambda: {k: [] for k in TRACE_FIELDS})
    soc_initial: float | None = None
    soh_initial: float = 1.0
    traction_violations: int = 0
    limit_events: int = 0
    terminated: bool = False

    def append(self, **values: float) -> None:
        for k in TRACE_FIELDS:
            self.columns[k].append(float(values.get(k, np.nan)))

    def __len__(self) -> int:
        return len(self.columns["time"])

    def array(self, key: str) -> np.ndarray:
        return np.asarray(self.columns[key], dtype=float)

    def concat(self, other: "Trace") -> "Trace":
        if abs(other.dt - self.dt) > 1e-12:
            raise ValueError("traces have different dt")
        out = Trace(self.dt, {k: self.columns[k] + other.columns[k] for k in TRACE_FIELDS},
                    self.soc_initial, self.soh_initial,
                    self.traction_violations + other.traction_violations,
                    self.limit_events + other.limit_events,
                    self.terminated or other.terminated)
        return out

    def chunk(self, start: int, stop: int) -> "Trace":
        part = Trace(self.dt, {k: v[start:stop] for k, v in self.columns.items()},
                     self.soc_initial if start == 0 else None, self.soh_initial if start == 0 else 1.0)
        return part


@dataclass
class EpisodeMetrics:
    fuel_g: float
    tm_energy_Wh: float
    soc_initial: float
    soc_final: float
    soh_loss: float
    mean_abs_ecab: float
    comfort_fraction: float
    traction_violations: int
    limit_events: int
    steps: int
    return_cab: float
    return_ems: float
    terminated: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


def aggregate(trace: Trace, warmup_s: float = 120.0, T_target: float = 22.0, band: float = 2.0) -> EpisodeMetrics:
    """Integrate a trace into episode totals.

    Comfort statistics only use steps whose end time is past ``warmup_s``.
    """
    if len(trace) == 0:
        raise ValueError("empty trace")
    dt = trace.dt
    e = np.abs(trace.array("T_cab") - T_target)
    post = trace.array("time") > warmup_s
    soc = trace.array("soc")
    soh = trace.array("soh")
    soc0 = trace.soc_initial if trace.soc_initial is not None else float(soc[0])
    return EpisodeMetrics(
        fuel_g=float(np.sum(trace.array("fuel_rate")) * dt),
        tm_energy_Wh=float(np.sum(trace.array("P_tm")) * dt / 3600.0),
        soc_initial=float(soc0),
        soc_final=float(soc[-1]),
        soh_loss=float(trace.soh_initial - soh[-1]),
        mean_abs_ecab=float(e[post].mean()) if post.any() else float("nan"),
        comfort_fraction=float((e[post] <= band).mean()) if post.any() else float("nan"),
        traction_violations=trace.traction_violations,
        limit_events=trace.limit_events,
        steps=int(np.count_nonzero(trace.array("time") > 0.0)),
        return_cab=float(np.sum(trace.array("reward_cab"))),
        return_ems=float(np.sum(trace.array("reward_ems"))),
        terminated=trace.terminated,
    )
