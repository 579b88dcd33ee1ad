"""A/B comparison of recognition-aware and recognition-blind policies, plot data and run manifests."""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .metrics import EpisodeMetrics, Trace

REPORT_VERSION = 1

# Headline improvements reported for the original study, printed next to measured deltas.
REFERENCE_FUEL_PCT = 16.14
REFERENCE_TM_PCT = 8.22


PANELS = {
    "battery_temp": "T_bat",
    "engine_temp": "T_cl",
    "cabin_temp": "T_cab",
    "soc": "soc",
    "soh": "soh",
    "fuel_cumulative": "fuel_cum",
}


def pct_reduction(blind: float, aware: float) -> float:
    if blind == 0.0:
        return 0.0 if aware == 0.0 else math.copysign(math.inf, -aware)
    return 100.0 * (blind - aware) / blind


@dataclass
class SeedRow:
    seed: int
    aware: EpisodeMetrics
    blind: EpisodeMetrics
    baseline: EpisodeMetrics | None = None

    def deltas(self) -> dict[str, float]:
        a, b = self.aware, self.blind
        return {
            "fuel_pct": pct_reduction(b.fuel_g, a.fuel_g),
            "tm_energy_pct": pct_reduction(b.tm_energy_Wh, a.tm_energy_Wh),
            "mean_abs_ecab": b.mean_abs_ecab - a.mean_abs_ecab,
            "soc_final": a.soc_final - b.soc_final,
            "soh_loss": b.soh_loss - a.soh_loss,
        }


@dataclass
class ComparisonReport:
    """Per-seed aware/blind metrics and their differences.

    Percentages follow ``100 (blind - aware) / blind`` so a positive value
    means the recognition-aware policy used less. The remaining deltas are
    plain differences oriented the same way (blind minus aware), except
    ``soc_final`` which is aware minus blind.
    """

    cycle: str
    rows: list[SeedRow]
    version: int = REPORT_VERSION

    @property
    def seeds(self) -> list[int]:
        return [r.seed for r in self.rows]

    def mean_metrics(self, variant: str) -> dict[str, float]:
        ms = [getattr(r, variant) for r in self.rows]
        if any(m is None for m in ms):
            return {}
        keys = [k for k, v in ms[0].to_dict().items() if isinstance(v, (int, float)) and not isinstance(v, bool)]
        return {k: float(np.mean([m.to_dict()[k] for m in ms])) for k in keys}

    def summary(self) -> dict[str, dict[str, float]]:
        per = [r.deltas() for r in self.rows]
        out = {}
        for k in per[0]:
            vals = np.array([d[k] for d in per])
            out[k] = {"mean": float(vals.mean()), "std": float(vals.std())}
        # deltas of the seed-averaged costs
        ma, mb = self.mean_metrics("aware"), self.mean_metrics("blind")
        out["fuel_pct_of_means"] = {"mean": pct_reduction(mb["fuel_g"], ma["fuel_g"]), "std": 0.0}
        out["tm_energy_pct_of_means"] = {"mean": pct_reduction(mb["tm_energy_Wh"], ma["tm_energy_Wh"]), "std": 0.0}
        return out

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "cycle": self.cycle,
            "sign_convention": "pct = 100*(blind-aware)/blind; positive favours the recognition-aware policy",
            "reference_pct": {"fuel": REFERENCE_FUEL_PCT, "tm_energy": REFERENCE_TM_PCT},
            "seeds": [
                {
                    "seed": r.seed,
                    "aware": r.aware.to_dict(),
                    "blind": r.blind.to_dict(),
                    "baseline": r.baseline.to_dict() if r.baseline is not None else None,
                    "deltas": r.deltas(),
                }
                for r in self.rows
            ],
            "mean": {v: self.mean_metrics(v) for v in ("aware", "blind", "baseline")},
            "summary": self.summary(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def text(self) -> str:
        s = self.summary()
        lines = [
            f"cycle {self.cycle}, seeds {self.seeds}",
            f"fuel reduction (aware vs blind): {s['fuel_pct']['mean']:+.2f}% +/- {s['fuel_pct']['std']:.2f}"
            f"  (reference study: {REFERENCE_FUEL_PCT:.2f}%)",
            f"TM energy reduction (aware vs blind): {s['tm_energy_pct']['mean']:+.2f}% +/- {s['tm_energy_pct']['std']:.2f}"
            f"  (reference study: {REFERENCE_TM_PCT:.2f}%)",
        ]
        for v in ("aware", "blind", "baseline"):
            m = self.mean_metrics(v)
            if m:
                lines.append(
                    f"{v:>8}: fuel {m['fuel_g']:.1f} g, TM {m['tm_energy_Wh']:.1f} Wh, final SOC {m['soc_final']:.3f}, "
                    f"|e_cab| {m['mean_abs_ecab']:.2f} C, SOH loss {m['soh_loss']:.3e}")
        return "\n".join(lines)


def compare(aware, blind, baseline=None, cycle: str = "", seeds=None) -> ComparisonReport:
    """Pair up per-seed metrics; lists must align seed by seed.

    ``aware``/``blind``/``baseline`` may be single EpisodeMetrics or lists.
    Each entry may also be a ``(cycle_name, seed, metrics)`` tuple, in which
    case cycles and seeds are checked for agreement.
    """
    def as_list(x):
        if x is None:
            return None
        return list(x) if isinstance(x, (list, tuple)) and not _is_tagged(x) else [x]

    aware_l, blind_l, base_l = as_list(aware), as_list(blind), as_list(baseline)
    if len(aware_l) != len(blind_l) or (base_l is not None and len(base_l) != len(aware_l)):
        raise ValueError("aware/blind/baseline metric lists differ in length")
    if not aware_l:
        raise ValueError("at least one seed is required")
    seeds = list(seeds) if seeds is not None else list(range(len(aware_l)))
    if len(seeds) != len(aware_l):
        raise ValueError("seed list length does not match metrics")
    rows = []
    for i, seed in enumerate(seeds):
        entries = [aware_l[i], blind_l[i]] + ([base_l[i]] if base_l is not None else [])
        tagged = [_untag(e) for e in entries]
        cyc = {t[0] for t in tagged if t[0] is not None}
        sd = {t[1] for t in tagged if t[1] is not None}
        if len(cyc) > 1:
            raise ValueError(f"seed {seed}: metrics come from different cycles {sorted(cyc)}")
        if len(sd) > 1 or (sd and sd != {seed}):
            raise ValueError(f"seed {seed}: metrics come from different seeds {sorted(sd)}")
        if cyc and cycle and cyc != {cycle}:
            raise ValueError(f"metrics cycle {cyc} differs from {cycle!r}")
        cycle = cycle or (next(iter(cyc)) if cyc else "")
        ms = [t[2] for t in tagged]
        rows.append(SeedRow(seed, ms[0], ms[1], ms[2] if base_l is not None else None))
    return ComparisonReport(cycle, rows)


def _is_tagged(x) -> bool:
    return isinstance(x, tuple) and len(x) == 3 and isinstance(x[2], EpisodeMetrics)


def _untag(x):
    if _is_tagged(x):
        return x
    if isinstance(x, EpisodeMetrics):
        return (None, None, x)
    raise TypeError(f"expected EpisodeMetrics, got {type(x).__name__}")


# -- plot-ready series ------------------------------------------------------

def emit_plots(aware: Trace, blind: Trace, directory: str | Path) -> list[Path]:
    """One CSV per panel with columns time_s,aware,blind, one row per trace row."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    if len(aware) != len(blind):
        raise ValueError("aware and blind traces have different lengths")
    t = aware.array("time")
    files = []
    for panel, key in PANELS.items():
        path = d / f"{panel}.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["time_s", "aware", "blind"])
            for row in zip(t, aware.array(key), blind.array(key)):
                w.writerow([repr(float(x)) for x in row])
        files.append(path)
    return files


def write_trace(trace: Trace, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        keys = list(trace.columns)
        w.writerow(keys)
        for i in range(len(trace)):
            w.writerow([repr(trace.columns[k][i]) for k in keys])


# -- manifests --------------------------------------------------------------

def file_digest(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


@dataclass
class RunManifest:
    command: str
    argv: list[str]
    config_hash: str
    seeds: list[int] = field(default_factory=list)
    cycles: list[str] = field(default_factory=list)
    checkpoints: dict[str, str] = field(default_factory=dict)
    artifacts: dict[str, str] = field(default_factory=dict)  # relative path -> sha256
    started: str = ""
    finished: str = ""
    version: int = REPORT_VERSION

    def add_artifact(self, path: str | Path, root: str | Path) -> None:
        p = Path(path)
        self.artifacts[str(p.relative_to(root))] = file_digest(p)

    def write(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n", encoding="utf-8")

    @classmethod
    def read(cls, path: str | Path) -> "RunManifest":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        if data.get("version") != REPORT_VERSION:
            raise ValueError(f"{path}: unsupported manifest version {data.get('version')}")
        return cls(**data)


def now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")
