"""Experiment configuration: nested dataclasses loaded from and dumped to YAML.

Any subset of keys may be given in a file; missing keys keep their
defaults. ``config_hash`` fingerprints the fully resolved configuration.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
import types
import typing
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .agents.dqn import AgentConfig
from .agents.observation import ObsRanges
from .agents.rollout import RewardSettings
from .control import BaselineConfig
from .cycles import HELDOUT_CYCLE, TRAINING_CYCLES, DriveCycle, bundled_cycle, load_cycle
from .plant.model import PlantConfig

CONFIG_VERSION = 1
CONFIG_ROOT_ENV = "ITEMHEV_CONFIG_ROOT"


@dataclass
class RecognizerConfig:
    cycles: list[str] = field(default_factory=lambda: list(TRAINING_CYCLES))
    window_s: float = 20.0
    k: int = 3
    cluster_seed: int = 0
    val_fraction: float = 0.2
    split_seed: int = 0
    train_seed: int = 0
    epochs: int = 400
    batch: int = 32
    lr: float = 5e-3
    hidden: tuple[int, ...] = (16, 16)
    update_mode: str = "sliding"


@dataclass
class TrainConfig:
    episodes: int = 80
    train_cycles: list[str] = field(default_factory=lambda: ["udds", "wmtc_part1", "wltc3_medium", "wltc3_high", "hwfet"])
    # urban cycle kept out of training for checkpoint selection
    eval_cycle: str = "wltc3_low"
    test_cycle: str = HELDOUT_CYCLE
    eval_every: int = 10
    cabin_actions: str = "three"  # "three": off/heat/cool, "bits": independent heater and AC bits
    divergence_loss: float = 1e6
    divergence_patience: int = 3


@dataclass
class ReportConfig:
    warmup_s: float = 120.0
    comfort_band: float = 2.0


@dataclass
class Config:
    version: int = CONFIG_VERSION
    plant: PlantConfig = field(default_factory=PlantConfig)
    agent: AgentConfig = field(default_factory=AgentConfig)
    # rewards enter the replay buffers scaled to O(1) magnitudes
    rewards: RewardSettings = field(default_factory=lambda: RewardSettings(scale_cab=0.05, scale_ems=0.2))
    obs: ObsRanges = field(default_factory=ObsRanges)
    train: TrainConfig = field(default_factory=TrainConfig)
    recognizer: RecognizerConfig = field(default_factory=RecognizerConfig)
    baseline: BaselineConfig = field(default_factory=BaselineConfig)
    report: ReportConfig = field(default_factory=ReportConfig)


def _is_dataclass_type(tp) -> bool:
    return isinstance(tp, type) and dataclasses.is_dataclass(tp)


def _coerce(tp, value):
    origin = typing.get_origin(tp)
    args = typing.get_args(tp)
    if value is None:
        return None
    if origin in (typing.Union, types.UnionType):
        non_none = [a for a in args if a is not type(None)]
        return _coerce(non_none[0], value) if len(non_none) == 1 else value
    if _is_dataclass_type(tp):
        return from_dict(tp, value)
    if origin is tuple:
        inner = args[0] if args else typing.Any
        return tuple(_coerce(inner, v) for v in value)
    if origin is list:
        inner = args[0] if args else typing.Any
        return [_coerce(inner, v) for v in value]
    if tp is float and isinstance(value, (int, float)):
        return float(value)
    return value


def _field_default(f: dataclasses.Field):
    if f.default is not dataclasses.MISSING:
        return f.default
    if f.default_factory is not dataclasses.MISSING:
        return f.default_factory()
    return None


def from_dict(cls, data: dict | None):
    """Build dataclass ``cls`` from a (possibly partial) nested mapping."""
    data = dict(data or {})
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls) if f.init}
    unknown = set(data) - names
    if unknown:
        raise ValueError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for name in names:
        if name in data:
            current = _field_default(fields[name])
            if dataclasses.is_dataclass(current) and isinstance(data[name], dict):
                merged = to_dict(current)
                merged.update(data[name])
                kwargs[name] = from_dict(type(current), merged)
            else:
                kwargs[name] = _coerce(hints[name], data[name])
    return cls(**kwargs)


def to_dict(obj) -> dict:
    def conv(v):
        if dataclasses.is_dataclass(v):
            return {f.name: conv(getattr(v, f.name)) for f in dataclasses.fields(v) if f.init}
        if isinstance(v, (list, tuple)):
            return [conv(x) for x in v]
        return v

    return conv(obj)


def config_root() -> Path:
    return Path(os.environ.get(CONFIG_ROOT_ENV, "."))


def resolve_path(path: str | Path) -> Path:
    p = Path(path)
    return p if p.is_absolute() or p.exists() else config_root() / p


def load_config(path: str | Path | None) -> Config:
    if path is None:
        return Config()
    p = resolve_path(path)
    if not p.exists():
        raise FileNotFoundError(f"config file not found: {p}")
    data = yaml.safe_load(p.read_text(encoding="utf-8")) or {}
    version = data.get("version", CONFIG_VERSION)
    if version != CONFIG_VERSION:
        raise ValueError(f"{p}: unsupported config version {version}")
    return from_dict(Config, data)


def dump_config(cfg: Config, path: str | Path) -> None:
    Path(path).write_text(yaml.safe_dump(to_dict(cfg), sort_keys=False), encoding="utf-8")


def config_hash(cfg: Config) -> str:
    blob = json.dumps(to_dict(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def resolve_cycle(ref: str | DriveCycle) -> DriveCycle:
    """A cycle given as a DriveCycle, a CSV path, or the name of a bundled cycle."""
    if isinstance(ref, DriveCycle):
        return ref
    p = Path(ref)
    if p.suffix == ".csv" or p.exists():
        return load_cycle(resolve_path(p))
    return bundled_cycle(ref)
