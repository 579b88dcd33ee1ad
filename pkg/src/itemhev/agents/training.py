"""Training loop for the cabin and EMS learners, checkpoints and learning curves."""

from __future__ import annotations

import csv
import json
import math
import shutil
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import nn
from ..errors import FormatError, TrainingFailure
from ..plant.model import Plant
from ..recognizer import Recognizer
from .rollout import ItemAgents, rollout_episode

CURVE_FIELDS = (
    "episode", "cycle", "steps", "epsilon", "return_cab", "return_ems", "return_total",
    "fuel_g", "tm_energy_Wh", "soc_final", "mean_abs_ecab", "loss_cab", "loss_ems",
    "eval_return", "eval_fuel_g", "eval_soc_final", "eval_mean_abs_ecab",
)


@dataclass
class TrainingResult:
    agents: ItemAgents
    best: ItemAgents
    best_eval_return: float
    curve: list[dict] = field(default_factory=list)


def _snapshot(agents: ItemAgents) -> ItemAgents:
    """Independent copy of both online networks (evaluation clones network values)."""
    snap = ItemAgents.__new__(ItemAgents)
    snap.cabin_space, snap.ems_actions = agents.cabin_space, agents.ems_actions
    snap.cab = _clone_agent(agents.cab)
    snap.ems = _clone_agent(agents.ems)
    return snap


class _FrozenAgent:
    """Greedy-only stand-in holding a copy of an online network."""

    def __init__(self, name: str, net: nn.Mlp):
        self.name = name
        self.online = net
        self.rng = np.random.default_rng(0)

    def act(self, obs, greedy: bool = True) -> int:
        return int(np.argmax(nn.forward(self.online, obs)))

    def q_values(self, obs):
        return nn.forward(self.online, obs)


def _clone_agent(agent) -> _FrozenAgent:
    return _FrozenAgent(agent.name, agent.online.copy())


def _mean(xs) -> float:
    return float(np.mean(xs)) if len(xs) else float("nan")


def train(
    cfg,
    cycles,
    dc_enabled: bool,
    recognizer: Recognizer | None = None,
    eval_cycle=None,
    plant: Plant | None = None,
    log=None,
) -> TrainingResult:
    """Train both agents on ``cycles`` round-robin for ``cfg.train.episodes`` episodes.

    Every ``eval_every`` episodes the greedy policy is scored on
    ``eval_cycle``; the best-scoring network pair is kept. Training aborts
    with :class:`TrainingFailure` when the mean TD loss since the previous
    evaluation exceeds ``divergence_loss`` at ``divergence_patience``
    consecutive evaluations.
    """
    tc = cfg.train
    if tc.episodes <= 0:
        raise ValueError("number of training episodes must be positive")
    if not cycles:
        raise ValueError("at least one training cycle is required")
    plant = plant or Plant(cfg.plant)
    agents = ItemAgents.create(cfg.agent, tc.cabin_actions)
    rep = cfg.report
    best, best_ret = _snapshot(agents), -math.inf
    curve: list[dict] = []
    bad_evals = 0
    window_losses: list[float] = []

    for ep in range(tc.episodes):
        cycle = cycles[ep % len(cycles)]
        res = rollout_episode(cycle, plant, recognizer, agents, dc_enabled, "train",
                              rewards=cfg.rewards, ranges=cfg.obs,
                              warmup_s=rep.warmup_s, comfort_band=rep.comfort_band)
        m = res.metrics
        row = {
            "episode": ep, "cycle": cycle.name, "steps": m.steps, "epsilon": agents.cab.epsilon,
            "return_cab": m.return_cab, "return_ems": m.return_ems, "return_total": m.return_cab + m.return_ems,
            "fuel_g": m.fuel_g, "tm_energy_Wh": m.tm_energy_Wh, "soc_final": m.soc_final,
            "mean_abs_ecab": m.mean_abs_ecab,
            "loss_cab": _mean(res.losses["cab"]), "loss_ems": _mean(res.losses["ems"]),
        }
        window_losses.extend(res.losses["cab"] + res.losses["ems"])
        last = ep == tc.episodes - 1
        if eval_cycle is not None and ((ep + 1) % tc.eval_every == 0 or last):
            snap = _snapshot(agents)
            ev = rollout_episode(eval_cycle, plant, recognizer, snap, dc_enabled, "eval",
                                 rewards=cfg.rewards, ranges=cfg.obs,
                                 warmup_s=rep.warmup_s, comfort_band=rep.comfort_band).metrics
            ret = ev.return_cab + ev.return_ems
            row.update(eval_return=ret, eval_fuel_g=ev.fuel_g, eval_soc_final=ev.soc_final,
                       eval_mean_abs_ecab=ev.mean_abs_ecab)
            if ret > best_ret:
                best, best_ret = snap, ret
            mean_loss = _mean(window_losses)
            bad_evals = bad_evals + 1 if mean_loss > tc.divergence_loss else 0
            window_losses = []
            if bad_evals >= tc.divergence_patience:
                raise TrainingFailure(
                    f"TD loss {mean_loss:.3g} above {tc.divergence_loss:.3g} for {bad_evals} consecutive "
                    f"evaluations (episode {ep}, cab updates {agents.cab.updates}, ems updates {agents.ems.updates})")
        curve.append(row)
        if log is not None:
            log(row)
    if eval_cycle is None:
        best = _snapshot(agents)
    return TrainingResult(agents, best, best_ret, curve)


def write_curve(curve: list[dict], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, CURVE_FIELDS, restval="")
        w.writeheader()
        for row in curve:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})


def read_curve(path: str | Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# -- checkpoint bundles -----------------------------------------------------

BUNDLE_VERSION = 1


def save_bundle(directory: str | Path, agents, recognizer: Recognizer | None, dc_enabled: bool,
                config_yaml: str, extra: dict | None = None) -> Path:
    """Write both policy networks, the recognizer and the config snapshot into one directory."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    nn.save(agents.cab.online, d / "cab.mlp")
    nn.save(agents.ems.online, d / "ems.mlp")
    if recognizer is not None:
        recognizer.save(d / "recognizer")
    elif (d / "recognizer").exists():
        shutil.rmtree(d / "recognizer")
    (d / "config.yaml").write_text(config_yaml, encoding="utf-8")
    meta = {
        "format": "itemhev-policy-bundle",
        "version": BUNDLE_VERSION,
        "dc_enabled": dc_enabled,
        "cabin_space": agents.cabin_space,
        "ems_actions": list(agents.ems_actions),
        **(extra or {}),
    }
    (d / "bundle.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return d


@dataclass
class PolicyBundle:
    agents: object
    recognizer: Recognizer | None
    dc_enabled: bool
    config_yaml: str
    meta: dict


def load_bundle(directory: str | Path) -> PolicyBundle:
    d = Path(directory)
    meta_path = d / "bundle.json"
    if not meta_path.exists():
        raise FileNotFoundError(f"not a policy bundle (missing {meta_path})")
    meta = json.loads(meta_path.read_text(encoding="utf-8"))
    if meta.get("format") != "itemhev-policy-bundle" or meta.get("version") != BUNDLE_VERSION:
        raise FormatError(f"{meta_path}: unsupported bundle format")
    agents = ItemAgents.__new__(ItemAgents)
    agents.cab = _FrozenAgent("cab", nn.load(d / "cab.mlp"))
    agents.ems = _FrozenAgent("ems", nn.load(d / "ems.mlp"))
    agents.cabin_space = meta["cabin_space"]
    agents.ems_actions = tuple(meta["ems_actions"])
    rec = Recognizer.load(d / "recognizer") if (d / "recognizer").exists() else None
    return PolicyBundle(agents, rec, bool(meta["dc_enabled"]), (d / "config.yaml").read_text(encoding="utf-8"), meta)
