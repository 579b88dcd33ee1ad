"""Episode rollouts of the cabin and EMS controllers on the plant.

One control step (dt = 1 s) runs: recognize, build both observations,
choose both actions, turn them into engine power and HVAC modes, step the
plant, score both rewards, and in training mode hand each agent its own
transition. The same loop drives the rule-based reference policies.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..control import (
    CAB_COOL, CAB_HEAT, CAB_OFF, EMS_DELTAS, EMS_HOLD,
    apply_ems_action, baseline_ems, cabin_mode_bits, naive_engine_power,
)
from ..control import BaselineConfig
from ..cycles import DriveCycle
from ..errors import ConstraintViolation
from ..metrics import EpisodeMetrics, Trace, aggregate
from ..plant.model import Plant, PlantState
from ..plant.powertrain import demand
from ..recognizer import Recognizer
from .dqn import AgentConfig, DqnAgent
from .observation import OBS_SIZE, ObsRanges, build_obs_cab, build_obs_ems, reward_cab, reward_ems
from .replay import Transition

CABIN_SPACES = {
    "three": ((0, 0), (1, 0), (0, 1)),  # off, heat, cool
    "bits": ((0, 0), (1, 0), (0, 1), (1, 1)),  # heater wins when both are set
}


@dataclass
class RewardSettings:
    alpha_1: float = 1.0
    alpha_2: float = 1e-3
    beta_1: float = 1.0
    beta_2: float = 350.0
    soc_ref: float = 0.7
    violation_penalty: float = -50.0
    scale_cab: float = 1.0
    scale_ems: float = 1.0
    end_is_terminal: bool = True


@dataclass
class StepContext:
    """What a rule-based policy may look at besides its observation."""

    state: PlantState
    P_ps: float
    P_tm_prev: float
    dc_label: int


@dataclass
class ItemAgents:
    """The cabin and EMS learners plus the action-space mappings they use."""

    cab: DqnAgent
    ems: DqnAgent
    cabin_space: str = "three"
    ems_actions: tuple[int, ...] = tuple(range(len(EMS_DELTAS)))

    @classmethod
    def create(cls, cfg: AgentConfig | None = None, cabin_space: str = "three",
               ems_actions: tuple[int, ...] | None = None) -> "ItemAgents":
        cfg = cfg or AgentConfig()
        if cabin_space not in CABIN_SPACES:
            raise ValueError(f"unknown cabin action space {cabin_space!r}")
        ems_actions = tuple(range(len(EMS_DELTAS))) if ems_actions is None else tuple(ems_actions)
        cab = DqnAgent("cab", OBS_SIZE, len(CABIN_SPACES[cabin_space]), cfg)
        # distinct streams for the two learners
        ems_cfg = AgentConfig(**{**cfg.__dict__, "seed": cfg.seed + 1000})
        ems = DqnAgent("ems", OBS_SIZE, len(ems_actions), ems_cfg)
        return cls(cab, ems, cabin_space, ems_actions)


# -- policies ---------------------------------------------------------------

class AgentEms:
    def __init__(self, agents: ItemAgents, greedy: bool):
        self.agents, self.greedy = agents, greedy

    def choose(self, obs, ctx: StepContext, maps) -> tuple[int, int, float]:
        idx = self.agents.ems.act(obs, self.greedy)
        action = self.agents.ems_actions[idx]
        return idx, action, apply_ems_action(ctx.state.P_ice, action, maps)


class AgentCab:
    def __init__(self, agents: ItemAgents, greedy: bool):
        self.agents, self.greedy = agents, greedy
        self.space = CABIN_SPACES[agents.cabin_space]

    def choose(self, obs, ctx: StepContext) -> tuple[int, tuple[int, int]]:
        idx = self.agents.cab.act(obs, self.greedy)
        return idx, self.space[idx]


class BaselineEms:
    def __init__(self, cfg: BaselineConfig | None = None):
        self.cfg = cfg or BaselineConfig()

    def choose(self, obs, ctx: StepContext, maps) -> tuple[int, int, float]:
        action = baseline_ems(ctx.state.soc, ctx.state.P_ice, self.cfg)
        return action, action, apply_ems_action(ctx.state.P_ice, action, maps)


class NaiveEms:
    """Engine always on, tracking the drive demand plus the previous step's auxiliary load."""

    def choose(self, obs, ctx: StepContext, maps) -> tuple[int, int, float]:
        return -1, EMS_HOLD, naive_engine_power(ctx.P_ps, maps, ctx.P_tm_prev)


class ThermostatCab:
    """Heat below the band, cool above it, otherwise keep the current mode."""

    def __init__(self, T_target: float = 22.0, band: float = 1.0):
        self.T_target, self.band = T_target, band
        self.mode = CAB_OFF

    def choose(self, obs, ctx: StepContext) -> tuple[int, tuple[int, int]]:
        T = ctx.state.T_cab
        if T < self.T_target - self.band:
            self.mode = CAB_HEAT
        elif T > self.T_target + self.band:
            self.mode = CAB_COOL
        return self.mode, cabin_mode_bits(self.mode)


class FixedCab:
    def __init__(self, mode: int = CAB_OFF):
        self.mode = mode

    def choose(self, obs, ctx: StepContext) -> tuple[int, tuple[int, int]]:
        return self.mode, cabin_mode_bits(self.mode)


# -- the episode loop -------------------------------------------------------

@dataclass
class RolloutResult:
    metrics: EpisodeMetrics
    trace: Trace
    transitions: dict[str, list[Transition]] = field(default_factory=dict)
    losses: dict[str, list[float]] = field(default_factory=dict)
    observations: dict[str, np.ndarray] | None = None

    def __iter__(self):
        # (metrics, transitions) unpacking
        yield self.metrics
        yield self.transitions


def run_episode(
    cycle: DriveCycle,
    plant: Plant,
    recognizer: Recognizer | None,
    dc_enabled: bool,
    ems_policy,
    cab_policy,
    rewards: RewardSettings | None = None,
    ranges: ObsRanges | None = None,
    learners: ItemAgents | None = None,
    warmup_s: float = 120.0,
    comfort_band: float = 2.0,
    record_obs: bool = False,
) -> RolloutResult:
    """Drive one cycle with the given policies.

    With ``learners`` set, each transition (reward scaled) is passed to the
    matching agent right after the step, which stores it and learns.
    """
    rw = rewards or RewardSettings()
    sim = plant.cfg.sim
    dt = sim.dt
    if abs(cycle.dt - dt) > 1e-9:
        raise ValueError(f"cycle dt {cycle.dt} differs from plant dt {dt}")
    if dc_enabled and recognizer is None:
        raise ValueError("driving-condition input enabled without a recognizer")
    T_target = sim.T_target
    maps, vehicle = plant.cfg.maps, plant.cfg.vehicle
    speed = cycle.speed
    grade = cycle.grade if cycle.grade is not None else np.zeros_like(speed)
    n_steps = len(speed) - 1

    state = plant.reset()
    stream = recognizer.stream(dt) if recognizer is not None else None
    trace = Trace(dt, soc_initial=state.soc, soh_initial=state.soh)
    trans: dict[str, list[Transition]] = {"cab": [], "ems": []}
    losses: dict[str, list[float]] = {"cab": [], "ems": []}
    obs_log: dict[str, list[np.ndarray]] = {"cab": [], "ems": []}
    soc0 = state.soc
    # row 0 is the initial state; rates and rewards are zero there
    trace.append(time=state.time, speed=speed[0], fuel_rate=0.0, P_tm=0.0, P_cab=0.0, P_ice=state.P_ice,
                 soc=state.soc, T_bat=state.T_bat, T_cl=state.T_cl, T_cab=state.T_cab, soh=state.soh,
                 fuel_cum=state.fuel, reward_cab=0.0, reward_ems=0.0)

    def label_at(k: int) -> int:
        return stream.step(float(speed[k])) if stream is not None else 0

    def accel_at(k: int) -> float:
        return (speed[k + 1] - speed[k]) / dt if k < n_steps else 0.0

    def observe(k: int, st: PlantState, a_last: int, label: int):
        v, a = float(speed[k]), accel_at(k)
        return (build_obs_cab(st.T_cab, v, a, label, dc_enabled, ranges, T_target),
                build_obs_ems(st.soc, soc0, v, a, a_last, label, dc_enabled, ranges))

    a_last = EMS_HOLD
    label = label_at(0)
    obs_cab, obs_ems = observe(0, state, a_last, label)
    p_tm_prev = 0.0
    for k in range(n_steps):
        v_mid = 0.5 * (speed[k] + speed[k + 1])
        a = accel_at(k)
        theta = 0.5 * (grade[k] + grade[k + 1])
        ctx = StepContext(state, demand(v_mid, a, theta, vehicle).P_ps, p_tm_prev, label)
        ems_idx, ems_action, P_ice = ems_policy.choose(obs_ems, ctx, maps)
        cab_idx, (a_h, a_ac) = cab_policy.choose(obs_cab, ctx)
        if record_obs:
            obs_log["cab"].append(obs_cab)
            obs_log["ems"].append(obs_ems)

        violated = False
        try:
            new_state, out = plant.step(state, v_mid, a, theta, P_ice, a_h, a_ac)
        except ConstraintViolation:
            violated = True
        if violated:
            r_cab = r_ems = rw.violation_penalty
            fuel_rate = p_tm = p_cab = 0.0
            new_state = state
            terminal = True
        else:
            e = new_state.T_cab - T_target
            r_cab = reward_cab(e, out.P_cab, rw.alpha_1, rw.alpha_2)
            r_ems = reward_ems(out.fuel_rate, new_state.soc, rw.beta_1, rw.beta_2, rw.soc_ref)
            fuel_rate, p_tm, p_cab = out.fuel_rate, out.P_tm, out.P_cab
            trace.traction_violations += int(out.traction_violation)
            trace.limit_events += int(out.power_limited)
            terminal = rw.end_is_terminal and k == n_steps - 1

        trace.append(
            time=new_state.time if not violated else state.time + dt,
            speed=speed[k], fuel_rate=fuel_rate, P_tm=p_tm, P_cab=p_cab, P_ice=P_ice,
            soc=new_state.soc, T_bat=new_state.T_bat, T_cl=new_state.T_cl, T_cab=new_state.T_cab,
            soh=new_state.soh, fuel_cum=new_state.fuel, dc_label=label,
            ems_action=ems_action, cab_action=cab_idx, reward_cab=r_cab, reward_ems=r_ems,
        )

        a_last = ems_action
        if violated:
            next_cab, next_ems = obs_cab, obs_ems
        else:
            label = label_at(k + 1)
            next_cab, next_ems = observe(k + 1, new_state, a_last, label)

        if learners is not None:
            t_cab = Transition(obs_cab, cab_idx, r_cab * rw.scale_cab, next_cab, terminal)
            t_ems = Transition(obs_ems, ems_idx, r_ems * rw.scale_ems, next_ems, terminal)
            trans["cab"].append(t_cab)
            trans["ems"].append(t_ems)
            for name, agent, t in (("cab", learners.cab, t_cab), ("ems", learners.ems, t_ems)):
                loss = agent.observe(t)
                if loss is not None:
                    losses[name].append(loss)

        if violated:
            trace.terminated = True
            break
        state, obs_cab, obs_ems, p_tm_prev = new_state, next_cab, next_ems, p_tm

    metrics = aggregate(trace, warmup_s, T_target, comfort_band)
    observations = {k: np.array(v) for k, v in obs_log.items()} if record_obs else None
    return RolloutResult(metrics, trace, trans, losses, observations)


def rollout_episode(
    cycle: DriveCycle,
    plant: Plant,
    recognizer: Recognizer | None,
    agents: ItemAgents,
    dc_enabled: bool,
    mode: str = "eval",
    seed: int | None = None,
    rewards: RewardSettings | None = None,
    ranges: ObsRanges | None = None,
    warmup_s: float = 120.0,
    comfort_band: float = 2.0,
    record_obs: bool = False,
) -> RolloutResult:
    """Run both learners on one cycle; ``mode`` is ``"train"`` or ``"eval"`` (greedy, no learning).

    ``seed``, when given, reseeds both exploration streams first.
    """
    if mode not in ("train", "eval"):
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    if seed is not None:
        agents.cab.rng = np.random.default_rng([seed, 0])
        agents.ems.rng = np.random.default_rng([seed, 1])
    greedy = mode == "eval"
    return run_episode(
        cycle, plant, recognizer, dc_enabled,
        AgentEms(agents, greedy), AgentCab(agents, greedy),
        rewards, ranges, learners=agents if mode == "train" else None,
        warmup_s=warmup_s, comfort_band=comfort_band, record_obs=record_obs,
    )


def rollout_reference(
    cycle: DriveCycle,
    plant: Plant,
    ems: str = "naive",
    cabin: str = "thermostat",
    rewards: RewardSettings | None = None,
    baseline: BaselineConfig | None = None,
    warmup_s: float = 120.0,
    comfort_band: float = 2.0,
) -> RolloutResult:
    """Rule-based reference run: ``ems`` in {naive, baseline}, ``cabin`` in {thermostat, off}."""
    ems_policies = {"naive": lambda: NaiveEms(), "baseline": lambda: BaselineEms(baseline)}
    cab_policies = {"thermostat": lambda: ThermostatCab(plant.cfg.sim.T_target), "off": lambda: FixedCab(CAB_OFF)}
    if ems not in ems_policies or cabin not in cab_policies:
        raise ValueError(f"unknown reference policy {ems!r}/{cabin!r}")
    return run_episode(cycle, plant, None, False, ems_policies[ems](), cab_policies[cabin](),
                       rewards, warmup_s=warmup_s, comfort_band=comfort_band)
