"""Low-level controllers: cabin HVAC PIDs, engine power actions, battery cooling, rule baselines."""

from __future__ import annotations

from dataclasses import dataclass

from .plant.params import PidGains, PowertrainMaps, ThermalParams
from .plant.thermal import heater_core_supply

# Engine power increments selectable by the EMS agent; None switches the engine off.
EMS_DELTAS: tuple[float | None, ...] = (10e3, 5e3, 1e3, 500.0, 0.0, -1e3, -5e3, None)
EMS_HOLD = 4
EMS_OFF = 7

CAB_OFF, CAB_HEAT, CAB_COOL = 0, 1, 2


@dataclass
class PidController:
    k_p: float
    k_i: float
    k_d: float
    lo: float = 0.0
    hi: float = float("inf")
    integral_limit: float = float("inf")
    integral: float = 0.0
    prev_error: float | None = None

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError("output limits are inverted")

    @classmethod
    def from_gains(cls, gains: PidGains, hi: float) -> "PidController":
        return cls(gains.k_p, gains.k_i, gains.k_d, 0.0, hi, gains.integral_limit)

    def reset(self) -> None:
        self.integral = 0.0
        self.prev_error = None

    def step(self, error: float, dt: float) -> float:
        return pid_step(self, error, dt)


def pid_step(c: PidController, error: float, dt: float) -> float:
    """PID with clamped integral and saturated output.

    The integral is frozen while the output is saturated in the direction
    the error would push it (conditional integration).
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    deriv = 0.0 if c.prev_error is None else (error - c.prev_error) / dt
    c.prev_error = error
    trial = c.integral + error * dt
    trial = max(-c.integral_limit, min(c.integral_limit, trial))
    raw = c.k_p * error + c.k_i * trial + c.k_d * deriv
    out = max(c.lo, min(c.hi, raw))
    if out == raw or (raw > c.hi and error < 0) or (raw < c.lo and error > 0):
        c.integral = trial
    return out


@dataclass(frozen=True)
class HvacCommand:
    Q_hvac: float  # W into the cabin, negative when cooling
    P_tm_electric: float  # W drawn from the battery for cabin climate
    Q_from_coolant: float = 0.0  # W taken from the engine coolant by the heater core
    Q_electric_heat: float = 0.0
    Q_cool: float = 0.0
    conflict: bool = False  # both heater and AC requested


@dataclass
class HvacControllers:
    heater: PidController
    ac: PidController

    @classmethod
    def create(cls, gains: PidGains, thermal: ThermalParams) -> "HvacControllers":
        return cls(
            heater=PidController.from_gains(gains, thermal.Q_cab_max + thermal.ptc_capacity),
            ac=PidController.from_gains(gains, thermal.ac_capacity),
        )

    def reset(self) -> None:
        self.heater.reset()
        self.ac.reset()


def hvac_actuate(
    T_cab: float,
    T_cl: float,
    a_h: int,
    a_ac: int,
    pids: HvacControllers,
    params: ThermalParams,
    dt: float,
    T_target: float = 22.0,
) -> HvacCommand:
    """Turn the binary heater/AC modes into cabin heat flow and electric load.

    The heater draws on the engine coolant first and tops up with the
    electric heater. With both modes set the heater wins.
    """
    conflict = bool(a_h and a_ac)
    if a_h:
        pids.ac.reset()
        request = pid_step(pids.heater, T_target - T_cab, dt)
        from_coolant = heater_core_supply(T_cl, request, params)
        electric_heat = min(request - from_coolant, params.ptc_capacity)
        p_el = electric_heat / params.ptc_efficiency + params.blower_power
        return HvacCommand(from_coolant + electric_heat, p_el, from_coolant, electric_heat, 0.0, conflict)
    pids.heater.reset()
    if a_ac:
        cool = pid_step(pids.ac, T_cab - T_target, dt)
        return HvacCommand(-cool, cool / params.ac_cop + params.blower_power, Q_cool=cool)
    pids.ac.reset()
    return HvacCommand(0.0, 0.0)


def cabin_mode_bits(mode: int) -> tuple[int, int]:
    """(a_h, a_ac) for a three-way cabin mode."""
    return int(mode == CAB_HEAT), int(mode == CAB_COOL)


def apply_ems_action(p_prev: float, action: int, maps: PowertrainMaps) -> float:
    """Engine power after applying one of the eight EMS actions."""
    if not 0 <= action < len(EMS_DELTAS):
        raise ValueError(f"EMS action index {action} out of range")
    delta = EMS_DELTAS[action]
    if delta is None:
        return 0.0
    if p_prev <= 0.0:
        if delta <= 0.0:
            return 0.0
        return min(maps.p_idle + delta, maps.p_e_max)
    return max(maps.p_idle, min(maps.p_e_max, p_prev + delta))


@dataclass
class BatteryCooling:
    """Two-stage hysteresis rule for the cell fan and coolant loop."""

    fan_on: bool = False
    coolant_on: bool = False

    def reset(self) -> None:
        self.fan_on = self.coolant_on = False

    def update(self, T_bat: float, p: ThermalParams) -> tuple[bool, bool]:
        return battery_tm_rule(self, T_bat, p)


def battery_tm_rule(state: BatteryCooling, T_bat: float, p: ThermalParams) -> tuple[bool, bool]:
    if T_bat >= p.fan_on_T:
        state.fan_on = True
    elif T_bat <= p.fan_off_T:
        state.fan_on = False
    if T_bat >= p.coolant_on_T:
        state.coolant_on = True
    elif T_bat <= p.coolant_off_T:
        state.coolant_on = False
    # coolant stage implies the fan
    if state.coolant_on:
        state.fan_on = True
    return state.fan_on, state.coolant_on


@dataclass
class BaselineConfig:
    soc_low: float = 0.6
    soc_high: float = 0.7
    target_power: float = 20e3


def baseline_ems(soc: float, p_ice: float, cfg: BaselineConfig | None = None) -> int:
    """Thermostatic charge-sustaining rule expressed in the EMS action set."""
    cfg = cfg or BaselineConfig()
    if soc > cfg.soc_high:
        return EMS_OFF
    if soc < cfg.soc_low:
        gap = cfg.target_power - p_ice
        if gap <= 0:
            return EMS_HOLD
        # largest increment that does not overshoot, else the smallest one
        for idx in range(4):
            if EMS_DELTAS[idx] <= gap:
                return idx
        return 3
    return EMS_HOLD


def naive_engine_power(p_ps: float, maps: PowertrainMaps, extra_load: float = 0.0) -> float:
    """Engine always on, following the instantaneous power-split demand."""
    return max(maps.p_idle, min(maps.p_e_max, p_ps + maps.p_bat_aux + extra_load))
