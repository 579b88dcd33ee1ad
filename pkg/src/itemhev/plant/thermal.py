"""Lumped engine-coolant and cabin air thermal models (forward Euler)."""

from __future__ import annotations

from dataclasses import dataclass

from .params import ThermalParams


@dataclass(frozen=True)
class EngineHeat:
    Q_f: float
    Q_w: float
    Q_ex: float
    Q_con: float
    Q_rad: float
    Q_cab: float
    Q_hs: float

    @property
    def net(self) -> float:
        return self.Q_f - self.Q_w - self.Q_ex - self.Q_con - self.Q_rad - self.Q_cab + self.Q_hs


def heater_core_supply(T_cl: float, heat_request: float, p: ThermalParams) -> float:
    """Heat the coolant can hand to the cabin heater core, W."""
    if heat_request <= 0.0 or T_cl < p.heater_min_supply_T:
        return 0.0
    return min(heat_request, p.Q_cab_max)


def engine_heat_flows(
    T_cl: float,
    P_ice: float,
    fuel_rate: float,
    lhv: float,
    Q_cab: float,
    T_amb: float,
    p: ThermalParams,
) -> EngineHeat:
    Q_f = fuel_rate * lhv
    return EngineHeat(
        Q_f=Q_f,
        Q_w=P_ice,
        Q_ex=p.chi_ex * Q_f,
        Q_con=p.UA_con * (T_cl - T_amb),
        Q_rad=p.Q_rad_max if T_cl > p.thermostat_T else 0.0,
        Q_cab=Q_cab,
        Q_hs=p.Q_hs,
    )


def engine_thermal_step(
    T_cl: float,
    P_ice: float,
    fuel_rate: float,
    lhv: float,
    Q_cab: float,
    dt: float,
    p: ThermalParams,
    T_amb: float,
) -> tuple[float, EngineHeat]:
    if dt <= 0:
        raise ValueError("dt must be positive")
    flows = engine_heat_flows(T_cl, P_ice, fuel_rate, lhv, Q_cab, T_amb, p)
    return T_cl + dt * flows.net / (p.C_s * p.M_e), flows


def cabin_ua(p: ThermalParams) -> float:
    return p.UA_roof + p.UA_win + p.UA_t


def cabin_thermal_step(T_cab: float, Q_hvac: float, dt: float, p: ThermalParams, T_amb: float) -> float:
    """Cabin air temperature after one step; ``Q_hvac`` > 0 heats, < 0 cools."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    dT = T_amb - T_cab
    q = Q_hvac + p.Q_sun + p.UA_roof * dT + p.UA_win * dT + p.UA_t * dT
    return T_cab + dt * q / (p.M_cab * p.C_cab)
