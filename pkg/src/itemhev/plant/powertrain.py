"""Longitudinal demand, power-split kinematics and the electrical bus balance."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .params import MotorParams, PowertrainMaps, VehicleParams


@dataclass(frozen=True)
class Demand:
    F_d: float  # N
    P_d: float  # W at the wheels
    T_ps: float  # N m at the power-split output (ring) shaft
    P_ps: float  # W at the power-split output
    F_w: float = 0.0
    F_f: float = 0.0
    F_z: float = 0.0
    F_a: float = 0.0


def _sgn(x: float) -> int:
    return 1 if x > 0 else (-1 if x < 0 else 0)


def demand(v: float, a: float, theta: float, p: VehicleParams) -> Demand:
    if v < 0:
        raise ValueError(f"speed must be non-negative, got {v}")
    F_w = 0.5 * p.rho * p.C_d * p.A_f * v * v
    F_f = p.m * p.g * p.f * math.cos(theta)
    F_z = p.m * p.g * math.sin(theta)
    F_a = p.m * a
    F_d = F_w + F_f + F_z + F_a
    P_d = F_d * v
    eff = (p.eta_w * p.eta_d) ** _sgn(P_d)
    return Demand(
        F_d=F_d,
        P_d=P_d,
        T_ps=F_d * p.r_w / (p.r_d * eff),
        P_ps=P_d / eff,
        F_w=F_w,
        F_f=F_f,
        F_z=F_z,
        F_a=F_a,
    )


def ring_speed(v: float, p: VehicleParams) -> float:
    """Shared ring-gear speed of gearbox and torque coupler, rad/s."""
    return p.r_d * v / p.r_w


@dataclass(frozen=True)
class ShaftSet:
    T_e: float
    w_e: float
    T_m1: float
    w_m1: float
    T_m2: float
    w_m2: float
    w_ring: float
    T_Rg: float  # gearbox ring reaction torque
    T_Rc: float  # torque-coupler ring torque
    fuel_rate: float  # g/s on the operating line, warm engine
    saturated: bool = False
    traction_deficit: float = 0.0  # N m at the ring that could not be supplied
    friction_brake: float = 0.0  # N m at the ring dissipated by friction brakes


def _clamp_motor(t: float, w: float, motor: MotorParams) -> tuple[float, bool]:
    lim = motor.torque_limit(w)
    if t > lim:
        return lim, True
    if t < -lim:
        return -lim, True
    return t, False


def powersplit_solve(T_ps: float, v: float, P_ice: float, maps: PowertrainMaps, p: VehicleParams) -> ShaftSet:
    """Quasi-static shaft torques and speeds for a commanded engine power.

    The engine sits on its operating line. The gearbox ring reacts
    ``T_Rg = -r_g T_e / (1 + r_g)``, so the ring delivers ``-T_Rg`` to the
    output shaft; M2 carries ``-T_e / (1 + r_g)`` (generating at positive
    sun speed) and M1 supplies the rest of the output torque through the
    torque coupler.
    """
    if P_ice < 0:
        raise ValueError("engine power command must be non-negative")
    w_e, T_e, fuel = maps.ool(P_ice)
    w_ring = ring_speed(v, p)
    r_g, r_t = p.r_g, p.r_t
    w_m2 = (1.0 + r_g) * w_e - r_g * w_ring
    T_Rg = -r_g * T_e / (1.0 + r_g)
    T_m2 = -T_e / (1.0 + r_g)
    T_Rc = T_ps + T_Rg
    w_m1 = r_t * w_ring
    T_m1_req = T_Rc / r_t
    T_m1, sat = _clamp_motor(T_m1_req, w_m1, maps.m1)
    T_m2, sat2 = _clamp_motor(T_m2, w_m2, maps.m2)
    deficit = brake = 0.0
    if sat:
        shortfall = (T_m1_req - T_m1) * r_t
        if shortfall > 0:
            deficit = shortfall
        else:
            # regeneration beyond the M1 limit goes to the friction brakes
            brake = -shortfall
    return ShaftSet(
        T_e=T_e,
        w_e=w_e,
        T_m1=T_m1,
        w_m1=w_m1,
        T_m2=T_m2,
        w_m2=w_m2,
        w_ring=w_ring,
        T_Rg=T_Rg,
        T_Rc=r_t * T_m1,
        fuel_rate=fuel,
        saturated=(sat and deficit > 0) or sat2,
        traction_deficit=deficit,
        friction_brake=brake,
    )


def motor_dc_power(torque: float, speed: float, motor: MotorParams) -> float:
    """Electrical power drawn (positive) or returned (negative) by a machine."""
    p_mech = torque * speed
    if p_mech == 0.0:
        return 0.0
    eta = motor.efficiency(torque, speed)
    return p_mech / eta if p_mech > 0 else p_mech * eta


def electrical_balance(
    shafts: ShaftSet,
    maps: PowertrainMaps,
    p_tm_electric: float,
    n_bat: int,
) -> tuple[float, float]:
    """Pack and per-cell power; thermal-management loads ride on the auxiliary bus."""
    p_bat = (
        motor_dc_power(shafts.T_m1, shafts.w_m1, maps.m1)
        + motor_dc_power(shafts.T_m2, shafts.w_m2, maps.m2)
        + maps.p_bat_aux
        + p_tm_electric
    )
    return p_bat, p_bat / n_bat
