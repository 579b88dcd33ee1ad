"""First-order RC cell model with lumped thermal and semi-empirical aging."""

from __future__ import annotations

import math
from dataclasses import dataclass

from ..errors import ConstraintViolation, PowerLimitError
from .params import KELVIN, BatteryParams


def max_cell_power(v_ocv: float, v_1: float, r_0: float) -> float:
    return (v_ocv - v_1) ** 2 / (4.0 * r_0)


def cell_current(p_cell: float, v_ocv: float, v_1: float, r_0: float) -> float:
    """Cell current drawing ``p_cell`` watts through the ohmic resistance.

    Smaller root of ``R_0 I^2 - (V_ocv - V_1) I + P = 0``; positive for
    discharge. Raises PowerLimitError when the request exceeds the
    matched-load maximum.
    """
    e = v_ocv - v_1
    disc = e * e - 4.0 * r_0 * p_cell
    if disc < 0.0:
        raise PowerLimitError(p_cell, max_cell_power(v_ocv, v_1, r_0))
    root = math.sqrt(disc)
    # rationalised form of (e - sqrt(disc)) / (2 R_0), no cancellation at small power
    return 2.0 * p_cell / (e + root)


def capacity_loss_percent(c_rate: float, temp_c: float, throughput_ah: float, p: BatteryParams) -> float:
    """Percent capacity loss after ``throughput_ah`` at a fixed C-rate and temperature."""
    return p.M(c_rate) * math.exp(-p.E_a / (p.R_g * (temp_c + KELVIN))) * throughput_ah ** p.z


def total_throughput(c_rate: float, temp_c: float, p: BatteryParams) -> float:
    """Ah throughput until the end-of-life loss is reached."""
    arrh = p.M(c_rate) * math.exp(-p.E_a / (p.R_g * (temp_c + KELVIN)))
    return (p.eol_loss_percent / arrh) ** (1.0 / p.z)


def cycles_to_eol(c_rate: float, temp_c: float, p: BatteryParams) -> float:
    return 3600.0 * total_throughput(c_rate, temp_c, p) / p.Q_n


def soh_decrement(current: float, dt: float, c_rate: float, temp_c: float, p: BatteryParams) -> float:
    n = cycles_to_eol(c_rate, temp_c, p)
    return (abs(current) * dt / 3600.0) / (2.0 * n * p.Q_n)


@dataclass(frozen=True)
class CellStep:
    soc: float
    v_1: float
    T_bat: float
    soh: float
    A_d: float
    dQ: float
    current: float
    v_ocv: float
    v_t: float
    Q_g: float
    power_limited: bool


def battery_step(
    soc: float,
    v_1: float,
    T_bat: float,
    soh: float,
    A_d: float,
    dQ: float,
    p_cell: float,
    dt: float,
    p: BatteryParams,
    T_amb: float,
    Q_a: float = 0.0,
    Q_c: float = 0.0,
) -> CellStep:
    """One forward-Euler step of the cell electrical, thermal and aging states.

    When the requested power exceeds what the cell can deliver, the power
    is clamped to the maximum and ``power_limited`` is set.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    v_ocv = p.ocv(soc, T_bat)
    r_0 = p.R_0(soc, T_bat)
    r_1 = p.R_1(soc, T_bat)
    c_1 = p.C_1(soc, T_bat)
    limited = False
    try:
        i = cell_current(p_cell, v_ocv, v_1, r_0)
    except PowerLimitError as exc:
        limited = True
        i = cell_current(exc.p_max, v_ocv, v_1, r_0)
    v_t = v_ocv - v_1 - i * r_0

    v_1_new = v_1 + dt * (-v_1 / (r_1 * c_1) + i / c_1)
    soc_new = soc - i * dt / (3600.0 * (p.Q_n - dQ))

    q_gen = i * i * r_0 + v_1 * v_1 / r_1
    hA = p.h_c * p.A_c
    mc = p.thermal_mass
    T_new = T_bat + dt * (-hA / mc * T_bat + (q_gen - Q_a - Q_c) / mc + hA / mc * T_amb)

    c_rate = abs(i) / p.Q_n
    soh_new = soh - soh_decrement(i, dt, c_rate, T_bat, p)
    A_d_new = A_d + abs(i) * dt / 3600.0
    dQ_new = 2.0 * p.Q_n * (1.0 - soh_new)
    if not 0.0 <= soc_new <= 1.0:
        raise ConstraintViolation(f"SOC left [0, 1]: {soc_new:.4f}")
    return CellStep(soc_new, v_1_new, T_new, soh_new, A_d_new, dQ_new, i, v_ocv, v_t, q_gen, limited)
