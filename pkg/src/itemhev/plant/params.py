"""Parameter sets for the power-split HEV plant and its low-level controllers.

Defaults describe a mid-size power-split hybrid of the Prius class. None of
them are claimed to be the vehicle of any particular study; everything can
be overridden from a YAML config (see ``itemhev.config``).
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, field
from typing import Sequence

R_GAS = 8.314  # J/(mol K)
KELVIN = 273.15


def _interp_index(grid: Sequence[float], x: float) -> tuple[int, float]:
    """Lower cell index and fractional position, clamped to the grid."""
    if x <= grid[0]:
        return 0, 0.0
    if x >= grid[-1]:
        return len(grid) - 2, 1.0
    i = bisect_right(grid, x) - 1
    return i, (x - grid[i]) / (grid[i + 1] - grid[i])


def interp1(grid: Sequence[float], values: Sequence[float], x: float) -> float:
    i, f = _interp_index(grid, x)
    return values[i] + f * (values[i + 1] - values[i])


@dataclass
class Table2D:
    """Bilinear lookup ``values[i][j]`` at ``(x_grid[i], y_grid[j])``, clamped at the edges."""

    x_grid: list[float]
    y_grid: list[float]
    values: list[list[float]]

    def __post_init__(self):
        if len(self.values) != len(self.x_grid) or any(len(r) != len(self.y_grid) for r in self.values):
            raise ValueError("table values do not match grid sizes")
        if len(self.x_grid) < 2 or len(self.y_grid) < 2:
            raise ValueError("tables need at least two grid points per axis")

    def __call__(self, x: float, y: float) -> float:
        i, fx = _interp_index(self.x_grid, x)
        j, fy = _interp_index(self.y_grid, y)
        v = self.values
        a = v[i][j] + fy * (v[i][j + 1] - v[i][j])
        b = v[i + 1][j] + fy * (v[i + 1][j + 1] - v[i + 1][j])
        return a + fx * (b - a)


@dataclass
class VehicleParams:
    m: float = 1530.0
    rho: float = 1.2
    C_d: float = 0.26
    A_f: float = 2.25
    f: float = 0.009
    g: float = 9.81
    r_w: float = 0.30
    r_d: float = 3.267
    eta_w: float = 0.98
    eta_d: float = 0.96
    r_g: float = 2.6
    r_t: float = 2.636

    def __post_init__(self):
        for name in ("m", "rho", "C_d", "A_f", "f", "g", "r_w", "r_d", "r_g", "r_t"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        for name in ("eta_w", "eta_d"):
            if not 0 < getattr(self, name) <= 1:
                raise ValueError(f"{name} must lie in (0, 1]")


_SOC_GRID = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0]
_TEMP_GRID = [-10.0, 0.0, 10.0, 25.0, 40.0, 55.0]
_OCV_25 = [3.00, 3.45, 3.55, 3.62, 3.67, 3.72, 3.79, 3.88, 3.97, 4.07, 4.18]


def _ocv_table() -> Table2D:
    # small reversible-heat style temperature slope, 0.2 mV/K
    return Table2D(_SOC_GRID, _TEMP_GRID, [[v + 2e-4 * (t - 25.0) for t in _TEMP_GRID] for v in _OCV_25])


def _resistance_table(r_ref: float, ea: float) -> Table2D:
    rows = []
    for soc in _SOC_GRID:
        soc_factor = 1.0 + 0.6 * math.exp(-soc / 0.08)  # rises at empty
        rows.append([
            r_ref * soc_factor * math.exp(ea / R_GAS * (1.0 / (t + KELVIN) - 1.0 / (25.0 + KELVIN)))
            for t in _TEMP_GRID
        ])
    return Table2D(_SOC_GRID, _TEMP_GRID, rows)


def _capacitance_table(tau: float, r1: Table2D) -> Table2D:
    return Table2D(r1.x_grid, r1.y_grid, [[tau / r for r in row] for row in r1.values])


_R1_DEFAULT = _resistance_table(0.002, 20000.0)


@dataclass
class BatteryParams:
    n_bat: int = 168
    Q_n: float = 6.5  # Ah
    ocv: Table2D = field(default_factory=_ocv_table)
    R_0: Table2D = field(default_factory=lambda: _resistance_table(0.003, 25000.0))
    R_1: Table2D = field(default_factory=lambda: _resistance_table(0.002, 20000.0))
    C_1: Table2D = field(default_factory=lambda: _capacitance_table(5.0, _R1_DEFAULT))
    c_p: float = 1350.0  # J/(kg C)
    h_c: float = 5.0  # W/(m^2 C)
    A_c: float = 0.02  # m^2
    m_bat: float = 0.25  # kg
    heat_capacity: float | None = None  # J/C; overrides m_bat * c_p when set
    # Semi-empirical fade model: M tabulated over C-rate
    aging_c_rate: list[float] = field(default_factory=lambda: [0.5, 2.0, 6.0, 10.0])
    aging_M: list[float] = field(default_factory=lambda: [
        31630.0 * math.exp(370.3 * 0.5 / (R_GAS * 298.15)),
        21681.0 * math.exp(370.3 * 2.0 / (R_GAS * 298.15)),
        12934.0 * math.exp(370.3 * 6.0 / (R_GAS * 298.15)),
        15512.0 * math.exp(370.3 * 10.0 / (R_GAS * 298.15)),
    ])
    E_a: float = 31700.0  # J/mol
    R_g: float = R_GAS
    z: float = 0.55
    eol_loss_percent: float = 20.0

    def __post_init__(self):
        if self.Q_n <= 0 or self.n_bat <= 0:
            raise ValueError("Q_n and n_bat must be positive")
        if len(self.aging_c_rate) != len(self.aging_M):
            raise ValueError("aging tables differ in length")

    @property
    def thermal_mass(self) -> float:
        return self.heat_capacity if self.heat_capacity is not None else self.m_bat * self.c_p

    def M(self, c_rate: float) -> float:
        return interp1(self.aging_c_rate, self.aging_M, c_rate)


@dataclass
class MotorParams:
    t_max: float  # N m
    p_max: float  # W
    w_max: float  # rad/s
    eta_torque_grid: list[float] = field(default_factory=lambda: [0.0, 0.1, 0.25, 0.5, 1.0])
    eta_speed_grid: list[float] = field(default_factory=lambda: [0.0, 0.1, 0.3, 0.6, 1.0])
    # efficiency over (|T|/t_max, |w|/w_max)
    eta_values: list[list[float]] = field(default_factory=lambda: [
        [0.70, 0.75, 0.78, 0.80, 0.80],
        [0.75, 0.85, 0.90, 0.91, 0.90],
        [0.78, 0.88, 0.93, 0.94, 0.93],
        [0.78, 0.88, 0.93, 0.95, 0.94],
        [0.75, 0.86, 0.91, 0.93, 0.92],
    ])

    def __post_init__(self):
        self._eta = Table2D(self.eta_torque_grid, self.eta_speed_grid, self.eta_values)
        if not all(0 < e <= 1 for row in self.eta_values for e in row):
            raise ValueError("motor efficiencies must lie in (0, 1]")

    def efficiency(self, torque: float, speed: float) -> float:
        return self._eta(abs(torque) / self.t_max, abs(speed) / self.w_max)

    def torque_limit(self, speed: float) -> float:
        w = abs(speed)
        return self.t_max if w * self.t_max <= self.p_max else self.p_max / w


_RPM = 2.0 * math.pi / 60.0


@dataclass
class PowertrainMaps:
    # Engine optimal operating line, indexed by output power
    ool_power: list[float] = field(default_factory=lambda: [2e3, 5e3, 10e3, 15e3, 20e3, 30e3, 40e3, 50e3, 60e3, 73e3])
    ool_speed: list[float] = field(default_factory=lambda: [
        r * _RPM for r in (1000, 1100, 1250, 1400, 1550, 1850, 2300, 2900, 3700, 5000)
    ])
    ool_efficiency: list[float] = field(default_factory=lambda: [0.17, 0.245, 0.30, 0.325, 0.34, 0.36, 0.37, 0.365, 0.355, 0.335])
    lhv: float = 43000.0  # J/g
    p_e_max: float = 73e3
    p_idle: float = 2e3  # minimum power while running
    m1: MotorParams = field(default_factory=lambda: MotorParams(t_max=207.0, p_max=60e3, w_max=13500 * _RPM))
    m2: MotorParams = field(default_factory=lambda: MotorParams(t_max=145.0, p_max=42e3, w_max=10000 * _RPM))
    p_bat_aux: float = 300.0  # W, constant auxiliary load
    cold_fuel_T: list[float] = field(default_factory=lambda: [20.0, 70.0])  # C
    cold_fuel_factor: list[float] = field(default_factory=lambda: [1.15, 1.0])

    def __post_init__(self):
        n = len(self.ool_power)
        if len(self.ool_speed) != n or len(self.ool_efficiency) != n:
            raise ValueError("OOL tables differ in length")
        if any(b <= a for a, b in zip(self.ool_power, self.ool_power[1:])):
            raise ValueError("OOL power grid must be increasing")
        if any(b < a for a, b in zip(self.ool_speed, self.ool_speed[1:])):
            raise ValueError("OOL speed must be non-decreasing in power")
        fuel = [p / (e * self.lhv) for p, e in zip(self.ool_power, self.ool_efficiency)]
        if any(b <= a for a, b in zip(fuel, fuel[1:])):
            raise ValueError("OOL fuel rate must increase with power")
        self._fuel = fuel
        if self.cold_fuel_factor[-1] != 1.0 or min(self.cold_fuel_factor) < 1.0:
            raise ValueError("cold fuel multiplier must be >= 1 and reach 1 when warm")

    def ool(self, p_e: float) -> tuple[float, float, float]:
        """(speed rad/s, torque N m, fuel g/s) on the operating line; zeros when off."""
        if p_e <= 0.0:
            return 0.0, 0.0, 0.0
        w = interp1(self.ool_power, self.ool_speed, p_e)
        if p_e < self.ool_power[0]:
            fuel = self._fuel[0] * p_e / self.ool_power[0]
        else:
            fuel = interp1(self.ool_power, self._fuel, p_e)
        return w, p_e / w, fuel

    def cold_factor(self, t_cl: float) -> float:
        return interp1(self.cold_fuel_T, self.cold_fuel_factor, t_cl)


@dataclass
class ThermalParams:
    # engine block and coolant
    C_s: float = 900.0  # J/(kg C)
    M_e: float = 100.0  # kg
    chi_ex: float = 0.30  # fraction of fuel heat leaving with exhaust
    UA_con: float = 30.0  # W/C
    Q_rad_max: float = 40e3  # W
    thermostat_T: float = 90.0  # C
    Q_cab_max: float = 5e3  # W, heater-core extraction limit
    heater_min_supply_T: float = 40.0  # C
    Q_hs: float = 0.0  # W
    # cabin
    M_cab: float = 15.0  # kg (equivalent)
    C_cab: float = 1005.0  # J/(kg C)
    Q_sun: float = 300.0  # W
    UA_roof: float = 15.0
    UA_win: float = 25.0
    UA_t: float = 20.0
    ac_capacity: float = 4000.0  # W thermal
    ac_cop: float = 2.5
    ptc_capacity: float = 5000.0  # W thermal, electric backup heater
    ptc_efficiency: float = 0.95  # heat delivered per electric watt
    blower_power: float = 150.0  # W
    # battery cooling, per cell heat removal and pack electric power
    Q_a_max: float = 1.5
    fan_power: float = 60.0
    Q_c_max: float = 4.0
    coolant_power: float = 400.0
    fan_on_T: float = 35.0
    fan_off_T: float = 32.0
    coolant_on_T: float = 40.0
    coolant_off_T: float = 37.0

    def __post_init__(self):
        if not 0.0 <= self.chi_ex < 1.0:
            raise ValueError("chi_ex must lie in [0, 1)")
        for name in ("C_s", "M_e", "M_cab", "C_cab", "ac_cop", "ptc_efficiency"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not (self.fan_off_T <= self.fan_on_T and self.coolant_off_T <= self.coolant_on_T and self.fan_on_T < self.coolant_on_T):
            raise ValueError("battery cooling thresholds are not ordered")


@dataclass
class PidGains:
    k_p: float = 400.0  # W/C
    k_i: float = 10.0  # W/(C s)
    k_d: float = 0.0
    integral_limit: float = 300.0  # C s, anti-windup clamp on the accumulated error


@dataclass
class SimParams:
    dt: float = 1.0  # control step
    substeps: int = 10
    T_amb: float = 10.0
    T_cab0: float | None = None  # None: start at ambient
    T_bat0: float | None = None
    T_cl0: float | None = None
    soc0: float = 0.65
    soc_min: float = 0.0
    soc_max: float = 1.0
    T_target: float = 22.0

    @property
    def dt_sub(self) -> float:
        return self.dt / self.substeps
