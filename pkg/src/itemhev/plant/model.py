"""Plant state and the orchestrating step of the power-split HEV model."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from ..control import BatteryCooling, HvacCommand, HvacControllers, hvac_actuate
from ..errors import ConstraintViolation
from .battery import battery_step
from .params import BatteryParams, PidGains, PowertrainMaps, SimParams, ThermalParams, VehicleParams
from .powertrain import ShaftSet, demand, electrical_balance, powersplit_solve
from .thermal import engine_thermal_step, cabin_thermal_step


@dataclass(frozen=True)
class PlantState:
    soc: float
    v_1: float
    T_bat: float
    T_cl: float
    T_cab: float
    soh: float = 1.0
    A_d: float = 0.0
    dQ: float = 0.0
    fuel: float = 0.0
    P_ice: float = 0.0
    time: float = 0.0


@dataclass(frozen=True)
class StepOutputs:
    fuel_rate: float  # g/s, step average
    P_bat: float
    P_cell: float
    I_cell: float
    P_tm: float  # cabin climate + battery cooling electric power
    P_cab: float  # cabin climate electric power only
    P_ps: float
    P_d: float
    shafts: ShaftSet
    hvac: HvacCommand
    fan_on: bool
    coolant_on: bool
    Q_f: float = 0.0
    Q_w: float = 0.0
    Q_ex: float = 0.0
    Q_con: float = 0.0
    Q_rad: float = 0.0
    Q_cab: float = 0.0
    Q_hs: float = 0.0
    coolant_storage: float = 0.0  # W, C_s M_e dT_cl/dt averaged over the step
    power_limited: bool = False
    traction_violation: bool = False


@dataclass
class PlantConfig:
    vehicle: VehicleParams = field(default_factory=VehicleParams)
    maps: PowertrainMaps = field(default_factory=PowertrainMaps)
    battery: BatteryParams = field(default_factory=BatteryParams)
    thermal: ThermalParams = field(default_factory=ThermalParams)
    pid: PidGains = field(default_factory=PidGains)
    sim: SimParams = field(default_factory=SimParams)


class Plant:
    """Single-owner plant instance holding the parameter set and its controllers."""

    def __init__(self, cfg: PlantConfig | None = None):
        self.cfg = cfg or PlantConfig()
        self.hvac = HvacControllers.create(self.cfg.pid, self.cfg.thermal)
        self.cooling = BatteryCooling()

    def reset(self) -> PlantState:
        self.hvac.reset()
        self.cooling.reset()
        return self.initial_state()

    def initial_state(self) -> PlantState:
        sim = self.cfg.sim
        amb = sim.T_amb
        return PlantState(
            soc=sim.soc0,
            v_1=0.0,
            T_bat=amb if sim.T_bat0 is None else sim.T_bat0,
            T_cl=amb if sim.T_cl0 is None else sim.T_cl0,
            T_cab=amb if sim.T_cab0 is None else sim.T_cab0,
        )

    def step(
        self,
        state: PlantState,
        v: float,
        a: float,
        theta: float,
        P_ice: float,
        a_h: int = 0,
        a_ac: int = 0,
        dt: float | None = None,
    ) -> tuple[PlantState, StepOutputs]:
        return plant_step(self, state, v, a, theta, P_ice, a_h, a_ac, dt)


def plant_step(
    plant: Plant,
    state: PlantState,
    v: float,
    a: float,
    theta: float,
    P_ice: float,
    a_h: int = 0,
    a_ac: int = 0,
    dt: float | None = None,
) -> tuple[PlantState, StepOutputs]:
    """Advance the plant by one control step with constant commands.

    ``v`` is the mean speed over the step and ``a`` its acceleration. The
    powertrain solution and HVAC command are held for the step while the
    battery, coolant and cabin states are integrated on ``substeps``
    forward-Euler sub-steps.
    """
    cfg = plant.cfg
    sim = cfg.sim
    dt = sim.dt if dt is None else dt
    n_sub = sim.substeps
    h = dt / n_sub
    T_amb = sim.T_amb
    bat, th = cfg.battery, cfg.thermal

    dem = demand(v, a, theta, cfg.vehicle)
    shafts = powersplit_solve(dem.T_ps, v, P_ice, cfg.maps, cfg.vehicle)
    hvac = hvac_actuate(state.T_cab, state.T_cl, a_h, a_ac, plant.hvac, th, dt, sim.T_target)
    fan_on, coolant_on = plant.cooling.update(state.T_bat, th)
    p_cool = (th.fan_power if fan_on else 0.0) + (th.coolant_power if coolant_on else 0.0)
    Q_a = th.Q_a_max if fan_on else 0.0
    Q_c = th.Q_c_max if coolant_on else 0.0
    p_tm = hvac.P_tm_electric + p_cool
    P_bat, P_cell = electrical_balance(shafts, cfg.maps, p_tm, bat.n_bat)

    soc, v_1, T_bat, soh, A_d, dQ = state.soc, state.v_1, state.T_bat, state.soh, state.A_d, state.dQ
    T_cl, T_cab = state.T_cl, state.T_cab
    fuel_total = 0.0
    current = 0.0
    limited = False
    flows_sum = [0.0] * 7
    T_cl_start = T_cl
    for _ in range(n_sub):
        cell = battery_step(soc, v_1, T_bat, soh, A_d, dQ, P_cell, h, bat, T_amb, Q_a, Q_c)
        limited |= cell.power_limited
        current += cell.current / n_sub
        fuel_rate = shafts.fuel_rate * cfg.maps.cold_factor(T_cl) if P_ice > 0 else 0.0
        T_cl, flows = engine_thermal_step(T_cl, P_ice, fuel_rate, cfg.maps.lhv, hvac.Q_from_coolant, h, th, T_amb)
        T_cab = cabin_thermal_step(T_cab, hvac.Q_hvac, h, th, T_amb)
        fuel_total += fuel_rate * h
        for k, q in enumerate((flows.Q_f, flows.Q_w, flows.Q_ex, flows.Q_con, flows.Q_rad, flows.Q_cab, flows.Q_hs)):
            flows_sum[k] += q / n_sub
        soc, v_1, T_bat, soh, A_d, dQ = cell.soc, cell.v_1, cell.T_bat, cell.soh, cell.A_d, cell.dQ

    if not sim.soc_min <= soc <= sim.soc_max:
        raise ConstraintViolation(f"SOC {soc:.4f} outside [{sim.soc_min}, {sim.soc_max}]")
    new_state = replace(
        state,
        soc=soc, v_1=v_1, T_bat=T_bat, T_cl=T_cl, T_cab=T_cab,
        soh=soh, A_d=A_d, dQ=dQ,
        fuel=state.fuel + fuel_total,
        P_ice=P_ice,
        time=state.time + dt,
    )
    out = StepOutputs(
        fuel_rate=fuel_total / dt,
        P_bat=P_bat,
        P_cell=P_cell,
        I_cell=current,
        P_tm=p_tm,
        P_cab=hvac.P_tm_electric,
        P_ps=dem.P_ps,
        P_d=dem.P_d,
        shafts=shafts,
        hvac=hvac,
        fan_on=fan_on,
        coolant_on=coolant_on,
        Q_f=flows_sum[0],
        Q_w=flows_sum[1],
        Q_ex=flows_sum[2],
        Q_con=flows_sum[3],
        Q_rad=flows_sum[4],
        Q_cab=flows_sum[5],
        Q_hs=flows_sum[6],
        coolant_storage=th.C_s * th.M_e * (T_cl - T_cl_start) / dt,
        power_limited=limited,
        traction_violation=shafts.traction_deficit > 1e-9,
    )
    return new_state, out
