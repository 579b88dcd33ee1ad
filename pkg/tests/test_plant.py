"""Vehicle demand, power split, battery, thermal and the composed plant step."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from itemhev.cycles import bundled_cycle
from itemhev.errors import ConstraintViolation, PowerLimitError
from itemhev.plant.battery import (
    battery_step,
    capacity_loss_percent,
    cell_current,
    cycles_to_eol,
    max_cell_power,
    soh_decrement,
    total_throughput,
)
from itemhev.plant.model import Plant, PlantConfig, plant_step
from itemhev.plant.params import (
    KELVIN,
    R_GAS,
    BatteryParams,
    MotorParams,
    PowertrainMaps,
    SimParams,
    Table2D,
    ThermalParams,
    VehicleParams,
)
from itemhev.plant.powertrain import demand, electrical_balance, motor_dc_power, powersplit_solve, ring_speed
from itemhev.plant.thermal import cabin_thermal_step, engine_heat_flows, engine_thermal_step


def flat_battery(**kw):
    """Cell with constant parameters, handy for hand-checkable arithmetic."""
    g = [0.0, 1.0]
    t = [-20.0, 60.0]
    const = lambda v: Table2D(g, t, [[v, v], [v, v]])  # noqa: E731
    return BatteryParams(ocv=const(3.6), R_0=const(0.01), R_1=const(0.005), C_1=const(1000.0), **kw)


class TestDemand:
    def test_standstill(self):
        p = VehicleParams()
        d = demand(0.0, 0.0, 0.0, p)
        assert d.F_w == 0.0 and d.F_a == 0.0 and d.P_d == 0.0
        assert d.F_d == pytest.approx(p.m * p.g * p.f, rel=1e-12)

    def test_cruise_hand_values(self):
        p = VehicleParams(m=1500, g=9.81, f=0.015, rho=1.2, C_d=0.3, A_f=2.25)
        d = demand(20.0, 0.0, 0.0, p)
        assert d.F_w == pytest.approx(162.0, abs=1e-9)
        assert d.F_f == pytest.approx(220.725, abs=1e-9)
        assert d.F_d == pytest.approx(382.725, abs=1e-9)
        assert d.P_d == pytest.approx(7654.5, abs=1e-9)

    def test_inertia_and_grade(self):
        p = VehicleParams(m=1500, g=9.81)
        flat = demand(10.0, 0.0, 0.0, p)
        d = demand(10.0, 1.0, 0.05, p)
        extra = 1500 * 1.0 + 1500 * 9.81 * (math.sin(0.05) + p.f * (math.cos(0.05) - 1))
        assert d.F_d - flat.F_d == pytest.approx(extra, abs=1e-9)

    def test_efficiency_sign(self):
        p = VehicleParams()
        drive = demand(15.0, 1.0, 0.0, p)
        brake = demand(15.0, -2.0, 0.0, p)
        eta = p.eta_w * p.eta_d
        assert drive.P_ps == pytest.approx(drive.P_d / eta, rel=1e-12)
        assert brake.P_d < 0
        assert brake.P_ps == pytest.approx(brake.P_d * eta, rel=1e-12)
        assert drive.T_ps == pytest.approx(drive.F_d * p.r_w / (p.r_d * eta), rel=1e-12)


class TestPowerSplit:
    def test_gear_torques(self):
        p = VehicleParams(r_g=2.6)
        maps = PowertrainMaps()
        P = 20e3
        s = powersplit_solve(0.0, 10.0, P, maps, p)
        assert s.T_Rg == pytest.approx(-2.6 * s.T_e / 3.6, rel=1e-12)
        assert s.T_m2 == pytest.approx(-s.T_e / 3.6, rel=1e-12)
        # the spec's worked numbers
        assert -2.6 * 100 / 3.6 == pytest.approx(-72.222, abs=1e-3)
        assert -100 / 3.6 == pytest.approx(-27.778, abs=1e-3)

    def test_ring_speed(self):
        assert ring_speed(10.0, VehicleParams(r_d=4.0, r_w=0.3)) == pytest.approx(133.333333, abs=1e-5)

    def test_engine_off(self):
        p, maps = VehicleParams(), PowertrainMaps()
        d = demand(10.0, 0.5, 0.0, p)
        s = powersplit_solve(d.T_ps, 10.0, 0.0, maps, p)
        assert s.T_e == 0.0 and s.w_e == 0.0 and s.fuel_rate == 0.0
        assert s.T_m2 == 0.0
        assert s.w_m2 == pytest.approx(-p.r_g * s.w_ring, rel=1e-12)
        assert s.T_m1 * p.r_t == pytest.approx(d.T_ps, rel=1e-12)

    def test_traction_deficit_flagged(self):
        p, maps = VehicleParams(), PowertrainMaps()
        d = demand(5.0, 6.0, 0.0, p)
        s = powersplit_solve(d.T_ps, 5.0, 0.0, maps, p)
        assert s.saturated and s.traction_deficit > 0

    def test_regen_overflow_to_brakes(self):
        p, maps = VehicleParams(), PowertrainMaps()
        d = demand(5.0, -6.0, 0.0, p)
        s = powersplit_solve(d.T_ps, 5.0, 0.0, maps, p)
        assert s.friction_brake > 0 and s.traction_deficit == 0

    @settings(max_examples=200, deadline=None)
    @given(st.floats(0, 40), st.floats(0, 73e3), st.floats(-3, 3))
    def test_speed_constraint(self, v, P, a):
        p, maps = VehicleParams(), PowertrainMaps()
        s = powersplit_solve(demand(v, a, 0.0, p).T_ps, v, P, maps, p)
        assert abs((1 + p.r_g) * s.w_e - p.r_g * s.w_ring - s.w_m2) < 1e-9

    def test_negative_power_rejected(self):
        with pytest.raises(ValueError):
            powersplit_solve(0.0, 1.0, -1.0, PowertrainMaps(), VehicleParams())


class TestElectricalBalance:
    def test_aux_only(self):
        maps = PowertrainMaps(p_bat_aux=300.0)
        s = powersplit_solve(0.0, 0.0, 0.0, maps, VehicleParams())
        assert electrical_balance(s, maps, 0.0, 168) == (300.0, 300.0 / 168)

    def test_motor_efficiency_sign(self):
        flat = MotorParams(t_max=200, p_max=60e3, w_max=1000,
                           eta_torque_grid=[0.0, 1.0], eta_speed_grid=[0.0, 1.0],
                           eta_values=[[0.9, 0.9], [0.9, 0.9]])
        assert motor_dc_power(90.0, 100.0, flat) == pytest.approx(10000.0, rel=1e-12)
        assert motor_dc_power(-90.0, 100.0, flat) == pytest.approx(-8100.0, rel=1e-12)

    def test_cell_division(self):
        maps = PowertrainMaps(p_bat_aux=1680.0)
        s = powersplit_solve(0.0, 0.0, 0.0, maps, VehicleParams())
        assert electrical_balance(s, maps, 0.0, 168)[1] == 10.0
        # doubling the cell count halves the per-cell power exactly
        a = electrical_balance(s, maps, 123.0, 100)[1]
        b = electrical_balance(s, maps, 123.0, 200)[1]
        assert b * 2 == a


class TestCellCurrent:
    def test_open_circuit(self):
        assert cell_current(0.0, 3.6, 0.0, 0.01) == 0.0

    def test_closed_form(self):
        i = cell_current(36.0, 3.6, 0.0, 0.01)
        assert i == pytest.approx((3.6 - math.sqrt(11.52)) / 0.02, rel=1e-12)
        assert i == pytest.approx(10.294, abs=1e-3)

    def test_power_limit(self):
        pmax = max_cell_power(3.6, 0.1, 0.01)
        cell_current(pmax, 3.6, 0.1, 0.01)
        with pytest.raises(PowerLimitError):
            cell_current(pmax * (1 + 1e-9), 3.6, 0.1, 0.01)

    @settings(max_examples=300, deadline=None)
    @given(st.floats(3.0, 4.2), st.floats(-0.1, 0.1), st.floats(5e-4, 0.05), st.floats(-0.999, 0.999))
    def test_reconstruction(self, v_ocv, v_1, r_0, frac):
        p = frac * max_cell_power(v_ocv, v_1, r_0)
        i = cell_current(p, v_ocv, v_1, r_0)
        recon = i * (v_ocv - v_1 - i * r_0)
        assert abs(recon - p) <= 1e-6 * max(abs(p), 1e-12)


class TestBatteryStep:
    def test_equilibrium(self):
        p = flat_battery()
        s = battery_step(0.5, 0.0, 25.0, 1.0, 0.0, 0.0, 0.0, 0.1, p, 25.0)
        assert (s.soc, s.v_1, s.T_bat, s.soh) == (0.5, 0.0, 25.0, 1.0)

    def test_polarization_relaxes(self):
        p = flat_battery()
        s = battery_step(0.5, 0.05, 25.0, 1.0, 0.0, 0.0, 0.0, 0.1, p, 25.0)
        assert s.v_1 == pytest.approx(0.05 - 0.1 * 0.05 / (0.005 * 1000.0), rel=1e-12)

    def test_soc_rate(self):
        p = flat_battery(Q_n=2.0)
        # choose the power that draws exactly 2 A
        power = 2.0 * (3.6 - 2.0 * 0.01)
        s = battery_step(0.5, 0.0, 25.0, 1.0, 0.0, 0.0, power, 1.0, p, 25.0)
        assert s.current == pytest.approx(2.0, rel=1e-12)
        assert s.soc - 0.5 == pytest.approx(-2.0 / 7200.0, rel=1e-9)

    def test_power_clamped(self):
        p = flat_battery()
        s = battery_step(0.5, 0.0, 25.0, 1.0, 0.0, 0.0, 1e6, 0.01, p, 25.0)
        assert s.power_limited
        assert s.current == pytest.approx(3.6 / 0.02, rel=1e-9)

    def test_soc_violation(self):
        p = flat_battery(Q_n=0.001)
        with pytest.raises(ConstraintViolation):
            battery_step(0.001, 0.0, 25.0, 1.0, 0.0, 0.0, 100.0, 1.0, p, 25.0)

    @pytest.mark.parametrize("heat_capacity", [None, 40.0])
    def test_thermal_decay_matches_exponential(self, heat_capacity):
        p = BatteryParams(heat_capacity=heat_capacity)
        tau = p.thermal_mass / (p.h_c * p.A_c)
        h, T_amb, T0 = 0.1, 10.0, 20.0
        T, worst = T0, 0.0
        n = int(round(10 * tau / h))
        for k in range(1, n + 1):
            T = battery_step(0.5, 0.0, T, 1.0, 0.0, 0.0, 0.0, h, p, T_amb).T_bat
            exact = T_amb + (T0 - T_amb) * math.exp(-k * h / tau)
            worst = max(worst, abs(T - exact) / (T0 - T_amb))
        assert worst < 1e-3

    def test_soh_monotone_under_cycling(self):
        p = BatteryParams()
        state = (0.6, 0.0, 25.0, 1.0, 0.0, 0.0)
        sohs = [1.0]
        for k in range(600):
            power = 80.0 * math.sin(k / 15.0)
            s = battery_step(*state, power, 1.0, p, 25.0)
            state = (s.soc, s.v_1, s.T_bat, s.soh, s.A_d, s.dQ)
            sohs.append(s.soh)
            assert s.dQ == pytest.approx(2 * p.Q_n * (1 - s.soh), rel=1e-12)
        assert all(b <= a for a, b in zip(sohs, sohs[1:]))
        assert sohs[-1] < 1.0


class TestAging:
    def spreadsheet(self, M, Ea, z, T_c, c_rate, Q_n):
        arr = M * math.exp(-Ea / (8.314 * (T_c + 273.15)))
        A_tol = (20.0 / arr) ** (1 / z)
        return A_tol, 3600.0 * A_tol / Q_n

    @pytest.mark.parametrize("c_rate,T", [(0.5, 25.0), (2.0, 35.0), (6.0, 10.0), (3.3, 45.0)])
    def test_throughput_and_cycles(self, c_rate, T):
        p = BatteryParams()
        A, N = self.spreadsheet(p.M(c_rate), p.E_a, p.z, T, c_rate, p.Q_n)
        assert total_throughput(c_rate, T, p) == pytest.approx(A, rel=1e-9)
        assert cycles_to_eol(c_rate, T, p) == pytest.approx(N, rel=1e-9)

    def test_loss_at_eol_is_twenty_percent(self):
        p = BatteryParams()
        A = total_throughput(2.0, 30.0, p)
        assert capacity_loss_percent(2.0, 30.0, A, p) == pytest.approx(20.0, rel=1e-12)

    def test_soh_decrement_formula(self):
        p = BatteryParams()
        N = cycles_to_eol(1.0, 25.0, p)
        assert soh_decrement(-6.5, 1.0, 1.0, 25.0, p) == pytest.approx((6.5 / 3600) / (2 * N * p.Q_n), rel=1e-12)

    def test_hotter_ages_faster(self):
        p = BatteryParams()
        assert soh_decrement(5.0, 1.0, 1.0, 45.0, p) > soh_decrement(5.0, 1.0, 1.0, 15.0, p)

    def test_constants(self):
        assert R_GAS == 8.314 and KELVIN == 273.15


class TestEngineThermal:
    def test_cold_off_stationary(self):
        p = ThermalParams()
        T, _ = engine_thermal_step(10.0, 0.0, 0.0, 43000.0, 0.0, 0.1, p, 10.0)
        assert T == 10.0

    def test_term_accounting(self):
        p = ThermalParams(chi_ex=0.3)
        f = engine_heat_flows(10.0, 12e3, 1.0, 43000.0, 0.0, 10.0, p)
        assert f.Q_f - f.Q_w - f.Q_ex == pytest.approx(18100.0, abs=1e-9)
        assert f.net == pytest.approx(18100.0, abs=1e-9)

    def test_radiator_cools(self):
        p = ThermalParams()
        T, f = engine_thermal_step(95.0, 5e3, 0.5, 43000.0, 0.0, 1.0, p, 10.0)
        assert f.Q_rad == p.Q_rad_max and T < 95.0


class TestCabinThermal:
    def test_equilibrium(self):
        p = ThermalParams(Q_sun=0.0)
        assert cabin_thermal_step(10.0, 0.0, 0.1, p, 10.0) == 10.0

    def test_decay_matches_exponential(self):
        p = ThermalParams(Q_sun=0.0)
        tau = p.M_cab * p.C_cab / (p.UA_roof + p.UA_win + p.UA_t)
        h, T_amb, T0 = 0.1, 10.0, 15.0
        T, worst = T0, 0.0
        for k in range(1, int(round(10 * tau / h)) + 1):
            T = cabin_thermal_step(T, 0.0, h, p, T_amb)
            exact = T_amb + (T0 - T_amb) * math.exp(-k * h / tau)
            worst = max(worst, abs(T - exact) / (T0 - T_amb))
        assert worst < 1e-3

    def test_ac_cools_hot_cabin(self):
        p = ThermalParams()
        T = 40.0
        for _ in range(100):
            nxt = cabin_thermal_step(T, -3000.0, 0.1, p, 35.0)
            assert nxt < T
            T = nxt


class TestPlantStep:
    def test_idle_engine_off(self):
        cfg = PlantConfig(sim=SimParams(T_amb=22.0))
        plant = Plant(cfg)
        s0 = plant.reset()
        s1, out = plant_step(plant, s0, 0.0, 0.0, 0.0, 0.0)
        assert s1.fuel == 0.0 and out.fuel_rate == 0.0
        assert out.P_bat == cfg.maps.p_bat_aux
        assert s1.soc < s0.soc

    def test_cruise_charge_neutral(self):
        cfg = PlantConfig(sim=SimParams(T_amb=22.0, T_cl0=90.0))
        plant = Plant(cfg)
        s = plant.reset()
        # find the engine power that zeroes pack power at 20 m/s
        lo, hi = 1e3, 40e3
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            _, out = plant_step(Plant(cfg), s, 20.0, 0.0, 0.0, mid)
            lo, hi = (mid, hi) if out.P_bat > 0 else (lo, mid)
        s1, out = plant_step(plant, s, 20.0, 0.0, 0.0, 0.5 * (lo + hi))
        assert abs(s1.soc - s.soc) < 1e-6

    def test_coolant_energy_balance(self):
        plant = Plant()
        s = plant.reset()
        c = bundled_cycle("udds")
        for k in range(300):
            v = 0.5 * (c.speed[k] + c.speed[k + 1])
            s, out = plant_step(plant, s, v, c.speed[k + 1] - c.speed[k], 0.0, 15e3, a_h=1)
            resid = out.Q_f - out.Q_w - out.Q_ex - out.Q_con - out.Q_rad - out.Q_cab + out.Q_hs - out.coolant_storage
            assert abs(resid) < 1.0

    def test_monotone_states_and_speed_relation(self):
        plant = Plant()
        s = plant.reset()
        c = bundled_cycle("nycc_like")
        p = plant.cfg.vehicle
        prev = s
        for k in range(len(c.speed) - 1):
            v = 0.5 * (c.speed[k] + c.speed[k + 1])
            s, out = plant_step(plant, s, v, c.speed[k + 1] - c.speed[k], 0.0, 8e3 if k % 40 < 20 else 0.0, a_h=1)
            sh = out.shafts
            assert abs((1 + p.r_g) * sh.w_e - p.r_g * sh.w_ring - sh.w_m2) < 1e-9
            assert s.soh <= prev.soh and s.fuel >= prev.fuel and s.A_d >= prev.A_d
            assert out.P_tm >= 0
            prev = s

    def test_engine_off_no_fuel(self):
        plant = Plant()
        s = plant.reset()
        s1, out = plant_step(plant, s, 10.0, 0.5, 0.0, 0.0)
        assert out.fuel_rate == 0.0 and out.shafts.T_e == 0.0 and out.shafts.w_e == 0.0

    def test_cold_engine_burns_more(self):
        warm = Plant(PlantConfig(sim=SimParams(T_cl0=90.0)))
        cold = Plant(PlantConfig(sim=SimParams(T_cl0=10.0)))
        _, ow = plant_step(warm, warm.reset(), 10.0, 0.0, 0.0, 20e3)
        _, oc = plant_step(cold, cold.reset(), 10.0, 0.0, 0.0, 20e3)
        assert oc.fuel_rate > ow.fuel_rate

    def test_soc_window_violation(self):
        cfg = PlantConfig(sim=SimParams(soc0=0.65, soc_max=0.650001))
        plant = Plant(cfg)
        with pytest.raises(ConstraintViolation):
            plant_step(plant, plant.reset(), 0.0, 0.0, 0.0, 40e3)

    def test_heater_draws_on_coolant(self):
        plant = Plant(PlantConfig(sim=SimParams(T_cl0=85.0, T_amb=0.0)))
        s = plant.reset()
        _, out = plant_step(plant, s, 0.0, 0.0, 0.0, 0.0, a_h=1)
        assert out.hvac.Q_from_coolant > 0
        assert out.Q_cab == pytest.approx(out.hvac.Q_from_coolant)

    def test_battery_cooling_rule_engages(self):
        plant = Plant(PlantConfig(sim=SimParams(T_bat0=41.0, T_amb=30.0)))
        _, out = plant_step(plant, plant.reset(), 0.0, 0.0, 0.0, 0.0)
        assert out.fan_on and out.coolant_on
        th = plant.cfg.thermal
        assert out.P_tm == pytest.approx(th.fan_power + th.coolant_power)

    def test_deterministic(self):
        runs = []
        for _ in range(2):
            plant = Plant()
            s = plant.reset()
            for k in range(50):
                s, _ = plant_step(plant, s, 5.0 + k * 0.1, 0.1, 0.0, 10e3, a_h=1)
            runs.append(s)
        assert runs[0] == runs[1]
