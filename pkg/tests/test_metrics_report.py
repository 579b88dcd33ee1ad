"""Episode aggregation, aware/blind comparison, plot files and manifests."""

import csv
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from itemhev.agents.rollout import rollout_reference
from itemhev.cycles import DriveCycle, bundled_cycle
from itemhev.metrics import TRACE_FIELDS, EpisodeMetrics, Trace, aggregate
from itemhev.plant.model import Plant
from itemhev.report import (
    PANELS,
    REFERENCE_FUEL_PCT,
    REFERENCE_TM_PCT,
    RunManifest,
    compare,
    emit_plots,
    pct_reduction,
)


def const_trace(n, dt=1.0, **values):
    t = Trace(dt, soc_initial=0.65)
    for k in range(n):
        row = {f: 0.0 for f in TRACE_FIELDS}
        row.update(soc=0.65, soh=1.0, T_cab=22.0)
        row.update(values)
        row["time"] = (k + 1) * dt
        t.append(**row)
    return t


def metrics(fuel=100.0, tm=10.0, soc=0.65, ecab=0.5, soh_loss=1e-5):
    return EpisodeMetrics(fuel, tm, 0.65, soc, soh_loss, ecab, 1.0, 0, 0, 100, -1.0, -1.0)


class TestAggregate:
    def test_fuel_integration(self):
        assert aggregate(const_trace(100, fuel_rate=1.0)).fuel_g == pytest.approx(100.0, abs=1e-12)

    def test_tm_unit_conversion(self):
        assert aggregate(const_trace(100, P_tm=360.0)).tm_energy_Wh == pytest.approx(10.0, abs=1e-12)

    def test_comfort_band(self):
        m = aggregate(const_trace(300, T_cab=22.9), warmup_s=120.0, band=2.0)
        assert m.comfort_fraction == 1.0
        assert m.mean_abs_ecab == pytest.approx(0.9, abs=1e-12)

    def test_warmup_excluded(self):
        t = const_trace(200)
        for k in range(120):
            t.columns["T_cab"][k] = 5.0
        m = aggregate(t, warmup_s=120.0)
        assert m.mean_abs_ecab == 0.0 and m.comfort_fraction == 1.0

    def test_empty(self):
        with pytest.raises(ValueError):
            aggregate(Trace(1.0))

    def test_initial_row_adds_nothing(self):
        res = rollout_reference(DriveCycle("c", 1.0, np.full(150, 5.0)), Plant(), "naive", "thermostat")
        tr = res.trace
        assert tr.columns["time"][0] == 0.0
        assert tr.columns["fuel_rate"][0] == 0.0 and tr.columns["P_tm"][0] == 0.0
        assert res.metrics.steps == 149

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.tuples(st.floats(0, 5), st.floats(0, 5e3), st.floats(10, 30)), min_size=2, max_size=80),
           st.integers(1, 79))
    def test_chunking_invariance(self, rows, cut):
        cut = min(cut, len(rows) - 1)
        t = Trace(1.0, soc_initial=0.65)
        for k, (f, p, T) in enumerate(rows):
            t.append(time=k + 1.0, fuel_rate=f, P_tm=p, T_cab=T, soc=0.65, soh=1.0, reward_cab=-f, reward_ems=-T)
        whole = aggregate(t, warmup_s=0.0)
        joined = aggregate(t.chunk(0, cut).concat(t.chunk(cut, len(rows))), warmup_s=0.0)
        assert joined == whole
        parts = [aggregate(t.chunk(0, cut), warmup_s=0.0), aggregate(t.chunk(cut, len(rows)), warmup_s=0.0)]
        assert sum(p.fuel_g for p in parts) == pytest.approx(whole.fuel_g, rel=1e-12, abs=1e-12)
        assert sum(p.tm_energy_Wh for p in parts) == pytest.approx(whole.tm_energy_Wh, rel=1e-12, abs=1e-12)

    def test_dt_mismatch(self):
        with pytest.raises(ValueError):
            Trace(1.0).concat(Trace(0.5))


class TestCompare:
    def test_reference_percentages(self):
        r = compare(metrics(fuel=419.3, tm=91.78), metrics(fuel=500.0, tm=100.0))
        d = r.rows[0].deltas()
        assert d["fuel_pct"] == pytest.approx(REFERENCE_FUEL_PCT, abs=1e-9)
        assert d["tm_energy_pct"] == pytest.approx(REFERENCE_TM_PCT, abs=1e-9)

    def test_self_comparison(self):
        m = metrics()
        d = compare(m, m).rows[0].deltas()
        assert all(v == 0.0 for v in d.values())

    @settings(max_examples=100, deadline=None)
    @given(st.floats(1, 1e3), st.floats(1, 1e3), st.floats(1, 1e3), st.floats(1, 1e3))
    def test_antisymmetry(self, fa, fb, ta, tb):
        ab = compare(metrics(fa, ta), metrics(fb, tb)).rows[0].deltas()
        ba = compare(metrics(fb, tb), metrics(fa, ta)).rows[0].deltas()
        for k in ("mean_abs_ecab", "soc_final", "soh_loss"):
            assert ab[k] == -ba[k]
        # sign flips for the percentage deltas
        assert np.sign(ab["fuel_pct"]) == -np.sign(ba["fuel_pct"])
        assert np.sign(ab["tm_energy_pct"]) == -np.sign(ba["tm_energy_pct"])

    def test_pct_formula(self):
        assert pct_reduction(200.0, 150.0) == 25.0
        assert pct_reduction(0.0, 0.0) == 0.0

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            compare([metrics(), metrics()], [metrics()])

    def test_cycle_mismatch(self):
        with pytest.raises(ValueError):
            compare([("nycc", 0, metrics())], [("udds", 0, metrics())])

    def test_seed_mismatch(self):
        with pytest.raises(ValueError):
            compare([("nycc", 0, metrics())], [("nycc", 1, metrics())])

    def test_multi_seed_summary(self):
        r = compare([metrics(90.0), metrics(80.0)], [metrics(100.0), metrics(100.0)], seeds=[3, 4], cycle="x")
        s = r.summary()
        assert s["fuel_pct"]["mean"] == pytest.approx(15.0) and s["fuel_pct"]["std"] == pytest.approx(5.0)
        assert s["fuel_pct_of_means"]["mean"] == pytest.approx(15.0)
        assert r.seeds == [3, 4]

    def test_json_and_text(self):
        r = compare(metrics(90.0), metrics(100.0), baseline=metrics(120.0), cycle="nycc_like")
        data = json.loads(r.to_json())
        assert data["reference_pct"] == {"fuel": 16.14, "tm_energy": 8.22}
        assert data["seeds"][0]["deltas"]["fuel_pct"] == pytest.approx(10.0)
        text = r.text()
        assert "16.14" in text and "8.22" in text and "+10.00%" in text


@pytest.fixture(scope="module")
def traces():
    c = bundled_cycle("nycc_like")
    short = DriveCycle("n", c.dt, c.speed[:300].copy())
    a = rollout_reference(short, Plant(), "baseline", "thermostat").trace
    b = rollout_reference(short, Plant(), "naive", "thermostat").trace
    return a, b


class TestEmitPlots:
    def test_file_contract(self, traces, tmp_path):
        a, b = traces
        files = emit_plots(a, b, tmp_path)
        assert sorted(f.stem for f in files) == sorted(PANELS)
        for f in files:
            rows = list(csv.reader(f.open()))
            assert rows[0] == ["time_s", "aware", "blind"]
            assert len(rows) - 1 == len(a)

    def test_initial_soc_and_monotone_fuel(self, traces, tmp_path):
        a, b = traces
        emit_plots(a, b, tmp_path)
        soc = list(csv.DictReader((tmp_path / "soc.csv").open()))
        assert float(soc[0]["aware"]) == Plant().cfg.sim.soc0 == float(soc[0]["blind"])
        fuel = np.array([[float(r["aware"]), float(r["blind"])] for r in csv.DictReader((tmp_path / "fuel_cumulative.csv").open())])
        assert np.all(np.diff(fuel, axis=0) >= 0)

    def test_length_mismatch(self, traces, tmp_path):
        a, b = traces
        with pytest.raises(ValueError):
            emit_plots(a, b.chunk(0, 10), tmp_path)


class TestManifest:
    def test_round_trip(self, tmp_path):
        (tmp_path / "x.txt").write_text("hello")
        m = RunManifest("compare", ["compare", "--seeds", "3"], "abc", seeds=[0, 1, 2], cycles=["nycc_like"])
        m.add_artifact(tmp_path / "x.txt", tmp_path)
        m.write(tmp_path / "manifest.json")
        back = RunManifest.read(tmp_path / "manifest.json")
        assert back == m
        assert back.artifacts["x.txt"] == "2cf24dba5fb0a30e26e83b2ac5b9e29e1b161e5c1fa7425e73043362938b9824"

    def test_bad_version(self, tmp_path):
        p = tmp_path / "m.json"
        p.write_text(json.dumps({"version": 99, "command": "x", "argv": [], "config_hash": ""}))
        with pytest.raises(ValueError):
            RunManifest.read(p)
