"""Gate schedule tests: timing arithmetic, ST insertion, measured duty."""

import numpy as np
import pytest

from zsource_lab import modulation as mod
from zsource_lab.errors import ConfigError
from zsource_lab.traces import Trace


def dcdc(d=0.4, f_sw=20e3, **kw):
    return mod.ModulationSpec(mode="dcdc", d=d, f_sw=f_sw, **kw)


def spwm(d=0.25, m=0.75, f_sw=20e3, f_out=50.0, **kw):
    return mod.ModulationSpec(mode="spwm", d=d, m=m, f_sw=f_sw, f_out=f_out,
                              **kw)


def test_dcdc_timing_arithmetic():
    spec = dcdc(d=0.4, f_sw=20e3)          # 50 us period, ST on [0, 20 us)
    st, gates = mod.gates_at(spec, 10e-6)
    assert st and gates["s1"]
    st, gates = mod.gates_at(spec, 30e-6)
    assert not st and not gates["s1"]
    # periodic
    st, _ = mod.gates_at(spec, 50e-6 + 10e-6)
    assert st


def test_spwm_zero_duty_never_st():
    spec = spwm(d=0.0, m=0.8)
    for t in np.linspace(0, 0.02, 4001):
        st, _ = mod.gates_at(spec, float(t))
        assert not st


def test_spwm_st_fraction_one_carrier_period():
    spec = spwm(d=0.2, m=0.8)
    dt = 1.0 / spec.f_sw / 500
    n = 500
    flags = [mod.gates_at(spec, (k + 0.5) * dt)[0] for k in range(n)]
    frac = sum(flags) / n
    assert abs(frac - 0.2) <= dt * spec.f_sw + 1e-12


def test_spwm_complementary_outside_st():
    spec = spwm()
    rng = np.random.default_rng(3)
    for t in rng.uniform(0, 0.02, 500):
        st, g = mod.gates_at(spec, float(t))
        if st:
            assert all(g[name] for name in mod.BRIDGE_SWITCHES)
        else:
            for top, bot in (("sap", "san"), ("sbp", "sbn"), ("scp", "scn")):
                assert g[top] != g[bot]


def test_st_replaces_zero_states_only():
    """Outside ST windows the schedule is identical to the d=0 schedule."""
    spec_d = spwm(d=0.25, m=0.75)
    spec_0 = spwm(d=0.0, m=0.75)
    dt = 1.0 / spec_d.f_sw / 400
    for k in range(400 * 3):
        t = (k + 0.5) * dt
        st, g_d = mod.gates_at(spec_d, t)
        _, g_0 = mod.gates_at(spec_0, t)
        if not st:
            assert g_d == g_0
        else:
            # inside ST all legs on; underlying zero state had all bottoms on
            assert all(g_d[n] for n in mod.BRIDGE_SWITCHES)


def test_table_periodicity_and_alignment():
    spec = spwm(d=0.25, m=0.75, f_sw=20e3, f_out=50.0)
    dt = 1.0 / 20e3 / 400
    table = mod.build_table(spec, dt)
    assert table.steps_per_period == 400 * 400   # 20 kHz / 50 Hz = 400 carriers
    # ST occupancy exact on the aligned grid
    assert abs(table.st.mean() - 0.25) < 1e-12
    # schedule equals itself one switching period later outside nothing
    codes = table.codes.reshape(400, 400)
    assert (table.st.reshape(400, 400).mean(axis=1) == 0.25).all()


def test_dcdc_table_exact_duty():
    spec = dcdc(d=0.4)
    table = mod.build_table(spec, 1e-7)
    assert table.steps_per_period == 500
    assert table.st.sum() == 200


def test_dt_must_divide_period():
    with pytest.raises(ConfigError):
        mod.build_table(dcdc(), 3e-7)


def test_infeasible_specs_rejected():
    with pytest.raises(ConfigError):
        spwm(d=0.3, m=0.8)
    with pytest.raises(ConfigError):
        mod.ModulationSpec(mode="spwm", d=0.2, m=0.7, f_sw=20e3, f_out=60.0)
    with pytest.raises(ConfigError):
        mod.ModulationSpec(mode="nope", d=0.2, f_sw=20e3)


def test_d1_switch_gating():
    spec = dcdc(d=0.4, drive_d1_switch=True)
    st, g = mod.gates_at(spec, 10e-6)
    assert st and g["sd1"] is False
    st, g = mod.gates_at(spec, 30e-6)
    assert not st and g["sd1"] is True


def _trace_from_table(table, n_periods=5):
    n = table.steps_per_period * n_periods
    st = np.tile(table.st.astype(float), n_periods)
    data = np.zeros((n, 1))
    return Trace(dt=table.dt, names=["x"], data=data, st=st,
                 meta={"f_sw": table.spec.f_sw})


def test_measured_st_duty_dcdc():
    table = mod.build_table(dcdc(d=0.4), 1e-7)
    tr = _trace_from_table(table)
    assert mod.measured_st_duty(tr) == pytest.approx(0.4, abs=0.002)
    table0 = mod.build_table(dcdc(d=0.0), 1e-7)
    assert mod.measured_st_duty(_trace_from_table(table0)) == 0.0


def test_measured_st_duty_spwm_case_point():
    table = mod.build_table(spwm(d=0.25, m=0.75), 1.25e-7)
    tr = _trace_from_table(table, n_periods=1)
    assert mod.measured_st_duty(tr) == pytest.approx(0.25, abs=0.002)


def test_measured_st_duty_needs_integer_window():
    tr = Trace(dt=3e-7, names=["x"], data=np.zeros((100, 1)),
               st=np.zeros(100), meta={"f_sw": 20e3})
    with pytest.raises(ConfigError):
        mod.measured_st_duty(tr)


def test_export_schedule_golden(tmp_path):
    spec = dcdc(d=0.5, f_sw=100e3)
    path = tmp_path / "sched.csv"
    mod.export_schedule(spec, 1e-6, path, n_periods=2)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,s1,st"
    assert lines[1] == "0,1,1"
    assert lines[6] == "5e-06,0,0"
    assert len(lines) == 1 + 20
