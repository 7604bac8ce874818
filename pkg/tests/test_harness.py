"""Scenario harness tests: metrics, shooting, settling, case comparison."""

import json
import math

import numpy as np
import pytest

from zsource_lab import netlist as nl
from zsource_lab.analytics import ConverterParams
from zsource_lab.engine import Engine
from zsource_lab.errors import ConfigError
from zsource_lab.harness import (Scenario, ShootingError, SteadyReport,
                                 brute_settle, builtin_scenario,
                                 compare_cases, rl_standin_scenario, run,
                                 shoot_steady)
from zsource_lab.modulation import ModulationSpec


def boost_scenario(d=0.5, dt=5e-7, t_end=0.1):
    """Plain boost converter as a harness scenario via a netlist file."""
    params = ConverterParams(n1=1, n2=1, n3=1, d=min(d, 0.49), f_sw=20e3,
                             v_dc=10.0)
    sc = Scenario(
        name="plain_boost", params=params,
        modulation=ModulationSpec(mode="dcdc", d=d, f_sw=20e3),
        dt=dt, t_end=t_end, stride=5, steady_periods=20,
        roles={"v_out": "v(o)", "i_in": "i(v1)", "i_load": "i(r1)",
               "i_switch": "i(s1)"},
    )
    return sc


BOOST_NETLIST = """\
v1 in 0 dc=10
l1 in x l=1m
s1 x 0
d1 x o
c1 o 0 c=100u
r1 o 0 r=40
"""


@pytest.fixture()
def boost_file(tmp_path):
    path = tmp_path / "boost.net"
    path.write_text(BOOST_NETLIST)
    return str(path)


def test_scenario_json_round_trip():
    sc = builtin_scenario("case3_dcdc")
    doc = sc.to_json()
    back = Scenario.from_json(doc)
    assert back.name == sc.name
    assert back.params == sc.params
    assert back.modulation == sc.modulation
    assert back.values == sc.values
    assert back.roles == sc.roles
    assert json.loads(doc)["sim"]["dt"] == 1e-7


def test_builtin_scenario_unknown_case():
    with pytest.raises(ConfigError):
        builtin_scenario("case9_flux")


def test_run_boost_scenario_metrics(boost_file):
    sc = boost_scenario()
    sc.netlist_path = boost_file
    trace, rep = run(sc)
    assert rep.settled
    v_out = rep.signal_stats["v(o)"]["mean"]
    assert v_out == pytest.approx(20.0, rel=0.02)
    assert rep.efficiency == pytest.approx(1.0, abs=0.01)
    assert rep.source_power == pytest.approx(10.0, rel=0.05)
    assert rep.inrush_ratio is not None and rep.inrush_ratio > 0
    assert rep.switch_turnon_current is not None


def test_zero_duty_scenario_unity_gain(boost_file):
    sc = boost_scenario(d=0.0, t_end=0.05)
    sc.netlist_path = boost_file
    _, rep = run(sc)
    v_out = rep.signal_stats["v(o)"]["mean"]
    assert v_out == pytest.approx(10.0, rel=0.01)


def test_case3_short_run_report():
    sc = builtin_scenario("case3_dcdc", dt=2e-7, t_end=0.05, stride=10)
    trace, rep = run(sc)
    # not settled yet at 50 ms, and flagged as such rather than fatal
    assert isinstance(rep, SteadyReport)
    assert rep.b_meas is not None
    assert "winding1" in rep.voltsec_residuals


def test_report_renders_json_and_text():
    sc = builtin_scenario("case3_dcdc", dt=2e-7, t_end=0.05, stride=10)
    _, rep = run(sc)
    doc = json.loads(rep.to_json())
    assert doc["scenario"] == "case3_dcdc"
    text = rep.to_text()
    assert "boost factor" in text
    assert "volt-second residual" in text


# --------------------------------------------------------------- shooting

def test_shooting_matches_brute_force_on_boost(boost_file):
    sc = boost_scenario(dt=5e-7)
    sc.netlist_path = boost_file
    circ = sc.build_circuit()
    eng = Engine(circ, sc.dt, [], sc.modulation)
    st_shoot = shoot_steady(sc, eng=eng)
    st_brute = brute_settle(sc, 0.5, eng=eng)
    a, b = st_shoot.as_vector(), st_brute.as_vector()
    assert np.abs(a - b).max() / max(1.0, np.abs(b).max()) <= 1e-3


def test_shooting_linear_rc_square_drive_closed_form():
    """RC driven by an exact square wave: the periodic orbit endpoint
    matches the closed-form periodic solution."""
    net = """\
v1 in 0 dc=1
s1 in mid
sd1 mid 0
r1 mid a r=100
c1 a 0 c=1u
"""
    circ = nl.parse(net)
    spec = ModulationSpec(mode="dcdc", d=0.5, f_sw=1e3,
                          drive_d1_switch=True)
    params = ConverterParams(n1=1, n2=1, n3=1, d=0.4, f_sw=1e3, v_dc=1.0)
    sc = Scenario(name="rc_square", params=params, modulation=spec,
                  dt=1e-3 / 1e3 / 2, t_end=1.0, roles={})
    # dt = T/2000
    sc.dt = (1.0 / 1e3) / 2000
    eng = Engine(circ, sc.dt, [], spec)
    st = shoot_steady(sc, eng=eng)
    zv = st.z
    lay = eng.layout
    vc_slot = next(c["zv"] for c in lay.caps)
    v0 = zv[vc_slot]
    # closed form: v at the start of the on-interval of a square-driven RC
    tau = 100 * 1e-6
    half = 0.5e-3
    a = math.exp(-half / tau)
    v_low = a * (1 - a) / (1 - a * a)   # start-of-on value
    assert v0 == pytest.approx(v_low, abs=1e-6)


def test_shooting_case3_period_average():
    sc = builtin_scenario("case3_dcdc", dt=2e-7)
    circ = sc.build_circuit()
    probes = ["v(p)", "v(o)"]
    eng = Engine(circ, sc.dt, probes, sc.modulation)
    st = shoot_steady(sc, eng=eng)
    tr, _ = eng.run(sc.modulation.period, x0=st, stride=1)
    nst = tr.st == 0
    assert tr.col("v(p)")[nst].mean() == pytest.approx(100.0, rel=0.01)


# ---------------------------------------------------------------- compare

def test_compare_cases_empty_list():
    doc = compare_cases(case_ids=[])
    assert doc["cases"] == {}
    assert doc["case1_vs_case2"] is None
    assert doc["comparison"]["columns"][0] == "proposed"


def test_compare_cases_quick(tmp_path):
    overrides = {
        "case1_motor": {"dt": 5e-7, "t_end": 0.02, "stride": 50,
                        "steady_periods": 1},
        "case2_generator": {"dt": 5e-7, "t_end": 0.02, "stride": 50,
                            "steady_periods": 1},
        "case3_dcdc": {"dt": 5e-7, "t_end": 0.02, "stride": 10},
    }
    doc = compare_cases(overrides=overrides)
    assert set(doc["cases"]) == {"case1_motor", "case2_generator",
                                 "case3_dcdc"}
    assert doc["case1_vs_case2"] is not None
    assert doc["case1_vs_case2"]["v_pn"]["rms_difference"] >= 0
    from zsource_lab.harness import render_compare_text
    text = render_compare_text(doc)
    assert "case1 vs case2" in text


# ------------------------------------------------------------ rl stand-in

def test_rl_standin_scenario_shape():
    sc = rl_standin_scenario(dt=5e-7, t_end=0.01, stride=10)
    assert sc.load.kind == "rl"
    circ = sc.build_circuit()
    assert circ["load3m"].p("type") == "rl"


# ------------------------------------------------- boost property sweep

def test_boost_matches_algebra_random_sweep():
    """Measured boost factor within 3% of the closed form for random
    feasible operating points of the dcdc builtin (ideal devices), with
    the periodic orbit located by shooting."""
    from zsource_lab.analytics import boost_proposed, duty_feasibility
    rng = np.random.default_rng(41)
    checked = 0
    while checked < 10:
        k = float(rng.uniform(0.5, 4.0))
        p = float(rng.uniform(0.5, 4.0))
        d = float(rng.uniform(0.2, 0.85)) * duty_feasibility(k, p)
        b_want = boost_proposed(k, p, d)
        if b_want > 8.0:     # keep voltages desk-scale
            continue
        params = ConverterParams(n1=1.0, n2=k, n3=p, d=d, f_sw=20e3,
                                 v_dc=20.0)
        sc = Scenario(
            name=f"sweep_{checked}", params=params,
            modulation=ModulationSpec(mode="dcdc", d=d, f_sw=20e3),
            dt=5e-7, t_end=0.05, mode="dcdc", roles={},
        )
        circ = sc.build_circuit()
        eng = Engine(circ, sc.dt, ["v(p)"], sc.modulation)
        try:
            state = shoot_steady(sc, eng=eng)
        except ShootingError:
            # light-load points where the output diode hovers make the
            # period map facet-rich; settle the slow way instead
            state = brute_settle(sc, 0.8, eng=eng)
        tr, _ = eng.run(sc.modulation.period, x0=state, stride=1)
        nst = tr.st == 0
        b_meas = float(tr.col("v(p)")[nst].mean()) / 20.0
        assert b_meas == pytest.approx(b_want, rel=0.03), (k, p, d)
        checked += 1
