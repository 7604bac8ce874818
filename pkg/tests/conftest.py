"""Shared fixtures for the acceptance suite.

The expensive case runs execute once per session; every criterion that
needs the same trace reuses it.
"""

import time

import pytest

from zsource_lab.engine import Engine
from zsource_lab.harness import builtin_scenario, run, shoot_steady


class TimedResult:
    def __init__(self, trace, report, elapsed, scenario):
        self.trace = trace
        self.report = report
        self.elapsed = elapsed
        self.scenario = scenario


@pytest.fixture(scope="session")
def case3_result():
    """Full case-3 run at the pinned settings: dt=100 ns, 0.2 s."""
    sc = builtin_scenario("case3_dcdc")
    t0 = time.perf_counter()
    trace, report = run(sc)
    return TimedResult(trace, report, time.perf_counter() - t0, sc)


@pytest.fixture(scope="session")
def case3_periodic():
    """Case-3 periodic orbit (shooting) plus a 20-period steady trace."""
    sc = builtin_scenario("case3_dcdc")
    circ = sc.build_circuit()
    probes = sc.all_probes()
    eng = Engine(circ, sc.dt, probes, sc.modulation)
    t0 = time.perf_counter()
    state = shoot_steady(sc, eng=eng)
    elapsed = time.perf_counter() - t0
    trace, _ = eng.run(20 * sc.modulation.period, x0=state, stride=1)
    return sc, state, trace, elapsed, eng


@pytest.fixture(scope="session")
def case3_parasitic_periodic():
    sc = builtin_scenario("case3_dcdc", parasitic=True)
    circ = sc.build_circuit()
    eng = Engine(circ, sc.dt, sc.all_probes(), sc.modulation)
    state = shoot_steady(sc, eng=eng)
    trace, _ = eng.run(20 * sc.modulation.period, x0=state, stride=1)
    return sc, trace


@pytest.fixture(scope="session")
def case1_result():
    """Case-1 run: strict dt, horizon long enough for the machine to pass
    its acceleration transient (see decisions notes on the machine
    parameters)."""
    sc = builtin_scenario("case1_motor")
    t0 = time.perf_counter()
    trace, report = run(sc)
    return TimedResult(trace, report, time.perf_counter() - t0, sc)


@pytest.fixture(scope="session")
def case2_result():
    sc = builtin_scenario("case2_generator")
    t0 = time.perf_counter()
    trace, report = run(sc)
    return TimedResult(trace, report, time.perf_counter() - t0, sc)
