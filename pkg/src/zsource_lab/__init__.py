"""Design and simulation toolkit for three-winding coupled-inductor
(Y-source) impedance-network converters."""

from .analytics import (
    AnalyticPrediction, ConverterParams, PriorTopologyParams, ac_peak,
    boost_prior, boost_proposed, cap_voltages, comparison_table, dc_link,
    duty_feasibility, nst_inductor_voltages, predict, solve_duty,
)
from .engine import Engine, SimState, SwitchConfiguration, simulate
from .errors import (ConfigError, DomainError, StepError, StructureError,
                     ZSourceError)
from .harness import (Scenario, SteadyReport, builtin_scenario, brute_settle,
                      compare_cases, run, shoot_steady)
from .loads import IMParams, IMState, im_step, im_steady_torque
from .modulation import ModulationSpec, gates_at, measured_st_duty
from .netlist import (Circuit, ComponentValues, Element, LoadSpec,
                      NetlistError, builtin, parse, serialize)
from .refmodel import (RefConfig, RefState, averaged_steady_state,
                       derivatives, simulate_ref, verify_topology)
from .traces import Trace

__version__ = "0.1.0"
