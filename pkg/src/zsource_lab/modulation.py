"""Deterministic gate schedules.

Two modes:

``dcdc``
    A single shoot-through switch ``s1``.  ST occupies the half-open window
    ``[0, d*T)`` of every switching period ``T = 1/f_sw``.

``spwm``
    Simple-boost unipolar sine PWM for a three-leg bridge.  Per leg, the top
    switch conducts while the sinusoidal reference exceeds a +/-1 triangular
    carrier (period ``1/f_sw``, positive peak at t=0) and the bottom switch
    is its complement.  Shoot-through is inserted symmetrically around the
    carrier peaks, wherever ``|carrier| > 1 - d``, and turns all six
    switches on.  That replaces zero states only, so the non-ST switching
    instants are unchanged by the choice of ``d``.

Everything is a pure function of (spec, t); schedules are exactly periodic
with the switching period (dcdc) or the output period (spwm).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

DCDC_SWITCH = "s1"
BRIDGE_SWITCHES = ("sap", "san", "sbp", "sbn", "scp", "scn")
D1_SWITCH = "sd1"       # gated replacement of the network diode: on outside ST

_PHASE_OFFSETS = (0.0, -2.0 * math.pi / 3.0, 2.0 * math.pi / 3.0)


@dataclass(frozen=True)
class ModulationSpec:
    mode: str                    # dcdc | spwm
    d: float
    f_sw: float
    m: float | None = None       # spwm only
    f_out: float | None = None   # spwm only
    phase: float = 0.0
    drive_d1_switch: bool = False

    def __post_init__(self):
        if self.mode not in ("dcdc", "spwm"):
            raise ConfigError(f"unknown modulation mode {self.mode!r}")
        if not 0.0 <= self.d < 1.0:
            raise ConfigError(f"shoot-through duty {self.d} outside [0, 1)")
        if self.f_sw <= 0:
            raise ConfigError("switching frequency must be positive")
        if self.mode == "spwm":
            if self.m is None or self.f_out is None:
                raise ConfigError("spwm needs m and f_out")
            if not 0.0 <= self.m <= 1.0:
                raise ConfigError(f"modulation index {self.m} outside [0, 1]")
            if self.m + self.d > 1.0 + 1e-12:
                raise ConfigError(
                    f"simple-boost infeasible: m + d = {self.m + self.d} > 1")
            ratio = self.f_sw / self.f_out
            if abs(ratio - round(ratio)) > 1e-9:
                raise ConfigError(
                    f"f_sw={self.f_sw} must be an integer multiple of "
                    f"f_out={self.f_out}")

    @property
    def period(self) -> float:
        """Period of the full schedule."""
        return 1.0 / self.f_out if self.mode == "spwm" else 1.0 / self.f_sw

    @property
    def switch_names(self) -> tuple[str, ...]:
        base = (DCDC_SWITCH,) if self.mode == "dcdc" else BRIDGE_SWITCHES
        return base + ((D1_SWITCH,) if self.drive_d1_switch else ())


def carrier(spec: ModulationSpec, t: float) -> float:
    """Triangular carrier in [-1, 1], positive peak at t = 0."""
    frac = (t * spec.f_sw) % 1.0
    return 1.0 - 4.0 * frac if frac < 0.5 else 4.0 * frac - 3.0


def st_active(spec: ModulationSpec, t: float) -> bool:
    """Shoot-through membership as half-open windows on the carrier grid.

    Equivalent to |carrier| > 1-d with boundaries resolved half-open so that
    a measured duty over aligned sample grids is exact.
    """
    d = spec.d
    if d <= 0.0:
        return False
    frac = (t * spec.f_sw) % 1.0
    if spec.mode == "dcdc":
        return frac < d
    q = d / 4.0
    return frac < q or (0.5 - q <= frac < 0.5 + q) or frac >= 1.0 - q


def references(spec: ModulationSpec, t: float) -> tuple[float, float, float]:
    """Three sinusoidal phase references, amplitude m."""
    w = 2.0 * math.pi * spec.f_out
    return tuple(
        spec.m * math.sin(w * t + spec.phase + off) for off in _PHASE_OFFSETS
    )


def gates_at(spec: ModulationSpec, t: float) -> tuple[bool, dict[str, bool]]:
    """Gate states at time t.  Returns (st_flag, {switch_name: on})."""
    if t < 0:
        raise ConfigError("gates_at needs t >= 0")
    st = st_active(spec, t)
    if spec.mode == "dcdc":
        gates = {DCDC_SWITCH: st}
    else:
        c = carrier(spec, t)
        refs = references(spec, t)
        gates = {}
        for (top, bot), ref in zip(
                (("sap", "san"), ("sbp", "sbn"), ("scp", "scn")), refs):
            hi = ref > c
            gates[top] = hi or st
            gates[bot] = (not hi) or st
    if spec.drive_d1_switch:
        gates[D1_SWITCH] = not st
    return st, gates


@dataclass
class GateTable:
    """Midpoint-sampled schedule for one full period on a fixed step grid.

    ``codes[k]`` is the bitmask of switch states active while integrating
    step k -> k+1; ``st[k]`` flags shoot-through for that step.
    """

    spec: ModulationSpec
    dt: float
    names: tuple[str, ...]
    codes: np.ndarray            # uint32, one entry per step of the period
    st: np.ndarray               # bool
    gates_by_code: dict[int, dict[str, bool]] = field(default_factory=dict)

    @property
    def steps_per_period(self) -> int:
        return len(self.codes)


def _st_steps(spec: ModulationSpec, steps_sw: int) -> np.ndarray:
    """Shoot-through membership per step of one carrier period.

    The windows are allocated in whole steps with cumulative rounding so a
    carrier period carries exactly round(d * steps) shoot-through steps at
    any step size that divides it; otherwise grid quantization would bias
    the effective duty (and with it the boost factor) first order in dt.
    """
    n = steps_sw
    flags = np.zeros(n, dtype=bool)
    total = round(spec.d * n)
    if total <= 0:
        return flags
    if spec.mode == "dcdc":
        flags[:total] = True
        return flags
    w1 = round(spec.d * n / 4.0)
    w2 = round(3.0 * spec.d * n / 4.0) - w1
    w3 = total - w1 - w2
    start2 = int(math.floor(n / 2.0 - w2 / 2.0 + 0.5))
    flags[:w1] = True
    flags[start2:start2 + w2] = True
    if w3 > 0:
        flags[n - w3:] = True
    return flags


def build_table(spec: ModulationSpec, dt: float) -> GateTable:
    """Midpoint-sampled schedule over one schedule period.

    dt must divide the switching period exactly; enforced here so gate
    edges always land on the step grid.  Comparator gating is sampled at
    step midpoints; shoot-through windows come from :func:`_st_steps`, so
    they may shift against the analytic window edges by at most one step.
    """
    steps_sw = 1.0 / (spec.f_sw * dt)
    if abs(steps_sw - round(steps_sw)) > 1e-6 or round(steps_sw) < 2:
        raise ConfigError(
            f"dt={dt} must divide the switching period 1/f_sw={1.0/spec.f_sw}")
    steps_sw = round(steps_sw)
    n = round(spec.period / dt)
    names = spec.switch_names
    codes = np.zeros(n, dtype=np.uint32)
    st = np.tile(_st_steps(spec, steps_sw), n // steps_sw)
    gates_by_code: dict[int, dict[str, bool]] = {}
    for k in range(n):
        t = (k + 0.5) * dt
        st_k = bool(st[k])
        _, gates = gates_at(spec, t)
        if spec.mode != "dcdc":
            # override the analytic window membership with the step grid
            if st_k:
                gates = {nm: True for nm in BRIDGE_SWITCHES}
            else:
                c = carrier(spec, t)
                refs = references(spec, t)
                gates = {}
                for (top, bot), ref in zip(
                        (("sap", "san"), ("sbp", "sbn"), ("scp", "scn")),
                        refs):
                    hi = ref > c
                    gates[top] = hi
                    gates[bot] = not hi
            if spec.drive_d1_switch:
                gates[D1_SWITCH] = not st_k
        else:
            gates = {DCDC_SWITCH: st_k}
            if spec.drive_d1_switch:
                gates[D1_SWITCH] = not st_k
        code = 0
        for i, name in enumerate(names):
            if gates[name]:
                code |= 1 << i
        codes[k] = code
        if code not in gates_by_code:
            gates_by_code[code] = gates
    return GateTable(spec=spec, dt=dt, names=names, codes=codes, st=st,
                     gates_by_code=gates_by_code)


def measured_st_duty(trace) -> float:
    """Fraction of time flagged shoot-through over an integer number of
    switching periods at the end of the trace.

    The trace 'st' channel carries per-sample ST occupancy in [0, 1].
    """
    f_sw = trace.meta.get("f_sw")
    if not f_sw:
        raise ConfigError("trace does not carry f_sw metadata")
    samples_per_period = 1.0 / (f_sw * trace.dt)
    if abs(samples_per_period - round(samples_per_period)) > 1e-6:
        raise ConfigError(
            "trace sample period does not divide the switching period; "
            "cannot form an integer-period window")
    spp = round(samples_per_period)
    n_periods = len(trace.st) // spp
    if n_periods < 1:
        raise ConfigError("trace shorter than one switching period")
    window = trace.st[-n_periods * spp:]
    return float(np.mean(window))


def export_schedule(spec: ModulationSpec, dt: float, path,
                    n_periods: int = 1):
    """Write the gate schedule as CSV: t, one 0/1 column per switch, st."""
    table = build_table(spec, dt)
    names = table.names
    n = table.steps_per_period * n_periods
    with open(path, "w", newline="\n") as fh:
        fh.write("t," + ",".join(names) + ",st\n")
        for k in range(n):
            idx = k % table.steps_per_period
            code = int(table.codes[idx])
            bits = ",".join(str((code >> i) & 1) for i in range(len(names)))
            fh.write(f"{k * dt:.10g},{bits},{int(table.st[idx])}\n")
