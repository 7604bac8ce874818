"""Reference two-interval state-space model of the Y-network converter.

This model is written directly from the interval equations of the reference
wiring (see README for the loop derivation) with ideal coupling and ideal
devices, and serves as an independent oracle for the netlist engine:

non-shoot-through (network diode conducting)::

    v_m  = (V_dc - v_C2) / (1+K)
    v_Lr = (P-K)/(1+K) * (V_dc - v_C2) - v_C1
    v_pn = v_C1 + v_C2 - (P-K) * v_m
    winding currents:  i_w3 = i_link - i_Lr,
                       i_w2 = (i_m - (1+P) i_w3) / (1+K)
    dv_C1/dt = (i_Lr - i_link) / C1
    dv_C2/dt = (i_w2 - i_Lr) / C2

shoot-through (network diode blocking, link shorted)::

    v_m  = (V_dc + v_C1) / (1+P)
    v_Lr = v_C2
    dv_C1/dt = -i_m / ((1+P) C1)
    dv_C2/dt = -i_Lr / C2

Integration is fixed-step RK4 with interval switching aligned to the same
midpoint-sampled gate grid the engine uses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .analytics import ConverterParams, cap_voltages
from .errors import ConfigError, DomainError, StructureError
from .modulation import ModulationSpec, build_table
from .netlist import Circuit, network_section, turns_ratios
from .traces import Trace

ST, NST = "st", "nst"

DO_RON = 0.1       # output-diode conduction slope in the reference model


@dataclass
class RefConfig:
    """Reference-model parameter set."""

    k: float
    p: float
    v_dc: float
    lm: float
    lr: float
    c1: float
    c2: float
    load: str = "dcdc"            # dcdc | rl
    r_load: float = 245.0
    c_f: float = 470e-6           # dcdc output filter
    load_r: float = 30.0          # rl phase resistance
    load_l: float = 10e-3         # rl phase inductance

    @classmethod
    def from_params(cls, params: ConverterParams, **kw) -> "RefConfig":
        return cls(k=params.k, p=params.p, v_dc=params.v_dc, **kw)


@dataclass
class RefState:
    """Magnetizing current (winding-1 referred), series-inductor current,
    capacitor voltages, plus the configured load states."""

    i_m: float = 0.0
    i_lr: float = 0.0
    v_c1: float = 0.0
    v_c2: float = 0.0
    load: tuple = ()

    def as_array(self) -> np.ndarray:
        return np.array([self.i_m, self.i_lr, self.v_c1, self.v_c2,
                         *self.load])


def inductor_voltages(state: RefState, phase: str, cfg: RefConfig
                      ) -> tuple[float, float]:
    """Instantaneous (v_L1, v_Lr) of the network inductors in one phase."""
    k, p, v = cfg.k, cfg.p, cfg.v_dc
    if phase == NST:
        v_m = (v - state.v_c2) / (1.0 + k)
        v_lr = (p - k) / (1.0 + k) * (v - state.v_c2) - state.v_c1
    elif phase == ST:
        v_m = (v + state.v_c1) / (1.0 + p)
        v_lr = state.v_c2
    else:
        raise ConfigError(f"phase must be st or nst, got {phase!r}")
    return v_m, v_lr


def link_voltage(state: RefState, phase: str, cfg: RefConfig) -> float:
    if phase == ST:
        return 0.0
    k, p, v = cfg.k, cfg.p, cfg.v_dc
    v_m = (v - state.v_c2) / (1.0 + k)
    return state.v_c1 + state.v_c2 - (p - k) * v_m


def derivatives(state: RefState, phase: str, cfg: RefConfig,
                v_dc: float | None = None, i_link: float = 0.0,
                ) -> np.ndarray:
    """Time derivatives of the network states for one interval.

    ``i_link`` is the current drawn from the DC link during the
    non-shoot-through interval (ignored during shoot-through, where the
    link is shorted).  Load states are not advanced here; the simulation
    loop owns them.
    """
    cfg2 = cfg if v_dc is None else RefConfig(**{**cfg.__dict__, "v_dc": v_dc})
    k, p = cfg2.k, cfg2.p
    v_m, v_lr = inductor_voltages(state, phase, cfg2)
    di_m = v_m / cfg2.lm
    di_lr = v_lr / cfg2.lr
    if phase == NST:
        i_w3 = i_link - state.i_lr
        i_w2 = (state.i_m - (1.0 + p) * i_w3) / (1.0 + k)
        dv_c1 = (state.i_lr - i_link) / cfg2.c1
        dv_c2 = (i_w2 - state.i_lr) / cfg2.c2
    else:
        dv_c1 = -state.i_m / ((1.0 + p) * cfg2.c1)
        dv_c2 = -state.i_lr / cfg2.c2
    return np.array([di_m, di_lr, dv_c1, dv_c2])


def averaged_steady_state(cfg_or_params, v_dc: float | None = None
                          ) -> tuple[float, float]:
    """Capacitor voltages from volt-second balance of the two intervals.

    Solves d*(ST voltage) + (1-d)*(NST voltage) = 0 for both inductors as a
    2x2 linear system; must reproduce the closed-form capacitor expressions
    exactly.  ``cfg_or_params`` supplies (k, p); the duty comes with it when
    a ConverterParams is given.
    """
    params = cfg_or_params
    k, p, d = params.k, params.p, params.d
    v = params.v_dc if v_dc is None else v_dc
    from .analytics import duty_feasibility
    d_max = duty_feasibility(k, p)
    if not 0.0 <= d < d_max:
        raise DomainError(f"duty {d} outside [0, {d_max:.9g})")
    a = np.array([
        [d / (1 + p), -(1 - d) / (1 + k)],
        [-(1 - d), d - (1 - d) * (p - k) / (1 + k)],
    ])
    rhs = np.array([
        -d * v / (1 + p) - (1 - d) * v / (1 + k),
        -(1 - d) * (p - k) / (1 + k) * v,
    ])
    if abs(np.linalg.det(a)) < 1e-14:
        raise DomainError("volt-second system singular at this duty")
    v_c1, v_c2 = np.linalg.solve(a, rhs)
    return float(v_c1), float(v_c2)


# --------------------------------------------------------------------------
# time-domain reference simulation
# --------------------------------------------------------------------------

def _dcdc_rhs(x, st_phase, cfg):
    # x = (i_m, i_lr, v_c1, v_c2, v_cf); plain floats, called 4x per step
    i_m, i_lr, v_c1, v_c2, v_cf = x
    k, p, v = cfg.k, cfg.p, cfg.v_dc
    if st_phase:
        d_im = (v + v_c1) / ((1.0 + p) * cfg.lm)
        d_ilr = v_c2 / cfg.lr
        d_c1 = -i_m / ((1.0 + p) * cfg.c1)
        d_c2 = -i_lr / cfg.c2
        d_cf = -v_cf / (cfg.r_load * cfg.c_f)
    else:
        v_m = (v - v_c2) / (1.0 + k)
        d_im = v_m / cfg.lm
        d_ilr = ((p - k) * v_m - v_c1) / cfg.lr
        v_pn = v_c1 + v_c2 - (p - k) * v_m
        i_link = (v_pn - v_cf) / DO_RON
        if i_link < 0.0:
            i_link = 0.0
        i_w3 = i_link - i_lr
        i_w2 = (i_m - (1.0 + p) * i_w3) / (1.0 + k)
        d_c1 = (i_lr - i_link) / cfg.c1
        d_c2 = (i_w2 - i_lr) / cfg.c2
        d_cf = (i_link - v_cf / cfg.r_load) / cfg.c_f
    return (d_im, d_ilr, d_c1, d_c2, d_cf)


def _rl_rhs(x, st_phase, cfg, legs):
    # x = (i_m, i_lr, v_c1, v_c2, i_a, i_b); i_c = -(i_a + i_b)
    i_m, i_lr, v_c1, v_c2, ia, ib = x
    k, p, v = cfg.k, cfg.p, cfg.v_dc
    if st_phase:
        return ((v + v_c1) / ((1.0 + p) * cfg.lm),
                v_c2 / cfg.lr,
                -i_m / ((1.0 + p) * cfg.c1),
                -i_lr / cfg.c2,
                -cfg.load_r * ia / cfg.load_l,
                -cfg.load_r * ib / cfg.load_l)
    ic = -(ia + ib)
    v_m = (v - v_c2) / (1.0 + k)
    v_pn = v_c1 + v_c2 - (p - k) * v_m
    la, lb, lc = legs
    va = v_pn if la else 0.0
    vb = v_pn if lb else 0.0
    vc = v_pn if lc else 0.0
    vmid = (va + vb + vc) / 3.0
    i_link = (ia if la else 0.0) + (ib if lb else 0.0) + (ic if lc else 0.0)
    i_w3 = i_link - i_lr
    i_w2 = (i_m - (1.0 + p) * i_w3) / (1.0 + k)
    return (v_m / cfg.lm,
            ((p - k) * v_m - v_c1) / cfg.lr,
            (i_lr - i_link) / cfg.c1,
            (i_w2 - i_lr) / cfg.c2,
            ((va - vmid) - cfg.load_r * ia) / cfg.load_l,
            ((vb - vmid) - cfg.load_r * ib) / cfg.load_l)


def steady_seed(cfg: RefConfig, d: float) -> np.ndarray:
    """Analytic periodic-orbit means, used to start reference runs near the
    steady state so the lightly damped startup envelope is skipped."""
    from .analytics import boost_proposed
    v_c1, v_c2 = averaged_steady_state_kpd(cfg.k, cfg.p, d, cfg.v_dc)
    b = boost_proposed(cfg.k, cfg.p, d)
    if cfg.load == "dcdc":
        v_out = b * cfg.v_dc
        i_load = v_out / cfg.r_load
        i_m = (1.0 + cfg.k) * b * i_load
        i_lr = i_m / (1.0 + cfg.k)
        return np.array([i_m, i_lr, v_c1, v_c2, v_out])
    return np.array([0.0, 0.0, v_c1, v_c2, 0.0, 0.0])


def averaged_steady_state_kpd(k: float, p: float, d: float, v_dc: float
                              ) -> tuple[float, float]:
    class _P:
        pass
    pp = _P()
    pp.k, pp.p, pp.d, pp.v_dc = k, p, d, v_dc
    return averaged_steady_state(pp)


def simulate_ref(cfg: RefConfig, spec: ModulationSpec, t_end: float,
                 dt: float, stride: int = 1,
                 x0: np.ndarray | None = None) -> tuple[Trace, np.ndarray]:
    """RK4 reference simulation.

    Returns a trace of the network states plus the derived link voltage and
    the final state vector.  Signal names: i_m, i_lr, v_c1, v_c2, v_pn and
    the load states (v_out for dcdc; i_a, i_b, i_c for rl).
    """
    table = build_table(spec, dt)
    nsteps = round(t_end / dt)
    if not math.isclose(nsteps * dt, t_end, rel_tol=1e-9):
        raise ConfigError(f"t_end={t_end} is not a multiple of dt={dt}")
    period = table.steps_per_period

    if cfg.load == "dcdc":
        names = ["i_m", "i_lr", "v_c1", "v_c2", "v_pn", "v_out"]
        x = np.zeros(5) if x0 is None else np.asarray(x0, dtype=float).copy()
    elif cfg.load == "rl":
        names = ["i_m", "i_lr", "v_c1", "v_c2", "v_pn", "i_a", "i_b", "i_c"]
        x = np.zeros(6) if x0 is None else np.asarray(x0, dtype=float).copy()
    else:
        raise ConfigError(f"unknown reference load {cfg.load!r}")

    if cfg.load == "rl":
        top_bits = [table.names.index(nm) for nm in ("sap", "sbp", "scp")]

    nrec = nsteps // stride
    data = np.zeros((nrec, len(names)))
    st_out = np.zeros(nrec)
    st_acc = 0.0
    rec = 0

    xs = tuple(float(v) for v in x)
    st_flags = [bool(f) for f in table.st]
    codes = [int(c) for c in table.codes]
    dcdc = cfg.load == "dcdc"
    h2, h6 = 0.5 * dt, dt / 6.0

    for k in range(nsteps):
        idx = k % period
        st_flag = st_flags[idx]
        if dcdc:
            k1 = _dcdc_rhs(xs, st_flag, cfg)
            y = tuple(a + h2 * b for a, b in zip(xs, k1))
            k2 = _dcdc_rhs(y, st_flag, cfg)
            y = tuple(a + h2 * b for a, b in zip(xs, k2))
            k3 = _dcdc_rhs(y, st_flag, cfg)
            y = tuple(a + dt * b for a, b in zip(xs, k3))
            k4 = _dcdc_rhs(y, st_flag, cfg)
        else:
            code = codes[idx]
            legs = (bool(code & (1 << top_bits[0])),
                    bool(code & (1 << top_bits[1])),
                    bool(code & (1 << top_bits[2])))
            k1 = _rl_rhs(xs, st_flag, cfg, legs)
            y = tuple(a + h2 * b for a, b in zip(xs, k1))
            k2 = _rl_rhs(y, st_flag, cfg, legs)
            y = tuple(a + h2 * b for a, b in zip(xs, k2))
            k3 = _rl_rhs(y, st_flag, cfg, legs)
            y = tuple(a + dt * b for a, b in zip(xs, k3))
            k4 = _rl_rhs(y, st_flag, cfg, legs)
        xs = tuple(a + h6 * (b1 + 2.0 * (b2 + b3) + b4)
                   for a, b1, b2, b3, b4 in zip(xs, k1, k2, k3, k4))
        st_acc += 1.0 if st_flag else 0.0
        if (k + 1) % stride == 0:
            state = RefState(i_m=xs[0], i_lr=xs[1], v_c1=xs[2], v_c2=xs[3])
            v_pn = link_voltage(state, ST if st_flag else NST, cfg)
            if dcdc:
                data[rec] = (xs[0], xs[1], xs[2], xs[3], v_pn, xs[4])
            else:
                data[rec] = (xs[0], xs[1], xs[2], xs[3], v_pn, xs[4], xs[5],
                             -(xs[4] + xs[5]))
            st_out[rec] = st_acc / stride
            st_acc = 0.0
            rec += 1
    x = np.array(xs)

    meta = {"f_sw": spec.f_sw, "mode": spec.mode, "dt_engine": dt,
            "stride": stride, "model": "reference"}
    return Trace(dt=dt * stride, names=names, data=data, st=st_out,
                 meta=meta), x


def shoot_ref(cfg: RefConfig, spec: ModulationSpec, dt: float,
              x0: np.ndarray | None = None, max_iter: int = 30,
              tol: float = 1e-8) -> np.ndarray:
    """Periodic orbit of the reference model by Newton on the period map.

    The reference map is affine in the state for time-triggered switching
    (the output-diode clamp in dcdc mode adds mild facets), so a
    finite-difference Jacobian with a moderate step is essentially exact.
    """
    period = spec.period
    nsteps = round(period / dt)
    if x0 is None:
        n_pre = max(4, round(0.01 / period))
        _, x0 = simulate_ref(cfg, spec, n_pre * period, dt, stride=nsteps)

    def phi(vec):
        _, out = simulate_ref(cfg, spec, period, dt, stride=nsteps, x0=vec)
        return out

    x = np.asarray(x0, dtype=float)
    for _ in range(max_iter):
        fx = phi(x)
        res = fx - x
        scale = max(1.0, float(np.abs(x).max()))
        if float(np.abs(res).max()) / scale < tol:
            return x
        n = len(x)
        jac = np.empty((n, n))
        for i in range(n):
            dx = 1e-3 * (abs(x[i]) + 1.0)
            xp = x.copy()
            xp[i] += dx
            jac[:, i] = (phi(xp) - fx) / dx
        x = x + np.linalg.solve(jac - np.eye(n), -res)
    raise DomainError("reference-model shooting did not converge")


# --------------------------------------------------------------------------
# topology verification
# --------------------------------------------------------------------------

@dataclass
class TopologyReport:
    """Per-relation outcome of the interval-equation consistency check."""

    checks: dict[str, bool] = field(default_factory=dict)
    max_rel_err: dict[str, float] = field(default_factory=dict)
    draws: int = 0

    @property
    def passed(self) -> bool:
        return all(self.checks.values()) and bool(self.checks)

    def to_dict(self) -> dict:
        return {"passed": self.passed, "draws": self.draws,
                "checks": dict(self.checks),
                "max_rel_err": dict(self.max_rel_err)}


class _DCSolver:
    """Small MNA helper: capacitors as fixed voltage sources, inductors and
    the coupled winding set as fixed current sources, diodes/switches as
    shorts or opens.  Used to extract one interval's loop relations from the
    network section of a parsed circuit, without any companion
    discretization.  Everything outside the impedance network (bridge legs,
    output stage) is replaced by the link port."""

    def __init__(self, elements, link_node: str):
        self.elements = list(elements)
        self.link = link_node

    def solve(self, *, cap_v: dict[str, float], ind_i: dict[str, float],
              im_value: float, shorts: set[str], opens: set[str],
              short_link: bool, v_dc: float):
        nodes: dict[str, int] = {}

        def n(node):
            if node == "0":
                return None
            if short_link and node == self.link:
                return None          # link tied to ground in shoot-through
            if node not in nodes:
                nodes[node] = len(nodes)
            return nodes[node]

        rows = []   # (coeffs dict over unknowns, rhs)
        # unknown layout discovered lazily: node potentials then extra vars
        extra: dict[str, int] = {}

        def extra_var(name):
            if name not in extra:
                extra[name] = len(extra)
            return extra[name]

        w3 = next(e for e in self.elements if e.kind == "w3")
        n1, n2, n3 = turns_ratios(w3)
        ratios = (1.0, n2 / n1, n3 / n1)

        # assemble in dense form after discovering sizes
        stamps = []

        for e in self.elements:
            if e.kind == "v":
                stamps.append(("vsrc", e))
            elif e.kind == "c":
                stamps.append(("vsrc_cap", e))
            elif e.kind == "l":
                stamps.append(("isrc", e, ind_i.get(e.name, 1.0)))
            elif e.kind == "w3":
                stamps.append(("w3", e))
            elif e.kind == "d" or e.kind == "s":
                if e.name in shorts:
                    stamps.append(("short", e))
                elif e.name in opens:
                    continue
                else:
                    continue
            elif e.kind == "r":
                stamps.append(("res", e))
            # load3 and the rest are outside the network in this analysis

        # first pass to register nodes and unknowns
        for st in stamps:
            e = st[1]
            for node in e.nodes[:6 if e.kind == "w3" else 2]:
                n(node)
        for st in stamps:
            kind, e = st[0], st[1]
            if kind in ("vsrc", "vsrc_cap", "short"):
                extra_var(f"j_{e.name}")
            elif kind == "w3":
                for w in (1, 2, 3):
                    extra_var(f"j_{e.name}_{w}")
                extra_var(f"vm_{e.name}")

        nn = len(nodes)
        nu = nn + len(extra)
        A = np.zeros((nu, nu))
        b = np.zeros(nu)

        def col_extra(name):
            return nn + extra[name]

        def kcl(node, col, sign):
            i = n(node)
            if i is not None:
                A[i, col] += sign

        for st in stamps:
            kind, e = st[0], st[1]
            if kind == "res":
                g = 1.0 / e.p("r")
                ia, ib = n(e.nodes[0]), n(e.nodes[1])
                if ia is not None:
                    A[ia, ia] += g
                if ib is not None:
                    A[ib, ib] += g
                if ia is not None and ib is not None:
                    A[ia, ib] -= g
                    A[ib, ia] -= g
            elif kind in ("vsrc", "vsrc_cap", "short"):
                col = col_extra(f"j_{e.name}")
                row = col
                ia, ib = n(e.nodes[0]), n(e.nodes[1])
                if ia is not None:
                    A[row, ia] += 1.0
                    A[ia, col] += 1.0
                if ib is not None:
                    A[row, ib] -= 1.0
                    A[ib, col] -= 1.0
                if kind == "vsrc":
                    b[row] = v_dc
                elif kind == "vsrc_cap":
                    b[row] = cap_v[e.name]
                else:
                    b[row] = 0.0
            elif kind == "isrc":
                val = st[2]
                kclrow_a, kclrow_b = n(e.nodes[0]), n(e.nodes[1])
                if kclrow_a is not None:
                    b[kclrow_a] -= val
                if kclrow_b is not None:
                    b[kclrow_b] += val
            elif kind == "w3":
                vm_col = col_extra(f"vm_{e.name}")
                # ampere-turn row: sum r_k j_k = magnetizing current
                at_row = vm_col
                for w in (1, 2, 3):
                    jcol = col_extra(f"j_{e.name}_{w}")
                    a, bb = e.nodes[2 * (w - 1)], e.nodes[2 * w - 1]
                    row = jcol
                    ia, ib = n(a), n(bb)
                    if ia is not None:
                        A[row, ia] += 1.0
                        A[ia, jcol] += 1.0
                    if ib is not None:
                        A[row, ib] -= 1.0
                        A[ib, jcol] -= 1.0
                    A[row, vm_col] -= ratios[w - 1]
                    A[at_row, jcol] += ratios[w - 1]
                b[at_row] = im_value

        try:
            x = np.linalg.solve(A, b)
        except np.linalg.LinAlgError as exc:
            raise StructureError(f"interval analysis singular: {exc}") from exc

        def potential(node):
            i = n(node)
            return 0.0 if i is None else x[i]

        vm = x[nn + extra[f"vm_{w3.name}"]]
        return x, nodes, extra, vm, potential


def verify_topology(circuit: Circuit, link_node: str = "p",
                    draws: int = 100, seed: int = 0,
                    rel_tol: float = 1e-6) -> TopologyReport:
    """Check that a circuit's two interval solutions reduce to the
    closed-form relations the converter is designed around.

    For each random feasible (K, P, d, V_dc) draw, the capacitors are fixed
    at their steady values, the inductors at arbitrary currents, and the two
    interval circuits are solved exactly (network diode shorted with the
    link open, then diode removed with the link shorted).  The measured
    winding and series-inductor voltages must match the non-shoot-through
    expressions, and the duty-weighted average of each inductor voltage must
    vanish (which is what pins the capacitor expressions).
    """
    net = network_section(circuit, link_node)
    w3s = [e for e in net if e.kind == "w3"]
    inds = [e for e in net if e.kind == "l"]
    capss = [e for e in net if e.kind == "c"]
    diodes = [e for e in net if e.kind == "d"]
    if not (len(w3s) == 1 and len(inds) == 1 and len(capss) == 2
            and len(diodes) == 1):
        raise StructureError(
            "network must hold exactly one coupled winding set, one series "
            f"inductor, two capacitors and one diode; found {len(w3s)} "
            f"w3 / {len(inds)} l / {len(capss)} c / {len(diodes)} d")
    w3 = w3s[0]
    lr = inds[0]
    d1 = diodes[0]
    # identify the ground-tied capacitor (steady v_C2) and the link-side one
    grounded = [c for c in capss if "0" in c.nodes]
    linked = [c for c in capss if link_node in c.nodes]
    if len(grounded) != 1 or len(linked) != 1 or grounded[0] is linked[0]:
        raise StructureError(
            "capacitor roles ambiguous: need one capacitor tied to ground "
            "and one tied to the DC link")
    c2, c1 = grounded[0], linked[0]

    n1, n2, n3 = turns_ratios(w3)
    k, p = n2 / n1, n3 / n1
    sources = circuit.of_kind("v")
    solver = _DCSolver(sources + net, link_node)
    rng = np.random.default_rng(seed)

    labels = ("nst_winding1", "nst_series_inductor",
              "voltsec_winding1", "voltsec_series_inductor")
    worst = {lab: 0.0 for lab in labels}
    from .analytics import duty_feasibility
    for _ in range(draws):
        d = rng.uniform(0.05, 0.95) * duty_feasibility(k, p)
        v_dc = rng.uniform(5.0, 500.0)
        v_c1, v_c2 = cap_voltages(k, p, d, v_dc)
        il = rng.uniform(0.1, 5.0)
        im = rng.uniform(0.1, 5.0)

        c2_plus = next(n for n in c2.nodes if n != "0")
        cap_v = {c1.name: _signed_cap_v(c1, link_node, v_c1),
                 c2.name: _signed_cap_v(c2, c2_plus, v_c2)}
        # NST: diode shorted, link open
        _, _, _, vm_nst, pot = solver.solve(
            cap_v=cap_v, ind_i={lr.name: il}, im_value=im,
            shorts={d1.name}, opens=set(), short_link=False, v_dc=v_dc)
        v_lr_nst = pot(lr.nodes[0]) - pot(lr.nodes[1])
        # ST: diode open, link shorted
        _, _, _, vm_st, pot = solver.solve(
            cap_v=cap_v, ind_i={lr.name: il}, im_value=im,
            shorts=set(), opens={d1.name}, short_link=True, v_dc=v_dc)
        v_lr_st = pot(lr.nodes[0]) - pot(lr.nodes[1])

        scale = max(1.0, abs(v_dc))
        want_vm = (v_dc - v_c2) / (1.0 + k)
        want_vlr = (p - k) / (1.0 + k) * (v_dc - v_c2) - v_c1
        worst["nst_winding1"] = max(
            worst["nst_winding1"], abs(vm_nst - want_vm) / scale)
        worst["nst_series_inductor"] = max(
            worst["nst_series_inductor"], abs(v_lr_nst - want_vlr) / scale)
        worst["voltsec_winding1"] = max(
            worst["voltsec_winding1"],
            abs(d * vm_st + (1 - d) * vm_nst) / scale)
        worst["voltsec_series_inductor"] = max(
            worst["voltsec_series_inductor"],
            abs(d * v_lr_st + (1 - d) * v_lr_nst) / scale)

    rep = TopologyReport(draws=draws)
    for lab in labels:
        rep.max_rel_err[lab] = worst[lab]
        rep.checks[lab] = worst[lab] <= rel_tol
    return rep


def _signed_cap_v(cap, plus_node, value):
    """Capacitor source value oriented so ``plus_node`` carries the
    positive plate of the stated steady voltage."""
    return value if cap.nodes[0] == plus_node else -value
