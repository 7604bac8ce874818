"""Switched-circuit time-domain engine.

Modified nodal analysis with companion models, trapezoidal integration at a
fixed step.  Gate edges land on the step grid; the step at each gate edge
is split into eight sub-steps with the first one damped (backward Euler),
which resolves the fast winding-current exchange through the leakage
inductances instead of letting the trapezoidal rule ring across the
discontinuity, while leaving the loss-free parts of the run genuinely
lossless.  A run starts from a doubled near-instantaneous damped solve
that lands every companion voltage history on the initial topology.

The per-step work is compiled once per switch/diode configuration into an
affine map ``z' = F z + G s`` over the companion history state ``z`` and
the source vector ``s``, stacked with diode-monitor and probe rows, so the
stepping loop is two small matrix-vector products per step.  Compiled
configurations are cached; refactorization happens only when the
configuration changes.

Switch and diode model: on = ``ron`` (default 1 mOhm), off = ``roff``
(default 1 MOhm); diodes add a forward-drop source ``vf`` while conducting.
Diode states are resolved to a fixpoint before a step is accepted: every
conducting diode must carry forward current >= -1e-9 A and every blocking
diode must see v <= vf + 1e-9 V.  The resolver flips the most violated
diode per pass (deterministic name order) and reports a step error after
2*(#diodes)+2 passes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, StepError, StructureError
from .loads import IMParams, IMState, InductionMachine
from .modulation import GateTable, ModulationSpec, build_table
from .netlist import Circuit, turns_ratios
from .traces import Trace

GMIN = 1e-9          # shunt on current-source terminals
LEAK_FLOOR = 1e-9    # winding leakage floor, avoids an all-ideal winding loop
DIODE_ITOL = 1e-9
DIODE_VTOL = 1e-9

MACHINE_CHANNELS = ("torque", "speed", "ia", "ib", "ic")


@dataclass
class SwitchConfiguration:
    """Explicit on/off state for every switch and diode in a circuit."""

    switches: dict[str, bool]
    diodes: dict[str, bool]


@dataclass
class SimState:
    """Checkpoint of a simulation: companion history vector, diode states,
    machine state.  Transferable between runs of the same Engine."""

    time: float
    z: np.ndarray
    diode_mask: int
    machine: IMState | None = None

    def as_vector(self) -> np.ndarray:
        if self.machine is None:
            return self.z.copy()
        m = self.machine
        return np.concatenate([self.z, [m.lam_qs, m.lam_ds, m.lam_qr,
                                        m.lam_dr, m.omega_m]])

    def with_vector(self, vec: np.ndarray) -> "SimState":
        nz = len(self.z)
        machine = self.machine
        if machine is not None:
            lam = vec[nz:]
            machine = IMState(lam_qs=lam[0], lam_ds=lam[1], lam_qr=lam[2],
                              lam_dr=lam[3], omega_m=lam[4],
                              theta_m=self.machine.theta_m)
        return SimState(time=self.time, z=np.asarray(vec[:nz], dtype=float),
                        diode_mask=self.diode_mask, machine=machine)


class EngineError(StructureError):
    pass


# --------------------------------------------------------------------------
# layout
# --------------------------------------------------------------------------

class _Layout:
    """Unknown/state/source indexing for one circuit at one dt."""

    def __init__(self, circuit: Circuit, dt: float):
        self.circuit = circuit
        self.dt = dt

        self.conductors: list[dict] = []   # r / s / d and load3 resistive legs
        self.caps: list[dict] = []
        self.inds: list[dict] = []
        self.vsrcs: list[dict] = []
        self.w3s: list[dict] = []
        self.im_load: dict | None = None

        # first pass: expand elements into records, collecting node names
        self.node_index: dict[str, int] = {}

        def touch(node):
            if node != "0" and node not in self.node_index:
                self.node_index[node] = len(self.node_index)

        for e in circuit.elements:
            for n in e.nodes:
                touch(n)
            if e.kind == "r":
                self.conductors.append(dict(name=e.name, a=e.nodes[0],
                                            b=e.nodes[1], kind="r",
                                            g=1.0 / e.p("r")))
            elif e.kind == "s":
                self.conductors.append(dict(name=e.name, a=e.nodes[0],
                                            b=e.nodes[1], kind="s",
                                            gon=1.0 / e.p("ron"),
                                            goff=1.0 / e.p("roff")))
            elif e.kind == "d":
                self.conductors.append(dict(name=e.name, a=e.nodes[0],
                                            b=e.nodes[1], kind="d",
                                            gon=1.0 / e.p("ron"),
                                            goff=1.0 / e.p("roff"),
                                            vf=e.p("vf")))
            elif e.kind == "c":
                self.caps.append(dict(name=e.name, a=e.nodes[0], b=e.nodes[1],
                                      c=e.p("c"), esr=e.p("esr"),
                                      v0=e.p("v0")))
            elif e.kind == "l":
                self.inds.append(dict(name=e.name, a=e.nodes[0], b=e.nodes[1],
                                      l=e.p("l"), esr=e.p("esr"),
                                      i0=e.p("i0")))
            elif e.kind == "v":
                self.vsrcs.append(dict(name=e.name, a=e.nodes[0],
                                       b=e.nodes[1], dc=e.p("dc"),
                                       ac=e.p("ac"), f=e.p("f"),
                                       phase=e.p("phase")))
            elif e.kind == "w3":
                n1, n2, n3 = turns_ratios(e)
                self.w3s.append(dict(
                    name=e.name, nodes=e.nodes,
                    r=(1.0, n2 / n1, n3 / n1), lm=e.p("lm"),
                    lls=tuple(max(e.p(f"ll{k}"), LEAK_FLOOR)
                              for k in (1, 2, 3)),
                    im0=e.p("im0")))
            elif e.kind == "load3":
                self._expand_load3(e, touch)

        # second pass: assign unknown columns and state slots
        nu = len(self.node_index)
        self.nn = len(self.node_index)
        for v in self.vsrcs:
            v["col"] = nu
            nu += 1
        for w in self.w3s:
            w["cols"] = (nu, nu + 1, nu + 2, nu + 3)
            nu += 4
        nz = 0
        for c in self.caps:
            c["zv"], c["zi"] = nz, nz + 1
            nz += 2
        for l in self.inds:
            l["zi"], l["zv"] = nz, nz + 1
            nz += 2
        for w in self.w3s:
            w["z"] = tuple(range(nz, nz + 7))
            nz += 7
        self.nu = nu
        self.nz = nz
        ns = 1
        self.ac_sources = [v for v in self.vsrcs if v["ac"]]
        for v in self.ac_sources:
            v["slot"] = ns
            ns += 1
        self.machine_slot = ns if self.im_load is not None else None
        self.ns = ns + (3 if self.im_load is not None else 0)

        self.diodes = sorted((c for c in self.conductors if c["kind"] == "d"),
                             key=lambda c: c["name"])
        for bit, d in enumerate(self.diodes):
            d["bit"] = bit
        self.switches = [c for c in self.conductors if c["kind"] == "s"]

    def _expand_load3(self, e, touch):
        t = e.p("type")
        if t == "im":
            if self.im_load is not None:
                raise EngineError("only one induction-machine load supported")
            params = IMParams(rs=e.p("rs"), rr=e.p("rr"), lls=e.p("lls"),
                              llr=e.p("llr"), lm=e.p("lm"), j=e.p("j"),
                              pole_pairs=int(e.p("pp")))
            self.im_load = dict(name=e.name, terms=e.nodes, params=params,
                                tl=e.p("tl"), drive=e.p("drive"))
            return
        neutral = f"_{e.name}_n"
        touch(neutral)
        for ph, term in zip("abc", e.nodes):
            name = f"{e.name}.{ph}"
            if t == "r":
                self.conductors.append(dict(name=name, a=term, b=neutral,
                                            kind="r", g=1.0 / e.p("r")))
            else:
                self.inds.append(dict(name=name, a=term, b=neutral,
                                      l=e.p("l"), esr=e.p("r"), i0=0.0))

    def node(self, n: str) -> int | None:
        return None if n == "0" else self.node_index[n]

    def initial_z(self) -> np.ndarray:
        z = np.zeros(self.nz)
        for c in self.caps:
            z[c["zv"]] = c["v0"]
        for l in self.inds:
            z[l["zi"]] = l["i0"]
        for w in self.w3s:
            z[w["z"][0]] = w["im0"]
        return z


# --------------------------------------------------------------------------
# compiled configuration
# --------------------------------------------------------------------------

@dataclass
class _Compiled:
    MZ: np.ndarray            # stacked rows applied to z
    MS: np.ndarray            # stacked rows applied to s
    nz: int
    mon_on: np.ndarray        # bool per diode, conducting in this config
    sl_mon: slice
    sl_probe: slice
    sl_vabc: slice


class Engine:
    """Compiled simulator for one circuit at one fixed time step."""

    def __init__(self, circuit: Circuit, dt: float,
                 probes: list[str] | None = None,
                 spec: ModulationSpec | None = None):
        if dt <= 0:
            raise ConfigError("dt must be positive")
        self.layout = _Layout(circuit, dt)
        self.dt = dt
        self.spec = spec
        self.probes = list(probes or [])
        self.table: GateTable | None = build_table(spec, dt) if spec else None
        gate_names = list(self.table.names) if self.table else []
        for sw in self.layout.switches:
            sw["bit"] = gate_names.index(sw["name"]) \
                if sw["name"] in gate_names else None
        self._cache: dict[tuple, _Compiled] = {}
        self._machine_probe_idx: list[tuple[int, int]] = []
        self._matrix_probes: list[str] = []
        for i, expr in enumerate(self.probes):
            if expr.startswith("im(") and expr.endswith(")"):
                chan = expr[3:-1]
                if chan not in MACHINE_CHANNELS:
                    raise ConfigError(f"unknown machine channel {expr!r}")
                if self.layout.im_load is None:
                    raise ConfigError(f"probe {expr!r} without a machine load")
                self._machine_probe_idx.append((i, MACHINE_CHANNELS.index(chan)))
            else:
                self._matrix_probes.append(expr)

    # ------------------------------------------------------------ stamping

    def matrices(self, code: int, dmask: int, be: bool,
                 dt: float | None = None):
        """Raw MNA system for one configuration.

        Returns ``(A, Rz, Rs, Ux, Uz, g_of)``: the system matrix over the
        unknown vector (node voltages, source currents, winding currents and
        magnetizing voltages), the right-hand-side maps over history ``z``
        and sources ``s``, the history-update maps, and the conductance
        assigned to each switched element.
        """
        lay = self.layout
        dt = self.dt if dt is None else dt
        nu, nz, ns = lay.nu, lay.nz, lay.ns
        A = np.zeros((nu, nu))
        Rz = np.zeros((nu, nz))
        Rs = np.zeros((nu, ns))
        Ux = np.zeros((nz, nu))
        Uz = np.zeros((nz, nz))
        n = lay.node

        def stamp_g(a, b, g):
            ia, ib = n(a), n(b)
            if ia is not None:
                A[ia, ia] += g
            if ib is not None:
                A[ib, ib] += g
            if ia is not None and ib is not None:
                A[ia, ib] -= g
                A[ib, ia] -= g

        def rhs_pair(a, b, mat, col, val):
            ia, ib = n(a), n(b)
            if ia is not None:
                mat[ia, col] += val
            if ib is not None:
                mat[ib, col] -= val

        g_of: dict[str, float] = {}
        for cnd in lay.conductors:
            if cnd["kind"] == "r":
                g = cnd["g"]
            elif cnd["kind"] == "s":
                bit = cnd["bit"]
                on = bit is not None and (code >> bit) & 1
                g = cnd["gon"] if on else cnd["goff"]
            else:
                on = (dmask >> cnd["bit"]) & 1
                g = cnd["gon"] if on else cnd["goff"]
                if on and cnd["vf"]:
                    rhs_pair(cnd["a"], cnd["b"], Rs, 0, g * cnd["vf"])
            stamp_g(cnd["a"], cnd["b"], g)
            g_of[cnd["name"]] = g

        for c in lay.caps:
            tau = dt / c["c"] if be else dt / (2.0 * c["c"])
            g = 1.0 / (c["esr"] + tau)
            zi, zv = c["zi"], c["zv"]
            stamp_g(c["a"], c["b"], g)
            rhs_pair(c["a"], c["b"], Rz, zv, g)
            if not be:
                rhs_pair(c["a"], c["b"], Rz, zi, g * tau)
            ia, ib = n(c["a"]), n(c["b"])
            if ia is not None:
                Ux[zi, ia] += g
            if ib is not None:
                Ux[zi, ib] -= g
            Uz[zi, zv] -= g
            if not be:
                Uz[zi, zi] -= g * tau
            Uz[zv, zv] += 1.0
            if not be:
                Uz[zv, zi] += tau
            Uz[zv] += tau * Uz[zi]
            Ux[zv] += tau * Ux[zi]

        for l in lay.inds:
            lam = l["l"] / dt if be else 2.0 * l["l"] / dt
            g = 1.0 / (l["esr"] + lam)
            zi, zv = l["zi"], l["zv"]
            stamp_g(l["a"], l["b"], g)
            rhs_pair(l["a"], l["b"], Rz, zi, -g * lam)
            if not be:
                rhs_pair(l["a"], l["b"], Rz, zv, -g)
            ia, ib = n(l["a"]), n(l["b"])
            if ia is not None:
                Ux[zi, ia] += g
            if ib is not None:
                Ux[zi, ib] -= g
            Uz[zi, zi] += g * lam
            if not be:
                Uz[zi, zv] += g
            Uz[zv] += lam * Uz[zi]
            Ux[zv] += lam * Ux[zi]
            Uz[zv, zi] -= lam
            if not be:
                Uz[zv, zv] -= 1.0

        for v in lay.vsrcs:
            row, ia, ib = v["col"], n(v["a"]), n(v["b"])
            if ia is not None:
                A[row, ia] += 1.0
                A[ia, row] += 1.0
            if ib is not None:
                A[row, ib] -= 1.0
                A[ib, row] -= 1.0
            Rs[row, 0] = v["dc"]
            if v["ac"]:
                Rs[row, v["slot"]] = 1.0

        for w in lay.w3s:
            mfac = w["lm"] / dt if be else 2.0 * w["lm"] / dt
            cvm = w["cols"][3]
            zi = w["z"][0:3]
            zvl = w["z"][3:6]
            zvm = w["z"][6]
            A[cvm, cvm] = -1.0
            if not be:
                Rz[cvm, zvm] += 1.0
            Ux[zvm, cvm] = 1.0
            for k in range(3):
                a, b = w["nodes"][2 * k], w["nodes"][2 * k + 1]
                col = w["cols"][k]
                ia, ib = n(a), n(b)
                lk = w["lls"][k]
                lfac = lk / dt if be else 2.0 * lk / dt
                if ia is not None:
                    A[col, ia] += 1.0
                    A[ia, col] += 1.0
                if ib is not None:
                    A[col, ib] -= 1.0
                    A[ib, col] -= 1.0
                A[col, cvm] -= w["r"][k]
                A[col, col] -= lfac
                Rz[col, zi[k]] -= lfac
                if not be:
                    Rz[col, zvl[k]] -= 1.0
                A[cvm, col] += w["r"][k] * mfac
                Rz[cvm, zi[k]] += w["r"][k] * mfac
                Ux[zi[k], col] = 1.0
                Uz[zvl[k], zi[k]] -= lfac
                Ux[zvl[k], col] += lfac
                if not be:
                    Uz[zvl[k], zvl[k]] -= 1.0

        if lay.im_load is not None:
            for j, term in enumerate(lay.im_load["terms"]):
                it = n(term)
                A[it, it] += GMIN
                Rs[it, lay.machine_slot + j] -= 1.0

        return A, Rz, Rs, Ux, Uz, g_of

    def _compile(self, code: int, dmask: int, be: bool,
                 dt: float | None = None) -> _Compiled:
        key = (code, dmask, be, dt)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        lay = self.layout
        A, Rz, Rs, Ux, Uz, g_of = self.matrices(code, dmask, be, dt)
        self._check_structure(A)
        try:
            Ainv = np.linalg.inv(A)
        except np.linalg.LinAlgError as exc:
            raise EngineError(f"singular system matrix: {exc}") from exc
        Xz = Ainv @ Rz
        Xs = Ainv @ Rs
        F = Uz + Ux @ Xz
        Gm = Ux @ Xs

        nd = len(lay.diodes)
        nz, ns = lay.nz, lay.ns
        mon_z = np.zeros((nd, nz))
        mon_s = np.zeros((nd, ns))
        mon_on = np.zeros(nd, dtype=bool)
        for d in lay.diodes:
            ia, ib = lay.node(d["a"]), lay.node(d["b"])
            row = np.zeros(lay.nu)
            if ia is not None:
                row[ia] += 1.0
            if ib is not None:
                row[ib] -= 1.0
            on = (dmask >> d["bit"]) & 1
            mon_on[d["bit"]] = bool(on)
            if on:
                g = d["gon"]
                mon_z[d["bit"]] = g * (row @ Xz)
                mon_s[d["bit"]] = g * (row @ Xs)
                mon_s[d["bit"], 0] -= g * d["vf"]
            else:
                mon_z[d["bit"]] = row @ Xz
                mon_s[d["bit"]] = row @ Xs
                mon_s[d["bit"], 0] -= d["vf"]

        pz, ps = self._probe_rows(g_of, Xz, Xs, F, Gm)
        vz = np.zeros((3, nz))
        vs = np.zeros((3, ns))
        if lay.im_load is not None:
            for j, term in enumerate(lay.im_load["terms"]):
                it = lay.node(term)
                vz[j] = Xz[it]
                vs[j] = Xs[it]

        npr = pz.shape[0]
        out = _Compiled(
            MZ=np.vstack([F, mon_z, pz, vz]),
            MS=np.vstack([Gm, mon_s, ps, vs]),
            nz=nz, mon_on=mon_on,
            sl_mon=slice(nz, nz + nd),
            sl_probe=slice(nz + nd, nz + nd + npr),
            sl_vabc=slice(nz + nd + npr, nz + nd + npr + 3),
        )
        self._cache[key] = out
        return out

    def _check_structure(self, A: np.ndarray):
        scale = np.abs(A).max(axis=1)
        dead = np.where(scale < 1e-15)[0]
        if len(dead):
            idx = int(dead[0])
            for name, i in self.layout.node_index.items():
                if i == idx:
                    raise EngineError(
                        f"floating node {name!r}: nothing connects it in "
                        f"this configuration")
            raise EngineError(f"singular system row {idx}")

    def _probe_rows(self, g_of, Xz, Xs, F, Gm):
        lay = self.layout
        rows_z, rows_s = [], []
        for expr in self._matrix_probes:
            rz, rs = self._one_probe(expr, g_of, Xz, Xs, F, Gm)
            rows_z.append(rz)
            rows_s.append(rs)
        if rows_z:
            return np.array(rows_z), np.array(rows_s)
        return np.zeros((0, lay.nz)), np.zeros((0, lay.ns))

    def _one_probe(self, expr, g_of, Xz, Xs, F, Gm):
        lay = self.layout
        nz, ns = lay.nz, lay.ns

        def node_rows(name):
            if name == "0":
                return np.zeros(nz), np.zeros(ns)
            if name not in lay.node_index:
                raise ConfigError(f"probe {expr!r}: unknown node {name!r}")
            i = lay.node_index[name]
            return Xz[i], Xs[i]

        if expr.startswith("v(") and expr.endswith(")"):
            parts = [p.strip() for p in expr[2:-1].split(",")]
            az, as_ = node_rows(parts[0])
            if len(parts) == 1:
                return az.copy(), as_.copy()
            bz, bs = node_rows(parts[1])
            return az - bz, as_ - bs

        if expr.startswith(("i(", "vb(")) and expr.endswith(")"):
            want_v = expr.startswith("vb(")
            inner = expr.split("(", 1)[1][:-1].strip().lower()
            name, _, sub = inner.partition(".")

            def branch_v(a, b):
                az, as_ = node_rows(a)
                bz, bs = node_rows(b)
                return az - bz, as_ - bs

            for w in lay.w3s:
                if w["name"] == name and sub in ("1", "2", "3"):
                    k = int(sub) - 1
                    if want_v:
                        return branch_v(w["nodes"][2 * k], w["nodes"][2 * k + 1])
                    col = w["cols"][k]
                    return Xz[col].copy(), Xs[col].copy()
            for v in lay.vsrcs:
                if v["name"] == inner:
                    if want_v:
                        return branch_v(v["a"], v["b"])
                    # current delivered out of the first node
                    return -Xz[v["col"]], -Xs[v["col"]]
            for c in lay.caps:
                if c["name"] == inner:
                    if want_v:
                        return branch_v(c["a"], c["b"])
                    return F[c["zi"]].copy(), Gm[c["zi"]].copy()
            for l in lay.inds:
                if l["name"] == inner:
                    if want_v:
                        return branch_v(l["a"], l["b"])
                    return F[l["zi"]].copy(), Gm[l["zi"]].copy()
            for cnd in lay.conductors:
                if cnd["name"] == inner:
                    rz, rs = branch_v(cnd["a"], cnd["b"])
                    if want_v:
                        return rz, rs
                    g = g_of[cnd["name"]]
                    rz, rs = g * rz, g * rs
                    if cnd["kind"] == "d" and cnd.get("vf") \
                            and g == cnd["gon"]:
                        rs[0] -= g * cnd["vf"]
                    return rz, rs
            if lay.im_load and inner.startswith(lay.im_load["name"] + "."):
                ph = inner.rsplit(".", 1)[1]
                if ph in ("a", "b", "c"):
                    rs = np.zeros(ns)
                    rs[lay.machine_slot + "abc".index(ph)] = 1.0
                    return np.zeros(nz), rs
            raise ConfigError(f"probe {expr!r}: unknown element {inner!r}")
        raise ConfigError(f"unknown probe expression {expr!r}")

    # ------------------------------------------------------------- running

    def initial_state(self) -> SimState:
        lay = self.layout
        machine = None
        if lay.im_load is not None:
            drive = lay.im_load["drive"]
            machine = InductionMachine(lay.im_load["params"],
                                       lay.im_load["tl"],
                                       drive_rpm=drive).state
        return SimState(time=0.0, z=lay.initial_z(), diode_mask=0,
                        machine=machine)

    def _consistency(self, z: np.ndarray, dmask: int, s: np.ndarray,
                     code: int, t: float) -> tuple[np.ndarray, int]:
        """Rebuild companion voltage histories after a topology change.

        A backward-Euler solve at dt*1e-3 moves the state only
        O(dt*1e-3 * dx/dt) but lands every companion voltage on the
        post-change topology, so the following trapezoidal step neither
        rings nor dissipates.  The solve runs twice: the first pass absorbs
        any instantaneous current redistribution, the second leaves the
        voltage histories at their post-redistribution values instead of
        the slew average.  Diode states are resolved here as well."""
        nd = len(self.layout.diodes)
        for _ in range(2 * (2 * nd + 2)):
            compiled = self._compile(code, dmask, True, dt=self.dt * 1e-3)
            out = compiled.MZ @ z + compiled.MS @ s
            mon = out[compiled.sl_mon]
            worst, worst_bit = 0.0, -1
            for bit in range(nd):
                v = (-mon[bit] - DIODE_ITOL) if compiled.mon_on[bit] \
                    else (mon[bit] - DIODE_VTOL)
                if v > worst:
                    worst, worst_bit = v, bit
            if worst_bit < 0:
                z2 = out[:compiled.nz]
                out2 = compiled.MZ @ z2 + compiled.MS @ s
                return out2[:compiled.nz], dmask
            dmask ^= 1 << worst_bit
        raise StepError("diode states did not settle at a topology change", t)

    def _advance(self, z, s, code, dmask, be, dt, t):
        """One accepted step at the given step size: diode fixpoint with
        most-violated single flips, minimal-violation acceptance on a flip
        cycle (boundary hover).  Returns (out, dmask, compiled)."""
        nd = len(self.layout.diodes)
        visited = {dmask}
        best = None
        for _ in range(2 * nd + 2):
            compiled = self._compile(code, dmask, be, dt)
            out = compiled.MZ @ z + compiled.MS @ s
            mon = out[compiled.sl_mon]
            worst, worst_bit = 0.0, -1
            for bit in range(nd):
                if compiled.mon_on[bit]:
                    v = -mon[bit] - DIODE_ITOL
                else:
                    v = mon[bit] - DIODE_VTOL
                if v > worst:
                    worst, worst_bit = v, bit
            if worst_bit < 0:
                return out, dmask, compiled
            if best is None or worst < best[0]:
                best = (worst, dmask, out, compiled)
            nxt = dmask ^ (1 << worst_bit)
            if nxt in visited:
                _, dmask, out, compiled = best
                return out, dmask, compiled
            visited.add(nxt)
            dmask = nxt
        raise StepError("diode states did not settle", t)

    EDGE_SUBSTEPS = 8

    def run(self, t_end: float, x0: SimState | None = None,
            stride: int = 1, record: bool = True,
            monodromy: bool = False):
        """Advance ``t_end`` seconds.  Returns ``(trace, final_state)``, or
        ``(trace, final_state, M)`` with ``monodromy=True`` where M is the
        exact state-transition product of the run's accepted step maps
        (the Jacobian of the run as a map on the companion state, valid
        within the run's switching pattern)."""
        lay = self.layout
        dt = self.dt
        nsteps = round(t_end / dt)
        if nsteps < 1 or not math.isclose(nsteps * dt, t_end, rel_tol=1e-9):
            raise ConfigError(f"t_end={t_end} is not a multiple of dt={dt}")
        if self.table is not None:
            period = self.table.steps_per_period
            codes = self.table.codes
            st_flags = self.table.st.astype(float)
        else:
            period = 1
            codes = np.zeros(1, dtype=np.uint32)
            st_flags = np.zeros(1)

        fresh = x0 is None
        state = x0 if x0 is not None else self.initial_state()
        z = state.z.copy()
        dmask = state.diode_mask
        step0 = round(state.time / dt)

        machine = None
        if lay.im_load is not None:
            machine = InductionMachine(lay.im_load["params"],
                                       lay.im_load["tl"],
                                       drive_rpm=lay.im_load["drive"])
            if state.machine is not None:
                machine.state = state.machine

        s = np.zeros(lay.ns)
        s[0] = 1.0

        prev_code = int(codes[(step0 - 1) % period])
        if fresh:
            z, dmask = self._consistency(z, dmask, s, prev_code, 0.0)

        nrec = nsteps // stride if record else 0
        data = np.zeros((nrec, len(self.probes)))
        st_out = np.zeros(nrec)
        st_acc = 0.0
        rec = 0
        probe_cols = [self.probes.index(e) for e in self._matrix_probes]

        prev_key = (prev_code, dmask)

        n_sub = self.EDGE_SUBSTEPS
        dt_sub = dt / n_sub
        mono = np.eye(lay.nz) if monodromy else None

        ac_srcs = lay.ac_sources
        two_pi = 2.0 * math.pi
        for k in range(nsteps):
            idx = (step0 + k) % period
            code = int(codes[idx])
            if machine is not None:
                ms = lay.machine_slot
                s[ms], s[ms + 1], s[ms + 2] = machine.i_abc
            if ac_srcs:
                t_mid = (step0 + k + 0.5) * dt
                for v in ac_srcs:
                    s[v["slot"]] = v["ac"] * math.sin(
                        two_pi * v["f"] * t_mid + v["phase"])
            t_k = (step0 + k + 1) * dt
            if code != prev_key[0]:
                # forced commutation: resolve the winding-current exchange
                # with sub-steps, the first one damped
                z_sub = z
                for m in range(n_sub):
                    out, dmask, compiled = self._advance(
                        z_sub, s, code, dmask, m == 0, dt_sub, t_k)
                    z_sub = out[:compiled.nz]
                    if mono is not None:
                        mono = compiled.MZ[:compiled.nz] @ mono
            else:
                out, dmask, compiled = self._advance(
                    z, s, code, dmask, False, None, t_k)
                if mono is not None:
                    mono = compiled.MZ[:compiled.nz] @ mono

            if machine is not None:
                vabc = out[compiled.sl_vabc]
                machine.step((vabc[0], vabc[1], vabc[2]), dt)
            z = out[:compiled.nz]
            st_acc += st_flags[idx]
            if record and (k + 1) % stride == 0:
                vals = out[compiled.sl_probe]
                for col, val in zip(probe_cols, vals):
                    data[rec, col] = val
                if machine is not None and self._machine_probe_idx:
                    chans = (machine.torque, machine.speed_rpm,
                             *machine.i_abc)
                    for col, ch in self._machine_probe_idx:
                        data[rec, col] = chans[ch]
                st_out[rec] = st_acc / stride
                st_acc = 0.0
                rec += 1
            prev_key = (code, dmask)

        meta = {"dt_engine": dt, "stride": stride}
        if self.spec is not None:
            meta["f_sw"] = self.spec.f_sw
            meta["mode"] = self.spec.mode
        trace = Trace(dt=dt * stride, names=list(self.probes), data=data,
                      st=st_out, meta=meta)
        final = SimState(time=(step0 + nsteps) * dt, z=z, diode_mask=dmask,
                         machine=machine.state if machine else None)
        if monodromy:
            return trace, final, mono
        return trace, final

    def step(self, state: SimState, gates: dict[str, bool]) -> SimState:
        """Advance one step with explicit gate states.

        A lone step has no trustworthy trapezoidal history, so the
        companion voltages are made consistent first, then one trapezoidal
        step runs with the same diode fixpoint as :meth:`run`.
        """
        code = 0
        for sw in self.layout.switches:
            if gates.get(sw["name"]) and sw["bit"] is not None:
                code |= 1 << sw["bit"]
        s = np.zeros(self.layout.ns)
        s[0] = 1.0
        z_work, dmask = self._consistency(state.z, state.diode_mask, s, code,
                                          state.time)
        out, dmask, compiled = self._advance(z_work, s, code, dmask, False,
                                             None, state.time + self.dt)
        return SimState(time=state.time + self.dt, z=out[:compiled.nz],
                        diode_mask=dmask, machine=state.machine)


def resolve_diodes(engine: Engine, state: SimState,
                   gates: dict[str, bool] | None = None) -> SwitchConfiguration:
    """Diode states consistent with one candidate step from ``state``.

    Runs the same most-violated-flip fixpoint the stepping loop uses and
    returns the full switch/diode configuration it settles on.
    """
    gates = gates or {}
    new = engine.step(state, gates)
    switches = {sw["name"]: bool(gates.get(sw["name"]))
                for sw in engine.layout.switches}
    diodes = {d["name"]: bool((new.diode_mask >> d["bit"]) & 1)
              for d in engine.layout.diodes}
    return SwitchConfiguration(switches=switches, diodes=diodes)


def assemble(circuit: Circuit, config: SwitchConfiguration, dt: float,
             be: bool = False):
    """System matrices for one explicit switch/diode configuration.

    Returns ``(engine, A, Rz, Rs)`` where the right-hand side of
    ``A x = Rz z + Rs s`` runs over the companion history ``z`` and source
    vector ``s`` (slot 0 is the constant 1).  Raises a structured error
    naming any floating node.
    """
    eng = Engine(circuit, dt)
    for i, sw in enumerate(eng.layout.switches):
        sw["bit"] = i
    code = 0
    for i, sw in enumerate(eng.layout.switches):
        if config.switches.get(sw["name"]):
            code |= 1 << i
    dmask = 0
    for d in eng.layout.diodes:
        if config.diodes.get(d["name"]):
            dmask |= 1 << d["bit"]
    A, Rz, Rs, _, _, _ = eng.matrices(code, dmask, be)
    eng._check_structure(A)
    return eng, A, Rz, Rs


def simulate(circuit: Circuit, spec: ModulationSpec | None, t_end: float,
             dt: float, probes: list[str], stride: int = 1,
             x0: SimState | None = None) -> tuple[Trace, SimState]:
    """One-shot simulation of a circuit under a modulation spec."""
    eng = Engine(circuit, dt, probes, spec)
    return eng.run(t_end, x0=x0, stride=stride)
