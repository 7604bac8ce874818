"""Three-phase load models.

Resistive and series-RL loads are handled directly by the circuit engine;
this module owns the squirrel-cage induction machine: a standard
flux-linkage dq model in the stationary reference frame, integrated with
RK4, plus the per-phase equivalent-circuit steady-state oracle used to
validate it.

The stationary frame avoids any frame-speed bookkeeping under the
non-sinusoidal bridge voltages the machine sees in converter simulations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

_SQRT3_2 = math.sqrt(3.0) / 2.0


@dataclass(frozen=True)
class IMParams:
    """Machine ratings and equivalent-circuit parameters.

    Defaults are the 3.4 kW / 400 V / 50 Hz machine used by the built-in
    inverter scenarios; pole pairs follow from the 1440 rpm rating at 50 Hz
    (synchronous 1500 rpm).
    """

    v_rated: float = 400.0        # line-line, V rms
    p_rated: float = 3.4e3        # W
    f_rated: float = 50.0         # Hz
    n_rated: float = 1440.0       # rpm
    rs: float = 2.125             # stator resistance, ohm
    rr: float = 2.05              # rotor resistance (referred), ohm
    lls: float = 2e-3             # stator leakage, H
    llr: float = 2e-3             # rotor leakage, H
    lm: float = 6.4e-3            # magnetizing inductance, H
    j: float = 0.015              # rotor inertia, kg m^2
    pole_pairs: int = 2

    def __post_init__(self):
        vals = (self.rs, self.rr, self.lls, self.llr, self.lm, self.j)
        if any(v <= 0 for v in vals):
            raise ValueError("machine parameters must be positive")
        if self.pole_pairs < 1 or self.pole_pairs != int(self.pole_pairs):
            raise ValueError("pole pairs must be an integer >= 1")

    @property
    def ls(self) -> float:
        return self.lls + self.lm

    @property
    def lr(self) -> float:
        return self.llr + self.lm

    @property
    def omega_sync(self) -> float:
        """Synchronous mechanical speed at rated frequency, rad/s."""
        return 2.0 * math.pi * self.f_rated / self.pole_pairs


@dataclass(frozen=True)
class IMState:
    """Flux linkages (stationary dq), rotor speed and angle."""

    lam_qs: float = 0.0
    lam_ds: float = 0.0
    lam_qr: float = 0.0
    lam_dr: float = 0.0
    omega_m: float = 0.0          # mechanical, rad/s
    theta_m: float = 0.0


def abc_to_dq(fa: float, fb: float, fc: float) -> tuple[float, float]:
    """Amplitude-invariant stationary transform, q axis on phase a."""
    fq = (2.0 / 3.0) * (fa - 0.5 * fb - 0.5 * fc)
    fd = (fc - fb) / math.sqrt(3.0)
    return fq, fd


def dq_to_abc(fq: float, fd: float) -> tuple[float, float, float]:
    fa = fq
    fb = -0.5 * fq - _SQRT3_2 * fd
    fc = -0.5 * fq + _SQRT3_2 * fd
    return fa, fb, fc


def _currents(p: IMParams, lam_qs, lam_ds, lam_qr, lam_dr):
    det = p.ls * p.lr - p.lm * p.lm
    iqs = (p.lr * lam_qs - p.lm * lam_qr) / det
    ids = (p.lr * lam_ds - p.lm * lam_dr) / det
    iqr = (p.ls * lam_qr - p.lm * lam_qs) / det
    idr = (p.ls * lam_dr - p.lm * lam_ds) / det
    return iqs, ids, iqr, idr


def electromagnetic_torque(p: IMParams, state: IMState) -> float:
    iqs, ids, _, _ = _currents(p, state.lam_qs, state.lam_ds,
                               state.lam_qr, state.lam_dr)
    return 1.5 * p.pole_pairs * (state.lam_ds * iqs - state.lam_qs * ids)


def _derivs(p: IMParams, x, vq, vd, t_load, locked_omega):
    lam_qs, lam_ds, lam_qr, lam_dr, omega_m = x
    iqs, ids, iqr, idr = _currents(p, lam_qs, lam_ds, lam_qr, lam_dr)
    w_r = p.pole_pairs * omega_m
    d_lam_qs = vq - p.rs * iqs
    d_lam_ds = vd - p.rs * ids
    d_lam_qr = -p.rr * iqr + w_r * lam_dr
    d_lam_dr = -p.rr * idr - w_r * lam_qr
    if locked_omega is None:
        te = 1.5 * p.pole_pairs * (lam_ds * iqs - lam_qs * ids)
        d_omega = (te - t_load) / p.j
    else:
        d_omega = 0.0
    return (d_lam_qs, d_lam_ds, d_lam_qr, d_lam_dr, d_omega)


def _rk4(p, x, vq, vd, t_load, locked_omega, dt):
    k1 = _derivs(p, x, vq, vd, t_load, locked_omega)
    x2 = tuple(a + 0.5 * dt * b for a, b in zip(x, k1))
    k2 = _derivs(p, x2, vq, vd, t_load, locked_omega)
    x3 = tuple(a + 0.5 * dt * b for a, b in zip(x, k2))
    k3 = _derivs(p, x3, vq, vd, t_load, locked_omega)
    x4 = tuple(a + dt * b for a, b in zip(x, k3))
    k4 = _derivs(p, x4, vq, vd, t_load, locked_omega)
    return tuple(
        a + dt / 6.0 * (b1 + 2 * b2 + 2 * b3 + b4)
        for a, b1, b2, b3, b4 in zip(x, k1, k2, k3, k4)
    )


def im_step(state: IMState, v_abc, load_torque: float, dt: float,
            params: IMParams | None = None,
            locked_omega: float | None = None):
    """Advance the machine one step of ``dt``.

    Returns ``(new_state, i_abc, torque)``.  Terminal voltages are held
    constant over the step (the caller integrates the supply).  With
    ``locked_omega`` set, the shaft speed is forced (externally driven) and
    the mechanical equation is skipped.
    """
    p = params or IMParams()
    vq, vd = abc_to_dq(*v_abc)
    omega = locked_omega if locked_omega is not None else state.omega_m
    x = (state.lam_qs, state.lam_ds, state.lam_qr, state.lam_dr, omega)
    x = _rk4(p, x, vq, vd, load_torque, locked_omega, dt)
    new = IMState(
        lam_qs=x[0], lam_ds=x[1], lam_qr=x[2], lam_dr=x[3],
        omega_m=omega if locked_omega is not None else x[4],
        theta_m=(state.theta_m + omega * dt) % (2.0 * math.pi),
    )
    iqs, ids, _, _ = _currents(p, x[0], x[1], x[2], x[3])
    te = 1.5 * p.pole_pairs * (x[1] * iqs - x[0] * ids)
    return new, dq_to_abc(iqs, ids), te


def im_power_balance(p: IMParams, state: IMState, v_abc):
    """Instantaneous power bookkeeping for audit tests.

    Returns (electrical input, copper loss, field-energy, mechanical out).
    """
    vq, vd = abc_to_dq(*v_abc)
    iqs, ids, iqr, idr = _currents(p, state.lam_qs, state.lam_ds,
                                   state.lam_qr, state.lam_dr)
    p_in = 1.5 * (vq * iqs + vd * ids)
    p_cu = 1.5 * (p.rs * (iqs ** 2 + ids ** 2) + p.rr * (iqr ** 2 + idr ** 2))
    w_field = 0.75 * (state.lam_qs * iqs + state.lam_ds * ids
                      + state.lam_qr * iqr + state.lam_dr * idr)
    te = electromagnetic_torque(p, state)
    return p_in, p_cu, w_field, te * state.omega_m


def im_steady_torque(slip: float, v_line: float, f: float,
                     params: IMParams | None = None) -> float:
    """Per-phase equivalent-circuit torque at a given slip.

    Classical steady-state expression: T = P_airgap / (w_sync / pole_pairs)
    with P_airgap = 3 |I_r|^2 R_r / s.  Exactly zero at zero slip.
    """
    p = params or IMParams()
    if slip == 0.0:
        return 0.0
    w = 2.0 * math.pi * f
    v_ph = v_line / math.sqrt(3.0)
    z_r = p.rr / slip + 1j * w * p.llr
    z_m = 1j * w * p.lm
    z_par = z_m * z_r / (z_m + z_r)
    z_tot = p.rs + 1j * w * p.lls + z_par
    i_s = v_ph / z_tot
    v_gap = v_ph - i_s * (p.rs + 1j * w * p.lls)
    i_r = v_gap / z_r
    p_airgap = 3.0 * abs(i_r) ** 2 * p.rr / slip
    return p_airgap * p.pole_pairs / w


def im_steady_powers(slip: float, v_line: float, f: float,
                     params: IMParams | None = None):
    """(total electrical input, airgap power) from the equivalent circuit."""
    p = params or IMParams()
    w = 2.0 * math.pi * f
    v_ph = v_line / math.sqrt(3.0)
    z_r = p.rr / slip + 1j * w * p.llr if slip != 0 else complex("inf")
    z_m = 1j * w * p.lm
    z_par = z_m if slip == 0 else z_m * z_r / (z_m + z_r)
    z_tot = p.rs + 1j * w * p.lls + z_par
    i_s = v_ph / z_tot
    p_in = 3.0 * (v_ph * i_s.conjugate()).real
    if slip == 0:
        return p_in, 0.0
    v_gap = v_ph - i_s * (p.rs + 1j * w * p.lls)
    i_r = v_gap / z_r
    return p_in, 3.0 * abs(i_r) ** 2 * p.rr / slip


class InductionMachine:
    """Stateful wrapper used by the circuit engine (weak coupling: the
    machine advances once per engine step from the latest terminal voltages
    and its phase currents are stamped as current sources)."""

    def __init__(self, params: IMParams | None = None, load_torque: float = 0.0,
                 drive_rpm: float | None = None):
        self.params = params or IMParams()
        self.load_torque = load_torque
        self.locked_omega = (
            None if drive_rpm is None else drive_rpm * 2.0 * math.pi / 60.0)
        init_omega = self.locked_omega or 0.0
        self.state = IMState(omega_m=init_omega)
        self.i_abc = (0.0, 0.0, 0.0)
        self.torque = 0.0

    def step(self, v_abc, dt: float):
        self.state, self.i_abc, self.torque = im_step(
            self.state, v_abc, self.load_torque, dt,
            params=self.params, locked_omega=self.locked_omega)
        return self.i_abc

    @property
    def speed_rpm(self) -> float:
        return self.state.omega_m * 60.0 / (2.0 * math.pi)
