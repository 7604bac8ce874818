"""Closed-form steady-state algebra for the Y-network converter family.

The converter under study couples a three-winding inductor (turns
``n1:n2:n3``), one series inductor, two capacitors and one network diode
between a DC source and a switching bridge.  With the turns ratios

    K = n2 / n1,   P = n3 / n1

and a shoot-through duty ratio ``d``, volt-second balance over the two
operating intervals gives the capacitor voltages

    V_C1 = d (1+K) / D * V_dc
    V_C2 = (1-d)(1+P) / D * V_dc,      D = (1-d)(1+P) - d(1+K)

and the peak (non-shoot-through) DC link voltage V_pn = B * V_dc with the
boost factor

    B = (1+P) / D.

Everything in this module is a pure function of plain floats; no state, no
side effects.  Equality checks use a relative tolerance of 1e-9 because all
quantities are rational in the inputs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .errors import DomainError

REL_TOL = 1e-9

# Steady-state and component-count facts for the two earlier converter
# generations this design is routinely compared against.  The qualitative
# rows are carried verbatim as strings, never computed.
PRIOR_TOPOLOGIES = ("classical_yzsi", "improved_yzsi", "modified_yzsi")

_STATIC_ROWS = {
    "capacitors": {"proposed": 2, "improved_yzsi": 2, "modified_yzsi": 4},
    "inductors": {
        "proposed": "Y-source winding + one inductor",
        "improved_yzsi": "Y-source winding + one inductor",
        "modified_yzsi": "Y-source winding + two inductors",
    },
    "network_diodes": {"proposed": 1, "improved_yzsi": 1, "modified_yzsi": 2},
    "continuous_input_current": {
        "proposed": "Yes", "improved_yzsi": "Yes", "modified_yzsi": "Yes",
    },
    "startup_inrush_current": {
        "proposed": "Yes", "improved_yzsi": "No", "modified_yzsi": "-",
    },
    "soft_switching": {
        "proposed": "Yes, it helps to soft switching in induction loads.",
        "improved_yzsi": "No", "modified_yzsi": "No",
    },
    "common_grounding": {
        "proposed": "Yes", "improved_yzsi": "Yes", "modified_yzsi": "Yes",
    },
    "efficiency": {
        "proposed": "Well", "improved_yzsi": "Low", "modified_yzsi": "well",
    },
}


def duty_feasibility(k: float, p: float) -> float:
    """Largest usable shoot-through duty ratio, d_max = (1+P)/(2+K+P).

    The boost denominator (1-d)(1+P) - d(1+K) is positive exactly for
    d < d_max.
    """
    if k <= 0 or p <= 0:
        raise DomainError(f"turns ratios must be positive, got K={k}, P={p}")
    return (1.0 + p) / (2.0 + k + p)


def _check_duty(k: float, p: float, d: float) -> float:
    d_max = duty_feasibility(k, p)
    if not 0.0 <= d < d_max:
        raise DomainError(
            f"shoot-through duty d={d} outside [0, d_max) with "
            f"d_max={d_max:.9g} for K={k}, P={p}"
        )
    return d_max


def boost_proposed(k: float, p: float, d: float) -> float:
    """Boost factor B = (1+P) / ((1-d)(1+P) - d(1+K))."""
    _check_duty(k, p, d)
    return (1.0 + p) / ((1.0 - d) * (1.0 + p) - d * (1.0 + k))


def cap_voltages(k: float, p: float, d: float, v_dc: float) -> tuple[float, float]:
    """Steady capacitor voltages (V_C1, V_C2) for source voltage ``v_dc``."""
    _check_duty(k, p, d)
    delta = (1.0 - d) * (1.0 + p) - d * (1.0 + k)
    v_c1 = d * (1.0 + k) / delta * v_dc
    v_c2 = (1.0 - d) * (1.0 + p) / delta * v_dc
    return v_c1, v_c2


def dc_link(k: float, p: float, d: float, v_dc: float) -> float:
    """Peak DC-link voltage V_pn.

    Computed two ways, as B*V_dc and as the capacitor-voltage combination
    V_C1 + (1+P)/(1+K)*V_C2 - (P-K)/(1+K)*V_dc; both must agree to 1e-9
    relative or the algebra is inconsistent.
    """
    b = boost_proposed(k, p, d)
    v_pn = b * v_dc
    v_c1, v_c2 = cap_voltages(k, p, d, v_dc)
    v_pn_alt = v_c1 + (1.0 + p) / (1.0 + k) * v_c2 - (p - k) / (1.0 + k) * v_dc
    if not math.isclose(v_pn, v_pn_alt, rel_tol=REL_TOL, abs_tol=1e-12):
        raise AssertionError(
            f"DC-link recombination mismatch: {v_pn} vs {v_pn_alt}"
        )
    return v_pn


def nst_inductor_voltages(
    k: float, p: float, v_dc: float, v_c1: float, v_c2: float
) -> tuple[float, float]:
    """Inductor voltages during the non-shoot-through interval.

    Returns ``(V_L1, V_Lr)`` where L1 is the magnetizing branch referred to
    winding 1 and Lr the series network inductor:

        V_L1 = (V_dc - V_C2) / (1+K)
        V_Lr = (P-K)/(1+K) * (V_dc - V_C2) - V_C1
    """
    if k <= 0 or p <= 0:
        raise DomainError(f"turns ratios must be positive, got K={k}, P={p}")
    v_l1 = (v_dc - v_c2) / (1.0 + k)
    v_lr = (p - k) / (1.0 + k) * (v_dc - v_c2) - v_c1
    return v_l1, v_lr


def ac_peak(m: float, k: float, p: float, d: float, v_dc: float) -> float:
    """Peak AC phase voltage (M/2) * B * V_dc.

    This is the standard carrier-based relation for a bridge fed from a
    boosted link: the phase leg swings over the full link voltage, so the
    fundamental peak is half the link voltage scaled by the modulation
    index M.
    """
    if not 0.0 <= m <= 1.0:
        raise DomainError(f"modulation index M={m} outside [0, 1]")
    return 0.5 * m * boost_proposed(k, p, d) * v_dc


def solve_duty(b_target: float, k: float, p: float) -> float:
    """Invert the boost relation: the unique d in [0, d_max) giving ``b_target``.

    Closed form: d = (1+P)(B-1) / (B(2+K+P)).  The round trip through
    :func:`boost_proposed` is the correctness oracle for this inversion.
    """
    if k <= 0 or p <= 0:
        raise DomainError(f"turns ratios must be positive, got K={k}, P={p}")
    if b_target < 1.0:
        raise DomainError(f"boost target {b_target} below unity is unreachable")
    if not math.isfinite(b_target):
        raise DomainError("boost target must be finite")
    return (1.0 + p) * (b_target - 1.0) / (b_target * (2.0 + k + p))


@dataclass(frozen=True)
class ConverterParams:
    """Operating point of the Y-network converter.

    Turns are stored, the ratios K = n2/n1 and P = n3/n1 are always
    recomputed so they can never drift out of sync with the turns.
    """

    n1: float
    n2: float
    n3: float
    d: float
    f_sw: float
    v_dc: float
    m: float | None = None

    def __post_init__(self):
        if min(self.n1, self.n2, self.n3) <= 0:
            raise DomainError(f"winding turns must be positive: "
                              f"{self.n1}:{self.n2}:{self.n3}")
        if self.f_sw <= 0:
            raise DomainError(f"switching frequency must be positive: {self.f_sw}")
        _check_duty(self.k, self.p, self.d)
        if self.m is not None:
            if not 0.0 <= self.m <= 1.0:
                raise DomainError(f"modulation index {self.m} outside [0, 1]")
            if self.m + self.d > 1.0 + 1e-12:
                raise DomainError(
                    f"simple-boost infeasible: M + d = {self.m + self.d} > 1"
                )

    @property
    def k(self) -> float:
        return self.n2 / self.n1

    @property
    def p(self) -> float:
        return self.n3 / self.n1

    @property
    def d_max(self) -> float:
        return duty_feasibility(self.k, self.p)

    @classmethod
    def from_turns(cls, turns: str, **kw) -> "ConverterParams":
        """Build from a 'a:b:c' turns string, e.g. '1:3.4:1'."""
        parts = turns.split(":")
        if len(parts) != 3:
            raise DomainError(f"turns must be 'a:b:c', got {turns!r}")
        n1, n2, n3 = (float(t) for t in parts)
        return cls(n1=n1, n2=n2, n3=n3, **kw)

    def predict(self) -> "AnalyticPrediction":
        return predict(self)


@dataclass(frozen=True)
class PriorTopologyParams:
    """Parameters of an earlier-generation Y-source converter."""

    topology: str
    n1: float
    n2: float
    n3: float
    d: float

    def __post_init__(self):
        if self.topology not in PRIOR_TOPOLOGIES:
            raise DomainError(f"unknown topology {self.topology!r}, "
                              f"expected one of {PRIOR_TOPOLOGIES}")
        if min(self.n1, self.n2, self.n3) <= 0:
            raise DomainError("winding turns must be positive")
        if self.n3 == self.n2:
            raise DomainError("N3 == N2 puts a pole in the winding factor")

    @property
    def k_factor(self) -> float:
        return (self.n3 + self.n1) / (self.n3 - self.n2)


def boost_prior(params: PriorTopologyParams) -> float:
    """Boost factor of a prior-generation converter.

    classical:            B = 1 / (1 - K d)
    improved / modified:  B = 1 / (1 - (K+1) d),   K = (N3+N1)/(N3-N2)
    """
    k = params.k_factor
    slope = k if params.topology == "classical_yzsi" else k + 1.0
    den = 1.0 - slope * params.d
    if den <= 0.0:
        raise DomainError(
            f"{params.topology}: boost denominator 1 - {slope:.9g}*d is "
            f"{den:.9g} at d={params.d}; operating point infeasible"
        )
    return 1.0 / den


@dataclass(frozen=True)
class AnalyticPrediction:
    """Full steady-state prediction at one operating point."""

    v_c1: float
    v_c2: float
    v_pn: float
    b: float
    v_l1_nst: float
    v_lr_nst: float
    v_ac_peak: float | None = None

    def to_dict(self) -> dict:
        out = {
            "B": self.b,
            "V_C1": self.v_c1,
            "V_C2": self.v_c2,
            "V_pn": self.v_pn,
            "V_L1_nst": self.v_l1_nst,
            "V_Lr_nst": self.v_lr_nst,
        }
        if self.v_ac_peak is not None:
            out["V_ac_peak"] = self.v_ac_peak
        return out


def predict(params: ConverterParams) -> AnalyticPrediction:
    """Evaluate the full steady-state prediction for one operating point."""
    k, p, d, v = params.k, params.p, params.d, params.v_dc
    b = boost_proposed(k, p, d)
    v_c1, v_c2 = cap_voltages(k, p, d, v)
    v_pn = dc_link(k, p, d, v)
    v_l1, v_lr = nst_inductor_voltages(k, p, v, v_c1, v_c2)
    v_ac = ac_peak(params.m, k, p, d, v) if params.m is not None else None
    return AnalyticPrediction(
        v_c1=v_c1, v_c2=v_c2, v_pn=v_pn, b=b,
        v_l1_nst=v_l1, v_lr_nst=v_lr, v_ac_peak=v_ac,
    )


@dataclass
class ComparisonReport:
    """Structured comparison between the converter and prior topologies."""

    columns: list[str]
    rows: list[dict] = field(default_factory=list)

    def add_row(self, label: str, values: dict):
        self.rows.append({"label": label, "values": values})

    def to_dict(self) -> dict:
        return {"columns": self.columns, "rows": self.rows}

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, **kw)

    def to_text(self) -> str:
        """Aligned plain-text table."""
        headers = ["row"] + self.columns
        table = [headers]
        for row in self.rows:
            cells = [row["label"]]
            for col in self.columns:
                val = row["values"].get(col, "-")
                if isinstance(val, float):
                    cells.append(f"{val:.4g}")
                else:
                    cells.append(str(val))
            table.append(cells)
        widths = [max(len(r[i]) for r in table) for i in range(len(headers))]
        lines = []
        for i, cells in enumerate(table):
            lines.append("  ".join(c.ljust(w) for c, w in zip(cells, widths)))
            if i == 0:
                lines.append("  ".join("-" * w for w in widths))
        return "\n".join(lines) + "\n"


def comparison_table(
    proposed: ConverterParams,
    priors: list[PriorTopologyParams] | None = None,
) -> ComparisonReport:
    """Comparison report: static component/behaviour rows plus computed
    boost-factor rows (boost at each converter's own duty, and the duty each
    converter needs to match the proposed boost)."""
    priors = list(priors or [])
    columns = ["proposed"] + [p.topology for p in priors]
    rep = ComparisonReport(columns=columns)

    for label, values in _STATIC_ROWS.items():
        row = {"proposed": values["proposed"]}
        for pr in priors:
            row[pr.topology] = values.get(pr.topology, "-")
        rep.add_row(label, row)

    b_prop = boost_proposed(proposed.k, proposed.p, proposed.d)
    row_b = {"proposed": b_prop}
    row_d = {"proposed": proposed.d}
    for pr in priors:
        row_b[pr.topology] = boost_prior(pr)
        # duty the prior topology needs for the proposed boost factor
        slope = pr.k_factor if pr.topology == "classical_yzsi" else pr.k_factor + 1.0
        row_d[pr.topology] = (1.0 - 1.0 / b_prop) / slope
    rep.add_row("boost_factor_at_own_duty", row_b)
    rep.add_row("duty_for_equal_boost", row_d)
    rep.add_row("shoot_through_duty", {"proposed": proposed.d, **{
        pr.topology: pr.d for pr in priors}})
    return rep
