"""Line-oriented netlist format: parse, validate, serialize, and the
built-in Y-network converter circuits.

Grammar
-------
One element per line.  ``#`` starts a comment.  Tokens are whitespace
separated::

    <name> <node> <node> [...] key=value [key=value ...]

The element kind is the longest prefix of the (case-insensitive) name that
matches a known kind: ``v r l c d s w3 load3``.  Two-terminal kinds take two
nodes, ``w3`` takes six (winding 1 a/b, winding 2 a/b, winding 3 a/b) and
``load3`` takes three phase terminals.  Values accept the SI suffixes
``p n u m k meg``.  Node ``0`` is the mandatory ground reference.

Every diagnostic carries a stable code and the source line; malformed input
never yields a partially built circuit.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

from .errors import StructureError

SI_SUFFIXES = {
    "p": 1e-12,
    "n": 1e-9,
    "u": 1e-6,
    "m": 1e-3,
    "k": 1e3,
    "meg": 1e6,
}

# kind -> (number of nodes, required params, optional params with defaults)
KINDS: dict[str, tuple[int, tuple[str, ...], dict[str, float | str | None]]] = {
    "v": (2, ("dc",), {"ac": 0.0, "f": 0.0, "phase": 0.0}),
    "r": (2, ("r",), {}),
    "l": (2, ("l",), {"i0": 0.0, "esr": 0.0}),
    "c": (2, ("c",), {"v0": 0.0, "esr": 0.0}),
    "d": (2, (), {"vf": 0.0, "ron": 1e-3, "roff": 1e6}),
    "s": (2, (), {"ron": 1e-3, "roff": 1e6}),
    "w3": (6, ("turns", "lm"), {"ll1": 0.15e-6, "ll2": 0.15e-6, "ll3": 0.15e-6,
                                "im0": 0.0}),
    "load3": (3, ("type",), {"r": None, "l": None,
                             "rs": 2.125, "rr": 2.05, "lls": 2e-3, "llr": 2e-3,
                             "lm": 6.4e-3, "j": 0.015, "pp": 2.0,
                             "tl": 0.0, "drive": None}),
}

# longest-prefix order so load3 wins over l
_KIND_ORDER = ("load3", "w3", "v", "r", "l", "c", "d", "s")

_NUM_RE = re.compile(
    r"^([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)(p|n|u|m|k|meg)?$",
    re.IGNORECASE,
)


@dataclass
class Diagnostic:
    line: int
    code: str
    message: str
    file: str = "<netlist>"

    def __str__(self):
        return f"{self.file}:{self.line}: {self.code}: {self.message}"


class NetlistError(StructureError):
    """Raised with the full list of diagnostics for a malformed netlist."""

    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = diagnostics
        super().__init__("\n".join(str(d) for d in diagnostics))


@dataclass(frozen=True)
class Element:
    kind: str
    name: str
    nodes: tuple[str, ...]
    params: dict

    def __post_init__(self):
        # dataclass is frozen but params stays a plain dict; treat as immutable
        pass

    def p(self, key: str):
        return self.params[key]


@dataclass(frozen=True)
class Circuit:
    elements: tuple[Element, ...]
    nodes: frozenset[str]

    @property
    def name_index(self) -> dict[str, Element]:
        return {e.name: e for e in self.elements}

    def __getitem__(self, name: str) -> Element:
        return self.name_index[name.lower()]

    def of_kind(self, kind: str) -> list[Element]:
        return [e for e in self.elements if e.kind == kind]

    def structurally_equal(self, other: "Circuit") -> bool:
        if len(self.elements) != len(other.elements):
            return False
        for a, b in zip(self.elements, other.elements):
            if (a.kind, a.name, a.nodes) != (b.kind, b.name, b.nodes):
                return False
            if a.params != b.params:
                return False
        return True


def parse_value(token: str) -> float:
    """Parse a numeric token with an optional SI suffix."""
    m = _NUM_RE.match(token)
    if not m:
        raise ValueError(f"not a numeric value: {token!r}")
    suffix = (m.group(2) or "").lower()
    mult = SI_SUFFIXES.get(suffix, 1.0)
    return float(m.group(1)) * mult


def format_value(value) -> str:
    """Canonical text for a parameter value.

    Numeric values get the shortest SI-suffixed form that parses back to the
    exact same float; otherwise the full repr is used (which always round
    trips).  Strings pass through unchanged.
    """
    if isinstance(value, str):
        return value
    if value is None:
        return "none"
    x = float(value)
    if x == 0.0:
        return "0"

    def shorten(s):
        return s[:-2] if s.endswith(".0") else s

    candidates = [shorten(repr(x))]
    for suffix, mult in sorted(SI_SUFFIXES.items(), key=lambda kv: kv[1]):
        scaled = x / mult
        if 1.0 <= abs(scaled) < 1000.0:
            for text in (shorten(repr(scaled)), "%.17g" % scaled):
                if float(text) * mult == x:
                    candidates.append(f"{text}{suffix}")
                    break
    return min(candidates, key=len)


def _kind_of(name: str) -> str | None:
    low = name.lower()
    for kind in _KIND_ORDER:
        if low.startswith(kind):
            return kind
    return None


_STRING_PARAMS = {"turns", "type"}


def parse(text: str, filename: str = "<netlist>") -> Circuit:
    """Parse netlist source into a validated :class:`Circuit`.

    Raises :class:`NetlistError` carrying one diagnostic per problem; a
    partially valid circuit is never returned.
    """
    diags: list[Diagnostic] = []
    elements: list[Element] = []
    names_seen: set[str] = set()

    def err(line_no, code, msg):
        diags.append(Diagnostic(line=line_no, code=code, message=msg,
                                file=filename))

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        name = tokens[0].lower()
        kind = _kind_of(name)
        if kind is None:
            err(line_no, "E_KIND", f"unknown element kind for {tokens[0]!r}")
            continue
        n_nodes, required, optional = KINDS[kind]
        rest = tokens[1:]
        node_tokens = [t for t in rest if "=" not in t]
        param_tokens = [t for t in rest if "=" in t]
        if len(node_tokens) != n_nodes:
            err(line_no, "E_ARITY",
                f"{kind} element {name!r} needs {n_nodes} nodes, "
                f"got {len(node_tokens)}")
            continue
        if name in names_seen:
            err(line_no, "E_DUPNAME", f"duplicate element name {name!r}")
            continue
        names_seen.add(name)

        nodes = tuple(t.lower() for t in node_tokens)
        params: dict = dict(optional)
        bad = False
        for tok in param_tokens:
            key, _, val = tok.partition("=")
            key = key.lower()
            if key not in required and key not in optional:
                err(line_no, "E_PARAM_UNKNOWN",
                    f"{name!r} does not take parameter {key!r}")
                bad = True
                continue
            if key in _STRING_PARAMS or (key == "drive" and kind == "load3"):
                params[key] = val.lower() if key == "type" else val
                if key == "drive":
                    try:
                        params[key] = parse_value(val)
                    except ValueError:
                        err(line_no, "E_UNIT",
                            f"bad value {val!r} for {key!r}")
                        bad = True
                continue
            try:
                params[key] = parse_value(val)
            except ValueError:
                err(line_no, "E_UNIT", f"bad value or unit suffix {val!r} "
                                       f"for parameter {key!r}")
                bad = True
        if bad:
            continue
        missing = [k for k in required if k not in params]
        if missing:
            err(line_no, "E_PARAM_MISSING",
                f"{name!r} missing required parameter(s): {', '.join(missing)}")
            continue
        diag_count = len(diags)
        _validate_element(kind, name, params, line_no, err)
        if len(diags) > diag_count:
            continue
        elements.append(Element(kind=kind, name=name, nodes=nodes,
                                params=params))

    node_set = {n for e in elements for n in e.nodes}
    if elements and "0" not in node_set:
        err(0, "E_NOGROUND", "netlist has no ground node '0'")

    # connectivity: every node reachable from ground
    if elements and "0" in node_set:
        adj: dict[str, set[str]] = {n: set() for n in node_set}
        for e in elements:
            for a in e.nodes:
                adj[a].update(n for n in e.nodes if n != a)
        seen = {"0"}
        stack = ["0"]
        while stack:
            for nb in adj[stack.pop()]:
                if nb not in seen:
                    seen.add(nb)
                    stack.append(nb)
        floating = sorted(node_set - seen)
        if floating:
            err(0, "E_FLOATING",
                f"node(s) not reachable from ground: {', '.join(floating)}")

    if diags:
        raise NetlistError(diags)
    return Circuit(elements=tuple(elements), nodes=frozenset(node_set))


def _validate_element(kind, name, params, line_no, err):
    def positive(key):
        v = params.get(key)
        if v is None or not (isinstance(v, float) and math.isfinite(v) and v > 0):
            err(line_no, "E_PARAM_VALUE",
                f"{name!r}: parameter {key!r} must be a positive finite "
                f"value, got {params.get(key)!r}")

    def finite(key):
        v = params.get(key)
        if isinstance(v, float) and not math.isfinite(v):
            err(line_no, "E_PARAM_VALUE",
                f"{name!r}: parameter {key!r} must be finite")

    if kind == "r":
        positive("r")
    elif kind == "l":
        positive("l")
        finite("i0")
    elif kind == "c":
        positive("c")
        finite("v0")
    elif kind in ("d", "s"):
        positive("ron")
        positive("roff")
        if params["ron"] >= params["roff"]:
            err(line_no, "E_PARAM_VALUE",
                f"{name!r}: ron must be smaller than roff")
    elif kind == "v":
        finite("dc")
    elif kind == "w3":
        positive("lm")
        turns = params.get("turns", "")
        parts = str(turns).split(":")
        ok = len(parts) == 3
        if ok:
            try:
                ratios = [float(t) for t in parts]
                ok = all(r > 0 and math.isfinite(r) for r in ratios)
            except ValueError:
                ok = False
        if not ok:
            err(line_no, "E_PARAM_VALUE",
                f"{name!r}: turns must be 'a:b:c' with positive values, "
                f"got {turns!r}")
    elif kind == "load3":
        t = params.get("type")
        if t not in ("r", "rl", "im"):
            err(line_no, "E_PARAM_VALUE",
                f"{name!r}: type must be one of r, rl, im, got {t!r}")
            return
        if t in ("r", "rl") and not (isinstance(params.get("r"), float)
                                     and params["r"] > 0):
            err(line_no, "E_PARAM_VALUE", f"{name!r}: type={t} needs r>0")
        if t == "rl" and not (isinstance(params.get("l"), float)
                              and params["l"] > 0):
            err(line_no, "E_PARAM_VALUE", f"{name!r}: type=rl needs l>0")


def turns_ratios(w3: Element) -> tuple[float, float, float]:
    """Winding turns of a w3 element as floats (n1, n2, n3)."""
    a, b, c = (float(t) for t in w3.p("turns").split(":"))
    return a, b, c


def serialize(circuit: Circuit, header: str = "zsource-lab netlist") -> str:
    """Canonical netlist text: lowercase, parameters sorted by key, SI
    suffixes used where the float value is represented exactly.

    ``parse(serialize(c))`` is structurally identical to ``c``.
    """
    lines = [f"# {header}"]
    for e in circuit.elements:
        parts = [e.name, *e.nodes]
        _, required, optional = KINDS[e.kind]
        for key in sorted(e.params):
            val = e.params[key]
            if key in optional and val == optional[key]:
                continue  # defaults stay implicit
            if val is None:
                continue
            parts.append(f"{key}={format_value(val)}")
        lines.append(" ".join(parts))
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# Built-in reference converter
# --------------------------------------------------------------------------

@dataclass
class ComponentValues:
    """Component values for the built-in converter netlist."""

    c1: float = 220e-6
    c2: float = 680e-6
    lr: float = 330e-6
    lm: float = 370e-6
    ll: float = 0.15e-6
    r_load: float = 245.0          # dcdc load
    c_f: float = 470e-6            # dcdc output filter
    ron: float = 1e-3
    roff: float = 1e6
    vf: float = 0.0
    esr_c: float = 0.0
    esr_l: float = 0.0

    def with_parasitics(self) -> "ComponentValues":
        """The documented nominal parasitic set."""
        out = ComponentValues(**self.__dict__)
        out.esr_c = 20e-3
        out.esr_l = 50e-3
        out.ron = 10e-3
        out.vf = 0.45
        return out


@dataclass
class LoadSpec:
    """Three-phase load attached to the inverter bridge."""

    kind: str = "rl"               # r | rl | im
    r: float = 30.0
    l: float = 10e-3
    tl: float = 0.0                # load torque, im only
    drive_rpm: float | None = None # locked shaft speed, im only


# Reference wiring of the converter network (see README for the loop
# derivation that pins it):
#   source in-0, winding1 in-x, diode d1 x-y, winding2 y-w, cap c2 w-0,
#   winding3 x-z, cap c1 p-z, series inductor lr w-p, bridge across p-0.
_NETWORK_TEMPLATE = """\
v1 in 0 dc={vdc}
w3a in x y w x z turns={turns} lm={lm} ll1={ll} ll2={ll} ll3={ll}
{d1_line}
c1 p z c={c1}{esr_c}
c2 w 0 c={c2}{esr_c}
lr w p l={lr}{esr_l}
"""

_DCDC_TAIL = """\
s1 p 0 ron={ron} roff={roff}
do p o vf={vf} ron={ron} roff={roff}
cf o 0 c={cf}
rload o 0 r={rload}
"""

_BRIDGE_TAIL = """\
sap p a ron={ron} roff={roff}
san a 0 ron={ron} roff={roff}
sbp p b ron={ron} roff={roff}
sbn b 0 ron={ron} roff={roff}
scp p c ron={ron} roff={roff}
scn c 0 ron={ron} roff={roff}
{load_line}
"""

LINK_NODE = "p"


def builtin(params, values: ComponentValues | None = None,
            mode: str = "dcdc", load: LoadSpec | None = None,
            d1_as_switch: bool = False) -> Circuit:
    """Reference converter netlist for a feasible operating point.

    ``mode`` selects the network termination: ``dcdc`` adds a shoot-through
    switch, output diode, filter capacitor and resistive load; ``inverter``
    adds a three-leg bridge and a three-phase load.  ``d1_as_switch``
    replaces the network diode with an actively gated switch (gated on
    outside shoot-through) for bidirectional power flow.
    """
    values = values or ComponentValues()
    if mode not in ("dcdc", "inverter"):
        raise ValueError(f"mode must be dcdc or inverter, got {mode!r}")
    ll = max(values.ll, 1e-9)      # solver floor, avoids an all-ideal winding loop
    esr_c = f" esr={format_value(values.esr_c)}" if values.esr_c else ""
    esr_l = f" esr={format_value(values.esr_l)}" if values.esr_l else ""
    if d1_as_switch:
        d1_line = f"sd1 x y ron={format_value(values.ron)} roff={format_value(values.roff)}"
    else:
        d1_line = (f"d1 x y vf={format_value(values.vf)} "
                   f"ron={format_value(values.ron)} roff={format_value(values.roff)}")
    turns = f"{params.n1:g}:{params.n2:g}:{params.n3:g}"
    text = _NETWORK_TEMPLATE.format(
        vdc=format_value(params.v_dc), turns=turns,
        lm=format_value(values.lm), ll=format_value(ll),
        c1=format_value(values.c1), c2=format_value(values.c2),
        lr=format_value(values.lr), d1_line=d1_line,
        esr_c=esr_c, esr_l=esr_l,
    )
    if mode == "dcdc":
        text += _DCDC_TAIL.format(
            ron=format_value(values.ron), roff=format_value(values.roff),
            vf=format_value(values.vf), cf=format_value(values.c_f),
            rload=format_value(values.r_load),
        )
    else:
        load = load or LoadSpec()
        if load.kind == "im":
            parts = [f"load3m a b c type=im tl={format_value(load.tl)}"]
            if load.drive_rpm is not None:
                parts.append(f"drive={format_value(load.drive_rpm)}")
            load_line = " ".join(parts)
        elif load.kind == "rl":
            load_line = (f"load3m a b c type=rl r={format_value(load.r)} "
                         f"l={format_value(load.l)}")
        else:
            load_line = f"load3m a b c type=r r={format_value(load.r)}"
        text += _BRIDGE_TAIL.format(
            ron=format_value(values.ron), roff=format_value(values.roff),
            load_line=load_line,
        )
    return parse(text, filename=f"<builtin:{mode}>")


def network_section(circuit: Circuit, link_node: str = LINK_NODE) -> list[Element]:
    """Elements of the impedance network proper.

    The network is everything incident to a node reachable from the source's
    positive terminal without passing through ground or the DC-link node, so
    bridge legs and the output stage are excluded.
    """
    sources = circuit.of_kind("v")
    if not sources:
        raise StructureError("circuit has no source")
    start = sources[0].nodes[0]
    blocked = {"0", link_node}
    adj: dict[str, set[str]] = {}
    for e in circuit.elements:
        for a in e.nodes:
            adj.setdefault(a, set()).update(n for n in e.nodes if n != a)
    seen = {start}
    stack = [start] if start not in blocked else []
    while stack:
        node = stack.pop()
        for nb in adj.get(node, ()):
            if nb not in seen and nb not in blocked:
                seen.add(nb)
                stack.append(nb)
    inner = seen - blocked
    return [e for e in circuit.elements
            if any(n in inner for n in e.nodes) and e.kind != "v"]
