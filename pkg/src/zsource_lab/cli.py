"""Command-line front end.

Subcommands: analyze, design, parse, simulate, steady, case, compare.
Exit codes: 0 success, 1 domain/simulation error, 2 usage error.
All subcommands accept --json for machine-readable output; --repro strips
the wall-clock metadata so identical invocations are bit-identical.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from datetime import datetime, timezone

from . import analytics
from .errors import ZSourceError
from .harness import (CASE_IDS, Scenario, builtin_scenario, compare_cases,
                      render_compare_text, run, shoot_steady)
from .netlist import NetlistError, parse as parse_netlist, serialize


def _meta(args) -> dict:
    if getattr(args, "repro", False):
        return {}
    return {"generated_at": datetime.now(timezone.utc).isoformat()}


def _emit(args, doc: dict, text: str) -> None:
    if getattr(args, "json", False):
        doc = dict(doc)
        meta = _meta(args)
        if meta:
            doc["meta"] = meta
        print(json.dumps(doc, sort_keys=True, default=float))
    else:
        print(text, end="" if text.endswith("\n") else "\n")


def _turns(text: str) -> tuple[float, float, float]:
    parts = text.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("turns must be a:b:c")
    return tuple(float(p) for p in parts)


def cmd_analyze(args) -> int:
    k, p = args.k, args.p
    pred_kw = {}
    b = analytics.boost_proposed(k, p, args.d)
    v_c1, v_c2 = analytics.cap_voltages(k, p, args.d, args.vdc)
    v_pn = analytics.dc_link(k, p, args.d, args.vdc)
    v_l1, v_lr = analytics.nst_inductor_voltages(k, p, args.vdc, v_c1, v_c2)
    doc = {"B": b, "V_C1": v_c1, "V_C2": v_c2, "V_pn": v_pn,
           "V_L1_nst": v_l1, "V_Lr_nst": v_lr,
           "d_max": analytics.duty_feasibility(k, p)}
    if args.m is not None:
        doc["V_ac_peak"] = analytics.ac_peak(args.m, k, p, args.d, args.vdc)
    text = "\n".join(f"{key} = {val:.6g}" for key, val in doc.items())
    _emit(args, doc, text)
    return 0


def cmd_design(args) -> int:
    n1, n2, n3 = args.turns
    k, p = n2 / n1, n3 / n1
    d = analytics.solve_duty(args.boost, k, p)
    d_max = analytics.duty_feasibility(k, p)
    doc = {"d": d, "d_max": d_max, "margin": d_max - d,
           "K": k, "P": p, "B": args.boost}
    text = (f"d = {d:.6g}\nd_max = {d_max:.6g}\n"
            f"margin to d_max = {d_max - d:.6g}")
    _emit(args, doc, text)
    return 0


def cmd_parse(args) -> int:
    try:
        with open(args.netlist) as fh:
            text = fh.read()
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        circuit = parse_netlist(text, filename=args.netlist)
    except NetlistError as exc:
        for diag in exc.diagnostics:
            print(str(diag), file=sys.stderr)
        return 1
    doc = {"elements": len(circuit.elements),
           "nodes": sorted(circuit.nodes)}
    text_out = (f"ok: {len(circuit.elements)} elements, "
                f"{len(circuit.nodes)} nodes")
    if args.canon:
        canon = serialize(circuit)
        with open(args.canon, "w", newline="\n") as fh:
            fh.write(canon)
        text_out += f"\ncanonical netlist written to {args.canon}"
        doc["canonical"] = args.canon
    _emit(args, doc, text_out)
    return 0


def _load_scenario(path: str) -> Scenario:
    with open(path) as fh:
        return Scenario.from_json(fh.read())


def _write_outputs(args, scenario, trace, report) -> list[str]:
    outdir = args.out
    os.makedirs(outdir, exist_ok=True)
    written = []
    trace_path = os.path.join(outdir, "trace.csv")
    trace.to_csv(trace_path)
    written.append(trace_path)
    rep_json = os.path.join(outdir, "report.json")
    with open(rep_json, "w", newline="\n") as fh:
        doc = report.to_dict()
        meta = _meta(args)
        if meta:
            doc["meta"] = meta
        fh.write(json.dumps(doc, indent=2, sort_keys=True, default=float))
        fh.write("\n")
    written.append(rep_json)
    rep_txt = os.path.join(outdir, "report.txt")
    with open(rep_txt, "w", newline="\n") as fh:
        fh.write(report.to_text())
    written.append(rep_txt)
    from .plotting import render_report_figures
    written += render_report_figures(trace, scenario.roles, outdir)
    return written


def cmd_simulate(args) -> int:
    scenario = _load_scenario(args.scenario)
    trace, report = run(scenario)
    files = _write_outputs(args, scenario, trace, report)
    doc = {"scenario": scenario.name, "files": files,
           "b_meas": report.b_meas, "settled": report.settled}
    _emit(args, doc, f"{scenario.name}: wrote {len(files)} files to "
                     f"{args.out}")
    return 0


def cmd_case(args) -> int:
    scenario = builtin_scenario(args.case)
    if args.t_end:
        scenario.t_end = args.t_end
    if args.dt:
        scenario.dt = args.dt
    trace, report = run(scenario)
    files = _write_outputs(args, scenario, trace, report)
    summary = [f"{args.case}:"]
    if report.b_meas is not None:
        summary.append(f"B_meas~{report.b_meas:.2f}")
    if "v(o)" in report.signal_stats:
        summary.append(
            f"V_out~{report.signal_stats['v(o)']['mean']:.1f} V")
    if "v(p)" in report.signal_stats and report.b_meas is not None:
        summary.append(
            f"V_pn(NST)~{report.b_meas * scenario.params.v_dc:.0f} V")
    summary.append(f"P_src={report.source_power:.1f} W")
    summary.append("settled" if report.settled else "NOT settled")
    doc = {"case": args.case, "files": files, "report": report.to_dict()}
    _emit(args, doc, " ".join(summary))
    return 0


def cmd_steady(args) -> int:
    if args.scenario in CASE_IDS:
        scenario = builtin_scenario(args.scenario)
    else:
        scenario = _load_scenario(args.scenario)
    if args.dt:
        scenario.dt = args.dt
    state = shoot_steady(scenario)
    doc = {"scenario": scenario.name,
           "periodic_state": [float(v) for v in state.as_vector()],
           "diode_mask": state.diode_mask}
    text = (f"{scenario.name}: periodic state found, "
            f"|x| = {max(abs(v) for v in state.as_vector()):.6g}")
    _emit(args, doc, text)
    return 0


def cmd_compare(args) -> int:
    overrides = {}
    if args.t_end:
        overrides = {cid: {"t_end": args.t_end} for cid in CASE_IDS}
    doc = compare_cases(overrides=overrides)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        path = os.path.join(args.out, "compare.json")
        with open(path, "w", newline="\n") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True, default=float)
        doc["written"] = path
    _emit(args, doc, render_compare_text(doc))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="zsource-lab",
        description="Y-network impedance converter design and simulation")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--json", action="store_true",
                       help="machine-readable output")
        p.add_argument("--repro", action="store_true",
                       help="suppress wall-clock metadata")

    p = sub.add_parser("analyze", help="closed-form operating point")
    p.add_argument("--k", type=float, required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--d", type=float, required=True)
    p.add_argument("--vdc", type=float, required=True)
    p.add_argument("--m", type=float, default=None)
    common(p)
    p.set_defaults(fn=cmd_analyze)

    p = sub.add_parser("design", help="duty ratio for a target boost")
    p.add_argument("--boost", type=float, required=True)
    p.add_argument("--turns", type=_turns, required=True,
                   help="winding turns a:b:c")
    common(p)
    p.set_defaults(fn=cmd_design)

    p = sub.add_parser("parse", help="validate a netlist file")
    p.add_argument("netlist")
    p.add_argument("--canon", help="write canonical netlist here")
    common(p)
    p.set_defaults(fn=cmd_parse)

    p = sub.add_parser("simulate", help="run a scenario file")
    p.add_argument("scenario", help="scenario JSON path")
    p.add_argument("--out", default="out", help="output directory")
    common(p)
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("steady", help="periodic steady state by shooting")
    p.add_argument("scenario", help="builtin case id or scenario JSON path")
    p.add_argument("--dt", type=float, default=None)
    common(p)
    p.set_defaults(fn=cmd_steady)

    p = sub.add_parser("case", help="run a builtin case study")
    p.add_argument("case", choices=CASE_IDS)
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--t-end", type=float, default=None)
    p.add_argument("--dt", type=float, default=None)
    common(p)
    p.set_defaults(fn=cmd_case)

    p = sub.add_parser("compare", help="comparison report across cases")
    p.add_argument("--out", default=None)
    p.add_argument("--t-end", type=float, default=None,
                   help="shorten the case runs")
    common(p)
    p.set_defaults(fn=cmd_compare)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except ZSourceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
