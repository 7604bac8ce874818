"""Waveform figures for the report path.

Every report directory gets, next to trace.csv and report.json/txt, a small
set of PNG figures rendered from the trace: converter-side voltages, input
current, and machine signals when present.
"""

from __future__ import annotations

import os

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .traces import Trace


def _plot_group(ax, trace: Trace, series: list[tuple[str, str]]):
    t_ms = trace.t * 1e3
    for probe, label in series:
        ax.plot(t_ms, trace.col(probe), linewidth=0.8, label=label)
    ax.set_xlabel("t (ms)")
    ax.grid(True, alpha=0.3)
    ax.legend(loc="upper right", fontsize=8)


def render_report_figures(trace: Trace, roles: dict[str, str],
                          outdir: str, prefix: str = "fig") -> list[str]:
    """Render the standard waveform figures; returns the written paths."""
    os.makedirs(outdir, exist_ok=True)
    written = []

    groups: list[tuple[str, list[tuple[str, str]], str]] = []
    volt = [(roles[r], lab) for r, lab in
            (("v_out", "v_out"), ("v_pn", "v_pn"),
             ("v_c1", "v_C1"), ("v_c2", "v_C2"))
            if r in roles and roles[r] in trace.names]
    if volt:
        groups.append(("voltages", volt, "V"))
    amps = [(roles[r], lab) for r, lab in
            (("i_in", "input current"), ("i_load", "load current"))
            if r in roles and roles[r] in trace.names]
    if amps:
        groups.append(("currents", amps, "A"))
    mach = [(n, n) for n in ("im(torque)", "im(speed)") if n in trace.names]
    if mach:
        groups.append(("machine", mach, ""))

    for name, series, unit in groups:
        fig, ax = plt.subplots(figsize=(8, 3.2), dpi=130)
        _plot_group(ax, trace, series)
        if unit:
            ax.set_ylabel(unit)
        fig.tight_layout()
        path = os.path.join(outdir, f"{prefix}_{name}.png")
        fig.savefig(path)
        plt.close(fig)
        written.append(path)
    return written
