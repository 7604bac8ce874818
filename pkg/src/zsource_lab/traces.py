"""Uniformly sampled simulation traces and their CSV export."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError


@dataclass
class Trace:
    """Time series of probed signals.

    ``data`` holds one column per signal, one row per sample; sample k sits
    at t = (k+1)*dt (post-step states).  ``st`` carries the shoot-through
    occupancy of each sample window in [0, 1]: 1 when every engine step in
    the window was shoot-through, 0 when none was.
    """

    dt: float
    names: list[str]
    data: np.ndarray
    st: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.dt <= 0:
            raise ConfigError("trace dt must be positive")
        if self.data.ndim != 2 or self.data.shape[1] != len(self.names):
            raise ConfigError("trace data shape does not match signal names")
        if len(self.st) != len(self.data):
            raise ConfigError("st channel length mismatch")
        if len(set(self.names)) != len(self.names):
            raise ConfigError("duplicate signal names in trace")

    def __len__(self):
        return len(self.data)

    @property
    def t(self) -> np.ndarray:
        return (np.arange(len(self.data)) + 1) * self.dt

    def col(self, name: str) -> np.ndarray:
        try:
            return self.data[:, self.names.index(name)]
        except ValueError:
            raise KeyError(f"no signal {name!r}; have {self.names}") from None

    def window(self, seconds: float) -> "Trace":
        """Trailing window of the given duration."""
        n = min(len(self.data), max(1, round(seconds / self.dt)))
        return Trace(dt=self.dt, names=self.names, data=self.data[-n:],
                     st=self.st[-n:], meta=dict(self.meta))

    def to_csv(self, path):
        """CSV export: header ``t,<signal>...,st``, full double precision,
        LF line endings."""
        t = self.t
        cols = [t] + [self.data[:, i] for i in range(len(self.names))] \
            + [self.st.astype(float)]
        arr = np.column_stack(cols)
        header = "t," + ",".join(self.names) + ",st"
        with open(path, "w", newline="\n") as fh:
            fh.write(header + "\n")
            np.savetxt(fh, arr, delimiter=",", fmt="%.17g", newline="\n")


def period_means(trace: Trace, f_period: float, name: str) -> np.ndarray:
    """Mean of one signal over each whole period of ``1/f_period``."""
    spp = 1.0 / (f_period * trace.dt)
    if abs(spp - round(spp)) > 1e-6:
        raise ConfigError("sample period does not divide the requested period")
    spp = round(spp)
    x = trace.col(name)
    n = (len(x) // spp) * spp
    if n == 0:
        raise ConfigError("trace shorter than one period")
    return x[len(x) - n:].reshape(-1, spp).mean(axis=1)
