"""Exception types shared across the toolkit."""


class ZSourceError(Exception):
    """Base class for all toolkit errors."""


class DomainError(ZSourceError):
    """A parameter set is outside the valid operating domain (infeasible
    duty ratio, unreachable gain, pole in a transfer ratio)."""


class ConfigError(ZSourceError):
    """A simulation or modulation configuration is inconsistent (time step
    does not divide the switching period, probe does not exist, ...)."""


class StepError(ZSourceError):
    """A time step could not be completed.  Carries the simulation time."""

    def __init__(self, message: str, time: float):
        super().__init__(f"t={time:.9g} s: {message}")
        self.time = time


class StructureError(ZSourceError):
    """A circuit does not have the element inventory an operation needs."""
