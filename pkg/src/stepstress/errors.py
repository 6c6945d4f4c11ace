"""Exception hierarchy shared across the package."""


class StepStressError(Exception):
    """Base class for all errors raised by this package."""


class DesignError(StepStressError, ValueError):
    """Invalid test plan (inspection times, stress levels, censoring times)."""


class DomainError(StepStressError, ValueError):
    """A quantity was requested outside its mathematical domain."""


class IllPosedError(StepStressError, ValueError):
    """Estimation is not well posed for the observed counts.

    The divergence objective needs at least one recorded failure per
    competing risk under each stress level.
    """


class NonConvergenceError(StepStressError, RuntimeError):
    """The optimizer failed to locate a stationary point."""


class SingularInformationError(StepStressError, RuntimeError):
    """The information matrix is numerically singular."""


class DegenerateDataError(StepStressError, RuntimeError):
    """Repeated simulated datasets violated the well-posedness condition."""


class DatasetFormatError(StepStressError, ValueError):
    """A data or scenario file could not be parsed."""

    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        self.path = path
        self.line = line
        prefix = ""
        if path is not None:
            prefix = f"{path}:"
            if line is not None:
                prefix += f"{line}:"
            prefix += " "
        super().__init__(prefix + message)


class SimulationError(StepStressError, RuntimeError):
    """Too many Monte Carlo replicates failed to produce an estimate."""
