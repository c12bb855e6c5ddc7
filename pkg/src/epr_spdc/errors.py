"""Exception types raised across the package."""


class DomainError(ValueError):
    """Argument outside the documented domain of a numeric routine."""


class PhaseMatchError(ValueError):
    """No collinear phase-matching angle exists for the material/wavelength."""


class PreconditionError(ValueError):
    """A documented precondition (e.g. z > L) was violated."""


class WindowTooSmallError(RuntimeError):
    """Sampled density carries too much weight at the window boundary."""


class UnreliableMomentError(RuntimeError):
    """Tail mass of a profile is too large for a trustworthy second moment."""


class GridTooCoarseError(ValueError):
    """Grid spacing does not resolve the aperture kernel."""


class ResolutionError(ValueError):
    """DFT grid does not resolve the oscillations of the sampled field."""


class FitError(RuntimeError):
    """Profile fit did not converge."""


class ConfigError(ValueError):
    """Invalid run configuration. ``line`` is the 1-based line number, if known."""

    def __init__(self, message, line=None, field=None):
        self.line = line
        self.field = field
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)


class ConvergenceError(RuntimeError):
    """An adaptive integrator exhausted its budget before meeting the tolerance."""
