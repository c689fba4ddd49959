"""Exception hierarchy shared by all catpulse modules."""


class CatpulseError(Exception):
    """Base class for every error raised by catpulse."""


class InvalidDimensionError(CatpulseError, ValueError):
    pass


class LayoutError(CatpulseError, ValueError):
    """Unknown label, duplicated label or mismatched tensor layout."""


class InvalidStateError(CatpulseError, ValueError):
    pass


class BoundaryViolationError(CatpulseError, ValueError):
    """Envelope does not vanish at the edges of its time window."""


class InvalidRateError(CatpulseError, ValueError):
    pass


class ModelError(CatpulseError, ValueError):
    pass


class DegenerateStateError(CatpulseError, ValueError):
    pass


class ZeroProbabilityError(CatpulseError, ValueError):
    pass


class WignerGridError(CatpulseError, ValueError):
    pass


class WrongModelError(CatpulseError, ValueError):
    pass


class UnboundedOptimumError(CatpulseError, ValueError):
    pass


class ConfigError(CatpulseError, ValueError):
    pass


class IntegrationError(CatpulseError, RuntimeError):
    """ODE integration failed; ``diagnostics`` holds the integrator counters."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class TruncationError(IntegrationError):
    """Population leaked into the highest retained Fock level."""


class OptimizationError(CatpulseError, RuntimeError):
    """An objective evaluation failed; ``kappa_ex`` is the offending point."""

    def __init__(self, message, kappa_ex):
        super().__init__(message)
        self.kappa_ex = kappa_ex
