"""Exception types shared across the package."""


class CVDiscError(Exception):
    """Base class for all package errors."""


class ParameterError(CVDiscError, ValueError):
    """A physical parameter is outside its admissible domain."""


class TruncationError(CVDiscError):
    """The Fock cutoff discards more probability mass than tolerated."""

    def __init__(self, message, tail_mass=None, cutoff=None):
        super().__init__(message)
        self.tail_mass = tail_mass
        self.cutoff = cutoff


class StateValidityError(CVDiscError, ValueError):
    """A matrix fails the density-matrix invariants (Hermitian, PSD, trace)."""


class DegenerateScenarioError(CVDiscError, ValueError):
    """The eavesdropper injects no noise, so the normal form is undefined."""


class NumericError(CVDiscError):
    """A numerical procedure did not reach its requested tolerance."""

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class ConfigError(CVDiscError):
    """Invalid run configuration; ``field`` names the offending entry."""

    def __init__(self, message, field=None):
        if field:
            message = f"{field}: {message}"
        super().__init__(message)
        self.field = field
