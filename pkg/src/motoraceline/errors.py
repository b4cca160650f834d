"""Exception types shared across the package."""


class MotoRacelineError(Exception):
    """Base class for all package errors."""


class DomainError(MotoRacelineError):
    """Query outside the surface parameter domain or a non-physical configuration."""


class RegularityError(MotoRacelineError):
    """Degenerate surface parametrization (near-parallel tangents or zero normal)."""


class OffsetSingularityError(MotoRacelineError):
    """(I - n*II) is singular or ill-conditioned: normal offset at focal distance."""


class LowSpeedError(MotoRacelineError):
    """Contact speed too low for the slip-angle model to be meaningful."""


class InfeasibleForceError(MotoRacelineError):
    """Longitudinal force request exceeds the friction-ellipse major axis."""


class NewtonConvergenceError(MotoRacelineError):
    """Algebraic-state Newton solve failed to converge."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class TrackFormatError(MotoRacelineError):
    """Malformed track definition; message carries the offending field path."""


class TrackValidationError(MotoRacelineError):
    """Track parses but produces an irregular or self-intersecting surface."""


class TranscriptionError(MotoRacelineError):
    """Raceline problem could not be transcribed (e.g. irregular grid point)."""


class SolverFailureError(MotoRacelineError):
    """NLP solver did not converge; diagnostics attached."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
