"""Exception hierarchy shared by all phaseflip modules."""


class PhaseFlipError(Exception):
    """Base class for every error raised by this package."""


class SizeError(PhaseFlipError, ValueError):
    pass


class QubitIndexError(PhaseFlipError, IndexError):
    pass


class CompositionError(PhaseFlipError):
    """A circuit contains stochastic elements and has no single unitary."""


class DegeneratePulseError(PhaseFlipError, ValueError):
    pass


class CalibrationError(PhaseFlipError):
    pass


class ResonanceError(PhaseFlipError):
    pass


class ConnectivityError(PhaseFlipError):
    pass


class ReadoutConstraintError(PhaseFlipError):
    pass


class InconsistentCoherenceError(PhaseFlipError, ValueError):
    pass


class TimeError(PhaseFlipError, ValueError):
    pass


class DomainError(PhaseFlipError, ValueError):
    pass


class FitError(PhaseFlipError):
    pass


class DegenerateFitError(FitError):
    pass


class ConfigError(PhaseFlipError):
    """Config failed schema validation. ``path`` names the offending key."""

    def __init__(self, message: str, path: str = ""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path
