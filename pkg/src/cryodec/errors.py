"""Exception hierarchy. Everything raised by this package derives from CryodecError."""


class CryodecError(Exception):
    """Base class for all cryodec errors."""


class ParameterError(CryodecError, ValueError):
    """Invalid or non-finite model parameter."""


class RangeError(CryodecError, ValueError):
    """Value outside its physically representable range."""


class ShapeError(CryodecError, ValueError):
    """Array dimension mismatch."""


class OverdriveError(CryodecError, ValueError):
    """Drive voltage outside the safe inference window (device disturbance risk)."""


class DestructiveReadError(CryodecError, ValueError):
    """Read voltage at or above the switching threshold would disturb the device."""


class ConvergenceError(CryodecError, RuntimeError):
    """Write-verify loop exhausted its pulse budget. Carries the final state."""

    def __init__(self, msg, state=None, pulses_used=None):
        super().__init__(msg)
        self.state = state
        self.pulses_used = pulses_used


class ProtocolError(CryodecError, RuntimeError):
    """Analog-memory trigger protocol violation (release without latch)."""


class TimeOrderingError(CryodecError, ValueError):
    """Event timestamps out of order (release before latch)."""


class PresetLookupError(CryodecError, KeyError):
    """Unknown temperature preset; no interpolation between operating points."""


class CapacityError(CryodecError, ValueError):
    """Problem instance too large for exact enumeration."""


class DivergenceError(CryodecError, RuntimeError):
    """Training loss became non-finite."""

    def __init__(self, msg, epoch=None):
        super().__init__(msg)
        self.epoch = epoch


class ConfigError(CryodecError, ValueError):
    """Malformed or inconsistent configuration file."""


class DependencyError(CryodecError, FileNotFoundError):
    """A required upstream artifact file is missing."""
