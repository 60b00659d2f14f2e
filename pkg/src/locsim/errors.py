"""Exception hierarchy shared by every locsim module."""


class LocError(Exception):
    """Base class for all simulator errors."""


class ConfigurationError(LocError):
    pass


class ModeError(LocError):
    """A mode is unknown, occupied when it must be fresh, or otherwise misused."""


class ModeCollisionError(ModeError):
    pass


class DegenerateStateError(LocError):
    """Raised when normalizing or conditioning on (near-)zero probability."""


class DomainError(LocError):
    pass


class ValidationError(LocError):
    pass


class CapacityError(LocError):
    """Photon number exceeds a hard cap."""


class ElementError(LocError):
    """Wraps an error raised while applying the element at ``index``."""

    def __init__(self, index: int, cause: Exception):
        self.index = index
        self.cause = cause
        super().__init__(f"element {index}: {cause}")
