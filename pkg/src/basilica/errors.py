"""Exception hierarchy shared by all modules."""


class BasilicaError(Exception):
    """Base class for every error raised by the package."""


class InputError(BasilicaError, ValueError):
    """Malformed numerical input (non-finite entries, bad masses, ...)."""


class DomainError(BasilicaError, ValueError):
    """An argument lies outside the domain of the operation."""


class CapacityError(BasilicaError):
    """A requested level exceeds the configured memory budget."""


class SingularBlockError(BasilicaError, ArithmeticError):
    """The eliminated block of a Schur complement is singular."""

    def __init__(self, shift, message=None):
        self.shift = shift
        super().__init__(message or f"discarded block is singular at shift {shift!r}")


class NoRealPreimageError(DomainError):
    """The quadratic preimage equation has a negative discriminant."""


class ExceptionalCollisionError(DomainError):
    """Eigenfunction propagation reached the exceptional value 2p."""


class RangeError(BasilicaError, ValueError):
    """Too few spectral atoms in the requested fitting window."""


class SchemeValidationError(BasilicaError):
    """A resistance scheme violates positivity, additivity or decay."""

    def __init__(self, address, reason):
        self.address = address
        self.reason = reason
        super().__init__(f"{reason} at address {address}")
