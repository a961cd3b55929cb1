class OSegmentError(Exception):
    """Base class for every error raised by this package."""


class DomainError(OSegmentError, ValueError):
    pass


class RangeError(OSegmentError, ValueError):
    pass


class ParseError(OSegmentError, ValueError):
    pass


class ValidationError(OSegmentError, ValueError):
    pass


class PreconditionError(OSegmentError, ValueError):
    pass


class ResolutionError(OSegmentError, ArithmeticError):
    """A numerical search could not resolve its target at the configured resolution."""


class CapacityError(OSegmentError):
    """A configured size cap (family size, depth, q_max, ...) is too small."""

    def __init__(self, message, required=None):
        super().__init__(message)
        self.required = required


class HorizonError(OSegmentError, ValueError):
    pass


class OracleContractError(OSegmentError):
    """A space adapter returned a set violating its documented contract."""
