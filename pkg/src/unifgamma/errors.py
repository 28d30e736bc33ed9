"""Exception hierarchy shared by all modules."""


class UnifGammaError(Exception):
    """Base class for every error raised by this package."""


class InvalidInputError(UnifGammaError, ValueError):
    """Malformed or non-finite input data."""


class DomainError(UnifGammaError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class UnsupportedSpaceError(UnifGammaError, ValueError):
    """Operation not available for the requested target space."""


class UnsupportedStructureError(UnifGammaError, ValueError):
    """Operator lacks the structure (e.g. diagonal) an operation needs."""


class InvalidBasisError(UnifGammaError, ValueError):
    """Basis columns are not orthonormal within tolerance."""

    def __init__(self, message, defect):
        super().__init__(message)
        self.defect = defect


class NumericRangeError(UnifGammaError, ArithmeticError):
    """Overflow or index arithmetic beyond the representable range."""


class StabilityError(UnifGammaError, ValueError):
    """Time step violates the declared fidelity guard."""


class InvariantViolation(UnifGammaError, AssertionError):
    """A mathematical invariant failed numerically.

    ``witness`` carries whatever data reproduces the failure.
    """

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness
