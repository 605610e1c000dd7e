"""Exception types raised across the package."""


class LatticeError(Exception):
    """Base class for all package errors."""


class SingularBasis(LatticeError, ValueError):
    pass


class BudgetExceeded(LatticeError):
    """Enumeration would visit more vectors than the configured budget."""


class CutoffTooLarge(BudgetExceeded):
    pass


class NotSummable(LatticeError, ValueError):
    """The requested lattice sum diverges for this potential/dimension."""


class DegenerateTangent(LatticeError):
    """Bond constraints pin the Gram matrix completely (rigid lattice)."""


class SignError(LatticeError, ArithmeticError):
    """Energy differences have the wrong sign for the chosen reference lattice."""


class NotConverged(LatticeError):
    pass


class NoAdmissibleSeed(LatticeError):
    pass


class NonMonotonePhases(UserWarning):
    """A phase label reappeared along a sweep; reported, never raised."""
