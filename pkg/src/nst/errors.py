"""Exception and warning types raised by the solvers and analysis code."""


class NSTError(Exception):
    """Base class for all errors raised by this package."""


class DimensionMismatch(NSTError, ValueError):
    pass


class RankDeficient(NSTError):
    """A (or a Gram matrix built from it) is numerically singular."""


class SingularSubmatrix(NSTError):
    """The selected columns A_T are (numerically) linearly dependent."""


class SparsityTooLarge(NSTError, ValueError):
    pass


class CombinatorialBlowup(NSTError):
    """Exhaustive support enumeration would exceed the configured cap."""


class NotParseval(NSTError, ValueError):
    pass


class ConditionNotMet(NSTError, ValueError):
    """A convergence certificate was used outside its rho < 1 regime."""


class NonConvergenceWarning(RuntimeWarning):
    """Power iteration hit its iteration cap before reaching tolerance."""
