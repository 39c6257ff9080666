"""Exception types raised across the package."""


class DyncapError(Exception):
    """Base class for package errors."""


class SymmetryViolation(DyncapError, ValueError):
    """Spectral coefficients do not describe real data."""


class NonPositiveA(DyncapError, ValueError):
    pass


class NonPositivePermeability(DyncapError, ValueError):
    pass


class NonPositiveWidth(DyncapError, ValueError):
    pass


class CutoffTooTight(DyncapError, ValueError):
    """The box of interest is not inside the ball where the cutoff equals one."""


class EmptySampleSet(DyncapError, ValueError):
    pass


class UnstableMode(DyncapError, ArithmeticError):
    pass


class NoConvergence(DyncapError, RuntimeError):
    pass


class WindowEscape(DyncapError, RuntimeError):
    """Solution left the lambda window on which the flux is modelled."""


class MissingTimeDerivative(DyncapError, ValueError):
    pass


class RangeEscape(DyncapError, ValueError):
    pass


class SupportEscape(DyncapError, ValueError):
    pass


class InconsistentRuns(DyncapError, ValueError):
    pass


class GridMismatch(DyncapError, ValueError):
    pass


class CFLViolation(DyncapError, ValueError):
    pass


class EqualStates(DyncapError, ValueError):
    pass


class NoTangency(DyncapError, ValueError):
    pass


class BoxMismatch(DyncapError, ValueError):
    pass


class ScheduleRejected(DyncapError, ValueError):
    """A scaling schedule fails the exponent inequalities of its regime."""
