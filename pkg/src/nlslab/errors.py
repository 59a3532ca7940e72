"""Exception hierarchy for the lab.

Everything raised on purpose derives from NLSLabError so callers (CLI,
sweep harness) can distinguish computation failures from bugs.
"""


class NLSLabError(Exception):
    """Base class for all lab errors."""


class GridMismatchError(NLSLabError):
    """Fields defined on different grids were combined."""


class SolverError(NLSLabError):
    """An iterative solver failed (bracket not found, no convergence)."""


class AccuracyError(NLSLabError):
    """A result violated its accuracy contract."""


class SpectralError(NLSLabError):
    """Eigensolver found no negative direction (broken discretization)."""


class NonsimpleSpectrumError(NLSLabError):
    """More than one negative eigenvalue in the radial sector."""


class ResolventError(NLSLabError):
    """Resolvent solve singular or ill-conditioned."""


class PreconditionError(NLSLabError):
    """Caller-enforced precondition violated."""


class InsufficientDataError(NLSLabError):
    """Not enough samples for the requested diagnostic."""


class ResolutionError(NLSLabError):
    """Requested operation is not resolvable on the current grid."""


class UsageError(NLSLabError):
    """Bad CLI usage / configuration."""
