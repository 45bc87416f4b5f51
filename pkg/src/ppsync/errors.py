"""Exception types raised across the package."""


class PPSyncError(Exception):
    """Base class for all ppsync errors."""


class DimensionMismatch(PPSyncError):
    pass


class IndexOutOfRange(PPSyncError):
    pass


class DuplicateEntry(PPSyncError):
    """Two correspondences share a row or column inside one image pair."""


class BreakdownBeforeOneStep(PPSyncError):
    """Lanczos cannot take a single step (zero-dimensional operator)."""


class DegreeOverflow(PPSyncError):
    """Chebyshev degree exceeded its cap; loosen tol or shrink the scale."""


class NonFiniteValue(PPSyncError):
    """Overflow or NaN in a polynomial recurrence, usually a bad interval."""


class SizeGuardExceeded(PPSyncError):
    """A dense-oracle routine was called on an instance above its guard."""


class NonFiniteDual(PPSyncError):
    pass


class NonPositiveEstimate(PPSyncError):
    """A stochastic diagonal estimate came out non-positive.

    Impossible in exact arithmetic for a matrix exponential, so this signals
    S too small or a numerical failure rather than something to clamp.
    """


class NonTermination(PPSyncError):
    pass


class DegenerateGMM(PPSyncError):
    """EM collapsed a component (weight or variance effectively zero)."""


class EmptyInput(PPSyncError):
    pass


class SupportViolation(PPSyncError):
    """A filtered match matrix has entries outside the observed support."""


class NoConvergence(PPSyncError):
    """Iteration budget exhausted; partial results are attached.

    The ``partial`` attribute carries whatever was computed so far.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial
