"""Exception hierarchy for the twrc package.

Numerical-domain failures (degenerate channels, infeasible classifications,
quadrature breakdown) are kept distinct from plain input errors so that the
CLI can map them to separate exit codes.
"""


class TwrcError(Exception):
    """Base class for all twrc-specific failures."""


class DimensionMismatch(TwrcError):
    """Conformability violated between matrices, vectors, or stream lists."""


class RankDeficient(TwrcError):
    """A channel matrix is (numerically) column-rank deficient.

    Signals a degenerate draw; Monte Carlo callers resample.
    """


class ClassificationAmbiguous(TwrcError):
    """Eigenvalue classification near a case boundary is inconsistent.

    Raised when the classification tolerance is too coarse for the given
    matrix pair, e.g. an eigenvalue sits near 1 but its eigenvector is not
    close to either column space.
    """


class Singular(TwrcError):
    """A matrix required to be invertible is numerically singular."""


class NotPSD(TwrcError):
    """A covariance matrix has an eigenvalue below -1e-9."""


class PowerViolation(TwrcError):
    """A trace/power budget constraint is violated beyond tolerance."""


class NotUnit(TwrcError):
    """A projection vector is not unit-norm; signals a caller bug."""


class DegenerateChannel(TwrcError):
    """A channel vector is numerically zero."""


class DomainError(TwrcError):
    """A scalar parameter lies outside its mathematical domain."""


class QuadratureFailure(TwrcError):
    """Adaptive quadrature could not reach the requested tolerance."""


class ParseError(TwrcError):
    """Malformed serialized input; message names the offending field."""


class IndexOutOfRange(TwrcError, IndexError):
    """A stream/pair index is outside the decomposition's valid range."""


class NonConvergenceWarning(UserWarning):
    """An iterative solver hit its iteration cap; best iterate returned."""
