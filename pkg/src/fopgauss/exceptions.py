"""Exception hierarchy shared by all modules."""


class FopError(Exception):
    """Base class for every error raised by :mod:`fopgauss`."""


class HorizonExceeded(FopError):
    """A moment beyond the known horizon of a moment sequence was requested."""

    def __init__(self, index: int, horizon: int):
        super().__init__(f"moment m_{index} requested but only m_0..m_{horizon} are known")
        self.index = index
        self.horizon = horizon


class InsufficientPattern(FopError):
    """The computed Hankel determinant pattern is too short to decide a question."""


class SingularAlphaSystem(FopError):
    """The Gram system for the long recurrence is numerically singular.

    In exact arithmetic this system is always nonsingular, so hitting this
    means the zero/nonzero classification of the Hankel determinants was wrong
    for the tolerance in use.
    """


class NotQuasiDefinite(FopError):
    """A leading Hankel determinant vanishes where quasi-definiteness is required."""

    def __init__(self, index: int):
        super().__init__(f"Hankel determinant Delta_{index} is zero")
        self.index = index


class NotRegularDegree(FopError):
    """No n-node Gauss quadrature exists because Delta_{n-1} vanishes."""

    def __init__(self, n: int, nearest: tuple[int, ...] = ()):
        msg = f"degree {n} is not regular (Delta_{n - 1} = 0)"
        if nearest:
            msg += "; nearest regular degrees: " + ", ".join(map(str, nearest))
        super().__init__(msg)
        self.n = n
        self.nearest = nearest


class IllConditionedWeights(FopError):
    """The confluent Vandermonde solve for the quadrature weights failed its residual check."""


class ZeroInitialCoupling(FopError):
    """The starting vectors of the non-Hermitian Lanczos process satisfy w* v = 0."""


class NoRealizableDegree(FopError):
    """No regular index within the computed pattern yields a partial realization."""
