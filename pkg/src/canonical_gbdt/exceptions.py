"""Exception hierarchy.

Every numerical failure derives from :class:`GbdtError` so callers (the CLI
in particular) can separate verification failures from usage errors.
"""


class GbdtError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(GbdtError, ValueError):
    """Matrix shapes do not conform."""


class IdentityViolationError(GbdtError):
    """A triple does not satisfy ``AS - SA* = i Pi J Pi*``."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class IdentityDriftError(IdentityViolationError):
    """The identity residual grew beyond the drift bound during evolution."""


class SingularityError(GbdtError):
    """A matrix that has to be inverted became (numerically) singular."""

    def __init__(self, message, x=None):
        super().__init__(message)
        self.x = x


class SingularSError(SingularityError):
    pass


class SpectrumHitError(SingularityError):
    """``lambda`` (or ``s``) lies on the spectrum of ``A`` (or ``B``)."""


class BranchError(GbdtError):
    """``b_k - x`` touches the cut of the principal logarithm."""


class DegenerateSpectrumError(GbdtError):
    """``b_j == conj(b_k)``: the Sylvester equation for S is not uniquely solvable."""


class ProximityError(GbdtError):
    """Spectral point too close to the interval ``[0, l]``."""


class LimitDivergenceError(GbdtError):
    """Boundary-value sequence in eta does not contract."""


class DegenerateRealizationError(GbdtError):
    pass


class SplitFailureError(GbdtError):
    pass


class PoleError(GbdtError):
    pass


class IntervalError(GbdtError):
    """Admissibility fails inside ``[0, l]``; ``largest_l`` is the last good point."""

    def __init__(self, message, largest_l=None):
        super().__init__(message)
        self.largest_l = largest_l


class ConfigError(GbdtError, ValueError):
    pass
