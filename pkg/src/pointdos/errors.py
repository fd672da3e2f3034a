"""Exception hierarchy.

Errors fall in three families that the command line maps to exit codes:
regime errors (the expansion is not certified), numerical errors and
configuration errors.
"""


class PointDosError(Exception):
    """Base class for all errors raised by the package."""


# -- regime ---------------------------------------------------------------

class RegimeError(PointDosError):
    """The requested point lies outside the certified expansion regime."""


class RegimeViolation(RegimeError):
    """Small-hopping ratio ``S(z) / gap`` is not below one."""


class GapViolation(RegimeError):
    """The certified pole gap is not positive."""


class PoleHit(RegimeError):
    """A denominator ``1/q - G0ren(z; 0)`` vanished (to 1e-13)."""


# -- domain / input -------------------------------------------------------

class DomainError(PointDosError, ValueError):
    """Argument outside the mathematical domain of the function."""


class BranchCut(DomainError):
    """Energy on the cut ``[0, inf)`` where ``sqrt(-z)`` is not admitted."""


class ZeroDistance(DomainError):
    """Free kernel requested at the origin; use the renormalized diagonal."""


class BranchError(DomainError):
    """A logarithm branch could not be continued along the segment."""


# -- numerical ------------------------------------------------------------

class NumericalError(PointDosError):
    """A numerical procedure failed."""


class SlowDecay(NumericalError):
    """Lattice sum needs a truncation radius beyond the configured cap."""


class NoRoot(NumericalError):
    """No sign change of the dispersion symbol in the search window."""


class Singular(NumericalError):
    """Principal matrix is numerically singular (condition > threshold)."""


class GridTooCoarse(NumericalError):
    """An eigenvalue branch crosses zero more than once between grid points."""


class Explosion(NumericalError):
    """Path enumeration would exceed the configured budget."""


class NonConvergent(NumericalError):
    """Richardson extrapolation diverged."""


class ConfigError(PointDosError, ValueError):
    """Malformed or out-of-range run configuration."""


class AccuracyLoss(UserWarning):
    """Two evaluation regimes of a special function disagree near a switchover."""
