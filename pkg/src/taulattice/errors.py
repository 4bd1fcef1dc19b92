"""Exception types shared across the package.

Every failure mode that callers are expected to branch on gets its own
class; anything else surfaces as a plain ValueError from the offending
layer.
"""


class TauLatticeError(Exception):
    """Base class for all package-specific failures."""


class NonIntegrableWeight(TauLatticeError):
    """The coupling vector gives a weight with a non-suppressible tail."""


class ToleranceUnreachable(TauLatticeError):
    """Panel refinement stalled before reaching the requested tolerance."""


class OddDimension(TauLatticeError):
    """A Pfaffian was requested for an odd-dimensional matrix."""


class IllConditioned(TauLatticeError):
    """A Cholesky or linear solve failed; the matrix is numerically singular."""


class StepTooLarge(TauLatticeError):
    """Finite-difference Richardson levels disagree beyond the requested tolerance."""


class SingularMinor(TauLatticeError):
    """A leading Pfaffian minor vanished during skew-orthogonalization."""


class StructureViolation(TauLatticeError):
    """A commutator produced nonzero entries at positions pinned to 0 or 1."""


class StepUnderflow(TauLatticeError):
    """The adaptive stepper shrank below the minimum usable step."""


class GridTooCoarse(TauLatticeError):
    """Flow-parameter grid refinement disagrees by more than 10x the tolerance."""


class UnsupportedKind(TauLatticeError):
    """No closed-form reference trajectory exists for the requested kind."""


class PreBreakingViolated(TauLatticeError):
    """The characteristic map is non-monotone: past the gradient catastrophe."""


class DivergedField(TauLatticeError):
    """A continuum field exceeded the configured magnitude bound."""


class IndexOutOfWindow(TauLatticeError):
    """A tensor component was requested outside the truncation-safe window."""
