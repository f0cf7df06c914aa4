"""Exception and warning types shared across the package."""


class SolhodgeError(Exception):
    """Base class for all package-specific errors."""


class DegenerateWedge(SolhodgeError):
    """Wedge of a leaf axis with a multi-index that already contains it."""


class DegenerateSubspace(SolhodgeError):
    """Raw basis vectors are (numerically) linearly dependent."""


class IncompatibleForms(SolhodgeError):
    """Operands disagree in degree, frame, or mode support."""


class NotSolvableConstantObstruction(SolhodgeError):
    """Right-hand side has a nonzero mean; the primitive equation has no solution."""


class ResonantDirection(SolhodgeError):
    """An exactly (or suspiciously) vanishing divisor was hit during a scan."""


class InsufficientData(SolhodgeError):
    """Too few (or degenerate) data points for a requested fit."""


class InsufficientWitnesses(SolhodgeError):
    """Fewer small-divisor witnesses in range than requested."""


class AtlasCoverageError(SolhodgeError):
    """Flow boxes fail to cover the torus with the requested parameters."""


class SmallDivisorWarning(UserWarning):
    """Division by a dangerously small multiplier; offending modes attached.

    Instances carry a ``modes`` attribute listing the flagged lattice modes.
    """

    def __init__(self, message, modes=()):
        super().__init__(message)
        self.modes = list(modes)
