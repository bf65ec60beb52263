"""Exception taxonomy shared across the package.

Every failure mode that callers are expected to catch gets its own class;
anything else propagates as a plain ValueError from input validation.
"""

from __future__ import annotations


class SbpError(Exception):
    """Base class for all package-specific errors."""


class NonzeroBoundary(SbpError):
    """A field that must vanish on the boundary does not."""


class NoConvergence(SbpError):
    """An iterative linear solve ran out of iterations.

    Attributes
    ----------
    iterations : int
        Iterations performed before giving up.
    residual : float
        Relative residual norm at the last iterate.
    """

    def __init__(self, message: str, iterations: int, residual: float):
        super().__init__(f"{message} (iterations={iterations}, residual={residual:.3e})")
        self.iterations = iterations
        self.residual = residual


class IncompatibleData(SbpError):
    """Volume and surface data violate the Gauss compatibility condition."""


class ConsistencyViolation(SbpError):
    """An identity that must hold by construction failed its tolerance."""


class ZeroField(SbpError):
    """An operation received a field with vanishing norm."""


class DegenerateDirection(SbpError):
    """The retraction ansatz has a singular 2x2 Gram matrix."""


class NewtonDivergence(SbpError):
    """The retraction Newton iteration failed to converge."""


class DegenerateConstraints(SbpError):
    """The two constraint differentials are linearly dependent at this point."""


class InfeasibleRegion(SbpError):
    """No feasible bump pair exists in the requested region."""


class SlabInfeasible(SbpError):
    """A slab of the seed partition cannot bracket the target constraint value.

    Attributes
    ----------
    slab_index : int
        Zero-based index of the first slab that failed.
    """

    def __init__(self, message: str, slab_index: int):
        super().__init__(message)
        self.slab_index = slab_index


class LineSearchStall(SbpError):
    """Backtracking reduced the step below the minimum without descent."""


class SingularMultiplierSystem(SbpError):
    """The 2x2 multiplier recovery system is numerically singular."""


class OracleTooLarge(SbpError):
    """A dense oracle was requested on a grid above its size limit."""


class ConfigError(SbpError):
    """A run configuration file is missing keys or has malformed values."""
