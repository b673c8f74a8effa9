"""Exception types shared across the solver modules."""


class IspoError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(IspoError):
    """Input data violates an invariant; the message names the first one."""


class InfeasibleError(IspoError):
    """No feasible solution exists for the given constraints."""


class ConvexityError(IspoError):
    """A cost table failed the convexity check required by a relaxation."""


class ResourceLimitError(IspoError):
    """An explicit work or time limit was exceeded."""


class WilcoxonTieError(ValidationError):
    """Differences contain zeros or tied magnitudes; exact ranks undefined."""
