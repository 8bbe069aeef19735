"""Exception types shared by all modules."""


class ArtifactError(Exception):
    """Base class for errors raised by this package."""


class ValidationError(ArtifactError, ValueError):
    """Malformed input object (pattern, partition, point list, polygon)."""


class PreconditionError(ArtifactError, ValueError):
    """Input violates an operation's stated precondition."""


class DimensionError(PreconditionError):
    """Objects of incompatible size were combined."""


class CapacityError(ArtifactError, ValueError):
    """Requested size exceeds a documented cap."""


class ConditioningError(ArtifactError, ArithmeticError):
    """A linear system is too ill-conditioned to solve reliably."""


class QuadratureError(ArtifactError, ArithmeticError):
    """Numerical integration failed to converge or produced an inconsistent branch."""


class SingularityError(ArtifactError, ValueError):
    """Evaluation point coincides with a singular point."""


class ExceptionalKappaError(ArtifactError, ArithmeticError):
    """Meander matrix is singular at the requested kappa."""


class BudgetError(QuadratureError):
    """Refinement budget exhausted before the requested tolerance was reached."""


class DegenerateInputError(ArtifactError, ValueError):
    """Input leads to an undefined result, such as a zero normalizer."""


class InvariantError(ArtifactError, RuntimeError):
    """An internal consistency check failed; this indicates a bug."""
