"""Exception types shared across the package."""


class ConstructionError(ValueError):
    """Invalid lattice, partition, or graph construction input."""


class SizeError(ConstructionError):
    """Requested system size exceeds the configured cap."""


class ParameterError(ValueError):
    """Operation called with out-of-contract parameters."""


class DomainError(ValueError):
    """Numeric input outside the mathematical domain of a formula."""


class DivergenceError(DomainError):
    """A series or bound is evaluated in its divergent regime."""


class ConditioningError(ArithmeticError):
    """A linear solve is too ill-conditioned to trust."""


class SingularityError(ValueError):
    """A covariance matrix is singular; names the dependent rows."""

    def __init__(self, message, dependent_rows=()):
        super().__init__(message)
        self.dependent_rows = tuple(dependent_rows)


class FitError(ValueError):
    """Not enough usable data, or no decay, for a least-squares fit."""
