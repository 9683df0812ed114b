"""Exception types shared across the package."""


class NumericError(RuntimeError):
    """A numerical operation produced an invalid result (non-finite values,
    loss of positive definiteness, underflow of all mixture components)."""


class RetractionFailure(NumericError):
    """Euclidean retraction left the positive definite cone."""

    def __init__(self, message, min_eigenvalue=None, component=None):
        super().__init__(message)
        self.min_eigenvalue = min_eigenvalue
        self.component = component


class LineSearchFailure(RuntimeError):
    """Line search exhausted its budget without any sufficient-decrease point."""

    def __init__(self, message, evals=0):
        super().__init__(message)
        self.evals = evals
