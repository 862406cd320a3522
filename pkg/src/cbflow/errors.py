"""Exception types shared across the package."""


class ConfigError(ValueError):
    """A parameter or configuration value violates a required bound.

    The message always names the failing bound or the offending key path.
    """


class InputError(ValueError):
    """Mismatched shapes, grids, or time nodes between operands."""


class NumericsError(RuntimeError):
    """Non-finite data or a quadrature that failed to converge."""


class InfeasibleBudgetError(RuntimeError):
    """No admissible existence time exists for the given data.

    Attributes
    ----------
    threshold : float
        Largest seed norm for which a budget would exist (at the smallest
        admissible horizon).
    """

    def __init__(self, message, threshold=None):
        super().__init__(message)
        self.threshold = threshold


class HypothesisError(ValueError):
    """A theorem hypothesis (e.g. M > ||x||_p) is violated."""


class NonConvergenceError(RuntimeError):
    """Fixed-point iteration hit max_iter before the tolerance.

    Carries the iteration trace for post-mortem inspection.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class BlowUpError(RuntimeError):
    """An iterate became non-finite; carries the last finite iterate."""

    def __init__(self, message, last_iterate=None, iteration=None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.iteration = iteration
