class DimensionError(ValueError):
    """Array shapes are inconsistent with the operation."""


class MetricError(ValueError):
    """A diagonal metric has a nonpositive entry."""


class RetractionError(ArithmeticError):
    """The polar retraction hit a rank-deficient matrix."""

    def __init__(self, msg, smallest_singular_value=None):
        super().__init__(msg)
        self.smallest_singular_value = smallest_singular_value


class NumericalAbort(RuntimeError):
    """A solver run left the manifold or otherwise broke down numerically."""


class MatrixMarketError(ValueError):
    """Malformed Matrix Market input. ``lineno`` is 1-based."""

    def __init__(self, msg, lineno=None):
        if lineno is not None:
            msg = f"line {lineno}: {msg}"
        super().__init__(msg)
        self.lineno = lineno
