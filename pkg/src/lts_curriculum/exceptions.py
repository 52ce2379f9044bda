"""Exception hierarchy shared by all modules."""


class LTSError(Exception):
    """Base class for errors raised by this package."""


class ConfigurationError(LTSError, ValueError):
    """Invalid configuration value. ``field`` names the offending key."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class GraphFormatError(LTSError, ValueError):
    """Graph or checkpoint file could not be parsed."""


class GraphValidationError(LTSError, ValueError):
    """Graph content violates a structural invariant."""

    def __init__(self, invariant, message):
        self.invariant = invariant
        super().__init__(f"[{invariant}] {message}")


class ShapeError(LTSError, ValueError):
    """Parameter dimensions disagree with the graph or with each other."""


class StaleTraceError(LTSError, RuntimeError):
    """A forward trace was reused after its graph or parameters changed."""


class DataError(LTSError, ValueError):
    """Numerical input is unusable (e.g. NaN losses)."""


class ContractError(LTSError, ValueError):
    """A call precondition was violated (empty input, length mismatch, ...)."""


class DivergenceError(LTSError, RuntimeError):
    """Training produced a non-finite loss.

    The partially filled report is attached as ``report``.
    """

    def __init__(self, epoch, learning_rate, report=None):
        self.epoch = epoch
        self.learning_rate = learning_rate
        self.report = report
        super().__init__(
            f"non-finite loss at epoch {epoch} (learning_rate={learning_rate})"
        )
