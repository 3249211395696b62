"""Exception hierarchy shared across the package."""


class BNRobustError(Exception):
    """Base class for every error raised by this package."""


class DimensionError(BNRobustError, ValueError):
    """Array shapes do not compose."""


class ParameterError(BNRobustError, ValueError):
    """A numeric parameter is outside its allowed range."""


class DegenerateInputError(BNRobustError, ValueError):
    """Input is empty or otherwise too degenerate to process."""


class FormatError(BNRobustError, ValueError):
    """A file does not follow the expected binary or text layout."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class ConfigError(BNRobustError, ValueError):
    """Experiment configuration is invalid."""


class ContractError(BNRobustError, RuntimeError):
    """A caller broke an API contract (stale cache, mismatched gradient keys)."""


class DivergenceError(BNRobustError, ArithmeticError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch, loss):
        super().__init__(f"training diverged at epoch {epoch}: loss={loss!r}")
        self.epoch = epoch
        self.loss = loss
