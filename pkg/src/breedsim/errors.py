"""Exception types shared across the package."""


class BreedsimError(Exception):
    """Base class for all breedsim errors."""


class ConfigError(BreedsimError):
    """Invalid construction parameters or mismatched dimensions."""


class ActionError(BreedsimError):
    """An environment action that violates the action contract."""


class DataError(BreedsimError):
    """A data file that fails to parse or validate.

    Carries the offending line number when one is known.
    """

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class StatisticError(BreedsimError):
    """A statistic requested on inputs where it is undefined."""


class NumericsError(BreedsimError):
    """A numerical failure (non-finite loss or gradient) during training."""
