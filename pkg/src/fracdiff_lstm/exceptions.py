"""Exception hierarchy.

Every error raised on purpose by the library derives from
:class:`FracDiffLSTMError`. The CLI maps the three families below to exit
codes: configuration (2), data (3) and numeric/training (4).
"""


class FracDiffLSTMError(Exception):
    """Base class for all library errors."""


class ConfigError(FracDiffLSTMError):
    pass


class DataError(FracDiffLSTMError):
    pass


class NumericError(FracDiffLSTMError, ArithmeticError):
    pass


class ContractError(FracDiffLSTMError, ValueError):
    """A caller broke an operation's precondition (shape, length, range)."""


class FormatError(DataError):
    pass


class InsufficientDataError(DataError):
    pass


class SplitError(DataError):
    pass


class DomainError(DataError, ValueError):
    pass


class FetchError(DataError):
    pass


class SourceError(DataError):
    pass


class ChartError(DataError):
    pass


class DegenerateInputError(NumericError, ValueError):
    pass


class NotFoundError(NumericError):
    """No grid point satisfied the search criterion; ``table`` holds the sweep."""

    def __init__(self, message, table=None):
        super().__init__(message)
        self.table = table


class FitError(NumericError):
    """Optimisation failed; ``best`` holds the incumbent (may be None)."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class TrainingError(NumericError):
    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = history


class TuningError(NumericError):
    def __init__(self, message, log=None):
        super().__init__(message)
        self.log = log
