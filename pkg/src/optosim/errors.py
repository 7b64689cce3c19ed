"""Exception hierarchy.  CLI exit codes hang off ``exit_code``."""


class OptosimError(Exception):
    exit_code = 1


class InvalidConfig(OptosimError, ValueError):
    exit_code = 2


class ParseError(InvalidConfig):
    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f"line {line}"
            if column is not None:
                where += f", column {column}"
            where += ": "
        super().__init__(where + message)


class ValidationError(InvalidConfig):
    pass


class DivergenceError(OptosimError, ArithmeticError):
    """A trajectory component left the finite region."""

    exit_code = 3

    def __init__(self, message, trajectory=None, time=None):
        self.trajectory = trajectory
        self.time = time
        super().__init__(message)


class DivergenceBudgetExceeded(DivergenceError):
    pass


class StatisticsError(OptosimError):
    exit_code = 4


class InsufficientBatches(StatisticsError):
    pass


class OrderingTagMissing(StatisticsError):
    pass


class NormalizationNonpositive(StatisticsError):
    pass


class ZeroConditioningVariance(StatisticsError):
    pass


class TruncationError(OptosimError):
    exit_code = 5


class StepSizeError(OptosimError):
    exit_code = 5


class DegenerateGain(StatisticsError):
    """The optimal-gain formula has a vanishing leading coefficient."""
