"""Exception hierarchy shared by the library and the command line harness."""


class InvalidInputError(ValueError):
    """Argument violates an operation's preconditions."""


class DegenerateSampleError(ValueError):
    """Sample is valid but the statistic is undefined on it (e.g. no pair straddles the median)."""


class HarnessError(RuntimeError):
    """Base for failures that map onto a process exit code."""

    exit_code = 1


class MissingInputError(HarnessError):
    exit_code = 2


class ConfigError(HarnessError):
    exit_code = 3

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class OutputError(HarnessError):
    exit_code = 4


class InvariantError(HarnessError):
    exit_code = 5
