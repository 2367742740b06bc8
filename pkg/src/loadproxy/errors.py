"""Exception hierarchy shared by every module of the package."""


class LoadProxyError(Exception):
    """Base class for all errors raised by loadproxy."""


class InvalidArgumentError(LoadProxyError, ValueError):
    pass


class InconsistentInputError(LoadProxyError, ValueError):
    pass


class EmptyAfterReductionError(LoadProxyError):
    """Raised when removing degenerate rows and columns leaves nothing to fit."""


class NumericalFailureError(LoadProxyError, ArithmeticError):
    def __init__(self, message, iteration):
        super().__init__(f"{message} (iteration {iteration})")
        self.iteration = iteration


class ParseError(LoadProxyError, ValueError):
    def __init__(self, message, line=None, column=None, path=None):
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column!r}")
        prefix = ", ".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)
        self.line = line
        self.column = column
        self.path = path


class DuplicateEventError(ParseError):
    pass


class UndefinedDifficultyError(LoadProxyError):
    def __init__(self, segment_id):
        super().__init__(f"segment {segment_id} has no calibrated items")
        self.segment_id = segment_id


class BankExhaustedError(LoadProxyError):
    pass
