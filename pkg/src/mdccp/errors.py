"""Exception hierarchy. The CLI prints the class name as the error tag."""


class MDCCPError(Exception):
    """Base class for every domain error raised by the package."""


class ParseError(MDCCPError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class InsufficientDataError(MDCCPError):
    pass


class DomainError(MDCCPError):
    pass


class ConfigurationError(MDCCPError):
    pass


class ScaleError(ConfigurationError):
    pass


class DegenerateBoxError(MDCCPError):
    def __init__(self, message: str, box: int | None = None, q=None, s=None, pair=None):
        self.box, self.q, self.s, self.pair = box, q, s, pair
        super().__init__(message)


class DegenerateAssetError(MDCCPError):
    def __init__(self, message: str, asset=None):
        self.asset = asset
        super().__init__(message)


class ConditioningError(MDCCPError):
    pass


class DegenerateConstraintsError(MDCCPError):
    pass


class EmptyPreferenceError(MDCCPError):
    pass


class CoverageError(MDCCPError):
    def __init__(self, message: str, missing=()):
        self.missing = tuple(missing)
        super().__init__(message)


class InfeasibleSubperiodError(MDCCPError):
    pass


class UnavailableError(MDCCPError):
    pass


class CellError(MDCCPError):
    """Wraps a failure inside a single (q, s) cell, keeping the original."""

    def __init__(self, cause: MDCCPError, q, s):
        self.cause, self.q, self.s = cause, q, s
        super().__init__(f"cell (q={q}, s={s}): {type(cause).__name__}: {cause}")
