class InvalidArgument(ValueError):
    pass


class ShapeMismatch(InvalidArgument):
    pass


class TieError(InvalidArgument):
    """Raised by checks that are only defined on tie-free dissimilarity rows."""


class ParseError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class StaleTapeError(RuntimeError):
    """Backward called with a tape recorded before the parameters changed."""


class UndefinedCorrelation(ValueError):
    pass


class ConfigError(ValueError):
    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")
