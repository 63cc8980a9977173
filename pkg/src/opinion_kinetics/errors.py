"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid configuration or parameter combination."""

    def __init__(self, message, field=None, line=None):
        self.message = message
        self.field = field
        self.line = line
        prefix = ""
        if line is not None:
            prefix += f"line {line}: "
        if field is not None:
            prefix += f"{field}: "
        super().__init__(prefix + message)


class NumericalError(RuntimeError):
    """A solver could not continue without violating its guarantees."""


class CFLViolation(NumericalError):
    pass


class NegativeDensityError(NumericalError):
    pass
