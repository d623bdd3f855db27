"""Exception hierarchy shared across riskscope."""


class RiskscopeError(Exception):
    """Base class for all riskscope errors."""


class ArgumentError(RiskscopeError, ValueError):
    """Invalid argument: bad dimension, out-of-domain value, empty set."""


class CapabilityError(RiskscopeError):
    """Operation is not available for the given penalty variant."""


class ConvergenceError(RiskscopeError, RuntimeError):
    """Iterative solver did not reach its tolerance.

    The best iterate found is attached as ``best``.
    """

    def __init__(self, message, best=None, residual=None, iterations=None):
        super().__init__(message)
        self.best = best
        self.residual = residual
        self.iterations = iterations


class NumericError(RiskscopeError, ArithmeticError):
    """A bracketing or root-finding step failed."""


class DegenerateDesignError(RiskscopeError):
    """Design constant is numerically zero where a positive value is needed."""


class ParseError(RiskscopeError, ValueError):
    """Malformed CSV/JSON input. Carries ``line`` and ``column`` when known."""

    def __init__(self, message, line=None, column=None):
        loc = ""
        if line is not None:
            loc = f" (line {line}" + (f", column {column})" if column is not None else ")")
        super().__init__(message + loc)
        self.line = line
        self.column = column


class SchemaError(ParseError):
    """JSON document is well formed but violates the expected schema."""


class ConfigError(RiskscopeError, ValueError):
    """Experiment configuration is invalid or violates a precondition."""
