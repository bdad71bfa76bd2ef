"""Exception hierarchy.

Validation-type errors map to CLI exit code 1, numerical failures to 2.
"""


class GraphRepError(Exception):
    exit_code = 1


class ValidationError(GraphRepError, ValueError):
    """Input data failed validation (non-finite values, bad types)."""


class DimensionError(ValidationError):
    pass


class InvalidConfigError(ValidationError):
    pass


class InvalidStateError(ValidationError):
    pass


class SchemaError(ValidationError):
    def __init__(self, field, message=None):
        self.field = field
        super().__init__(message or f"missing or malformed field {field!r}")


class ParseError(ValidationError):
    def __init__(self, line, message):
        self.line = line
        super().__init__(f"line {line}: {message}")


class CapacityError(GraphRepError):
    pass


class NumericalError(GraphRepError):
    exit_code = 2


class DivergenceError(NumericalError):
    def __init__(self, epoch, grad_norm, loss):
        self.epoch = epoch
        self.grad_norm = grad_norm
        self.loss = loss
        super().__init__(
            f"training diverged at epoch {epoch}: loss={loss!r}, grad_norm={grad_norm!r}"
        )


class ConsistencyError(NumericalError):
    """Forward quantities handed to the backward pass do not fit together."""
