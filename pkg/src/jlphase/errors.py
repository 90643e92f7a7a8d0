"""Exception types and the CLI exit codes they map to."""

EXIT_OK = 0
EXIT_DOMAIN = 2
EXIT_NUMERIC = 3
EXIT_IO = 4


class DomainError(ValueError):
    """An argument lies outside the domain where an operation is defined."""


class NumericError(ArithmeticError):
    """An iterative scheme failed to reach its tolerance."""

    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics

    def __str__(self):
        base = super().__str__()
        if not self.diagnostics:
            return base
        extra = ", ".join(f"{k}={v!r}" for k, v in sorted(self.diagnostics.items()))
        return f"{base} ({extra})"
