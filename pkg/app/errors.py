class MeuError(Exception):
    """Base class for every error raised by the solver library."""


class ModelError(MeuError):
    """Invalid model content; not a ValueError, so pydantic validators pass it through."""


class FormatError(MeuError, ValueError):
    """Parse error with a position (1-based line, 0-based token index in the file)."""

    def __init__(self, message: str, line: int | None = None, token: int | None = None):
        self.line = line
        self.token = token
        where = []
        if line is not None:
            where.append(f"line {line}")
        if token is not None:
            where.append(f"token {token}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)


class StructureError(MeuError, ValueError):
    pass


class DegenerateSliceError(MeuError, ValueError):
    pass


class NumericalSupportError(MeuError, ArithmeticError):
    pass


class ResourceCapError(MeuError, RuntimeError):
    def __init__(self, what: str, size: float, cap: float):
        self.size = size
        self.cap = cap
        super().__init__(f"{what}: {size:.3g} entries exceeds cap {cap:.3g}")


class OutputError(MeuError, OSError):
    pass
