from __future__ import annotations


class LazyFemError(Exception):
    """Base class for every error raised by lazyfem."""


class LengthMismatchError(LazyFemError, ValueError):
    pass


class ShapeError(LazyFemError, ValueError):
    pass


class SingularJacobianError(LazyFemError, ValueError):
    pass


class IllPosedElementError(LazyFemError, ValueError):
    pass


class UnsupportedElementError(LazyFemError, ValueError):
    pass


class UnknownTagError(LazyFemError, KeyError):
    def __str__(self) -> str:
        return str(self.args[0]) if self.args else "unknown tag"


class MeshFormatError(LazyFemError, ValueError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)
        self.line = line
        self.column = column


class MeshValidationError(LazyFemError, ValueError):
    pass


class TriangulationMismatchError(LazyFemError, ValueError):
    pass


class BlockStructureError(LazyFemError, ValueError):
    pass


class AssemblyError(LazyFemError, ValueError):
    pass


class SolverBreakdownError(LazyFemError, ArithmeticError):
    pass


class SolverConvergenceError(LazyFemError, ArithmeticError):
    def __init__(self, message: str, history: list[float], x=None, iterations: int = 0):
        super().__init__(message)
        self.history = history
        self.x = x
        self.iterations = iterations


class ConfigError(LazyFemError, ValueError):
    pass
