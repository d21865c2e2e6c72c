"""Exception hierarchy shared across the package."""

from __future__ import annotations


class SpecforgeError(Exception):
    """Base class for every error raised by this package."""


class FormulaParseError(SpecforgeError):
    def __init__(self, message: str, pos: int | None = None):
        self.pos = pos
        if pos is not None:
            message = f"{message} (at offset {pos})"
        super().__init__(message)


class MiniLangSyntaxError(SpecforgeError):
    def __init__(self, message: str, line: int, col: int):
        self.line = line
        self.col = col
        super().__init__(f"{message} (line {line}, col {col})")


class UseBeforeAssignError(SpecforgeError):
    def __init__(self, var: str, function: str, line: int):
        self.var = var
        self.function = function
        self.line = line
        super().__init__(
            f"variable '{var}' may be read before assignment in '{function}' (line {line})"
        )


class DuplicateFunctionError(SpecforgeError):
    pass


class UnknownFunctionError(SpecforgeError):
    pass


class ArityMismatchError(SpecforgeError):
    pass


class ManifestError(SpecforgeError):
    pass


class ImpreciseConditionError(SpecforgeError):
    """Raised when an oracle operation needs a formula but only got prose."""


class UnsupportedStatementError(SpecforgeError):
    """Raised when the deterministic oracle is asked about a statement kind it
    does not model (loops inside strongest_post, calls without expectations, ...)."""


class EnumerationBudgetError(SpecforgeError):
    def __init__(self, needed: int, budget: int):
        self.needed = needed
        self.budget = budget
        super().__init__(
            f"bounded enumeration needs {needed} assignments, budget is {budget}"
        )


class SpecFileFormatError(SpecforgeError):
    pass


class BackendError(SpecforgeError):
    pass


class TransportError(BackendError):
    pass


class SpecGenerationError(SpecforgeError):
    pass


class UnparseableBodyError(SpecforgeError):
    """The reasoner could not parse a function body; analysis is skipped."""


class HarnessError(SpecforgeError):
    """Fatal test-harness misconfiguration, distinct from a failing test case."""


class PrerequisiteError(SpecforgeError):
    """A pipeline stage was invoked without the artifacts of the prior stage."""
