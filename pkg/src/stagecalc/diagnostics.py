"""
Diagnostics raised by the stagecalc front end, checker and runtime.

Every language-level failure is reported as a Diagnostic carrying its kind,
a message and the source position of the offending node. The Diagnostic is
wrapped in a StagecalcError so callers can use ordinary exception handling.
"""

from dataclasses import dataclass
from enum import Enum
from typing import NoReturn, Optional, Tuple


class DiagnosticKind(Enum):
    """Diagnostic categories reported to the user."""

    PARSE_ERROR = "ParseError"
    UNBOUND_VAR = "UnboundVar"
    STAGE_ERROR = "StageError"
    ESCAPE_AT_TOP_LEVEL = "EscapeAtTopLevel"
    TYPE_MISMATCH = "TypeMismatch"
    AMBIGUOUS_TYPE = "AmbiguousType"
    RUN_AT_FUTURE_STAGE = "RunAtFutureStage"
    SCOPE_EXTRUSION = "ScopeExtrusion"
    INTERNAL_INVARIANT = "InternalInvariant"


@dataclass(frozen=True)
class Diagnostic:
    """
    A single reported problem.

    Args:
        kind: Category of the problem
        message: Human readable description, never empty
        line: 1-based source line
        column: 1-based source column
    """

    kind: DiagnosticKind
    message: str
    line: int = 1
    column: int = 1

    def __post_init__(self):
        if not self.message:
            raise ValueError("Diagnostic message must not be empty")
        if self.line < 1 or self.column < 1:
            raise ValueError(
                f"Diagnostic position must be positive, got {self.line}:{self.column}"
            )

    def __str__(self) -> str:
        return (
            f"{self.kind.value} at line {self.line}, column {self.column}: "
            f"{self.message}"
        )


class StagecalcError(Exception):
    """Exception carrying a Diagnostic."""

    def __init__(self, diagnostic: Diagnostic):
        super().__init__(str(diagnostic))
        self.diagnostic = diagnostic

    @property
    def kind(self) -> DiagnosticKind:
        return self.diagnostic.kind


def fail(
    kind: DiagnosticKind, message: str, pos: Optional[Tuple[int, int]] = None
) -> NoReturn:
    """Raise a StagecalcError at the given (line, column) position."""
    line, column = pos if pos is not None else (1, 1)
    raise StagecalcError(Diagnostic(kind, message, max(line, 1), max(column, 1)))
