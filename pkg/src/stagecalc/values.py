"""
Runtime values and environments of the evaluator.

Code values live in the combinators module; everything else a program can
compute is defined here.
"""

from dataclasses import dataclass
from typing import Any, Dict, Mapping, Optional, Sequence, Tuple

from .diagnostics import DiagnosticKind, fail
from .syntax import Name, Type


@dataclass(frozen=True)
class IntV:
    value: int


@dataclass(frozen=True)
class StrV:
    value: str


@dataclass(frozen=True, eq=False)
class ClosV:
    """Closure. ``body`` is an Expr, or an AnnExpr for the staged interpreter."""

    param: Name
    body: Any
    env: "REnv"


@dataclass(frozen=True, eq=False)
class PrimV:
    """
    A primitive, possibly partially applied.

    Args:
        op: Primitive name (``succ``, ``+``, ``*`` or a reserved ``%`` name)
        arity: Number of arguments that saturates the primitive
        args: Arguments collected so far, always fewer than ``arity``
        instance: Instance type recorded at translation time, for combinators
        label: Source name a lifted value came from, for ``%lift``
    """

    op: str
    arity: int
    args: Tuple[Any, ...] = ()
    instance: Optional[Type] = None
    label: Optional[Name] = None

    def __post_init__(self):
        if len(self.args) >= self.arity:
            raise ValueError(
                f"Primitive {self.op} takes {self.arity} arguments, "
                f"got {len(self.args)} before saturation"
            )


class REnv:
    """Immutable runtime environment mapping names to values."""

    def __init__(self, bindings: Optional[Mapping[Name, Any]] = None):
        self._bindings: Dict[Name, Any] = dict(bindings or {})

    def lookup(self, name: Name) -> Optional[Any]:
        return self._bindings.get(name)

    def extend(self, name: Name, value: Any) -> "REnv":
        bindings = dict(self._bindings)
        bindings[name] = value
        return REnv(bindings)

    def __contains__(self, name: Name) -> bool:
        return name in self._bindings


ARITHMETIC_ARITY = {"succ": 1, "+": 2, "*": 2}


def call_arithmetic(op: str, args: Sequence[Any]) -> IntV:
    """Apply one of the library functions succ, + and * to integer values."""
    if not all(isinstance(arg, IntV) for arg in args):
        fail(DiagnosticKind.INTERNAL_INVARIANT, f"{op} applied to a non-integer")
    if op == "succ":
        return IntV(args[0].value + 1)
    if op == "+":
        return IntV(args[0].value + args[1].value)
    if op == "*":
        return IntV(args[0].value * args[1].value)
    fail(DiagnosticKind.INTERNAL_INVARIANT, f"unknown primitive {op}")
