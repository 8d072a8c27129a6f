"""
Code-generating combinators.

Generated code is an Expr wrapped in a CodeValue. Lambdas are built from
present-stage functions over code (mkl), which hands them a fresh variable
named ``hint_serial``. A CodeValue tracks the fresh names whose lambda has
not been built around it yet (``pending``) and the domain type of every
binder it contains (``binders``), which running the code needs to check it
again.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, FrozenSet, Mapping, Optional

from .diagnostics import DiagnosticKind, fail
from .syntax import (
    RESERVED_NAMES,
    App,
    Bracket,
    Csp,
    Escape,
    Expr,
    IntLit,
    Lam,
    Name,
    Pos,
    Type,
    Var,
    free_vars,
)
from .typecheck import LIBRARY_TYPES
from .values import IntV

logger = logging.getLogger("stagecalc.combinators")


@dataclass
class GenState:
    """Fresh-name counter of a session. Starts at 1 and only ever grows."""

    counter: int = 1


@dataclass(frozen=True)
class CodeValue:
    """
    A piece of generated code.

    Args:
        body: Generated term, possibly with brackets/escapes for later stages
        pending: Fresh names used in body whose binding lambda is still missing
        binders: Domain type of each fresh lambda binder in body
    """

    body: Expr
    pending: FrozenSet[Name] = frozenset()
    binders: Mapping[Name, Type] = field(default_factory=dict, compare=False)


def _merged(*codes: CodeValue) -> Dict[Name, Type]:
    binders: Dict[Name, Type] = {}
    for code in codes:
        binders.update(code.binders)
    return binders


def fresh_name(gen: GenState, hint: str) -> Name:
    """Return ``hint_N`` for the current counter value N and advance the counter."""
    if not hint:
        raise ValueError("Fresh name hint must not be empty")
    name = Name(hint, gen.counter)
    gen.counter += 1
    return name


def lift_value(value: Any, t: Optional[Type], label: Name) -> CodeValue:
    """
    Code that evaluates to value.

    Integers become literals and code becomes a bracket around its body.
    Anything else is persisted as a constant of type t.
    """
    if isinstance(value, IntV):
        return CodeValue(IntLit(value.value))
    if isinstance(value, CodeValue):
        return CodeValue(Bracket(value.body), value.pending, dict(value.binders))
    if t is None:
        fail(
            DiagnosticKind.INTERNAL_INVARIANT,
            f"cannot persist {label} into code without its type",
        )
    return CodeValue(Csp(value, t, label))


def mkid(name: str, t: Optional[Type] = None) -> CodeValue:
    """Code of a library function."""
    ident = Name(name)
    if ident not in LIBRARY_TYPES or (t is not None and LIBRARY_TYPES[ident] != t):
        fail(DiagnosticKind.INTERNAL_INVARIANT, f"{name} is not a library function")
    return CodeValue(Var(ident))


def mka(fn: CodeValue, arg: CodeValue) -> CodeValue:
    """Code of an application."""
    return CodeValue(
        App(fn.body, arg.body), fn.pending | arg.pending, _merged(fn, arg)
    )


def mkl(
    gen: GenState,
    hint: str,
    build: Callable[[CodeValue], CodeValue],
    domain: Optional[Type] = None,
) -> CodeValue:
    """
    Code of a lambda whose body is computed by ``build`` from its variable.

    The binder is always emitted, even when the body does not use it.
    """
    param = fresh_name(gen, hint)
    logger.debug(f"mkl binds {param}")
    body = build(CodeValue(Var(param), frozenset({param})))
    binders = _merged(body)
    if domain is not None:
        binders[param] = domain
    return CodeValue(Lam(param, None, body.body), body.pending - {param}, binders)


def mkbr(code: CodeValue) -> CodeValue:
    """Code of a bracket around code."""
    return CodeValue(Bracket(code.body), code.pending, dict(code.binders))


def mkes(code: CodeValue) -> CodeValue:
    """Code of an escape around code."""
    return CodeValue(Escape(code.body), code.pending, dict(code.binders))


def check_runnable(code: CodeValue, pos: Pos = None) -> None:
    """
    Reject code that mentions variables bound nowhere inside it.

    Raises:
        StagecalcError: ScopeExtrusion
    """
    if code.pending:
        names = ", ".join(sorted(str(name) for name in code.pending))
        fail(
            DiagnosticKind.SCOPE_EXTRUSION,
            f"code refers to {names} outside the scope of its binder",
            pos,
        )
    loose = sorted(
        str(name)
        for name in free_vars(code.body)
        if name not in LIBRARY_TYPES and name not in RESERVED_NAMES
    )
    if loose:
        fail(
            DiagnosticKind.SCOPE_EXTRUSION,
            f"code is not closed, free variables: {', '.join(loose)}",
            pos,
        )
