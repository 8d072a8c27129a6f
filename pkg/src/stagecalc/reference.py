"""
Direct interpreter for elaborated staged programs.

Evaluates a staged program without translating it: stage-0 code runs
call-by-value, a bracket builds its body as a code template, and an escape
at the outermost template level evaluates its body and splices the
resulting code into the hole. It shares the combinators' code
representation and fresh-name discipline, so its results can be compared
with those of the translated pipelines.
"""

import logging
from dataclasses import dataclass
from typing import Any, Optional

from .combinators import (
    CodeValue,
    GenState,
    check_runnable,
    fresh_name,
    lift_value,
    mka,
    mkbr,
    mkes,
)
from .diagnostics import DiagnosticKind, fail
from .syntax import (
    AnnApp,
    AnnBracket,
    AnnCsp,
    AnnEscape,
    AnnExpr,
    AnnInt,
    AnnLam,
    AnnRun,
    AnnStr,
    AnnVar,
    Lam,
    Name,
    Pos,
    Var,
    pretty_code,
)
from .typecheck import LIBRARY_TYPES, CheckerState, infer_staged, initial_env
from .values import ARITHMETIC_ARITY, ClosV, IntV, PrimV, REnv, StrV, call_arithmetic


@dataclass(frozen=True)
class FutureVar:
    """Runtime binding of a future-stage variable: the fresh name standing for it."""

    name: Name


def reference_renv() -> REnv:
    """Runtime environment with the library functions only."""
    return REnv(
        {name: PrimV(name.base, ARITHMETIC_ARITY[name.base]) for name in LIBRARY_TYPES}
    )


class StagedInterpreter:
    """
    Evaluator for staged AnnExpr trees.

    Args:
        gen: Fresh-name state, shared by every nested run
        logger: Optional logger, defaults to the ``stagecalc.reference`` logger

    Example:
        >>> interp = StagedInterpreter()
        >>> program = parse_expr(".<1 + 2>.")
        >>> staged = infer_staged(initial_env(), CheckerState(), program)
        >>> show_value(interp.evaluate(reference_renv(), staged))
        '.<1 + 2>.'
    """

    def __init__(
        self, gen: Optional[GenState] = None, logger: Optional[logging.Logger] = None
    ):
        self.gen = gen if gen is not None else GenState()
        self.logger = logger or logging.getLogger("stagecalc.reference")

    def evaluate(self, env: REnv, a: AnnExpr) -> Any:
        """Evaluate a stage-0 node."""
        if isinstance(a, AnnInt):
            return IntV(a.value)
        if isinstance(a, AnnStr):
            return StrV(a.value)
        if isinstance(a, AnnCsp):
            return a.value
        if isinstance(a, AnnVar):
            value = env.lookup(a.name)
            if value is None or isinstance(value, FutureVar):
                fail(
                    DiagnosticKind.INTERNAL_INVARIANT,
                    f"variable {a.name} has no present value",
                    a.pos,
                )
            return value
        if isinstance(a, AnnLam):
            return ClosV(a.param, a.body, env)
        if isinstance(a, AnnApp):
            fn = self.evaluate(env, a.fn)
            arg = self.evaluate(env, a.arg)
            return self.apply(fn, arg)
        if isinstance(a, AnnRun):
            code = self.evaluate(env, a.body)
            if not isinstance(code, CodeValue):
                fail(
                    DiagnosticKind.INTERNAL_INVARIANT, "run of a non-code value", a.pos
                )
            return self.run(code, a.pos)
        if isinstance(a, AnnBracket):
            return self.build(env, a.body, 1)
        fail(
            DiagnosticKind.INTERNAL_INVARIANT,
            f"unexpected {type(a).__name__} at stage 0",
            a.pos,
        )

    def build(self, env: REnv, a: AnnExpr, level: int) -> CodeValue:
        """Build the code of a node sitting ``level`` brackets deep."""
        if isinstance(a, (AnnInt, AnnStr)):
            return lift_value(self.evaluate(env, a), a.type, Name("csp"))
        if isinstance(a, AnnCsp):
            return lift_value(a.value, a.type, a.label)
        if isinstance(a, AnnVar):
            return self._build_var(env, a)
        if isinstance(a, AnnApp):
            fn = self.build(env, a.fn, level)
            return mka(fn, self.build(env, a.arg, level))
        if isinstance(a, AnnLam):
            param = fresh_name(self.gen, a.param.base)
            body = self.build(env.extend(a.param, FutureVar(param)), a.body, level)
            binders = dict(body.binders)
            binders[param] = a.param_type
            pending = body.pending - {param}
            return CodeValue(Lam(param, None, body.body), pending, binders)
        if isinstance(a, AnnBracket):
            return mkbr(self.build(env, a.body, level + 1))
        if isinstance(a, AnnEscape):
            if level == 1:
                code = self.evaluate(env, a.body)
                if not isinstance(code, CodeValue):
                    fail(
                        DiagnosticKind.INTERNAL_INVARIANT,
                        "escape produced a non-code value",
                        a.pos,
                    )
                return code
            return mkes(self.build(env, a.body, level - 1))
        fail(
            DiagnosticKind.INTERNAL_INVARIANT,
            f"unexpected {type(a).__name__} at level {level}",
            a.pos,
        )

    def _build_var(self, env: REnv, a: AnnVar) -> CodeValue:
        if a.stage >= 1:
            bound = env.lookup(a.name)
            if not isinstance(bound, FutureVar):
                fail(
                    DiagnosticKind.INTERNAL_INVARIANT,
                    f"future variable {a.name} has no fresh name",
                    a.pos,
                )
            return CodeValue(Var(bound.name), frozenset({bound.name}))
        if a.library:
            return CodeValue(Var(a.name))
        return lift_value(self.evaluate(env, a), a.type, a.name)

    def apply(self, fn: Any, arg: Any) -> Any:
        if isinstance(fn, ClosV):
            return self.evaluate(fn.env.extend(fn.param, arg), fn.body)
        if isinstance(fn, PrimV):
            args = fn.args + (arg,)
            if len(args) < fn.arity:
                return PrimV(fn.op, fn.arity, args)
            return call_arithmetic(fn.op, args)
        fail(DiagnosticKind.INTERNAL_INVARIANT, "application of a non-function")

    def run(self, code: CodeValue, pos: Pos = None) -> Any:
        """Check closed code again and evaluate it directly."""
        check_runnable(code, pos)
        self.logger.debug(f"run {pretty_code(code.body)}")
        st = CheckerState(binder_hints=dict(code.binders))
        staged = infer_staged(initial_env(), st, code.body)
        return self.evaluate(reference_renv(), staged)
