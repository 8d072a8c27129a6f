"""
Call-by-value evaluator for translated programs.

A translated program is first linked: every combinator occurrence becomes a
primitive constant that remembers its instance type, so that lifting and
lambda construction know the types of what they embed. ``run`` checks that
its code is closed, translates the code again and evaluates the result with
the same fresh-name state, which is how code with further brackets inside
gets its turn.
"""

import logging
from typing import Any, Optional

from .combinators import (
    CodeValue,
    GenState,
    check_runnable,
    lift_value,
    mka,
    mkbr,
    mkes,
    mkid,
    mkl,
)
from .diagnostics import DiagnosticKind, StagecalcError, fail
from .syntax import (
    AnnApp,
    AnnCsp,
    AnnExpr,
    AnnLam,
    AnnPrim,
    AnnRun,
    AnnVar,
    App,
    Bracket,
    CombinatorId,
    Csp,
    Escape,
    Expr,
    IntLit,
    Lam,
    Name,
    Pos,
    Run,
    StrLit,
    Var,
    pretty_code,
    pretty_expr,
    strip_annotations,
)
from .translate import Pipeline, is_base1, translate_program
from .typecheck import LIBRARY_TYPES, CheckerState, initial_env
from .values import (
    ARITHMETIC_ARITY,
    ClosV,
    IntV,
    PrimV,
    REnv,
    StrV,
    call_arithmetic,
)

COMBINATOR_ARITY = {
    CombinatorId.LIFT: 1,
    CombinatorId.MKID: 1,
    CombinatorId.MKA: 2,
    CombinatorId.MKL: 2,
    CombinatorId.MKBR: 1,
    CombinatorId.MKES: 1,
}


def initial_renv() -> REnv:
    """Runtime environment with the library functions and the combinators."""
    bindings = {
        name: PrimV(name.base, ARITHMETIC_ARITY[name.base]) for name in LIBRARY_TYPES
    }
    for op, arity in COMBINATOR_ARITY.items():
        bindings[op.reserved_name] = PrimV(op.value, arity)
    return REnv(bindings)


def link(a: AnnExpr) -> Expr:
    """
    Erase a translated program for execution.

    Combinator occurrences become primitive constants carrying their
    instance type; a lift additionally records the name of what it lifts.

    Raises:
        StagecalcError: InternalInvariant if staging constructs remain
    """
    if not is_base1(a):
        fail(
            DiagnosticKind.INTERNAL_INVARIANT,
            "cannot link a program that still holds staging constructs",
            a.pos,
        )
    return _link(a)


def _link(a: AnnExpr) -> Expr:
    if isinstance(a, AnnPrim):
        return _prim_constant(a, None)
    if isinstance(a, AnnApp):
        if isinstance(a.fn, AnnPrim) and a.fn.op is CombinatorId.LIFT:
            lift = _prim_constant(a.fn, _lift_label(a.arg))
            return App(lift, _link(a.arg), pos=a.pos)
        return App(_link(a.fn), _link(a.arg), pos=a.pos)
    if isinstance(a, AnnLam):
        return Lam(a.param, None, _link(a.body), pos=a.pos)
    if isinstance(a, AnnRun):
        return Run(_link(a.body), pos=a.pos)
    return strip_annotations(a)


def _lift_label(arg: AnnExpr) -> Name:
    if isinstance(arg, AnnVar):
        return arg.name
    if isinstance(arg, AnnCsp):
        return arg.label
    return Name("csp")


def _prim_constant(prim: AnnPrim, label: Optional[Name]) -> Csp:
    value = PrimV(
        prim.op.value, COMBINATOR_ARITY[prim.op], instance=prim.type, label=label
    )
    return Csp(value, prim.type, prim.op.reserved_name, pos=prim.pos)


def show_value(value: Any) -> str:
    """
    Render a value the way the toplevel prints it.

    Raises:
        StagecalcError: ScopeExtrusion for code with unbound fresh variables
    """
    if isinstance(value, IntV):
        return str(value.value)
    if isinstance(value, StrV):
        return pretty_expr(StrLit(value.value))
    if isinstance(value, CodeValue):
        if value.pending:
            check_runnable(value)
        return pretty_code(value.body)
    return "<fun>"


class Evaluator:
    """
    Evaluates linked base programs.

    Args:
        gen: Fresh-name state, shared by every nested run
        pipeline: Translation used for code handed to ``run``
        logger: Optional logger, defaults to the ``stagecalc.evaluator`` logger

    Example:
        >>> evaluator = Evaluator()
        >>> evaluator.evaluate(initial_renv(), parse_expr("succ 41"))
        IntV(value=42)
    """

    def __init__(
        self,
        gen: Optional[GenState] = None,
        pipeline: Pipeline = Pipeline.OPTIMIZED,
        logger: Optional[logging.Logger] = None,
    ):
        self.gen = gen if gen is not None else GenState()
        self.pipeline = pipeline
        self.logger = logger or logging.getLogger("stagecalc.evaluator")

    def evaluate(self, env: REnv, e: Expr) -> Any:
        if isinstance(e, IntLit):
            return IntV(e.value)
        if isinstance(e, StrLit):
            return StrV(e.value)
        if isinstance(e, Csp):
            return e.value
        if isinstance(e, Var):
            value = env.lookup(e.name)
            if value is None:
                fail(
                    DiagnosticKind.INTERNAL_INVARIANT,
                    f"variable {e.name} has no value",
                    e.pos,
                )
            return value
        if isinstance(e, Lam):
            return ClosV(e.param, e.body, env)
        if isinstance(e, App):
            fn = self.evaluate(env, e.fn)
            arg = self.evaluate(env, e.arg)
            return self.apply(fn, arg)
        if isinstance(e, Run):
            code = self.evaluate(env, e.body)
            if not isinstance(code, CodeValue):
                fail(
                    DiagnosticKind.INTERNAL_INVARIANT,
                    "run applied to a non-code value",
                    e.pos,
                )
            return self.run_code(code, e.pos)
        if isinstance(e, (Bracket, Escape)):
            fail(
                DiagnosticKind.INTERNAL_INVARIANT,
                f"{type(e).__name__} reached the evaluator",
                e.pos,
            )
        fail(DiagnosticKind.INTERNAL_INVARIANT, f"cannot evaluate {e!r}")

    def apply(self, fn: Any, arg: Any) -> Any:
        if isinstance(fn, ClosV):
            return self.evaluate(fn.env.extend(fn.param, arg), fn.body)
        if isinstance(fn, PrimV):
            args = fn.args + (arg,)
            if len(args) < fn.arity:
                return PrimV(fn.op, fn.arity, args, fn.instance, fn.label)
            return self._call(fn, args)
        fail(DiagnosticKind.INTERNAL_INVARIANT, "application of a non-function")

    def run_code(self, code: CodeValue, pos: Pos = None) -> Any:
        """
        Run closed code: translate it again and evaluate it.

        Raises:
            StagecalcError: ScopeExtrusion for open code, InternalInvariant if
                the code fails to check
        """
        check_runnable(code, pos)
        self.logger.debug(f"run {pretty_code(code.body)}")
        st = CheckerState(binder_hints=dict(code.binders))
        try:
            program = translate_program(initial_env(), st, code.body, self.pipeline)
        except StagecalcError as err:
            fail(
                DiagnosticKind.INTERNAL_INVARIANT,
                f"generated code does not check: {err.diagnostic.message}",
                pos,
            )
        return self.evaluate(initial_renv(), link(program))

    def _call(self, prim: PrimV, args: tuple) -> Any:
        self.logger.debug(f"call {prim.op}")
        if prim.op in ARITHMETIC_ARITY:
            return call_arithmetic(prim.op, args)
        instance = prim.instance
        if prim.op == CombinatorId.LIFT.value:
            t = instance.domain if instance is not None else None
            return lift_value(args[0], t, prim.label or Name("csp"))
        if prim.op == CombinatorId.MKID.value:
            t = instance.codomain.inner if instance is not None else None
            return mkid(self._text(args[0]), t)
        if prim.op == CombinatorId.MKA.value:
            return mka(self._code(args[0]), self._code(args[1]))
        if prim.op == CombinatorId.MKL.value:
            domain = None
            if instance is not None:
                domain = instance.codomain.codomain.inner.domain
            builder = args[1]
            return mkl(
                self.gen,
                self._text(args[0]),
                lambda var: self._code(self.apply(builder, var)),
                domain,
            )
        if prim.op == CombinatorId.MKBR.value:
            return mkbr(self._code(args[0]))
        if prim.op == CombinatorId.MKES.value:
            return mkes(self._code(args[0]))
        fail(DiagnosticKind.INTERNAL_INVARIANT, f"unknown primitive {prim.op}")

    @staticmethod
    def _code(value: Any) -> CodeValue:
        if not isinstance(value, CodeValue):
            fail(DiagnosticKind.INTERNAL_INVARIANT, "combinator expected a code value")
        return value

    @staticmethod
    def _text(value: Any) -> str:
        if not isinstance(value, StrV):
            fail(DiagnosticKind.INTERNAL_INVARIANT, "combinator expected a string")
        return value.value


def evaluate(
    env: REnv,
    e: Expr,
    gen: Optional[GenState] = None,
    pipeline: Pipeline = Pipeline.OPTIMIZED,
) -> Any:
    """Evaluate a linked program with a one-off Evaluator."""
    return Evaluator(gen, pipeline).evaluate(env, e)


def run_code(
    code: CodeValue, gen: GenState, pipeline: Pipeline = Pipeline.OPTIMIZED
) -> Any:
    """Run closed code with the given fresh-name state."""
    return Evaluator(gen, pipeline).run_code(code)
