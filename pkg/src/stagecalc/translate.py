"""
Translation of staged programs into the base calculus with code combinators.

Two pipelines produce the same base program:

- BASELINE elaborates the whole program first and then eliminates brackets
  with tr_present/tr_future.
- OPTIMIZED (TranslatingChecker) translates each bracket as soon as its body
  has been elaborated, so only future-stage fragments are ever rewritten and
  programs without brackets come out exactly as elaborated.

Every combinator occurrence is emitted as an AnnPrim node carrying its
concrete instance type. erase() forgets all annotations and turns these nodes
into the reserved ``%`` variables; typecheck_base1() checks such erased
programs in the plain, unstaged calculus.
"""

import logging
from dataclasses import replace
from enum import Enum
from typing import Iterator, List, Optional

from .diagnostics import DiagnosticKind, fail
from .syntax import (
    STR,
    AnnApp,
    AnnBracket,
    AnnCsp,
    AnnEscape,
    AnnExpr,
    AnnInt,
    AnnLam,
    AnnPrim,
    AnnRun,
    AnnStr,
    AnnVar,
    App,
    ArrowT,
    Bracket,
    CodeT,
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
    Type,
    Var,
    combinator_for,
    strip_annotations,
)
from .typecheck import (
    CheckerState,
    Env,
    StagedChecker,
    fresh_uvar,
    infer_staged,
    resolve_annotations,
    unify,
)


class Pipeline(Enum):
    BASELINE = "baseline"
    OPTIMIZED = "optimized"


# =============================================================================
#     Combinator emission
# =============================================================================


def _prim_app(
    op: CombinatorId, instance: ArrowT, arg: AnnExpr, pos: Pos
) -> AnnApp:
    return AnnApp(AnnPrim(op, instance, pos=pos), arg, instance.codomain, pos=pos)


def emit_lift(a: AnnExpr, t: Type) -> AnnExpr:
    """lift_t a : t code"""
    return _prim_app(CombinatorId.LIFT, ArrowT(t, CodeT(t)), a, a.pos)


def emit_mkid(name: Name, t: Type, pos: Pos = None) -> AnnExpr:
    """mkid_t "name" : t code"""
    return _prim_app(
        CombinatorId.MKID, ArrowT(STR, CodeT(t)), AnnStr(str(name), pos=pos), pos
    )


def emit_mka(
    fn: AnnExpr, arg: AnnExpr, arg_type: Type, result_type: Type, pos: Pos = None
) -> AnnExpr:
    """mka fn arg : result_type code"""
    partial = ArrowT(CodeT(arg_type), CodeT(result_type))
    instance = ArrowT(CodeT(ArrowT(arg_type, result_type)), partial)
    return AnnApp(
        _prim_app(CombinatorId.MKA, instance, fn, pos), arg, CodeT(result_type), pos=pos
    )


def emit_mkl(
    param: Name, domain: Type, body: AnnExpr, codomain: Type, pos: Pos = None
) -> AnnExpr:
    """mkl "hint" (fun param -> body) : (domain -> codomain) code"""
    builder_type = ArrowT(CodeT(domain), CodeT(codomain))
    result_type = CodeT(ArrowT(domain, codomain))
    instance = ArrowT(STR, ArrowT(builder_type, result_type))
    builder = AnnLam(param, 0, body, builder_type, pos=pos)
    hinted = _prim_app(CombinatorId.MKL, instance, AnnStr(param.base, pos=pos), pos)
    return AnnApp(hinted, builder, result_type, pos=pos)


def emit_mkbr(code: AnnExpr, t: Type, pos: Pos = None) -> AnnExpr:
    """mkbr code : t code code"""
    return _prim_app(CombinatorId.MKBR, ArrowT(CodeT(t), CodeT(CodeT(t))), code, pos)


def emit_mkes(code: AnnExpr, t: Type, pos: Pos = None) -> AnnExpr:
    """mkes code : t code"""
    return _prim_app(CombinatorId.MKES, ArrowT(CodeT(CodeT(t)), CodeT(t)), code, pos)


def _future_var(a: AnnVar, t: Type) -> AnnExpr:
    if a.library:
        return emit_mkid(a.name, t, a.pos)
    return emit_lift(AnnVar(a.name, 0, t, pos=a.pos), t)


# =============================================================================
#     Baseline translation
# =============================================================================


def tr_present(a: AnnExpr) -> AnnExpr:
    """
    Translate an elaborated stage-0 program.

    The identity on everything but brackets, whose bodies are handed to
    tr_future. The result has the type of the input.
    """
    if isinstance(a, (AnnInt, AnnStr, AnnCsp)):
        return a
    if isinstance(a, AnnVar):
        if a.stage != 0:
            fail(
                DiagnosticKind.INTERNAL_INVARIANT,
                f"variable {a.name} of stage {a.stage} outside any bracket",
                a.pos,
            )
        return a
    if isinstance(a, AnnApp):
        return replace(a, fn=tr_present(a.fn), arg=tr_present(a.arg))
    if isinstance(a, (AnnLam, AnnRun)):
        return replace(a, body=tr_present(a.body))
    if isinstance(a, AnnBracket):
        return tr_future(a.body, 0)
    fail(
        DiagnosticKind.INTERNAL_INVARIANT,
        f"unexpected {type(a).__name__} at stage 0",
        a.pos,
    )


def tr_future(a: AnnExpr, n: int) -> AnnExpr:
    """
    Translate a subtree elaborated at stage n + 1 into code-building form.

    An input of type t becomes a stage-0 expression of type ``t code``.
    """
    if isinstance(a, (AnnInt, AnnStr, AnnCsp)):
        return emit_lift(a, a.type)
    if isinstance(a, AnnVar):
        if a.stage >= 1:
            if a.stage - 1 > n:
                fail(
                    DiagnosticKind.INTERNAL_INVARIANT,
                    f"variable {a.name} of stage {a.stage} used at stage {n + 1}",
                    a.pos,
                )
            return AnnVar(a.name, 0, CodeT(a.type), pos=a.pos)
        return _future_var(a, a.type)
    if isinstance(a, AnnApp):
        return emit_mka(
            tr_future(a.fn, n), tr_future(a.arg, n), a.arg.type, a.type, a.pos
        )
    if isinstance(a, AnnLam):
        return emit_mkl(
            a.param, a.param_type, tr_future(a.body, n), a.body.type, a.pos
        )
    if isinstance(a, AnnBracket):
        return emit_mkbr(tr_future(a.body, n + 1), a.body.type, a.pos)
    if isinstance(a, AnnEscape):
        if n == 0:
            return tr_present(a.body)
        return emit_mkes(tr_future(a.body, n - 1), a.type, a.pos)
    fail(
        DiagnosticKind.INTERNAL_INVARIANT,
        f"unexpected {type(a).__name__} at stage {n + 1}",
        a.pos,
    )


# =============================================================================
#     Integrated translation
# =============================================================================


def tc_selective(a: AnnExpr) -> AnnExpr:
    """
    Translate a stage-1 fragment produced by the integrated checker.

    Deeper brackets and all escapes of such a fragment have already been
    replaced by marked escapes, which are simply unwrapped here.
    """
    if isinstance(a, (AnnInt, AnnStr, AnnCsp)):
        return emit_lift(a, a.type)
    if isinstance(a, AnnVar):
        if a.stage >= 1:
            return AnnVar(a.name, 0, CodeT(a.type), pos=a.pos)
        return _future_var(a, a.type)
    if isinstance(a, AnnApp):
        return emit_mka(
            tc_selective(a.fn), tc_selective(a.arg), a.arg.type, a.type, a.pos
        )
    if isinstance(a, AnnLam):
        return emit_mkl(
            a.param, a.param_type, tc_selective(a.body), a.body.type, a.pos
        )
    if isinstance(a, AnnEscape) and a.marked:
        return a.body
    fail(
        DiagnosticKind.INTERNAL_INVARIANT,
        f"unexpected {type(a).__name__} in a future-stage fragment",
        a.pos,
    )


class TranslatingChecker(StagedChecker):
    """
    Staged checker that translates brackets and escapes while checking.

    At stage 0 a bracket yields the translation of its body directly. Deeper
    brackets and escapes yield marked escape nodes, which the enclosing
    bracket's tc_selective call unwraps.
    """

    def _bracket(self, env: Env, e: Bracket) -> AnnExpr:
        stage = self.st.stage
        body = self._at_stage(stage + 1, env, e.body)
        code = tc_selective(body)
        if stage == 0:
            result = code
        else:
            result = AnnEscape(
                self._mkbr(code, body.type, e.pos),
                CodeT(body.type),
                marked=True,
                pos=e.pos,
            )
        self._record(result)
        return result

    def _escape(self, env: Env, e: Escape) -> AnnExpr:
        body = self._escape_body(env, e)
        spliced = self._spliced_type(body, e)
        if self.st.stage == 1:
            result = AnnEscape(body, spliced, marked=True, pos=e.pos)
        else:
            result = AnnEscape(
                self._mkes(tc_selective(body), spliced, e.pos),
                spliced,
                marked=True,
                pos=e.pos,
            )
        self._record(result)
        return result

    def _mkbr(self, code: AnnExpr, t: Type, pos: Pos) -> AnnExpr:
        return emit_mkbr(code, t, pos)

    def _mkes(self, code: AnnExpr, t: Type, pos: Pos) -> AnnExpr:
        return emit_mkes(code, t, pos)

    def _record(self, result: AnnExpr) -> None:
        if self.st.trace is not None:
            self.st.trace.append(result)


def infer_translate(
    env: Env, st: CheckerState, e: Expr, logger: Optional[logging.Logger] = None
) -> AnnExpr:
    """
    Check and translate e in one pass.

    Raises:
        StagecalcError: any diagnostic of infer_staged, or InternalInvariant if
            the result still holds nested escapes or, at stage 0, is not a base
            program
    """
    entry_stage = st.stage
    result = TranslatingChecker(st, logger).check(env, e)
    if not check_no_nested_escapes(result):
        fail(
            DiagnosticKind.INTERNAL_INVARIANT, "translation left nested escapes", e.pos
        )
    if entry_stage == 0 and not is_base1(result):
        fail(
            DiagnosticKind.INTERNAL_INVARIANT,
            "translation left staging constructs in a stage-0 program",
            e.pos,
        )
    return result


def translate_program(
    env: Env, st: CheckerState, e: Expr, pipeline: Pipeline = Pipeline.OPTIMIZED
) -> AnnExpr:
    """Elaborate and translate a stage-0 program with the chosen pipeline."""
    if pipeline is Pipeline.BASELINE:
        return tr_present(infer_staged(env, st, e))
    return infer_translate(env, st, e)


# =============================================================================
#     Structural checks
# =============================================================================


def _children(a: AnnExpr) -> List[AnnExpr]:
    if isinstance(a, AnnApp):
        return [a.fn, a.arg]
    if isinstance(a, (AnnLam, AnnBracket, AnnEscape, AnnRun)):
        return [a.body]
    return []


def check_no_nested_escapes(a: AnnExpr) -> bool:
    """True iff no escape occurs inside the body of another escape."""
    return _escape_free_below(a, inside=False)


def _escape_free_below(a: AnnExpr, inside: bool) -> bool:
    if isinstance(a, AnnEscape):
        if inside:
            return False
        return _escape_free_below(a.body, inside=True)
    return all(_escape_free_below(child, inside) for child in _children(a))


def is_base1(a: AnnExpr) -> bool:
    """True iff a holds no staging node and every binder and variable is at stage 0."""
    if isinstance(a, (AnnEscape, AnnBracket)):
        return False
    if isinstance(a, (AnnVar, AnnLam)) and a.stage != 0:
        return False
    return all(is_base1(child) for child in _children(a))


def prim_instances(a: AnnExpr) -> List[Type]:
    """Instance types of the combinator occurrences of a, in preorder."""
    found: List[Type] = []

    def walk(node: AnnExpr) -> None:
        if isinstance(node, AnnPrim):
            found.append(node.type)
        for child in _children(node):
            walk(child)

    walk(a)
    return found


def erase(a: AnnExpr) -> Expr:
    """
    Remove all type and stage annotations from a base program.

    Raises:
        StagecalcError: InternalInvariant if a bracket or escape remains
    """
    if not is_base1(a):
        fail(
            DiagnosticKind.INTERNAL_INVARIANT,
            "cannot erase a program that still holds staging constructs",
            a.pos,
        )
    return strip_annotations(a)


# =============================================================================
#     Base calculus checker
# =============================================================================


def combinator_scheme(st: CheckerState, op: CombinatorId) -> Type:
    """A fresh instance of the type scheme of a code combinator."""
    a = fresh_uvar(st)
    b = fresh_uvar(st)
    if op is CombinatorId.LIFT:
        return ArrowT(a, CodeT(a))
    if op is CombinatorId.MKID:
        return ArrowT(STR, CodeT(a))
    if op is CombinatorId.MKA:
        return ArrowT(CodeT(ArrowT(b, a)), ArrowT(CodeT(b), CodeT(a)))
    if op is CombinatorId.MKL:
        return ArrowT(STR, ArrowT(ArrowT(CodeT(b), CodeT(a)), CodeT(ArrowT(b, a))))
    if op is CombinatorId.MKBR:
        return ArrowT(CodeT(a), CodeT(CodeT(a)))
    return ArrowT(CodeT(CodeT(a)), CodeT(a))


class Base1Checker:
    """
    Unstaged checker for erased base programs.

    Code types are opaque here. A reserved combinator variable takes the next
    recorded instance type when instances are supplied, and a fresh instance
    of its scheme otherwise.
    """

    def __init__(self, st: CheckerState, instances: Optional[Iterator[Type]] = None):
        self.st = st
        self.instances = instances

    def infer(self, env: Env, e: Expr) -> AnnExpr:
        if isinstance(e, IntLit):
            return AnnInt(e.value, pos=e.pos)
        if isinstance(e, StrLit):
            return AnnStr(e.value, pos=e.pos)
        if isinstance(e, Csp):
            return AnnCsp(e.value, e.type, e.label, pos=e.pos)
        if isinstance(e, Var):
            return self._var(env, e)
        if isinstance(e, Lam):
            domain = e.annot if e.annot is not None else fresh_uvar(self.st)
            body = self.infer(env.extend(e.param, 0, domain), e.body)
            return AnnLam(e.param, 0, body, ArrowT(domain, body.type), pos=e.pos)
        if isinstance(e, App):
            fn = self.infer(env, e.fn)
            arg = self.infer(env, e.arg)
            result = fresh_uvar(self.st)
            unify(self.st, fn.type, ArrowT(arg.type, result), e.pos)
            return AnnApp(fn, arg, result, pos=e.pos)
        if isinstance(e, Run):
            body = self.infer(env, e.body)
            result = fresh_uvar(self.st)
            unify(self.st, body.type, CodeT(result), e.pos)
            return AnnRun(body, result, pos=e.pos)
        if isinstance(e, (Bracket, Escape)):
            fail(
                DiagnosticKind.PARSE_ERROR,
                "brackets and escapes are not part of the base calculus",
                e.pos,
            )
        fail(DiagnosticKind.INTERNAL_INVARIANT, f"cannot check {e!r}")

    def _var(self, env: Env, e: Var) -> AnnExpr:
        op = combinator_for(e.name)
        if op is not None and e.name not in env:
            if self.instances is not None:
                instance = next(self.instances, None)
                if instance is None:
                    fail(
                        DiagnosticKind.INTERNAL_INVARIANT,
                        f"no recorded instance for {e.name}",
                        e.pos,
                    )
            else:
                instance = combinator_scheme(self.st, op)
            return AnnPrim(op, instance, pos=e.pos)
        binding = env.lookup(e.name)
        if binding is None:
            fail(DiagnosticKind.UNBOUND_VAR, f"unbound variable {e.name}", e.pos)
        return AnnVar(e.name, 0, binding.type, env.is_library(e.name), pos=e.pos)


def typecheck_base1(
    env: Env,
    e: Expr,
    expected: Optional[Type] = None,
    instances: Optional[List[Type]] = None,
) -> AnnExpr:
    """
    Check an erased base program and return it annotated.

    Args:
        env: Environment of stage-0 bindings
        e: Erased program; combinators appear as ``%`` variables
        expected: Type the program must have, if known
        instances: Recorded combinator instance types in preorder

    Raises:
        StagecalcError: TypeMismatch, UnboundVar, or ParseError for staging
            constructs
    """
    st = CheckerState()
    checker = Base1Checker(st, iter(instances) if instances is not None else None)
    result = checker.infer(env, e)
    if expected is not None:
        unify(st, result.type, expected, e.pos)
    return resolve_annotations(st, result, strict=False)


__all__ = [
    "Base1Checker",
    "Pipeline",
    "TranslatingChecker",
    "check_no_nested_escapes",
    "combinator_scheme",
    "emit_lift",
    "emit_mka",
    "emit_mkbr",
    "emit_mkes",
    "emit_mkid",
    "emit_mkl",
    "erase",
    "infer_translate",
    "is_base1",
    "prim_instances",
    "tc_selective",
    "tr_future",
    "tr_present",
    "translate_program",
    "typecheck_base1",
]
