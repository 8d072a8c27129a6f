"""
Staged type reconstruction.

Elaborates parser output into a fully annotated AnnExpr: every node gets its
type, variables and lambdas record the stage of their binder, and escapes
are checked against the current bracket depth. Lambda domains without an
annotation are solved by monomorphic unification; whatever stays unsolved
is reported as AmbiguousType.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Dict, Iterator, List, Mapping, NamedTuple, Optional, Tuple

from .diagnostics import DiagnosticKind, fail
from .syntax import (
    INT,
    PLUS,
    TIMES,
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
    UVar,
    Var,
    has_uvars,
    pretty_type,
)


class Binding(NamedTuple):
    stage: int
    type: Type


LIBRARY_TYPES: Dict[Name, Type] = {
    Name("succ"): ArrowT(INT, INT),
    PLUS: ArrowT(INT, ArrowT(INT, INT)),
    TIMES: ArrowT(INT, ArrowT(INT, INT)),
}


class Env:
    """
    Immutable typing environment.

    Extending returns a new Env. The library bindings are kept by reference
    so a name can be recognised as a library function only while it is not
    shadowed.
    """

    def __init__(
        self,
        bindings: Optional[Mapping[Name, Binding]] = None,
        library: Optional[Mapping[Name, Binding]] = None,
    ):
        self._bindings: Dict[Name, Binding] = dict(bindings or {})
        self.library: Mapping[Name, Binding] = library or {}

    def lookup(self, name: Name) -> Optional[Binding]:
        return self._bindings.get(name)

    def extend(self, name: Name, stage: int, t: Type) -> "Env":
        bindings = dict(self._bindings)
        bindings[name] = Binding(stage, t)
        return Env(bindings, self.library)

    def is_library(self, name: Name) -> bool:
        binding = self._bindings.get(name)
        return binding is not None and self.library.get(name) is binding

    def items(self) -> Iterator[Tuple[Name, Binding]]:
        return iter(self._bindings.items())

    def __contains__(self, name: Name) -> bool:
        return name in self._bindings


def initial_env() -> Env:
    """Environment holding the stage-0 library functions succ, + and *."""
    library = {name: Binding(0, t) for name, t in LIBRARY_TYPES.items()}
    return Env(library, library)


@dataclass
class CheckerState:
    """
    Mutable state of one elaboration session.

    Attributes:
        stage: Bracket depth of the node being elaborated
        uvar_counter: Last unification variable id handed out
        substitution: Solved unification variables
        binder_hints: Domain types for lambda binders without annotation
        trace: When a list, intermediate translation results are appended
    """

    stage: int = 0
    uvar_counter: int = 0
    substitution: Dict[int, Type] = field(default_factory=dict)
    binder_hints: Dict[Name, Type] = field(default_factory=dict)
    trace: Optional[List[AnnExpr]] = None


def fresh_uvar(st: CheckerState) -> UVar:
    st.uvar_counter += 1
    return UVar(st.uvar_counter)


def _shallow(st: CheckerState, t: Type) -> Type:
    while isinstance(t, UVar) and t.id in st.substitution:
        t = st.substitution[t.id]
    return t


def resolve(st: CheckerState, t: Type) -> Type:
    """Apply the substitution all the way down, compressing solved chains."""
    if isinstance(t, UVar):
        if t.id not in st.substitution:
            return t
        solved = resolve(st, st.substitution[t.id])
        st.substitution[t.id] = solved
        return solved
    if isinstance(t, ArrowT):
        return ArrowT(resolve(st, t.domain), resolve(st, t.codomain))
    if isinstance(t, CodeT):
        return CodeT(resolve(st, t.inner))
    return t


def _occurs(st: CheckerState, var: UVar, t: Type) -> bool:
    t = _shallow(st, t)
    if isinstance(t, UVar):
        return t.id == var.id
    if isinstance(t, ArrowT):
        return _occurs(st, var, t.domain) or _occurs(st, var, t.codomain)
    if isinstance(t, CodeT):
        return _occurs(st, var, t.inner)
    return False


def unify(st: CheckerState, t1: Type, t2: Type, pos: Pos = None) -> None:
    """
    Make t1 and t2 equal under the substitution.

    Raises:
        StagecalcError: TypeMismatch on a constructor clash or a failed occurs check
    """
    a = _shallow(st, t1)
    b = _shallow(st, t2)
    if a == b:
        return
    if isinstance(a, UVar):
        _bind(st, a, b, pos)
    elif isinstance(b, UVar):
        _bind(st, b, a, pos)
    elif isinstance(a, ArrowT) and isinstance(b, ArrowT):
        unify(st, a.domain, b.domain, pos)
        unify(st, a.codomain, b.codomain, pos)
    elif isinstance(a, CodeT) and isinstance(b, CodeT):
        unify(st, a.inner, b.inner, pos)
    else:
        fail(
            DiagnosticKind.TYPE_MISMATCH,
            f"type {pretty_type(resolve(st, a))} is not compatible with type "
            f"{pretty_type(resolve(st, b))}",
            pos,
        )


def _bind(st: CheckerState, var: UVar, t: Type, pos: Pos) -> None:
    if _occurs(st, var, t):
        fail(
            DiagnosticKind.TYPE_MISMATCH,
            f"occurs check: cannot construct the infinite type "
            f"{pretty_type(var)} = {pretty_type(resolve(st, t))}",
            pos,
        )
    st.substitution[var.id] = t


class StagedChecker:
    """
    Elaborator for the staged calculus: Γ ⊢ₙ e ⇒ e:t.

    One rule method per expression form. Subclasses override the bracket
    and escape rules to translate while they check.

    Args:
        st: Session state; its ``stage`` field tracks the current bracket depth
        logger: Optional logger, defaults to the ``stagecalc.typecheck`` logger

    Example:
        >>> checker = StagedChecker(CheckerState())
        >>> checker.check(initial_env(), parse_expr(".<1>.")).type
        CodeT(inner=IntT())
    """

    def __init__(self, st: CheckerState, logger: Optional[logging.Logger] = None):
        self.st = st
        self.logger = logger or logging.getLogger("stagecalc.typecheck")

    def check(self, env: Env, e: Expr) -> AnnExpr:
        """Elaborate e at the state's current stage and resolve every type."""
        return resolve_annotations(self.st, self.elaborate(env, e))

    def elaborate(self, env: Env, e: Expr) -> AnnExpr:
        self.logger.debug(f"elaborate {type(e).__name__} at stage {self.st.stage}")
        if isinstance(e, IntLit):
            return AnnInt(e.value, pos=e.pos)
        if isinstance(e, StrLit):
            return AnnStr(e.value, pos=e.pos)
        if isinstance(e, Var):
            return self._var(env, e)
        if isinstance(e, Lam):
            return self._lam(env, e)
        if isinstance(e, App):
            return self._app(env, e)
        if isinstance(e, Bracket):
            return self._bracket(env, e)
        if isinstance(e, Escape):
            return self._escape(env, e)
        if isinstance(e, Run):
            return self._run(env, e)
        if isinstance(e, Csp):
            return AnnCsp(e.value, e.type, e.label, pos=e.pos)
        fail(DiagnosticKind.INTERNAL_INVARIANT, f"cannot elaborate {e!r}")

    def _at_stage(self, stage: int, env: Env, e: Expr) -> AnnExpr:
        saved = self.st.stage
        self.st.stage = stage
        try:
            return self.elaborate(env, e)
        finally:
            self.st.stage = saved

    def _var(self, env: Env, e: Var) -> AnnVar:
        binding = env.lookup(e.name)
        if binding is None:
            fail(DiagnosticKind.UNBOUND_VAR, f"unbound variable {e.name}", e.pos)
        if binding.stage > self.st.stage:
            fail(
                DiagnosticKind.STAGE_ERROR,
                f"variable {e.name} is bound at stage {binding.stage} "
                f"but used at stage {self.st.stage}",
                e.pos,
            )
        return AnnVar(
            e.name, binding.stage, binding.type, env.is_library(e.name), pos=e.pos
        )

    def _lam(self, env: Env, e: Lam) -> AnnLam:
        if e.annot is not None:
            domain = e.annot
        elif e.param in self.st.binder_hints:
            domain = self.st.binder_hints[e.param]
        else:
            domain = fresh_uvar(self.st)
        stage = self.st.stage
        body = self.elaborate(env.extend(e.param, stage, domain), e.body)
        return AnnLam(e.param, stage, body, ArrowT(domain, body.type), pos=e.pos)

    def _app(self, env: Env, e: App) -> AnnApp:
        fn = self.elaborate(env, e.fn)
        arg = self.elaborate(env, e.arg)
        result = fresh_uvar(self.st)
        unify(self.st, fn.type, ArrowT(arg.type, result), e.pos)
        return AnnApp(fn, arg, result, pos=e.pos)

    def _bracket(self, env: Env, e: Bracket) -> AnnExpr:
        body = self._at_stage(self.st.stage + 1, env, e.body)
        return AnnBracket(body, CodeT(body.type), pos=e.pos)

    def _escape(self, env: Env, e: Escape) -> AnnExpr:
        body = self._escape_body(env, e)
        return AnnEscape(body, self._spliced_type(body, e), pos=e.pos)

    def _escape_body(self, env: Env, e: Escape) -> AnnExpr:
        if self.st.stage == 0:
            fail(
                DiagnosticKind.ESCAPE_AT_TOP_LEVEL,
                "escape must appear within a bracket",
                e.pos,
            )
        return self._at_stage(self.st.stage - 1, env, e.body)

    def _spliced_type(self, body: AnnExpr, e: Escape) -> Type:
        result = fresh_uvar(self.st)
        unify(self.st, body.type, CodeT(result), e.pos)
        return result

    def _run(self, env: Env, e: Run) -> AnnRun:
        if self.st.stage != 0:
            fail(
                DiagnosticKind.RUN_AT_FUTURE_STAGE,
                f"run is only available at stage 0, not at stage {self.st.stage}",
                e.pos,
            )
        body = self.elaborate(env, e.body)
        result = fresh_uvar(self.st)
        unify(self.st, body.type, CodeT(result), e.pos)
        return AnnRun(body, result, pos=e.pos)


def infer_staged(env: Env, st: CheckerState, e: Expr) -> AnnExpr:
    """
    Elaborate e in env at stage ``st.stage``.

    Raises:
        StagecalcError: UnboundVar, StageError, EscapeAtTopLevel,
            RunAtFutureStage, TypeMismatch or AmbiguousType
    """
    return StagedChecker(st).check(env, e)


def resolve_annotations(
    st: CheckerState, a: AnnExpr, strict: bool = True
) -> AnnExpr:
    """
    Resolve every type in an elaborated tree.

    With ``strict`` set, a type still holding a unification variable raises
    AmbiguousType at the node that carries it.
    """

    def settle(t: Type, node: AnnExpr) -> Type:
        resolved = resolve(st, t)
        if strict and has_uvars(resolved):
            fail(
                DiagnosticKind.AMBIGUOUS_TYPE,
                f"cannot determine type {pretty_type(resolved)}; "
                f"add a type annotation",
                node.pos,
            )
        return resolved

    def walk(node: AnnExpr) -> AnnExpr:
        if isinstance(node, AnnApp):
            return replace(
                node, fn=walk(node.fn), arg=walk(node.arg), type=settle(node.type, node)
            )
        if isinstance(node, (AnnLam, AnnBracket, AnnEscape, AnnRun)):
            return replace(node, body=walk(node.body), type=settle(node.type, node))
        if isinstance(node, (AnnVar, AnnCsp, AnnPrim)):
            return replace(node, type=settle(node.type, node))
        return node

    return walk(a)


__all__ = [
    "Binding",
    "CheckerState",
    "Env",
    "LIBRARY_TYPES",
    "StagedChecker",
    "fresh_uvar",
    "infer_staged",
    "initial_env",
    "resolve",
    "resolve_annotations",
    "unify",
]
