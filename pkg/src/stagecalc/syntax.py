"""
Abstract syntax of the staged calculus.

This module defines:
- Names, including the machine-generated fresh names of generated code
- Types (int, string, functions, code) and unification variables
- Source expressions (Expr) and elaborated, type-annotated expressions (AnnExpr)
- Toplevel phrases
- Alpha-equivalence, free variables and pretty printers

All nodes are frozen dataclasses. Source positions ride along as a
(line, column) pair that takes no part in equality.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, FrozenSet, Optional, Set, Tuple, Union

Pos = Optional[Tuple[int, int]]


def _pos() -> Any:
    return field(default=None, compare=False, repr=False)


# =============================================================================
#     Names
# =============================================================================


@dataclass(frozen=True)
class Name:
    """
    A variable name.

    Source names have no serial. Names minted by the code generator carry the
    session counter value and print as ``base_serial``.
    """

    base: str
    serial: Optional[int] = None

    def __post_init__(self):
        if not self.base:
            raise ValueError("Name base must not be empty")
        if self.serial is not None and self.serial < 0:
            raise ValueError(f"Name serial must be non-negative, got {self.serial}")

    def __str__(self) -> str:
        if self.serial is None:
            return self.base
        return f"{self.base}_{self.serial}"


PLUS = Name("+")
TIMES = Name("*")
INFIX_OPERATORS = {PLUS: "+", TIMES: "*"}


class CombinatorId(Enum):
    """Code-generating combinators, valued by their reserved runtime name."""

    LIFT = "%lift"
    MKID = "%mkid"
    MKA = "%mka"
    MKL = "%mkl"
    MKBR = "%mkbr"
    MKES = "%mkes"

    @property
    def reserved_name(self) -> Name:
        return Name(self.value)


RESERVED_NAMES: FrozenSet[Name] = frozenset(c.reserved_name for c in CombinatorId)


def combinator_for(name: Name) -> Optional[CombinatorId]:
    """Return the combinator a reserved name stands for, if any."""
    if name.serial is not None:
        return None
    for comb in CombinatorId:
        if comb.value == name.base:
            return comb
    return None


# =============================================================================
#     Types
# =============================================================================


class Type:
    """Base class of types."""


@dataclass(frozen=True)
class IntT(Type):
    pass


@dataclass(frozen=True)
class StrT(Type):
    pass


@dataclass(frozen=True)
class ArrowT(Type):
    domain: Type
    codomain: Type


@dataclass(frozen=True)
class CodeT(Type):
    inner: Type


@dataclass(frozen=True)
class UVar(Type):
    """Unification variable. Its binding lives in the checker's substitution."""

    id: int


INT = IntT()
STR = StrT()


def has_uvars(t: Type) -> bool:
    if isinstance(t, UVar):
        return True
    if isinstance(t, ArrowT):
        return has_uvars(t.domain) or has_uvars(t.codomain)
    if isinstance(t, CodeT):
        return has_uvars(t.inner)
    return False


def mentions_code(t: Type) -> bool:
    """True if a code type occurs anywhere inside t."""
    if isinstance(t, CodeT):
        return True
    if isinstance(t, ArrowT):
        return mentions_code(t.domain) or mentions_code(t.codomain)
    return False


def code_depth(t: Type) -> int:
    depth = 0
    while isinstance(t, CodeT):
        depth += 1
        t = t.inner
    return depth


# =============================================================================
#     Source expressions
# =============================================================================


class Expr:
    """Base class of source and target expressions."""


@dataclass(frozen=True)
class IntLit(Expr):
    value: int
    pos: Pos = _pos()


@dataclass(frozen=True)
class StrLit(Expr):
    value: str
    pos: Pos = _pos()


@dataclass(frozen=True)
class Var(Expr):
    name: Name
    pos: Pos = _pos()


@dataclass(frozen=True)
class App(Expr):
    fn: Expr
    arg: Expr
    pos: Pos = _pos()


@dataclass(frozen=True)
class Lam(Expr):
    param: Name
    annot: Optional[Type]
    body: Expr
    pos: Pos = _pos()


@dataclass(frozen=True)
class Bracket(Expr):
    body: Expr
    pos: Pos = _pos()


@dataclass(frozen=True)
class Escape(Expr):
    body: Expr
    pos: Pos = _pos()


@dataclass(frozen=True)
class Run(Expr):
    body: Expr
    pos: Pos = _pos()


@dataclass(frozen=True)
class Csp(Expr):
    """A present-stage value persisted into generated code."""

    value: Any = field(compare=False)
    type: Type
    label: Name
    pos: Pos = _pos()


# =============================================================================
#     Elaborated expressions
# =============================================================================


class AnnExpr:
    """Base class of type-annotated expressions produced by elaboration."""

    type: Type
    pos: Pos


@dataclass(frozen=True)
class AnnInt(AnnExpr):
    value: int
    type: Type = INT
    pos: Pos = _pos()


@dataclass(frozen=True)
class AnnStr(AnnExpr):
    value: str
    type: Type = STR
    pos: Pos = _pos()


@dataclass(frozen=True)
class AnnVar(AnnExpr):
    """Variable occurrence; ``stage`` is the stage of its binder."""

    name: Name
    stage: int
    type: Type
    library: bool = False
    pos: Pos = _pos()


@dataclass(frozen=True)
class AnnApp(AnnExpr):
    fn: AnnExpr
    arg: AnnExpr
    type: Type
    pos: Pos = _pos()


@dataclass(frozen=True)
class AnnLam(AnnExpr):
    """Lambda binding ``param`` at ``stage``; ``type`` is always an ArrowT."""

    param: Name
    stage: int
    body: AnnExpr
    type: Type
    pos: Pos = _pos()

    @property
    def param_type(self) -> Type:
        return self.type.domain


@dataclass(frozen=True)
class AnnBracket(AnnExpr):
    body: AnnExpr
    type: Type
    pos: Pos = _pos()


@dataclass(frozen=True)
class AnnEscape(AnnExpr):
    """Escape node. ``marked`` tags escapes kept by the integrated translation."""

    body: AnnExpr
    type: Type
    marked: bool = False
    pos: Pos = _pos()


@dataclass(frozen=True)
class AnnRun(AnnExpr):
    body: AnnExpr
    type: Type
    pos: Pos = _pos()


@dataclass(frozen=True)
class AnnCsp(AnnExpr):
    value: Any = field(compare=False)
    type: Type
    label: Name
    pos: Pos = _pos()


@dataclass(frozen=True)
class AnnPrim(AnnExpr):
    """Combinator occurrence at a concrete monomorphic instance type."""

    op: CombinatorId
    type: Type
    pos: Pos = _pos()


# =============================================================================
#     Toplevel phrases
# =============================================================================


@dataclass(frozen=True)
class LetPhrase:
    name: Name
    expr: Expr
    pos: Pos = _pos()


@dataclass(frozen=True)
class ExprPhrase:
    expr: Expr
    pos: Pos = _pos()


Phrase = Union[LetPhrase, ExprPhrase]


# =============================================================================
#     Structural operations
# =============================================================================


def alpha_eq(a: Expr, b: Expr) -> bool:
    """
    Compare two expressions up to consistent renaming of bound variables.

    Csp nodes compare by label and type only.
    """
    return _alpha(a, b, {}, {}, 0)


def _alpha(a: Expr, b: Expr, env_a: Dict, env_b: Dict, depth: int) -> bool:
    if type(a) is not type(b):
        return False
    if isinstance(a, (IntLit, StrLit)):
        return a.value == b.value
    if isinstance(a, Var):
        index_a = env_a.get(a.name)
        index_b = env_b.get(b.name)
        if index_a is None and index_b is None:
            return a.name == b.name
        return index_a == index_b
    if isinstance(a, App):
        return _alpha(a.fn, b.fn, env_a, env_b, depth) and _alpha(
            a.arg, b.arg, env_a, env_b, depth
        )
    if isinstance(a, Lam):
        if a.annot != b.annot:
            return False
        inner_a = dict(env_a)
        inner_a[a.param] = depth
        inner_b = dict(env_b)
        inner_b[b.param] = depth
        return _alpha(a.body, b.body, inner_a, inner_b, depth + 1)
    if isinstance(a, (Bracket, Escape, Run)):
        return _alpha(a.body, b.body, env_a, env_b, depth)
    if isinstance(a, Csp):
        return a.label == b.label and a.type == b.type
    raise TypeError(f"Not an expression: {a!r}")


def free_vars(e: Expr) -> Set[Name]:
    """Variables of e with no enclosing binder. Brackets and escapes are transparent."""
    result: Set[Name] = set()
    _collect_free(e, frozenset(), result)
    return result


def _collect_free(e: Expr, bound: FrozenSet[Name], out: Set[Name]) -> None:
    if isinstance(e, Var):
        if e.name not in bound:
            out.add(e.name)
    elif isinstance(e, App):
        _collect_free(e.fn, bound, out)
        _collect_free(e.arg, bound, out)
    elif isinstance(e, Lam):
        _collect_free(e.body, bound | {e.param}, out)
    elif isinstance(e, (Bracket, Escape, Run)):
        _collect_free(e.body, bound, out)


def expr_size(e: Expr) -> int:
    """Number of AST nodes in e."""
    if isinstance(e, App):
        return 1 + expr_size(e.fn) + expr_size(e.arg)
    if isinstance(e, (Lam, Bracket, Escape, Run)):
        return 1 + expr_size(e.body)
    return 1


def bracket_depth(e: Expr) -> int:
    """Deepest bracket nesting reached in e, escapes stepping back down."""
    return _bracket_depth(e, 0)


def _bracket_depth(e: Expr, stage: int) -> int:
    if isinstance(e, Bracket):
        return max(stage + 1, _bracket_depth(e.body, stage + 1))
    if isinstance(e, Escape):
        return _bracket_depth(e.body, stage - 1)
    if isinstance(e, App):
        return max(_bracket_depth(e.fn, stage), _bracket_depth(e.arg, stage))
    if isinstance(e, (Lam, Run)):
        return _bracket_depth(e.body, stage)
    return stage


def strip_annotations(a: AnnExpr, keep_binder_types: bool = False) -> Expr:
    """
    Forget types and stages of an elaborated tree.

    Combinator occurrences become their reserved ``%`` variables. Staging
    nodes are kept, so this also serves to display staged elaborations.
    """
    if isinstance(a, AnnInt):
        return IntLit(a.value, pos=a.pos)
    if isinstance(a, AnnStr):
        return StrLit(a.value, pos=a.pos)
    if isinstance(a, AnnVar):
        return Var(a.name, pos=a.pos)
    if isinstance(a, AnnPrim):
        return Var(a.op.reserved_name, pos=a.pos)
    if isinstance(a, AnnApp):
        return App(
            strip_annotations(a.fn, keep_binder_types),
            strip_annotations(a.arg, keep_binder_types),
            pos=a.pos,
        )
    if isinstance(a, AnnLam):
        annot = a.param_type if keep_binder_types else None
        body = strip_annotations(a.body, keep_binder_types)
        return Lam(a.param, annot, body, pos=a.pos)
    if isinstance(a, AnnBracket):
        return Bracket(strip_annotations(a.body, keep_binder_types), pos=a.pos)
    if isinstance(a, AnnEscape):
        return Escape(strip_annotations(a.body, keep_binder_types), pos=a.pos)
    if isinstance(a, AnnRun):
        return Run(strip_annotations(a.body, keep_binder_types), pos=a.pos)
    if isinstance(a, AnnCsp):
        return Csp(a.value, a.type, a.label, pos=a.pos)
    raise TypeError(f"Not an elaborated expression: {a!r}")


# =============================================================================
#     Pretty printing
# =============================================================================

# Expression precedence levels, loosest first
_LEVEL_EXPR = 0
_LEVEL_SUM = 1
_LEVEL_PROD = 2
_LEVEL_APP = 3
_LEVEL_PREFIX = 4
_LEVEL_ATOM = 5


def pretty_expr(e: Expr) -> str:
    """Render e in concrete syntax with minimal parentheses."""
    return _pp(e, _LEVEL_EXPR)


def pretty_code(body: Expr) -> str:
    """Render a code body the way code values are displayed."""
    return f".<{pretty_expr(body)}>."


def _pp(e: Expr, level: int) -> str:
    text, own = _render(e)
    if own < level:
        return f"({text})"
    return text


def _render(e: Expr) -> Tuple[str, int]:
    if isinstance(e, IntLit):
        return str(e.value), _LEVEL_ATOM
    if isinstance(e, StrLit):
        escaped = e.value.replace("\\", "\\\\").replace('"', '\\"')
        return f'"{escaped}"', _LEVEL_ATOM
    if isinstance(e, Var):
        if e.name in INFIX_OPERATORS:
            # spaced so that "(*" never opens a comment
            return f"( {INFIX_OPERATORS[e.name]} )", _LEVEL_ATOM
        return str(e.name), _LEVEL_ATOM
    if isinstance(e, Csp):
        return f"(* CSP {e.label} *)", _LEVEL_ATOM
    if isinstance(e, Bracket):
        return f".<{_pp(e.body, _LEVEL_EXPR)}>.", _LEVEL_ATOM
    if isinstance(e, Escape):
        # only a bare variable goes without parentheses: .~x but .~(.<x>.)
        if isinstance(e.body, Var):
            return f".~{_pp(e.body, _LEVEL_ATOM)}", _LEVEL_PREFIX
        return f".~({_pp(e.body, _LEVEL_EXPR)})", _LEVEL_PREFIX
    if isinstance(e, Run):
        return f"run {_pp(e.body, _LEVEL_ATOM)}", _LEVEL_PREFIX
    if isinstance(e, Lam):
        if e.annot is None:
            param = str(e.param)
        else:
            param = f"({e.param} : {pretty_type(e.annot)})"
        return f"fun {param} -> {_pp(e.body, _LEVEL_EXPR)}", _LEVEL_EXPR
    if isinstance(e, App):
        head = e.fn
        if (
            isinstance(head, App)
            and isinstance(head.fn, Var)
            and head.fn.name in INFIX_OPERATORS
        ):
            left, right = head.arg, e.arg
            if head.fn.name == PLUS:
                return (
                    f"{_pp(left, _LEVEL_SUM)} + {_pp(right, _LEVEL_PROD)}",
                    _LEVEL_SUM,
                )
            return (
                f"{_pp(left, _LEVEL_PROD)} * {_pp(right, _LEVEL_APP)}",
                _LEVEL_PROD,
            )
        return f"{_pp(e.fn, _LEVEL_APP)} {_pp(e.arg, _LEVEL_PREFIX)}", _LEVEL_APP
    raise TypeError(f"Not an expression: {e!r}")


# Type precedence levels
_TYPE_ARROW = 0
_TYPE_CODE = 1
_TYPE_BASE = 2


def pretty_type(t: Type) -> str:
    """Render a type: ``->`` is right associative, ``code`` is postfix."""
    return _ppt(t, _TYPE_ARROW)


def _ppt(t: Type, level: int) -> str:
    text, own = _render_type(t)
    if own < level:
        return f"({text})"
    return text


def _render_type(t: Type) -> Tuple[str, int]:
    if isinstance(t, IntT):
        return "int", _TYPE_BASE
    if isinstance(t, StrT):
        return "string", _TYPE_BASE
    if isinstance(t, UVar):
        return f"'_weak{t.id}", _TYPE_BASE
    if isinstance(t, CodeT):
        return f"{_ppt(t.inner, _TYPE_CODE)} code", _TYPE_CODE
    if isinstance(t, ArrowT):
        return (
            f"{_ppt(t.domain, _TYPE_CODE)} -> {_ppt(t.codomain, _TYPE_ARROW)}",
            _TYPE_ARROW,
        )
    raise TypeError(f"Not a type: {t!r}")
