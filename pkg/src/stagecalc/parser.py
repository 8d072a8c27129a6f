"""
Surface syntax parser.

The grammar is compiled once into a lark LALR parser with three entry
points: single expressions, types and whole programs (phrases terminated
by ``;;``). Sugar is removed while building the tree: ``a + b`` and
``a * b`` become applications of the ``+``/``*`` variables and
``let x = a in b`` becomes ``(fun x -> b) a``.
"""

from typing import List, Tuple

from lark import Lark, Transformer, v_args
from lark.exceptions import UnexpectedCharacters, UnexpectedInput, UnexpectedToken

from .diagnostics import DiagnosticKind, fail
from .syntax import (
    INT,
    PLUS,
    STR,
    TIMES,
    App,
    ArrowT,
    Bracket,
    CodeT,
    Escape,
    Expr,
    ExprPhrase,
    IntLit,
    Lam,
    LetPhrase,
    Name,
    Phrase,
    Run,
    Type,
    Var,
)

GRAMMAR = r"""
start_expr: expr
start_type: type
program: (phrase ";;")*

phrase: "let" IDENT "=" expr              -> let_phrase
      | expr                              -> expr_phrase

?expr: "fun" param "->" expr              -> lam
     | "let" IDENT "=" expr "in" expr     -> let_in
     | sum

param: IDENT                              -> plain_param
     | "(" IDENT ":" type ")"             -> annotated_param

?sum: sum "+" prod                        -> add
    | prod

?prod: prod "*" appl                      -> mul
     | appl

?appl: appl prefix                        -> app
     | prefix

?prefix: ".~" atom                        -> escape
       | "run" atom                       -> run
       | atom

?atom: NUMBER                             -> int_lit
     | IDENT                              -> var
     | "(" "+" ")"                        -> plus_op
     | "(" "*" ")"                        -> times_op
     | "(" expr ")"
     | ".<" expr ">."                     -> bracket

?type: ctype "->" type                    -> arrow
     | ctype

?ctype: ctype "code"                      -> code
      | btype

?btype: "int"                             -> int_type
      | "string"                          -> string_type
      | "(" type ")"

IDENT: /[a-zA-Z][a-zA-Z0-9_]*/
NUMBER: /-?[0-9]+/
COMMENT: /\(\*[\s\S]*?\*\)/

%import common.WS
%ignore WS
%ignore COMMENT
"""

KEYWORDS = frozenset({"fun", "let", "in", "run", "int", "string", "code"})

_parser = Lark(
    GRAMMAR,
    parser="lalr",
    lexer="basic",
    start=["start_expr", "start_type", "program"],
    propagate_positions=True,
)


def _meta_pos(meta):
    if getattr(meta, "empty", True):
        return None
    return (meta.line, meta.column)


@v_args(meta=True)
class AstBuilder(Transformer):
    """Builds Expr/Type/Phrase values from the lark parse tree."""

    def start_expr(self, meta, children):
        return children[0]

    def start_type(self, meta, children):
        return children[0]

    def program(self, meta, children):
        return list(children)

    def let_phrase(self, meta, children):
        ident, expr = children
        return LetPhrase(Name(str(ident)), expr, pos=_meta_pos(meta))

    def expr_phrase(self, meta, children):
        return ExprPhrase(children[0], pos=_meta_pos(meta))

    def lam(self, meta, children):
        (param, annot), body = children
        return Lam(param, annot, body, pos=_meta_pos(meta))

    def plain_param(self, meta, children):
        return Name(str(children[0])), None

    def annotated_param(self, meta, children):
        ident, annot = children
        return Name(str(ident)), annot

    def let_in(self, meta, children):
        ident, bound, body = children
        pos = _meta_pos(meta)
        return App(Lam(Name(str(ident)), None, body, pos=pos), bound, pos=pos)

    def add(self, meta, children):
        left, right = children
        pos = _meta_pos(meta)
        return App(App(Var(PLUS, pos=pos), left, pos=pos), right, pos=pos)

    def mul(self, meta, children):
        left, right = children
        pos = _meta_pos(meta)
        return App(App(Var(TIMES, pos=pos), left, pos=pos), right, pos=pos)

    def app(self, meta, children):
        return App(children[0], children[1], pos=_meta_pos(meta))

    def escape(self, meta, children):
        return Escape(children[0], pos=_meta_pos(meta))

    def run(self, meta, children):
        return Run(children[0], pos=_meta_pos(meta))

    def int_lit(self, meta, children):
        return IntLit(int(children[0]), pos=_meta_pos(meta))

    def var(self, meta, children):
        return Var(Name(str(children[0])), pos=_meta_pos(meta))

    def plus_op(self, meta, children):
        return Var(PLUS, pos=_meta_pos(meta))

    def times_op(self, meta, children):
        return Var(TIMES, pos=_meta_pos(meta))

    def bracket(self, meta, children):
        return Bracket(children[0], pos=_meta_pos(meta))

    def arrow(self, meta, children):
        return ArrowT(children[0], children[1])

    def code(self, meta, children):
        return CodeT(children[0])

    def int_type(self, meta, children):
        return INT

    def string_type(self, meta, children):
        return STR


def _error_position(err: UnexpectedInput) -> Tuple[int, int]:
    line = getattr(err, "line", None)
    column = getattr(err, "column", None)
    if not isinstance(line, int) or not isinstance(column, int) or line < 1:
        return 1, 1
    return line, max(column, 1)


def _describe(err: UnexpectedInput) -> str:
    if isinstance(err, UnexpectedCharacters):
        return f"unexpected character {err.char!r}"
    if isinstance(err, UnexpectedToken):
        if err.token.type == "$END":
            return "unexpected end of input"
        if str(err.token) in KEYWORDS:
            return f"unexpected keyword {str(err.token)!r}"
        return f"unexpected token {str(err.token)!r}"
    return "unexpected end of input"


def _parse(src: str, start: str):
    try:
        tree = _parser.parse(src, start=start)
    except UnexpectedInput as err:
        fail(DiagnosticKind.PARSE_ERROR, _describe(err), _error_position(err))
    return AstBuilder().transform(tree)


def parse_expr(src: str) -> Expr:
    """
    Parse a single expression.

    Raises:
        StagecalcError: ParseError with the position of the offending token
    """
    return _parse(src, "start_expr")


def parse_type(src: str) -> Type:
    """Parse a type such as ``int code -> int code``."""
    return _parse(src, "start_type")


def parse_program(src: str) -> List[Phrase]:
    """Parse a sequence of ``;;``-terminated phrases."""
    return _parse(src, "program")
