"""
Unit tests for staged type reconstruction.
"""

import sys
from pathlib import Path

import pytest

# Add src directory to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent.parent / "src"))

from stagecalc.diagnostics import DiagnosticKind, StagecalcError
from stagecalc.generator import gen_well_typed
from stagecalc.parser import parse_expr
from stagecalc.syntax import (
    INT,
    AnnApp,
    AnnBracket,
    AnnLam,
    AnnVar,
    App,
    ArrowT,
    Bracket,
    CodeT,
    Escape,
    Lam,
    Name,
    Run,
    UVar,
    Var,
    alpha_eq,
    strip_annotations,
)
from stagecalc.typecheck import (
    CheckerState,
    StagedChecker,
    infer_staged,
    initial_env,
    resolve,
    unify,
)

CODE_TRANSFORMER = ArrowT(CodeT(INT), CodeT(INT))


def check(src, env=None):
    return infer_staged(env or initial_env(), CheckerState(), parse_expr(src))


def diagnostic_of(src, env=None):
    with pytest.raises(StagecalcError) as info:
        check(src, env)
    return info.value.diagnostic


def env_with_f():
    return initial_env().extend(Name("f"), 0, CODE_TRANSFORMER)


def escape_first_future_use(e, stage=0, bound=None):
    """
    Wrap the first use of a variable bound at its own stage, one or deeper,
    in an escape. Returns None when e has no such use.
    """
    bound = bound or {}
    if isinstance(e, Var):
        if stage >= 1 and bound.get(e.name) == stage:
            return Escape(e)
        return None
    if isinstance(e, Lam):
        body = escape_first_future_use(e.body, stage, {**bound, e.param: stage})
        return None if body is None else Lam(e.param, e.annot, body)
    if isinstance(e, App):
        fn = escape_first_future_use(e.fn, stage, bound)
        if fn is not None:
            return App(fn, e.arg)
        arg = escape_first_future_use(e.arg, stage, bound)
        return None if arg is None else App(e.fn, arg)
    if isinstance(e, (Bracket, Escape, Run)):
        inner = stage + 1 if isinstance(e, Bracket) else stage
        inner = inner - 1 if isinstance(e, Escape) else inner
        body = escape_first_future_use(e.body, inner, bound)
        return None if body is None else type(e)(body)
    return None


class TestAcceptedPrograms:
    """Test cases for well-staged programs and their types."""

    def test_library_application(self):
        """Test succ 1 has type int."""
        assert check("succ 1").type == INT

    def test_bracket_gives_code(self):
        """Test a bracket wraps the type of its body."""
        assert check(".<1 + 2>.").type == CodeT(INT)

    def test_escape_of_nested_bracket(self):
        """Test .<.<.~(.<1>.)>.>. has type int code code."""
        assert check(".<.<.~(.<1>.)>.>.").type == CodeT(CodeT(INT))

    def test_eta(self):
        """Test the eta-expansion function."""
        a = check("fun (f : int code -> int code) -> .<fun x -> .~(f .<x>.)>.")
        assert a.type == ArrowT(CODE_TRANSFORMER, CodeT(ArrowT(INT, INT)))

    def test_escape_with_quoted_variable_two_levels_deep(self):
        """Test .<.<fun x -> .~(f .<x>.)>.>. with f : int code -> int code."""
        a = check(".<.<fun x -> .~(f .<x>.)>.>.", env_with_f())
        assert a.type == CodeT(CodeT(ArrowT(INT, INT)))

    def test_present_variable_in_future_code(self):
        """Test a stage-0 variable may be used inside a bracket."""
        a = check("fun (n : int) -> .<n>.")
        assert a.type == ArrowT(INT, CodeT(INT))

    def test_run_removes_one_code_layer(self):
        """Test run .<.<1>.>. has type int code."""
        assert check("run .<.<1>.>.").type == CodeT(INT)

    def test_let_in(self):
        """Test let-bound variables get the type of their definition."""
        assert check("let y = 5 in .<y * 2>.").type == CodeT(INT)


class TestAnnotations:
    """Test cases for the stage and library information on nodes."""

    def test_variable_records_binder_stage(self):
        """Test a variable bound inside a bracket is marked stage 1."""
        a = check(".<fun (x : int) -> x>.")
        assert isinstance(a, AnnBracket)
        lam = a.body
        assert isinstance(lam, AnnLam) and lam.stage == 1
        assert lam.body == AnnVar(Name("x"), 1, INT)

    def test_library_function_is_marked(self):
        """Test succ inside a bracket is recognised as a library function."""
        a = check(".<succ>.")
        assert a.body.library is True
        assert a.body.stage == 0

    def test_shadowed_library_name_is_not_library(self):
        """Test rebinding succ makes it an ordinary variable."""
        a = check("fun (succ : int -> int) -> .<succ 1>.")
        app = a.body.body
        assert isinstance(app, AnnApp)
        assert app.fn.library is False

    def test_binder_hints_fill_missing_annotations(self):
        """Test binder hints give unannotated lambdas their domain."""
        x1 = Name("x", 1)
        st = CheckerState(binder_hints={x1: INT})
        a = infer_staged(initial_env(), st, Lam(x1, None, Var(x1)))
        assert a.type == ArrowT(INT, INT)

    def test_checker_restores_stage(self):
        """Test the stage field is back to its start value after checking."""
        st = CheckerState()
        StagedChecker(st).check(initial_env(), parse_expr(".<.<1>.>."))
        assert st.stage == 0


class TestRejectedPrograms:
    """Test cases for every static diagnostic."""

    def test_unbound_variable(self):
        """Test an unknown name is reported at its position."""
        diagnostic = diagnostic_of("1 + y")
        assert diagnostic.kind is DiagnosticKind.UNBOUND_VAR
        assert (diagnostic.line, diagnostic.column) == (1, 5)

    def test_future_variable_used_in_present(self):
        """Test .<fun x -> .~x>. uses x below its stage."""
        diagnostic = diagnostic_of(".<fun x -> .~x>.")
        assert diagnostic.kind is DiagnosticKind.STAGE_ERROR
        assert diagnostic.message == (
            "variable x is bound at stage 1 but used at stage 0"
        )

    def test_unquoted_future_variable_in_escape(self):
        """Test .<.<fun x -> .~(f x)>.>. is rejected with f : int code -> int code."""
        diagnostic = diagnostic_of(".<.<fun x -> .~(f x)>.>.", env_with_f())
        assert diagnostic.kind is DiagnosticKind.STAGE_ERROR

    def test_escape_at_top_level(self):
        """Test an escape outside any bracket."""
        diagnostic = diagnostic_of(".~1")
        assert diagnostic.kind is DiagnosticKind.ESCAPE_AT_TOP_LEVEL
        assert (diagnostic.line, diagnostic.column) == (1, 1)

    def test_type_mismatch(self):
        """Test applying an integer."""
        assert diagnostic_of("1 2").kind is DiagnosticKind.TYPE_MISMATCH

    def test_escape_of_non_code(self):
        """Test splicing something that is not code."""
        assert diagnostic_of(".<.~(succ 1)>.").kind is DiagnosticKind.TYPE_MISMATCH

    def test_occurs_check(self):
        """Test self application needs an infinite type."""
        diagnostic = diagnostic_of("fun x -> x x")
        assert diagnostic.kind is DiagnosticKind.TYPE_MISMATCH
        assert "occurs check" in diagnostic.message

    def test_ambiguous_type(self):
        """Test an unconstrained lambda domain."""
        diagnostic = diagnostic_of("fun x -> x")
        assert diagnostic.kind is DiagnosticKind.AMBIGUOUS_TYPE
        assert diagnostic.message == (
            "cannot determine type '_weak1; add a type annotation"
        )

    def test_run_at_future_stage(self):
        """Test run inside a bracket."""
        diagnostic = diagnostic_of(".<run .<1>.>.")
        assert diagnostic.kind is DiagnosticKind.RUN_AT_FUTURE_STAGE
        assert diagnostic.column == 3


class TestUnification:
    """Test cases for the unifier."""

    def test_solves_variables(self):
        """Test a variable is bound to the other side."""
        st = CheckerState()
        unify(st, ArrowT(UVar(1), INT), ArrowT(CodeT(INT), UVar(2)))
        assert resolve(st, UVar(1)) == CodeT(INT)
        assert resolve(st, UVar(2)) == INT

    def test_resolves_chains(self):
        """Test variables bound to variables are followed."""
        st = CheckerState()
        unify(st, UVar(1), UVar(2))
        unify(st, UVar(2), INT)
        assert resolve(st, CodeT(UVar(1))) == CodeT(INT)

    def test_constructor_clash(self):
        """Test int against code fails."""
        with pytest.raises(StagecalcError) as info:
            unify(CheckerState(), INT, CodeT(INT))
        assert info.value.diagnostic.message == (
            "type int is not compatible with type int code"
        )


class TestEnvironment:
    """Test cases for the typing environment."""

    def test_extend_leaves_original_untouched(self):
        """Test environments are persistent."""
        env = initial_env()
        extended = env.extend(Name("x"), 0, INT)
        assert Name("x") in extended
        assert Name("x") not in env

    def test_library_status(self):
        """Test only unshadowed library bindings count as library."""
        env = initial_env()
        assert env.is_library(Name("succ"))
        assert not env.extend(Name("succ"), 0, ArrowT(INT, INT)).is_library(
            Name("succ")
        )


class TestGeneratedCorpus:
    """Test cases over programs from the random generator."""

    def test_annotations_are_sound(self):
        """Test checking the annotated erasure again gives the same elaboration."""
        for seed in range(1000):
            a = infer_staged(initial_env(), CheckerState(), gen_well_typed(seed, 12))
            shown = strip_annotations(a, keep_binder_types=True)
            again = infer_staged(initial_env(), CheckerState(), shown)
            assert again.type == a.type, seed
            assert alpha_eq(strip_annotations(again, keep_binder_types=True), shown)

    def test_moved_variable_is_a_stage_error(self):
        """Test escaping a future variable's use out of its stage is rejected."""
        mutants = 0
        for seed in range(500):
            mutant = escape_first_future_use(gen_well_typed(seed, 12))
            if mutant is None:
                continue
            mutants += 1
            with pytest.raises(StagecalcError) as info:
                infer_staged(initial_env(), CheckerState(), mutant)
            assert info.value.kind is DiagnosticKind.STAGE_ERROR, seed
        assert mutants > 0

    @pytest.mark.slow
    def test_large_corpus_is_accepted(self):
        """Test 10000 generated programs of size 12 all check."""
        for seed in range(10000):
            infer_staged(initial_env(), CheckerState(), gen_well_typed(seed, 12))
