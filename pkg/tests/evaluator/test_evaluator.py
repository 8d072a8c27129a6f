"""
Unit tests for linking and evaluating translated programs.
"""

import sys
from pathlib import Path
from unittest.mock import patch

import pytest

# Add src directory to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent.parent / "src"))

from stagecalc.combinators import CodeValue, GenState, lift_value
from stagecalc.diagnostics import DiagnosticKind, StagecalcError
from stagecalc.evaluator import Evaluator, initial_renv, link, run_code, show_value
from stagecalc.parser import parse_expr
from stagecalc.generator import gen_well_typed
from stagecalc.syntax import (
    INT,
    TIMES,
    App,
    Bracket,
    Csp,
    Escape,
    IntLit,
    Lam,
    Name,
    Run,
    Var,
    alpha_eq,
    pretty_expr,
)
from stagecalc.translate import Pipeline, translate_program
from stagecalc.typecheck import CheckerState, infer_staged, initial_env
from stagecalc.values import ClosV, IntV, REnv, StrV

ETA = "(fun (f : int code -> int code) -> .<fun x -> .~(f .<x>.)>.)"
TIMES_20 = "(fun z -> .<4 * 5 * .~z>.)"


def evaluate_expr(e, pipeline=Pipeline.OPTIMIZED, gen=None):
    program = translate_program(initial_env(), CheckerState(), e, pipeline)
    evaluator = Evaluator(gen or GenState(), pipeline)
    return evaluator.evaluate(initial_renv(), link(program))


def evaluate(src, pipeline=Pipeline.OPTIMIZED, gen=None):
    return evaluate_expr(parse_expr(src), pipeline, gen)


def subterms(e):
    yield e
    if isinstance(e, App):
        yield from subterms(e.fn)
        yield from subterms(e.arg)
    elif isinstance(e, (Lam, Bracket, Escape, Run)):
        yield from subterms(e.body)


def shadowed_binders(e, enclosing=frozenset()):
    if isinstance(e, Lam):
        inner = shadowed_binders(e.body, enclosing | {e.param})
        return inner | ({e.param} & enclosing)
    if isinstance(e, App):
        return shadowed_binders(e.fn, enclosing) | shadowed_binders(e.arg, enclosing)
    if isinstance(e, (Bracket, Escape, Run)):
        return shadowed_binders(e.body, enclosing)
    return frozenset()


def generated_code(count, size=12):
    """Code values computed by generated programs, with both pipelines."""
    for seed in range(count):
        e = gen_well_typed(seed, size)
        for pipeline in Pipeline:
            try:
                value = evaluate_expr(e, pipeline)
            except StagecalcError:
                continue
            if isinstance(value, CodeValue):
                yield pipeline, value


class TestEvaluation:
    """Test cases for ordinary and staged evaluation."""

    def test_library_application(self):
        """Test succ 41 evaluates to 42."""
        assert evaluate("succ 41") == IntV(42)

    def test_arithmetic_and_let(self):
        """Test let-bound values and operator precedence."""
        assert evaluate("let y = 5 in y * 2 + 1") == IntV(11)

    def test_eta_builds_code(self):
        """Test eta applied to a code transformer gives a fresh lambda."""
        for pipeline in Pipeline:
            value = evaluate(f"{ETA} {TIMES_20}", pipeline)
            assert show_value(value) == ".<fun x_1 -> 4 * 5 * x_1>."

    def test_running_generated_code(self):
        """Test the generated function multiplies by 20."""
        for pipeline in Pipeline:
            assert evaluate(f"(run ({ETA} {TIMES_20})) 3", pipeline) == IntV(60)

    def test_multi_stage_run(self):
        """Test code two and three levels deep runs down to its value."""
        for pipeline in Pipeline:
            assert evaluate("run (run .<.<1>.>.)", pipeline) == IntV(1)
            assert evaluate("run (run (run .<.<.<1>.>.>.))", pipeline) == IntV(1)
            assert evaluate("run (run .<.<.~(.<1 + 2>.)>.>.)", pipeline) == IntV(3)

    def test_persisted_closure_runs(self):
        """Test a stage-0 function used inside code is called when run."""
        src = "let double = fun (n : int) -> n * 2 in run .<double 21>."
        for pipeline in Pipeline:
            assert evaluate(src, pipeline) == IntV(42)

    def test_outer_binder_inside_inner_bracket(self):
        """Test x bound one stage out is available to the innermost code."""
        src = "run ((run .<fun x -> .<fun y -> x + y>.>.) 3) 4"
        assert evaluate(src) == IntV(7)

    def test_fresh_names_come_from_the_given_state(self):
        """Test the evaluator continues the counter it was handed."""
        value = evaluate(f"{ETA} {TIMES_20}", gen=GenState(counter=5))
        assert show_value(value) == ".<fun x_5 -> 4 * 5 * x_5>."


class TestGeneratedCode:
    """Test cases for properties of the code that programs build."""

    def test_no_binder_is_captured(self):
        """Test no lambda in generated code rebinds an enclosing binder."""
        for _, value in generated_code(300):
            assert not shadowed_binders(value.body), show_value(value)

    def test_quoted_code_rebuilds_itself(self):
        """Test running the quotation of closed code gives the code back."""
        checked = 0
        for pipeline, value in generated_code(300):
            if value.pending or any(isinstance(e, Csp) for e in subterms(value.body)):
                continue
            quoted = lift_value(value, None, Name("quoted"))
            rebuilt = Evaluator(GenState(), pipeline).run_code(quoted)
            assert isinstance(rebuilt, CodeValue)
            assert alpha_eq(rebuilt.body, value.body), show_value(value)
            checked += 1
        assert checked > 0

    def test_fresh_sessions_print_the_same_code(self):
        """Test fresh names are reproducible from a fresh counter."""
        for seed in range(200):
            e = gen_well_typed(seed, 12)
            shown = []
            for _ in range(2):
                try:
                    shown.append(show_value(evaluate_expr(e)))
                except StagecalcError as err:
                    shown.append(str(err.diagnostic))
            assert shown[0] == shown[1], pretty_expr(e)

    def test_quoted_arithmetic_is_not_reduced(self):
        """Test building .<4 * 5 * x>. performs no multiplication."""
        with patch("stagecalc.evaluator.call_arithmetic") as arithmetic:
            value = evaluate(".<fun x -> 4 * 5 * x>.")
        arithmetic.assert_not_called()
        four_times_five = App(App(Var(TIMES), IntLit(4)), IntLit(5))
        assert four_times_five in list(subterms(value.body))
        assert show_value(value) == ".<fun x_1 -> 4 * 5 * x_1>."

    def test_run_of_quotation_is_the_value(self):
        """Test run .<e>. evaluates like e for generated integer programs."""
        checked = 0
        for seed in range(300):
            e = gen_well_typed(seed, 10)
            if infer_staged(initial_env(), CheckerState(), e).type != INT:
                continue
            try:
                quoted = evaluate_expr(Run(Bracket(e)))
            except StagecalcError as err:
                # a run inside e would sit at a future stage
                assert err.kind is DiagnosticKind.RUN_AT_FUTURE_STAGE
                continue
            assert quoted == evaluate_expr(e), pretty_expr(e)
            checked += 1
        assert checked > 0


class TestRuntimeErrors:
    """Test cases for failures detected while evaluating."""

    def test_scope_extrusion(self):
        """Test running code that mentions a variable of the enclosing lambda."""
        with pytest.raises(StagecalcError) as info:
            evaluate(".<fun (x : int code) -> .~(run .<x>.)>.")
        assert info.value.kind is DiagnosticKind.SCOPE_EXTRUSION

    def test_run_of_open_code(self):
        """Test run_code refuses code with free variables."""
        with pytest.raises(StagecalcError) as info:
            run_code(CodeValue(Var(Name("z"))), GenState())
        assert info.value.kind is DiagnosticKind.SCOPE_EXTRUSION

    def test_bracket_reaching_the_evaluator(self):
        """Test the evaluator only accepts base programs."""
        with pytest.raises(StagecalcError) as info:
            Evaluator().evaluate(initial_renv(), Bracket(IntLit(1)))
        assert info.value.kind is DiagnosticKind.INTERNAL_INVARIANT

    def test_link_refuses_staged_programs(self):
        """Test link needs the translated program."""
        staged = infer_staged(initial_env(), CheckerState(), parse_expr(".<1>."))
        with pytest.raises(StagecalcError) as info:
            link(staged)
        assert info.value.kind is DiagnosticKind.INTERNAL_INVARIANT

    def test_unbound_runtime_variable(self):
        """Test a variable without a value is an internal error."""
        with pytest.raises(StagecalcError) as info:
            Evaluator().evaluate(REnv(), Var(Name("y")))
        assert info.value.kind is DiagnosticKind.INTERNAL_INVARIANT


class TestShowValue:
    """Test cases for the toplevel value printer."""

    def test_integers_and_strings(self):
        """Test literals print as written."""
        assert show_value(IntV(3)) == "3"
        assert show_value(StrV("a")) == '"a"'

    def test_functions(self):
        """Test functions are opaque."""
        assert show_value(ClosV(Name("x"), Var(Name("x")), REnv())) == "<fun>"
        assert show_value(initial_renv().lookup(Name("succ"))) == "<fun>"

    def test_code(self):
        """Test code prints in brackets."""
        assert show_value(CodeValue(IntLit(1))) == ".<1>."
