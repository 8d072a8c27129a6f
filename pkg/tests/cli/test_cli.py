"""
Tests for the toplevel session, batch execution and the command line,
including the golden transcripts under ``programs/``.
"""

import io
import sys
from pathlib import Path
from unittest.mock import patch

import pytest

# Add src directory to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent.parent / "src"))

from stagecalc.cli import (
    EXIT_DIAGNOSTIC,
    EXIT_OK,
    EXIT_USAGE,
    Session,
    main,
    repl,
    repl_step,
    run_file,
)
from stagecalc.diagnostics import DiagnosticKind, StagecalcError
from stagecalc.parser import parse_program
from stagecalc.translate import Pipeline, translate_program

PROGRAMS = Path(__file__).parent / "programs"

ETA = "let eta = fun (f : int code -> int code) -> .<fun x -> .~(f .<x>.)>.;;"
EXTRUSION = ".<fun (x : int code) -> .~(run .<x>.)>."


def answer(session, src):
    return repl_step(session, parse_program(src)[0])


def transcript(path, pipeline, check_only=False):
    out = io.StringIO()
    code = run_file(str(path), Session(pipeline), check_only=check_only, out=out)
    return code, out.getvalue()


class TestGoldenTranscripts:
    """Test cases running every program and comparing with its transcript."""

    def test_programs(self):
        """Test each program prints its expected transcript with both pipelines."""
        paths = sorted(PROGRAMS.glob("*.ml"))
        assert paths
        for path in paths:
            expected = path.with_suffix(".out").read_text(encoding="utf-8")
            for pipeline in Pipeline:
                code, output = transcript(path, pipeline)
                assert code == EXIT_OK, path.name
                assert output == expected, f"{path.name} ({pipeline.value})"

    def test_error_programs(self):
        """Test each failing program prints exactly its diagnostic."""
        paths = sorted((PROGRAMS / "errors").glob("*.ml"))
        assert len(paths) == 8
        for path in paths:
            expected = path.with_suffix(".out").read_text(encoding="utf-8")
            for pipeline in Pipeline:
                code, output = transcript(path, pipeline)
                assert code == EXIT_DIAGNOSTIC, path.name
                assert output == expected, f"{path.name} ({pipeline.value})"

    def test_check_mode(self):
        """Test check prints types without values."""
        code, output = transcript(PROGRAMS / "intro.ml", Pipeline.OPTIMIZED, True)
        assert code == EXIT_OK
        assert output.splitlines() == [
            "val eta : (int code -> int code) -> (int -> int) code",
            "- : (int -> int) code",
            "val g : int -> int",
            "- : int",
        ]


class TestSession:
    """Test cases for the toplevel session state."""

    def test_let_extends_the_session(self):
        """Test a toplevel let is visible to later phrases."""
        session = Session()
        assert answer(session, "let y = 5;;") == "val y : int = 5"
        assert answer(session, ".<y * 2>.;;") == "- : int code = .<5 * 2>."

    def test_failed_phrase_leaves_session_unchanged(self):
        """Test a runtime failure binds nothing and rolls back fresh names."""
        session = Session()
        answer(session, ETA)
        with pytest.raises(StagecalcError) as info:
            answer(session, f"let bad = {EXTRUSION};;")
        assert info.value.kind is DiagnosticKind.SCOPE_EXTRUSION
        assert session.gen.counter == 1
        assert answer(session, "eta (fun z -> .<4 * 5 * .~z>.);;") == (
            "- : (int -> int) code = .<fun x_1 -> 4 * 5 * x_1>."
        )
        with pytest.raises(StagecalcError) as info:
            answer(session, "bad;;")
        assert info.value.kind is DiagnosticKind.UNBOUND_VAR

    def test_deep_phrase_is_a_diagnostic(self):
        """Test running out of stack reports a diagnostic and keeps the session."""
        session = Session()
        answer(session, "let y = 5;;")
        counter = session.gen.counter
        with patch("stagecalc.cli.translate_program", side_effect=RecursionError):
            with pytest.raises(StagecalcError) as info:
                answer(session, "let z = y;;")
        assert info.value.kind is DiagnosticKind.INTERNAL_INVARIANT
        assert "nested too deeply" in info.value.diagnostic.message
        assert session.gen.counter == counter
        assert answer(session, "y;;") == "- : int = 5"
        with pytest.raises(StagecalcError):
            answer(session, "z;;")

    def test_extrusion_points_at_run(self):
        """Test a scope extrusion is reported at the run that got the code."""
        with pytest.raises(StagecalcError) as info:
            answer(Session(), f"{EXTRUSION};;")
        assert info.value.kind is DiagnosticKind.SCOPE_EXTRUSION
        assert (info.value.diagnostic.line, info.value.diagnostic.column) == (1, 28)

    def test_fresh_names_continue_across_phrases(self):
        """Test every phrase draws from the same counter."""
        session = Session(Pipeline.BASELINE)
        answer(session, ETA)
        first = answer(session, "eta (fun z -> z);;")
        second = answer(session, "eta (fun z -> z);;")
        assert first.endswith(".<fun x_1 -> x_1>.")
        assert second.endswith(".<fun x_2 -> x_2>.")

    def test_dumps(self):
        """Test the requested intermediate forms come before the answer."""
        session = Session(dump_ast=True, dump_typed=True, dump_translated=True)
        assert answer(session, ".<1>.;;").splitlines() == [
            "[ast] .<1>.",
            "[typed] .<1>. : int code",
            "[translated] %lift 1",
            "- : int code = .<1>.",
        ]

    def test_session_logs_start(self):
        """Test the session announces itself on its logger."""
        with patch("stagecalc.cli.logging.getLogger") as get_logger:
            Session(Pipeline.BASELINE)
        get_logger.return_value.info.assert_called_once_with(
            "Session started with the baseline pipeline"
        )


class TestRunFile:
    """Test cases for batch execution edge cases."""

    def test_missing_file(self):
        """Test an unreadable file is a usage error."""
        with patch("sys.stderr", new_callable=io.StringIO) as stderr:
            code = run_file(str(PROGRAMS / "missing.ml"), out=io.StringIO())
        assert code == EXIT_USAGE
        assert "cannot read" in stderr.getvalue()

    def test_parse_error_stops_before_running(self):
        """Test nothing runs when a later phrase does not parse."""
        out = io.StringIO()
        with patch("stagecalc.cli.Path.read_text", return_value="succ 1;;\n1 + ;;"):
            code = run_file("phrases.ml", out=out)
        assert code == EXIT_DIAGNOSTIC
        assert out.getvalue() == (
            "ParseError at line 2, column 5: unexpected token ';;'\n"
        )

    def test_empty_file(self):
        """Test a file without phrases prints nothing."""
        out = io.StringIO()
        with patch("stagecalc.cli.Path.read_text", return_value="(* empty *)\n"):
            assert run_file("empty.ml", out=out) == EXIT_OK
        assert out.getvalue() == ""

    def test_deep_program_fails_to_parse_cleanly(self):
        """Test exhausting the stack while parsing gives exit code 1."""
        out = io.StringIO()
        with patch("stagecalc.cli.Path.read_text", return_value="1;;"):
            with patch("stagecalc.cli.parse_program", side_effect=RecursionError):
                code = run_file("deep.ml", out=out)
        assert code == EXIT_DIAGNOSTIC
        assert out.getvalue() == (
            "InternalInvariant at line 1, column 1: "
            "program is nested too deeply to parse\n"
        )


class TestRepl:
    """Test cases for the interactive loop."""

    def test_multi_line_phrases_and_errors(self):
        """Test input accumulates until ;; and errors do not stop the loop."""
        stdin = io.StringIO("let x =\n  41;;\nsucc x;;\n1 +;;\nx;;\n")
        with patch("sys.stdout", new_callable=io.StringIO) as stdout:
            assert repl(Session(), stdin) == EXIT_OK
        assert stdout.getvalue().splitlines() == [
            "val x : int = 41",
            "- : int = 42",
            "ParseError at line 1, column 4: unexpected token ';;'",
            "- : int = 41",
        ]

    def test_deep_phrase_does_not_end_the_loop(self):
        """Test the loop answers the next phrase after a stack overflow."""
        calls = []

        def deep_once(*args):
            calls.append(args)
            if len(calls) == 1:
                raise RecursionError("maximum recursion depth exceeded")
            return translate_program(*args)

        stdin = io.StringIO("succ 1;;\nsucc 1;;\n")
        with patch("stagecalc.cli.translate_program", side_effect=deep_once):
            with patch("sys.stdout", new_callable=io.StringIO) as stdout:
                assert repl(Session(), stdin) == EXIT_OK
        assert stdout.getvalue().splitlines() == [
            "InternalInvariant at line 1, column 1: "
            "phrase is nested too deeply to process",
            "- : int = 2",
        ]


class TestMain:
    """Test cases for the command-line entry point."""

    def test_run(self):
        """Test stagecalc run FILE."""
        path = PROGRAMS / "nested_csp.ml"
        with patch("sys.stdout", new_callable=io.StringIO) as stdout:
            assert main(["run", str(path)]) == EXIT_OK
        expected = path.with_suffix(".out").read_text(encoding="utf-8")
        assert stdout.getvalue() == expected

    def test_run_error_exit_code(self):
        """Test a diagnostic gives exit code 1."""
        path = PROGRAMS / "errors" / "stage_error.ml"
        with patch("sys.stdout", new_callable=io.StringIO):
            assert main(["--pipeline", "baseline", "run", str(path)]) == EXIT_DIAGNOSTIC

    def test_long_sum(self, tmp_path):
        """Test a sum of a few hundred terms runs to its value."""
        path = tmp_path / "sum.ml"
        path.write_text("1" + " + 1" * 300 + ";;\n", encoding="utf-8")
        with patch("sys.stdout", new_callable=io.StringIO) as stdout:
            assert main(["run", str(path)]) == EXIT_OK
        assert stdout.getvalue() == "- : int = 301\n"

    def test_check(self):
        """Test stagecalc check FILE."""
        path = PROGRAMS / "csp.ml"
        with patch("sys.stdout", new_callable=io.StringIO) as stdout:
            assert main(["check", str(path)]) == EXIT_OK
        assert stdout.getvalue().splitlines()[0] == "val y : int"

    def test_dump_translated(self):
        """Test the global dump option reaches the session."""
        with patch("stagecalc.cli.Path.read_text", return_value=".<1>.;;"):
            with patch("sys.stdout", new_callable=io.StringIO) as stdout:
                assert main(["--dump-translated", "run", "one.ml"]) == EXIT_OK
        assert stdout.getvalue().splitlines() == [
            "[translated] %lift 1",
            "- : int code = .<1>.",
        ]

    def test_diff(self):
        """Test an empty campaign prints the summary and succeeds."""
        with patch("sys.stdout", new_callable=io.StringIO) as stdout:
            assert main(["diff", "--count", "0"]) == EXIT_OK
        assert stdout.getvalue() == "total=0 mismatches=0\n"

    def test_diff_small_campaign(self):
        """Test a short campaign from the command line."""
        with patch("sys.stdout", new_callable=io.StringIO) as stdout:
            code = main(["diff", "--count", "50", "--size", "8", "--seed", "3"])
        assert code == EXIT_OK
        assert stdout.getvalue().splitlines()[-1] == "total=50 mismatches=0"

    def test_diff_rejects_bad_values(self):
        """Test invalid campaign parameters are usage errors."""
        with patch("sys.stderr", new_callable=io.StringIO):
            with pytest.raises(SystemExit) as info:
                main(["diff", "--count", "-1"])
        assert info.value.code == EXIT_USAGE

    def test_unknown_command(self):
        """Test argparse rejects an unknown subcommand."""
        with patch("sys.stderr", new_callable=io.StringIO):
            with pytest.raises(SystemExit) as info:
                main(["compile"])
        assert info.value.code == EXIT_USAGE
