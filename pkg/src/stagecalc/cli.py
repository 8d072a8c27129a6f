"""
Command-line driver: interactive toplevel, batch execution, type checking
and differential testing.

Usage:
    stagecalc repl
    stagecalc run FILE
    stagecalc check FILE
    stagecalc diff --count N --size S --seed K [--workers W]

Global options (before the subcommand): ``--pipeline {baseline,optimized}``,
``--dump-ast``, ``--dump-typed``, ``--dump-translated`` and ``--log``.

Exit codes: 0 success, 1 language diagnostic, 2 usage or I/O error,
3 differential-testing mismatches.
"""

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import Callable, List, Optional, TextIO

from .combinators import GenState
from .config import create_logger, diff_config, session_config
from .diagnostics import DiagnosticKind, StagecalcError, fail
from .difftest import DiffCampaign
from .evaluator import Evaluator, initial_renv, link, show_value
from .parser import parse_program
from .syntax import (
    LetPhrase,
    Phrase,
    pretty_expr,
    pretty_type,
    strip_annotations,
)
from .translate import Pipeline, erase, translate_program
from .typecheck import CheckerState, infer_staged, initial_env

EXIT_OK = 0
EXIT_DIAGNOSTIC = 1
EXIT_USAGE = 2
EXIT_MISMATCH = 3


class Session:
    """
    State of one toplevel: the typing and runtime environments, the shared
    fresh-name state and the chosen pipeline.

    A toplevel ``let`` extends both environments with the same name at
    stage 0. A phrase that fails leaves the session as it was.

    Args:
        pipeline: Translation used for every phrase
        dump_ast: Print each phrase's syntax tree before its result
        dump_typed: Print the staged elaboration and its type
        dump_translated: Print the erased translated program
        logger: Optional logger, defaults to the ``stagecalc.session`` logger

    Example:
        >>> session = Session()
        >>> repl_step(session, parse_program("1 + 2;;")[0])
        '- : int = 3'
    """

    def __init__(
        self,
        pipeline: Pipeline = Pipeline.OPTIMIZED,
        dump_ast: bool = False,
        dump_typed: bool = False,
        dump_translated: bool = False,
        logger: Optional[logging.Logger] = None,
    ):
        self.pipeline = pipeline
        self.dump_ast = dump_ast
        self.dump_typed = dump_typed
        self.dump_translated = dump_translated
        self.logger = logger or logging.getLogger("stagecalc.session")

        self.type_env = initial_env()
        self.runtime_env = initial_renv()
        self.gen = GenState()
        self.checker = CheckerState()
        self.evaluator = Evaluator(self.gen, pipeline, self.logger)

        self.logger.info(f"Session started with the {pipeline.value} pipeline")

    def _new_state(self) -> CheckerState:
        return CheckerState(uvar_counter=self.checker.uvar_counter)

    def _dumps(self, phrase: Phrase) -> List[str]:
        lines = []
        if self.dump_ast:
            lines.append(f"[ast] {pretty_expr(phrase.expr)}")
        if self.dump_typed:
            staged = infer_staged(self.type_env, self._new_state(), phrase.expr)
            typed = pretty_expr(strip_annotations(staged, keep_binder_types=True))
            lines.append(f"[typed] {typed} : {pretty_type(staged.type)}")
        return lines

    def _guarded(self, work: Callable[[Phrase], str], phrase: Phrase) -> str:
        saved_counter = self.gen.counter
        try:
            return work(phrase)
        except RecursionError:
            self.gen.counter = saved_counter
            self.logger.error("Recursion limit exceeded while processing a phrase")
            fail(
                DiagnosticKind.INTERNAL_INVARIANT,
                "phrase is nested too deeply to process",
                phrase.pos,
            )

    def step(self, phrase: Phrase) -> str:
        """
        Elaborate, translate and evaluate one phrase.

        Returns:
            str: The toplevel's answer, preceded by any requested dumps

        Raises:
            StagecalcError: any diagnostic; the session is left unchanged
        """
        return self._guarded(self._step, phrase)

    def _step(self, phrase: Phrase) -> str:
        lines = self._dumps(phrase)
        st = self._new_state()
        program = translate_program(self.type_env, st, phrase.expr, self.pipeline)
        if self.dump_translated:
            lines.append(f"[translated] {pretty_expr(erase(program))}")

        saved_counter = self.gen.counter
        try:
            value = self.evaluator.evaluate(self.runtime_env, link(program))
            shown = show_value(value)
        except StagecalcError:
            self.gen.counter = saved_counter
            raise

        type_text = pretty_type(program.type)
        self.checker = st
        if isinstance(phrase, LetPhrase):
            self.type_env = self.type_env.extend(phrase.name, 0, program.type)
            self.runtime_env = self.runtime_env.extend(phrase.name, value)
            lines.append(f"val {phrase.name} : {type_text} = {shown}")
        else:
            lines.append(f"- : {type_text} = {shown}")
        return "\n".join(lines)

    def check(self, phrase: Phrase) -> str:
        """
        Type one phrase without evaluating it.

        Only the typing environment grows; check sessions never evaluate.
        """
        return self._guarded(self._check, phrase)

    def _check(self, phrase: Phrase) -> str:
        lines = self._dumps(phrase)
        st = self._new_state()
        program = translate_program(self.type_env, st, phrase.expr, self.pipeline)
        if self.dump_translated:
            lines.append(f"[translated] {pretty_expr(erase(program))}")

        type_text = pretty_type(program.type)
        self.checker = st
        if isinstance(phrase, LetPhrase):
            self.type_env = self.type_env.extend(phrase.name, 0, program.type)
            lines.append(f"val {phrase.name} : {type_text}")
        else:
            lines.append(f"- : {type_text}")
        return "\n".join(lines)


def parse_phrases(source: str) -> List[Phrase]:
    """Parse a program, reporting exhausted recursion as a diagnostic."""
    try:
        return parse_program(source)
    except RecursionError:
        fail(DiagnosticKind.INTERNAL_INVARIANT, "program is nested too deeply to parse")


def repl_step(session: Session, phrase: Phrase) -> str:
    """Run one phrase in the session and return what the toplevel prints."""
    return session.step(phrase)


# =============================================================================
#     Batch execution
# =============================================================================


def run_file(
    path: str,
    session: Optional[Session] = None,
    check_only: bool = False,
    out: Optional[TextIO] = None,
) -> int:
    """
    Execute (or only type) every phrase of a file in order.

    Args:
        path: Source file with ``;;``-terminated phrases
        session: Session to run in, a fresh optimized one by default
        check_only: Print types instead of evaluating
        out: Stream for the transcript, stdout by default

    Returns:
        int: 0 on success, 1 at the first diagnostic, 2 if the file can't be read
    """
    out = out or sys.stdout
    session = session or Session()
    try:
        source = Path(path).read_text(encoding="utf-8")
    except OSError as err:
        session.logger.error(f"Cannot read {path}: {err}")
        print(f"stagecalc: cannot read {path}: {err.strerror or err}", file=sys.stderr)
        return EXIT_USAGE

    try:
        phrases = parse_phrases(source)
        for phrase in phrases:
            answer = session.check(phrase) if check_only else session.step(phrase)
            print(answer, file=out)
    except StagecalcError as err:
        session.logger.error(f"{path}: {err.diagnostic}")
        print(err.diagnostic, file=out)
        return EXIT_DIAGNOSTIC
    return EXIT_OK


# =============================================================================
#     Interactive toplevel
# =============================================================================


def repl(session: Session, stdin: Optional[TextIO] = None) -> int:
    """
    Read phrases until end of input, answering each one.

    Input accumulates over lines until a line ends with ``;;``. Diagnostics
    are printed and the loop carries on.
    """
    stdin = stdin or sys.stdin
    interactive = stdin.isatty()
    buffer: List[str] = []

    while True:
        if interactive:
            prompt = session_config["continuation_prompt" if buffer else "prompt"]
            print(prompt, end="", flush=True)
        line = stdin.readline()
        if not line:
            break
        buffer.append(line)
        if not line.rstrip().endswith(";;"):
            continue

        source = "".join(buffer)
        buffer = []
        try:
            for phrase in parse_phrases(source):
                print(session.step(phrase))
        except StagecalcError as err:
            session.logger.error(f"toplevel: {err.diagnostic}")
            print(err.diagnostic)

    if interactive:
        print()
    return EXIT_OK


# =============================================================================
#     Argument parsing
# =============================================================================


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stagecalc", description="Multi-stage calculus toplevel and tools"
    )
    parser.add_argument(
        "--pipeline",
        choices=[p.value for p in Pipeline],
        default=session_config["pipeline"],
        help="translation used before evaluation (default: %(default)s)",
    )
    parser.add_argument("--dump-ast", action="store_true", help="print parse trees")
    parser.add_argument(
        "--dump-typed", action="store_true", help="print staged elaborations"
    )
    parser.add_argument(
        "--dump-translated", action="store_true", help="print translated programs"
    )
    parser.add_argument(
        "--log", action="store_true", help="write a session log to debugging/logs"
    )

    commands = parser.add_subparsers(dest="command", required=True)
    commands.add_parser("repl", help="interactive toplevel")
    run_cmd = commands.add_parser("run", help="execute a file of phrases")
    run_cmd.add_argument("file")
    check_cmd = commands.add_parser("check", help="print the type of each phrase")
    check_cmd.add_argument("file")

    diff_cmd = commands.add_parser("diff", help="differential-test both pipelines")
    diff_cmd.add_argument("--count", type=int, default=diff_config["count"])
    diff_cmd.add_argument("--size", type=int, default=diff_config["size"])
    diff_cmd.add_argument("--seed", type=int, default=diff_config["seed"])
    diff_cmd.add_argument("--workers", type=int, default=diff_config["workers"])
    diff_cmd.add_argument("--max-depth", type=int, default=diff_config["max_depth"])
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if sys.getrecursionlimit() < session_config["recursion_limit"]:
        sys.setrecursionlimit(session_config["recursion_limit"])
    logger = create_logger(
        args.command.capitalize(), str(os.getpid()), log_to_file=args.log or None
    )

    if args.command == "diff":
        try:
            campaign = DiffCampaign(
                args.count,
                args.size,
                args.seed,
                workers=args.workers,
                max_depth=args.max_depth,
                nesting_bias=diff_config["nesting_bias"],
                csp_bias=diff_config["csp_bias"],
                logger=logger,
            )
        except ValueError as err:
            parser.error(str(err))
        report = campaign.run()
        for line in report.lines():
            print(line)
        return EXIT_MISMATCH if report.mismatches else EXIT_OK

    session = Session(
        Pipeline(args.pipeline),
        dump_ast=args.dump_ast,
        dump_typed=args.dump_typed,
        dump_translated=args.dump_translated,
        logger=logger,
    )
    if args.command == "repl":
        return repl(session)
    return run_file(args.file, session, check_only=args.command == "check")


if __name__ == "__main__":
    sys.exit(main())
