"""
Differential testing of the two translation pipelines.

Each generated program is elaborated and translated by both pipelines.
The outputs must agree up to renaming and have the program's type, the
integrated translation must never nest escapes (also in its intermediate
results) and must produce a pure base program, both outputs must check
again once erased, and evaluating either output must give the same result
as the other one and as the direct staged interpreter. None of the three
evaluations may fail with an InternalInvariant.

Violations are collected into a DiffReport rather than raised.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, List, NamedTuple, Optional

from .combinators import CodeValue, GenState
from .diagnostics import DiagnosticKind, StagecalcError
from .evaluator import Evaluator, initial_renv, link
from .generator import TermGenerator
from .reference import StagedInterpreter, reference_renv
from .syntax import AnnExpr, Expr, alpha_eq, pretty_code, pretty_expr, pretty_type
from .translate import (
    Pipeline,
    check_no_nested_escapes,
    erase,
    infer_translate,
    is_base1,
    prim_instances,
    tr_present,
    typecheck_base1,
)
from .typecheck import CheckerState, Env, infer_staged, initial_env
from .values import IntV, StrV

PROPERTIES = (
    "accept",
    "agreement",
    "types",
    "no-nested-escapes",
    "base-output",
    "retypes",
    "dynamic",
    "reference",
    "soundness",
    "crash",
)


@dataclass(frozen=True)
class DiffFailure:
    """One property violation found for one program."""

    seed: int
    program: str
    baseline: str
    optimized: str
    prop: str

    def line(self) -> str:
        return f"seed={self.seed} prop={self.prop}"


@dataclass
class DiffReport:
    """Outcome of a campaign; ``mismatches`` always equals ``len(failures)``."""

    total: int = 0
    failures: List[DiffFailure] = field(default_factory=list)

    @property
    def mismatches(self) -> int:
        return len(self.failures)

    def lines(self) -> List[str]:
        summary = f"total={self.total} mismatches={self.mismatches}"
        return [failure.line() for failure in self.failures] + [summary]

    def to_text(self) -> str:
        return "\n".join(self.lines())


class Outcome(NamedTuple):
    """What evaluating a program produced, in comparable form."""

    kind: str
    value: Any

    @classmethod
    def of(cls, value: Any) -> "Outcome":
        if isinstance(value, IntV):
            return cls("int", value.value)
        if isinstance(value, StrV):
            return cls("str", value.value)
        if isinstance(value, CodeValue):
            return cls("code", value.body)
        return cls("fun", None)

    def agrees_with(self, other: "Outcome") -> bool:
        if self.kind != other.kind:
            return False
        if self.kind == "code":
            return alpha_eq(self.value, other.value)
        return self.value == other.value

    def render(self) -> str:
        if self.kind == "code":
            return pretty_code(self.value)
        if self.kind == "fun":
            return "<fun>"
        if self.kind == "str":
            return repr(self.value)
        if self.kind == "error":
            return f"error {self.value}"
        return str(self.value)


UNSOUND = Outcome("error", DiagnosticKind.INTERNAL_INVARIANT.value)


class DiffCampaign:
    """
    Runs both pipelines over a generated corpus.

    Args:
        count: Number of programs
        size: Maximum program size in AST nodes
        seed: Seed of the first program; program i uses ``seed + i``
        workers: Number of threads checking programs concurrently
        max_depth: Deepest bracket nesting of generated programs
        nesting_bias: Share of generated programs with a nested code type
        csp_bias: Generator preference for cross-stage variable uses
        env: Typing environment, the library by default
        logger: Optional logger, defaults to the ``stagecalc.difftest`` logger

    Example:
        >>> report = DiffCampaign(count=100, size=8, seed=42).run()
        >>> report.mismatches
        0
    """

    def __init__(
        self,
        count: int,
        size: int,
        seed: int,
        workers: int = 1,
        max_depth: int = 3,
        nesting_bias: float = 0.3,
        csp_bias: float = 0.3,
        env: Optional[Env] = None,
        logger: Optional[logging.Logger] = None,
    ):
        if count < 0:
            raise ValueError(f"Program count must be non-negative, got {count}")
        if size < 1:
            raise ValueError(f"Program size must be positive, got {size}")
        if workers < 1:
            raise ValueError(f"Worker count must be positive, got {workers}")
        self.count = count
        self.size = size
        self.seed = seed
        self.workers = workers
        self.max_depth = max_depth
        self.nesting_bias = nesting_bias
        self.csp_bias = csp_bias
        self.env = env if env is not None else initial_env()
        self.logger = logger or logging.getLogger("stagecalc.difftest")

    def run(self) -> DiffReport:
        self.logger.info(
            f"diff campaign: count={self.count} size={self.size} seed={self.seed} "
            f"workers={self.workers}"
        )
        seeds = [self.seed + i for i in range(self.count)]
        if self.workers > 1:
            with ThreadPoolExecutor(max_workers=self.workers) as pool:
                results = list(pool.map(self.check_seed, seeds))
        else:
            results = [self.check_seed(seed) for seed in seeds]

        report = DiffReport(total=self.count)
        for failures in results:
            report.failures.extend(failures)
        self.logger.info(
            f"diff campaign finished: total={report.total} "
            f"mismatches={report.mismatches}"
        )
        return report

    def check_seed(self, seed: int) -> List[DiffFailure]:
        program = TermGenerator(
            seed,
            self.size,
            self.env,
            max_depth=self.max_depth,
            nesting_bias=self.nesting_bias,
            csp_bias=self.csp_bias,
            logger=self.logger,
        ).generate()
        return self.check_program(seed, program)

    def check_program(self, seed: int, e: Expr) -> List[DiffFailure]:
        """Check every property for one program and return the violations."""
        failures: List[DiffFailure] = []
        text = pretty_expr(e)

        def record(prop: str, baseline: str = "", optimized: str = "") -> None:
            self.logger.warning(f"seed={seed} prop={prop} program: {text}")
            failures.append(DiffFailure(seed, text, baseline, optimized, prop))

        try:
            self._check(e, record)
        except Exception as err:
            record("crash", "", repr(err))
        return failures

    def _check(self, e: Expr, record: Callable[..., None]) -> None:
        try:
            staged = infer_staged(self.env, CheckerState(), e)
        except StagecalcError as err:
            record("accept", str(err.diagnostic), "")
            return

        baseline = tr_present(staged)
        baseline_text = pretty_expr(erase(baseline))
        trace: List[AnnExpr] = []
        try:
            optimized = infer_translate(self.env, CheckerState(trace=trace), e)
        except StagecalcError as err:
            record("agreement", baseline_text, str(err.diagnostic))
            return
        optimized_text = pretty_expr(erase(optimized))

        if not alpha_eq(erase(baseline), erase(optimized)):
            record("agreement", baseline_text, optimized_text)
        if not baseline.type == optimized.type == staged.type:
            record("types", pretty_type(baseline.type), pretty_type(optimized.type))
        if not all(check_no_nested_escapes(step) for step in trace + [optimized]):
            record("no-nested-escapes", baseline_text, optimized_text)
        if not is_base1(optimized):
            record("base-output", baseline_text, optimized_text)
        if not (self._retypes(baseline) and self._retypes(optimized)):
            record("retypes", baseline_text, optimized_text)

        from_baseline = self._evaluate(baseline, Pipeline.BASELINE)
        from_optimized = self._evaluate(optimized, Pipeline.OPTIMIZED)
        if not from_baseline.agrees_with(from_optimized):
            record("dynamic", from_baseline.render(), from_optimized.render())
        from_reference = self._interpret(staged)
        if not from_reference.agrees_with(from_optimized):
            record("reference", from_reference.render(), from_optimized.render())
        outcomes = (from_baseline, from_optimized, from_reference)
        if UNSOUND in outcomes:
            record("soundness", from_baseline.render(), from_optimized.render())

    def _retypes(self, out: AnnExpr) -> bool:
        try:
            checked = typecheck_base1(
                self.env, erase(out), expected=out.type, instances=prim_instances(out)
            )
        except StagecalcError:
            return False
        return checked.type == out.type

    def _evaluate(self, out: AnnExpr, pipeline: Pipeline) -> Outcome:
        evaluator = Evaluator(GenState(), pipeline, self.logger)
        try:
            return Outcome.of(evaluator.evaluate(initial_renv(), link(out)))
        except StagecalcError as err:
            return Outcome("error", err.kind.value)

    def _interpret(self, staged: AnnExpr) -> Outcome:
        interpreter = StagedInterpreter(GenState(), self.logger)
        try:
            return Outcome.of(interpreter.evaluate(reference_renv(), staged))
        except StagecalcError as err:
            return Outcome("error", err.kind.value)


def diff_campaign(count: int, size: int, seed: int, workers: int = 1) -> DiffReport:
    """Run a campaign over ``count`` generated programs of at most ``size`` nodes."""
    return DiffCampaign(count, size, seed, workers=workers).run()
