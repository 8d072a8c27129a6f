"""
Random well-typed staged programs.

Programs are grown top-down from a target type, so they are well typed by
construction; every candidate is still run through the staged checker
before it is handed out. Generation is fully determined by the seed.
"""

import logging
import random
from typing import Callable, Dict, List, NamedTuple, Optional, Tuple

from .diagnostics import StagecalcError
from .syntax import (
    INT,
    PLUS,
    TIMES,
    App,
    ArrowT,
    Bracket,
    CodeT,
    Escape,
    Expr,
    IntLit,
    Lam,
    Name,
    Run,
    Type,
    Var,
    bracket_depth,
    code_depth,
    expr_size,
    mentions_code,
)
from .typecheck import CheckerState, Env, infer_staged, initial_env

_INFINITE = 10**6

_BINDER_TYPES = (
    INT,
    ArrowT(INT, INT),
    CodeT(INT),
    ArrowT(CodeT(INT), CodeT(INT)),
    ArrowT(INT, CodeT(INT)),
    CodeT(ArrowT(INT, INT)),
    CodeT(CodeT(INT)),
)

_PLAIN_RESULTS = (CodeT(INT), CodeT(ArrowT(INT, INT)))

_NESTED_RESULTS = (
    CodeT(CodeT(INT)),
    CodeT(CodeT(ArrowT(INT, INT))),
    CodeT(CodeT(CodeT(INT))),
)


class CtxVar(NamedTuple):
    name: Name
    stage: int
    type: Type


Production = Tuple[int, Callable[[], Expr]]


class TermGenerator:
    """
    Type-directed generator of closed, well-typed staged programs.

    Args:
        seed: Seed of the private random number generator
        size: Upper bound on the number of AST nodes
        env: Typing environment the program may use (library by default)
        max_depth: Deepest bracket nesting, 0 gives bracket-free programs
        nesting_bias: Share of programs whose result type is nested code
        csp_bias: Preference for variables used above their binding stage
        max_attempts: Candidates tried before falling back to a literal
        logger: Optional logger, defaults to the ``stagecalc.generator`` logger

    Example:
        >>> first = TermGenerator(seed=7, size=8).generate()
        >>> first == TermGenerator(seed=7, size=8).generate()
        True
    """

    NAME_POOL = ("x", "y", "z", "f", "g", "h", "u", "v", "w", "k")

    def __init__(
        self,
        seed: int,
        size: int,
        env: Optional[Env] = None,
        max_depth: int = 3,
        nesting_bias: float = 0.3,
        csp_bias: float = 0.3,
        max_attempts: int = 50,
        logger: Optional[logging.Logger] = None,
    ):
        if size < 1:
            raise ValueError(f"Program size must be positive, got {size}")
        if max_depth < 0:
            raise ValueError(f"Bracket depth must be non-negative, got {max_depth}")
        self.seed = seed
        self.size = size
        self.env = env if env is not None else initial_env()
        self.max_depth = max_depth
        self.nesting_bias = nesting_bias
        self.csp_bias = csp_bias
        self.max_attempts = max_attempts
        self.logger = logger or logging.getLogger("stagecalc.generator")
        self.rng = random.Random(seed)
        self._min_sizes: Dict[Tuple[Type, int], int] = {}
        self._names_used = 0

    # =========================================================================
    #     Entry point
    # =========================================================================

    def generate(self) -> Expr:
        """Return a program accepted by the staged checker."""
        for _ in range(self.max_attempts):
            self._names_used = 0
            target = self._pick_result_type()
            candidate = self._gen(target, 0, self.size, self._initial_ctx(), False)
            if (
                expr_size(candidate) <= self.size
                and bracket_depth(candidate) <= self.max_depth
                and self._accepted(candidate)
            ):
                return candidate
        self.logger.warning(
            f"seed {self.seed}: no program after {self.max_attempts} attempts"
        )
        return IntLit(0)

    def _accepted(self, e: Expr) -> bool:
        try:
            infer_staged(self.env, CheckerState(), e)
        except StagecalcError as err:
            self.logger.debug(f"seed {self.seed}: candidate rejected, {err}")
            return False
        return True

    def _initial_ctx(self) -> List[CtxVar]:
        return [
            CtxVar(name, binding.stage, binding.type)
            for name, binding in self.env.items()
            if name not in (PLUS, TIMES)
        ]

    def _pick_result_type(self) -> Type:
        roll = self.rng.random()
        if roll < self.nesting_bias:
            nested = self._fitting(_NESTED_RESULTS)
            if nested:
                return self.rng.choice(nested)
        if roll < 0.65:
            plain = self._fitting(_PLAIN_RESULTS)
            if plain:
                return self.rng.choice(plain)
        return INT

    def _fitting(self, types) -> List[Type]:
        return [
            t
            for t in types
            if code_depth(t) <= self.max_depth and self.min_size(t, 0) <= self.size
        ]

    def _fresh_param(self) -> Name:
        index = self._names_used
        self._names_used += 1
        base = self.NAME_POOL[index % len(self.NAME_POOL)]
        round_ = index // len(self.NAME_POOL)
        return Name(base if round_ == 0 else f"{base}{round_ + 1}")

    # =========================================================================
    #     Sizes
    # =========================================================================

    def min_size(self, t: Type, stage: int) -> int:
        """Smallest program of type t at the given stage that needs no variables."""
        key = (t, stage)
        if key not in self._min_sizes:
            self._min_sizes[key] = self._compute_min_size(t, stage)
        return self._min_sizes[key]

    def _compute_min_size(self, t: Type, stage: int) -> int:
        if t == INT:
            return 1
        if isinstance(t, ArrowT):
            return min(_INFINITE, 1 + self.min_size(t.codomain, stage))
        if isinstance(t, CodeT) and stage < self.max_depth:
            return min(_INFINITE, 1 + self.min_size(t.inner, stage + 1))
        return _INFINITE

    # =========================================================================
    #     Productions
    # =========================================================================

    def _gen(
        self, t: Type, stage: int, budget: int, ctx: List[CtxVar], in_escape: bool
    ) -> Expr:
        productions = self._productions(t, stage, budget, ctx, in_escape)
        total = sum(weight for weight, _ in productions)
        pick = self.rng.uniform(0, total)
        for weight, build in productions:
            pick -= weight
            if pick <= 0:
                return build()
        return productions[-1][1]()

    def _productions(
        self, t: Type, stage: int, budget: int, ctx: List[CtxVar], in_escape: bool
    ) -> List[Production]:
        found: List[Production] = []
        rng = self.rng

        visible = [v for v in ctx if v.type == t and v.stage <= stage]
        if visible:
            persisted = [v for v in visible if v.stage < stage]

            def var() -> Expr:
                pool = visible
                if persisted and rng.random() < self.csp_bias * 2:
                    pool = persisted
                return Var(rng.choice(pool).name)

            found.append((3 if persisted else 2, var))

        if t == INT:
            found.append((2 if budget > 3 else 5, lambda: IntLit(rng.randint(0, 9))))
            if budget >= 5:
                found.append((3, lambda: self._arith(stage, budget, ctx, in_escape)))
            succ = Name("succ")
            if budget >= 3 and any(v.name == succ and v.stage == 0 for v in ctx):
                found.append(
                    (
                        1,
                        lambda: App(
                            Var(succ), self._gen(INT, stage, budget - 2, ctx, in_escape)
                        ),
                    )
                )

        binders = [
            b
            for b in _BINDER_TYPES
            if code_depth(b) <= self.max_depth
            and 2 + self.min_size(t, stage) + self.min_size(b, stage) <= budget
        ]
        if binders:

            def let() -> Expr:
                bound_type = rng.choice(binders)
                return self._let(t, bound_type, stage, budget, ctx, in_escape)

            found.append((2, let))

        callers = [
            v
            for v in ctx
            if isinstance(v.type, ArrowT)
            and v.type.codomain == t
            and v.stage <= stage
            and 2 + self.min_size(v.type.domain, stage) <= budget
        ]
        if callers:

            def call() -> Expr:
                fn = rng.choice(callers)
                arg = self._gen(fn.type.domain, stage, budget - 2, ctx, in_escape)
                return App(Var(fn.name), arg)

            found.append((2, call))

        if isinstance(t, ArrowT) and 1 + self.min_size(t.codomain, stage) <= budget:
            found.append((4, lambda: self._lam(t, stage, budget, ctx, in_escape)))

        if (
            isinstance(t, CodeT)
            and stage < self.max_depth
            and 1 + self.min_size(t.inner, stage + 1) <= budget
        ):
            found.append(
                (
                    4,
                    lambda: Bracket(
                        self._gen(t.inner, stage + 1, budget - 1, ctx, in_escape)
                    ),
                )
            )

        if stage >= 1 and 1 + self.min_size(CodeT(t), stage - 1) <= budget:
            found.append(
                (
                    3,
                    lambda: Escape(
                        self._gen(CodeT(t), stage - 1, budget - 1, ctx, True)
                    ),
                )
            )

        if (
            stage == 0
            and not in_escape
            and self.max_depth >= 1
            and 1 + self.min_size(CodeT(t), 0) <= budget
        ):
            closed_ctx = [v for v in ctx if not mentions_code(v.type)]
            found.append(
                (1, lambda: Run(self._gen(CodeT(t), 0, budget - 1, closed_ctx, False)))
            )

        if not found:
            # Only reachable through a caller that ignored min_size.
            found.append((1, lambda: IntLit(0)))
        return found

    def _arith(
        self, stage: int, budget: int, ctx: List[CtxVar], in_escape: bool
    ) -> Expr:
        op = PLUS if self.rng.random() < 0.5 else TIMES
        room = budget - 3
        left = self._gen(INT, stage, self.rng.randint(1, room - 1), ctx, in_escape)
        right = self._gen(INT, stage, room - expr_size(left), ctx, in_escape)
        return App(App(Var(op), left), right)

    def _let(
        self,
        t: Type,
        bound_type: Type,
        stage: int,
        budget: int,
        ctx: List[CtxVar],
        in_escape: bool,
    ) -> Expr:
        param = self._fresh_param()
        room = budget - 2
        bound_min = self.min_size(bound_type, stage)
        body_budget = self.rng.randint(self.min_size(t, stage), room - bound_min)
        body = self._gen(
            t, stage, body_budget, ctx + [CtxVar(param, stage, bound_type)], in_escape
        )
        bound = self._gen(bound_type, stage, room - expr_size(body), ctx, in_escape)
        return App(Lam(param, bound_type, body), bound)

    def _lam(
        self, t: ArrowT, stage: int, budget: int, ctx: List[CtxVar], in_escape: bool
    ) -> Expr:
        param = self._fresh_param()
        body = self._gen(
            t.codomain,
            stage,
            budget - 1,
            ctx + [CtxVar(param, stage, t.domain)],
            in_escape,
        )
        return Lam(param, t.domain, body)


def gen_well_typed(
    seed: int, size: int, env: Optional[Env] = None, max_depth: int = 3
) -> Expr:
    """Well-typed random program of at most ``size`` nodes, fixed by the seed."""
    return TermGenerator(seed, size, env, max_depth=max_depth).generate()
