"""
stagecalc: a typed multi-stage calculus.

This package parses, type checks and evaluates programs with brackets
(``.<e>.``), escapes (``.~e``) and ``run``. Staged programs are translated
into an unstaged base language built on code combinators, either by a
separate pass after checking or by a checker that translates as it goes.
"""

from .cli import Session, repl_step, run_file
from .combinators import CodeValue, GenState
from .diagnostics import Diagnostic, DiagnosticKind, StagecalcError
from .difftest import DiffCampaign, DiffReport, diff_campaign
from .evaluator import Evaluator, initial_renv, show_value
from .generator import TermGenerator, gen_well_typed
from .parser import parse_expr, parse_program, parse_type
from .reference import StagedInterpreter
from .translate import Pipeline, infer_translate, tr_present, translate_program
from .typecheck import CheckerState, Env, infer_staged, initial_env

__version__ = "0.1.0"
__all__ = [
    "CheckerState",
    "CodeValue",
    "Diagnostic",
    "DiagnosticKind",
    "DiffCampaign",
    "DiffReport",
    "Env",
    "Evaluator",
    "GenState",
    "Pipeline",
    "Session",
    "StagecalcError",
    "StagedInterpreter",
    "TermGenerator",
    "diff_campaign",
    "gen_well_typed",
    "infer_staged",
    "infer_translate",
    "initial_env",
    "initial_renv",
    "parse_expr",
    "parse_program",
    "parse_type",
    "repl_step",
    "run_file",
    "show_value",
    "tr_present",
    "translate_program",
]
