"""Core functions and classes of the compiler."""

from .analysis import AssetModel, ClauseSpec, classify_assets, derive_specs
from .automaton import Automaton, CycleReport, build_automaton, enumerate_cycles, to_dot
from .codegen import TargetUnit, lower, render
from .exceptions import StipulaError, StipulaRuntimeError
from .interp import Interpreter
from .parser import canonicalize, parse_contract
from .printer import format_contract
from .scenario import ScenarioPlan, enumerate_scenarios, synthesize_loop_invariant

__all__ = [
    "AssetModel",
    "Automaton",
    "ClauseSpec",
    "CycleReport",
    "Interpreter",
    "ScenarioPlan",
    "StipulaError",
    "StipulaRuntimeError",
    "TargetUnit",
    "build_automaton",
    "canonicalize",
    "classify_assets",
    "derive_specs",
    "enumerate_cycles",
    "enumerate_scenarios",
    "format_contract",
    "lower",
    "parse_contract",
    "render",
    "synthesize_loop_invariant",
    "to_dot",
]
