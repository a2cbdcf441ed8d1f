"""Static subcommands: check, graph, report, plan and translate."""

import logging
import sys
from dataclasses import dataclass
from pathlib import Path

from pydantic import TypeAdapter

from config import TARGET_SUFFIX
from core.analysis import (
    AssetModel,
    ClauseSpec,
    classify_assets,
    conservation_invariant,
    derive_specs,
    exclusivity_invariant,
)
from core.automaton import (
    Automaton,
    CycleReport,
    build_automaton,
    enumerate_cycles,
    to_dot,
    unreachable_states,
)
from core.codegen import TargetUnit, lower, render
from core.enums import ExitCode, MethodRole
from core.exceptions import NotDisjointError
from core.formulas import render as render_formula
from core.models import (
    AnalysisReport,
    AssetReport,
    CliConfig,
    ClauseReport,
    PlanReport,
    StepReport,
    TranslationSummary,
)
from core.parser import canonicalize, parse_contract
from core.printer import format_contract
from core.scenario import (
    Call,
    GuardedEvent,
    LoopSegment,
    ScenarioPlan,
    enumerate_scenarios,
)
from core.syntax import ContractAst
from utils.async_file_utils import file_exists, read_text, write_text

logger = logging.getLogger(__name__)
diagnostics = logging.getLogger("diagnostics")

PLANS_ADAPTER: TypeAdapter[list[PlanReport]] = TypeAdapter(list[PlanReport])


@dataclass(frozen=True, slots=True)
class Compilation:
    """Results of the static passes over one source file."""

    path: Path
    ast: ContractAst
    automaton: Automaton
    cycles: CycleReport
    models: tuple[AssetModel, ...]
    specs: dict[str, ClauseSpec]

    @property
    def unreachable(self) -> list[str]:
        return unreachable_states(self.automaton)


async def load_contract(path: Path) -> ContractAst:
    """Read, parse and canonicalize a contract file."""
    return canonicalize(parse_contract(await read_text(path)))


async def compile_contract(path: Path) -> Compilation:
    """Run every static pass that does not need disjoint cycles.

    :param path: Contract source file.
    :type path: Path
    :return: Parsed contract, automaton, cycles, assets and clause contracts.
    :rtype: Compilation
    """
    ast = await load_contract(path)
    automaton = build_automaton(ast)
    cycles = enumerate_cycles(automaton)
    models = tuple(classify_assets(ast))
    specs = derive_specs(ast, models)
    compilation = Compilation(path, ast, automaton, cycles, models, specs)
    for state in compilation.unreachable:
        diagnostics.warning("%s: warning: state @%s is unreachable", path, state)
    return compilation


def require_disjoint(compilation: Compilation) -> None:
    """:raises NotDisjointError: If two cycles share a state."""
    report = compilation.cycles
    if not report.disjoint:
        raise NotDisjointError(report.shared_states, report.witness)


def emit(text: str) -> None:
    """Write an artifact to standard output."""
    sys.stdout.write(text if text.endswith("\n") else f"{text}\n")


def _plural(count: int, noun: str) -> str:
    return f"{count} {noun}" if count == 1 else f"{count} {noun}s"


def analysis_report(
    compilation: Compilation, *, with_clauses: bool = True
) -> AnalysisReport:
    """Summarize the static passes for ``report`` and ``check --json``."""
    a, report = compilation.automaton, compilation.cycles
    assets = [
        AssetReport(
            asset=m.asset,
            kind=m.kind,
            locations=[loc.key for loc in m.locations],
            invariant=render_formula(
                conservation_invariant(m)
                if m.is_divisible
                else exclusivity_invariant(m),
            ),
        )
        for m in compilation.models
    ]
    clauses = [
        ClauseReport(
            name=spec.name,
            permission=spec.permission,
            requires=render_formula(spec.requires),
            ensures=render_formula(spec.ensures),
            assignable=[loc.key for loc in spec.frame],
        )
        for spec in compilation.specs.values()
        if with_clauses
    ]
    return AnalysisReport(
        contract=compilation.ast.name,
        states=sorted(a.states),
        initial=a.initial,
        cycles=[str(c) for c in report.cycles],
        disjoint=report.disjoint,
        unreachable=compilation.unreachable,
        assets=assets,
        clauses=clauses,
    )


def _step_report(step: Call | GuardedEvent | LoopSegment) -> StepReport:
    match step:
        case Call(clause=clause, args=args):
            return StepReport(kind="call", name=clause, args=list(args))
        case GuardedEvent(args=args):
            return StepReport(kind="event", name=step.method, args=[step.guard, *args])
        case LoopSegment():
            return StepReport(
                kind="loop",
                name=step.method,
                args=list(step.args),
                body=[_step_report(call) for call in step.body],
            )


def plan_report(plan: ScenarioPlan) -> PlanReport:
    return PlanReport(
        name=plan.name,
        params=[p.name for p in plan.params],
        steps=[_step_report(step) for step in plan.steps],
    )


def format_plan(plan: ScenarioPlan) -> str:
    """One-line rendering of a plan, e.g. ``seq2(b): offer(x, n); activate(b)``."""
    parts: list[str] = []
    for step in plan.steps:
        match step:
            case Call(clause=clause, args=args):
                parts.append(f"{clause}({', '.join(args)})")
            case GuardedEvent(args=args):
                parts.append(f"[{step.guard}] {step.method}({', '.join(args)})")
            case LoopSegment():
                body = "; ".join(f"{c.clause}({', '.join(c.args)})" for c in step.body)
                parts.append(f"{step.method}({', '.join(step.args)}) {{ {body} }}")
    params = ", ".join(p.name for p in plan.params)
    return f"{plan.name}({params}): {'; '.join(parts)}"


def scenario_plans(compilation: Compilation) -> list[ScenarioPlan]:
    require_disjoint(compilation)
    return enumerate_scenarios(
        compilation.automaton,
        compilation.cycles,
        compilation.ast,
        compilation.models,
        compilation.specs,
    )


def target_path(compilation: Compilation, output: Path | None) -> Path:
    """Where the compilation unit goes.

    ``<Contract>.java`` beside the source by default.
    """
    if output is not None:
        return output
    return compilation.path.with_name(f"{compilation.ast.name}{TARGET_SUFFIX}")


async def translate(
    compilation: Compilation, cfg: CliConfig
) -> tuple[Path, TargetUnit]:
    """Lower, render and write the compilation unit.

    :raises NotDisjointError: If two cycles share a state.
    :raises OutputWriteError: If the unit cannot be written.
    """
    plans = scenario_plans(compilation)
    unit = lower(
        compilation.ast,
        compilation.models,
        compilation.specs,
        plans,
        cfg.int_semantics,
    )
    path = target_path(compilation, cfg.output)
    if await file_exists(path):
        logger.info("replacing %s", path)
    await write_text(path, render(unit))
    return path, unit


async def cmd_check(cfg: CliConfig) -> ExitCode:
    """Parse and analyse a contract, exit 0 when every check passes."""
    compilation = await compile_contract(cfg.input)
    require_disjoint(compilation)
    if cfg.as_json:
        emit(analysis_report(compilation, with_clauses=False).model_dump_json(indent=2))
    else:
        count = len(compilation.cycles.cycles)
        emit(f"{compilation.ast.name}: {_plural(count, 'cycle')}, disjoint")
    return ExitCode.OK


async def cmd_graph(cfg: CliConfig) -> ExitCode:
    """Export the underlying automaton in DOT format."""
    compilation = await compile_contract(cfg.input)
    dot = to_dot(compilation.automaton, compilation.ast.name)
    if cfg.output is None:
        emit(dot)
    else:
        await write_text(cfg.output, dot)
    return ExitCode.OK


async def cmd_report(cfg: CliConfig) -> ExitCode:
    """Print the canonical listing, cycles, assets and clause contracts."""
    compilation = await compile_contract(cfg.input)
    report = analysis_report(compilation)
    if cfg.as_json:
        emit(report.model_dump_json(indent=2))
        return ExitCode.OK

    lines = [format_contract(compilation.ast).rstrip("\n"), ""]
    lines.append(f"initial state: @{report.initial}")
    lines.append(f"states: {', '.join(report.states)}")
    lines += [f"cycle: {cycle}" for cycle in report.cycles] or ["cycles: none"]
    lines.append(f"disjoint: {'yes' if report.disjoint else 'no'}")
    lines += [
        f"asset {a.asset}: {a.kind}, invariant {a.invariant}" for a in report.assets
    ]
    for clause in report.clauses:
        lines += [
            "",
            f"{clause.name}  {clause.permission}",
            f"  requires   {clause.requires}",
            f"  ensures    {clause.ensures}",
            f"  assignable {', '.join(clause.assignable) or '\\nothing'}",
        ]
    emit("\n".join(lines))
    return ExitCode.OK


async def cmd_plan(cfg: CliConfig) -> ExitCode:
    """Print the scenario plans."""
    compilation = await compile_contract(cfg.input)
    plans = scenario_plans(compilation)
    if cfg.as_json:
        reports = [plan_report(p) for p in plans]
        emit(PLANS_ADAPTER.dump_json(reports, indent=2).decode())
    else:
        emit("\n".join(format_plan(p) for p in plans) or "no scenarios")
    return ExitCode.OK


async def cmd_translate(cfg: CliConfig) -> ExitCode:
    """Write the annotated compilation unit and print a summary."""
    compilation = await compile_contract(cfg.input)
    path, unit = await translate(compilation, cfg)
    summary = TranslationSummary(
        output=path,
        methods=len(unit.methods),
        scenarios=sum(m.role is MethodRole.SCENARIO for m in unit.methods),
        invariants=len(unit.invariants),
    )
    if cfg.as_json:
        emit(summary.model_dump_json(indent=2))
    else:
        emit(
            f"wrote {summary.output}: {_plural(summary.methods, 'method')}, "
            f"{_plural(summary.scenarios, 'scenario')}, "
            f"{_plural(summary.invariants, 'invariant')}",
        )
    return ExitCode.OK
