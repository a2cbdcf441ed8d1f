"""Lowering to an annotated Java compilation unit.

The contract becomes one class holding its own asset locations and fields,
plus one class per party holding that party's asset locations. Every clause
and event becomes a specified static method, every loop segment a ``loopN``
helper and every scenario plan a ``seqN`` method.
"""

import logging
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field

from core.analysis import (
    AssetModel,
    ClauseSpec,
    Param,
    asset_param_types,
    conservation_invariant,
    exclusivity_invariant,
    field_kinds,
)
from core.enums import IntSemantics, MethodRole, TargetKind
from core.exceptions import UnsupportedError
from core.formulas import (
    FALSE,
    TRUE,
    ZERO,
    Formula,
    Loc,
    Var,
    from_expression,
    ite,
    locations,
    normalize,
    render as render_formula,
    sub,
)
from core.scenario import (
    Call,
    GuardedEvent,
    LoopSegment,
    ScenarioPlan,
    loop_spec,
    scenario_spec,
    synthesize_loop_invariant,
)
from core.syntax import (
    AssetDrain,
    AssetMove,
    Conditional,
    ContractAst,
    FieldSend,
    PartySend,
    Statement,
)

logger = logging.getLogger(__name__)

INDENT = " " * 4
BIGINT_MODIFIERS = "code_bigint_math spec_bigint_math"


@dataclass(frozen=True, slots=True)
class StaticField:
    """Static field of a generated class."""

    owner: str
    name: str
    kind: TargetKind
    ghost: bool = False

    @property
    def key(self) -> str:
        return f"{self.owner}.{self.name}"


# Method bodies


@dataclass(frozen=True, slots=True)
class Assign:
    """``target op value;`` where ``op`` is ``=``, ``+=`` or ``-=``."""

    target: Loc
    op: str
    value: Formula


@dataclass(frozen=True, slots=True)
class Declare:
    """Local variable declaration."""

    kind: TargetKind
    name: str
    value: Formula


@dataclass(frozen=True, slots=True)
class Comment:
    text: str


@dataclass(frozen=True, slots=True)
class Invoke:
    """Call of another generated method."""

    method: str
    args: tuple[str, ...] = ()


@dataclass(frozen=True, slots=True)
class EarlyReturn:
    """``if (guard) { method(args); return; }``."""

    guard: str
    method: str
    args: tuple[str, ...] = ()


@dataclass(frozen=True, slots=True)
class Branch:
    cond: Formula
    then: tuple["TargetStatement", ...]
    otherwise: tuple["TargetStatement", ...] = ()


@dataclass(frozen=True, slots=True)
class Loop:
    """Annotated ``while (counter < bound)`` loop."""

    counter: str
    bound: str
    invariants: tuple[Formula, ...]
    variant: Formula
    assignable: tuple[Loc, ...]
    body: tuple["TargetStatement", ...]


type TargetStatement = Assign | Declare | Comment | Invoke | EarlyReturn | Branch | Loop


@dataclass(frozen=True, slots=True)
class TargetMethod:
    """Specified ``public final static void`` method.

    :param str name: Method name.
    :param MethodRole role: What the method was generated from.
    :param tuple params: Parameters with their target types.
    :param ClauseSpec spec: Requires, ensures and frame.
    :param tuple body: Lowered statements.
    :param str | None permission: Permission comment of clause methods.
    """

    name: str
    role: MethodRole
    params: tuple[Param, ...]
    spec: ClauseSpec
    body: tuple[TargetStatement, ...] = ()
    permission: str | None = None

    @property
    def assignable(self) -> tuple[Loc, ...]:
        return self.spec.frame


@dataclass(frozen=True, slots=True)
class TargetUnit:
    """Everything the rendered compilation unit contains."""

    class_name: str
    statics: tuple[StaticField, ...]
    invariants: tuple[Formula, ...]
    methods: tuple[TargetMethod, ...]
    parties: tuple[str, ...] = ()
    int_semantics: IntSemantics = IntSemantics.MATH

    def method(self, name: str) -> TargetMethod | None:
        return next((m for m in self.methods if m.name == name), None)

    @property
    def scenarios(self) -> tuple[TargetMethod, ...]:
        return tuple(m for m in self.methods if m.role is MethodRole.SCENARIO)


@dataclass
class _BodyLowering:
    """Lowers canonical statements to assignments over static fields."""

    ast: ContractAst
    models: Mapping[str, AssetModel]
    party: str | None = None
    param_assets: Mapping[str, str | None] = field(default_factory=dict)
    remaining: dict[str, Formula] = field(default_factory=dict)
    temporaries: int = 0

    def __post_init__(self) -> None:
        for param in self.param_assets:
            self.remaining.setdefault(param, Var(param))

    def resolve(self, name: str) -> Formula:
        if name in self.remaining:
            return self.remaining[name]
        if name in self.ast.fields or name in self.ast.assets:
            return Loc(self.ast.name, name)
        return Var(name)

    def lower(self, body: Iterable[Statement]) -> list[TargetStatement]:
        return [out for stmt in body for out in self.statement(stmt)]

    def statement(self, stmt: Statement) -> list[TargetStatement]:
        match stmt:
            case FieldSend(expr=expr, target=target):
                value = from_expression(expr, self.resolve)
                return [Assign(Loc(self.ast.name, target), "=", value)]
            case PartySend(expr=expr, target=target):
                value = from_expression(expr, self.resolve)
                return [Comment(f"{render_formula(value)} -> {target}")]
            case AssetDrain(source=source, target=target):
                return self._transfer(source, target, None)
            case AssetMove(expr=expr, source=source, target=target):
                amount = from_expression(expr, self.resolve)
                return self._transfer(source, target, amount)
            case Conditional(cond=cond, then_body=then_body, else_body=else_body):
                condition = from_expression(cond, self.resolve)
                return [self._branch(condition, then_body, else_body or ())]
            case _:
                msg = f"statement is not canonical: {stmt!r}"
                raise UnsupportedError(msg, getattr(stmt, "pos", None))

    def _branch(
        self,
        cond: Formula,
        then_body: tuple[Statement, ...],
        else_body: tuple[Statement, ...],
    ) -> Branch:
        saved = dict(self.remaining)
        then = tuple(self.lower(then_body))
        then_remaining, self.remaining = self.remaining, dict(saved)
        otherwise = tuple(self.lower(else_body))
        for param, base in saved.items():
            self.remaining[param] = ite(
                cond,
                then_remaining.get(param, base),
                self.remaining.get(param, base),
            )
        return Branch(cond, then, otherwise)

    def _temporary(
        self,
        amount: Formula,
        *targets: Loc,
    ) -> tuple[list[TargetStatement], Formula]:
        if not set(locations(amount)) & set(targets):
            return [], amount
        self.temporaries += 1
        name = f"amount_{self.temporaries}"
        return [Declare(TargetKind.INT, name, amount)], Var(name)

    def _transfer(
        self,
        source: str,
        target: str,
        amount: Formula | None,
    ) -> list[TargetStatement]:
        if source in self.models:
            return self._transfer_held(self.models[source], target, amount)
        return self._transfer_param(source, target, amount)

    def _transfer_held(
        self,
        model: AssetModel,
        target: str,
        amount: Formula | None,
    ) -> list[TargetStatement]:
        src = model.location(self.ast.name)
        dst = model.location(target)
        if not model.is_divisible:
            return [Assign(dst, "=", TRUE), Assign(src, "=", FALSE)]
        if amount is None:
            return [Assign(dst, "+=", src), Assign(src, "=", ZERO)]
        prelude, amount = self._temporary(amount, dst)
        return [*prelude, Assign(dst, "+=", amount), Assign(src, "-=", amount)]

    def _transfer_param(
        self,
        param: str,
        target: str,
        amount: Formula | None,
    ) -> list[TargetStatement]:
        left = self.remaining.get(param, Var(param))
        if amount is None:
            amount = left
            self.remaining[param] = ZERO
        else:
            self.remaining[param] = normalize(sub(left, amount))

        asset = self.param_assets.get(param)
        if asset is None:
            return [Comment(f"pay {render_formula(amount)} of {param} to {target}")]
        model = self.models[asset]
        owner = self.ast.name if target == asset else target
        dst = model.location(owner)
        caller = model.location(self.party or self.ast.name)
        if not model.is_divisible:
            return [Assign(dst, "=", TRUE), Assign(caller, "=", FALSE)]
        prelude, amount = self._temporary(amount, dst, caller)
        return [*prelude, Assign(dst, "+=", amount), Assign(caller, "-=", amount)]


def _statics(ast: ContractAst, models: Iterable[AssetModel]) -> list[StaticField]:
    models = list(models)
    statics = [
        StaticField(loc.owner, loc.name, model.target_kind)
        for model in models
        for loc in model.locations
    ]
    statics += [StaticField(ast.name, f, kind) for f, kind in field_kinds(ast).items()]
    statics += [
        StaticField(ast.name, model.total.name, TargetKind.INT, ghost=True)
        for model in models
        if model.total is not None
    ]
    return statics


def _loop_method(
    seg: LoopSegment,
    specs: Mapping[str, ClauseSpec],
    models: Mapping[str, AssetModel],
) -> TargetMethod:
    spec = loop_spec(seg, specs, models)
    body = tuple(Invoke(call.clause, call.args) for call in seg.body)
    loop = Loop(
        counter=seg.counter,
        bound=seg.bound,
        invariants=tuple(synthesize_loop_invariant(seg, models.values())),
        variant=seg.variant,
        assignable=spec.frame,
        body=body,
    )
    return TargetMethod(
        name=seg.method,
        role=MethodRole.LOOP,
        params=seg.params,
        spec=spec,
        body=(Declare(TargetKind.INT, seg.counter, ZERO), loop),
    )


def _scenario_method(
    plan: ScenarioPlan,
    specs: Mapping[str, ClauseSpec],
    models: Mapping[str, AssetModel],
) -> TargetMethod:
    body: list[TargetStatement] = []
    for step in plan.steps:
        match step:
            case Call(clause=clause, args=args):
                body.append(Invoke(clause, args))
            case GuardedEvent(args=args):
                body.append(EarlyReturn(step.guard, step.method, args))
            case LoopSegment():
                body.append(Invoke(step.method, step.args))
    return TargetMethod(
        name=plan.name,
        role=MethodRole.SCENARIO,
        params=plan.params,
        spec=scenario_spec(plan, specs, models),
        body=tuple(body),
    )


def lower(
    ast: ContractAst,
    models: Iterable[AssetModel],
    specs: Mapping[str, ClauseSpec],
    plans: Iterable[ScenarioPlan],
    int_semantics: IntSemantics = IntSemantics.MATH,
) -> TargetUnit:
    """Assemble the compilation unit of a contract.

    :param ast: Canonical contract.
    :param models: Asset classification.
    :param specs: Clause and event contracts by method name.
    :param plans: Scenario plans.
    :param int_semantics: Integer semantics declared on the class.
    :return: Unit with statics, invariants and methods in rendering order.
    :rtype: TargetUnit
    """
    models = list(models)
    model_map = {m.asset: m for m in models}
    param_assets = asset_param_types(ast)

    methods: list[TargetMethod] = []
    for clause in ast.clauses:
        spec = specs[clause.name]
        lowering = _BodyLowering(
            ast,
            model_map,
            party=clause.party,
            param_assets={p: param_assets[clause.name, p] for p in clause.asset_params},
        )
        methods.append(
            TargetMethod(
                name=clause.name,
                role=MethodRole.CLAUSE,
                params=spec.params,
                spec=spec,
                body=tuple(lowering.lower(clause.body)),
                permission=spec.permission,
            ),
        )
    for event in ast.events:
        spec = specs[f"event{event.event_index}"]
        lowering = _BodyLowering(ast, model_map)
        methods.append(
            TargetMethod(
                name=spec.name,
                role=MethodRole.EVENT,
                params=spec.params,
                spec=spec,
                body=tuple(lowering.lower(event.body)),
            ),
        )

    plans = list(plans)
    loops: dict[str, LoopSegment] = {}
    for plan in plans:
        if plan.loop is not None:
            loops.setdefault(plan.loop.method, plan.loop)
    methods += [_loop_method(seg, specs, model_map) for seg in loops.values()]
    methods += [_scenario_method(plan, specs, model_map) for plan in plans]

    invariants = [
        conservation_invariant(m) if m.is_divisible else exclusivity_invariant(m)
        for m in models
    ]
    logger.debug(
        "lowered %s: %s methods, %s invariants",
        ast.name,
        len(methods),
        len(invariants),
    )
    return TargetUnit(
        class_name=ast.name,
        statics=tuple(_statics(ast, models)),
        invariants=tuple(invariants),
        methods=tuple(methods),
        parties=ast.parties,
        int_semantics=int_semantics,
    )


# Rendering


def _java_type(kind: TargetKind) -> str:
    return kind.value


def _spec_block(spec: ClauseSpec, depth: int) -> list[str]:
    pad = INDENT * depth
    frame = ", ".join(loc.key for loc in spec.frame) or "\\nothing"
    return [
        f"{pad}/*@ public normal_behavior",
        f"{pad}  @ requires   {render_formula(spec.requires)};",
        f"{pad}  @ ensures    {render_formula(spec.ensures)};",
        f"{pad}  @ assignable {frame};",
        f"{pad}  @*/",
    ]


def _render_statement(stmt: TargetStatement, depth: int, local: str) -> list[str]:
    pad = INDENT * depth
    match stmt:
        case Assign(target=target, op=op, value=value):
            return [f"{pad}{target.key} {op} {render_formula(value)};"]
        case Declare(kind=kind, name=name, value=value):
            return [f"{pad}{_java_type(kind)} {name} = {render_formula(value)};"]
        case Comment(text=text):
            return [f"{pad}// {text}"]
        case Invoke(method=method, args=args):
            return [f"{pad}{method}({', '.join(args)});"]
        case EarlyReturn(guard=guard, method=method, args=args):
            return [f"{pad}if ({guard}) {{ {method}({', '.join(args)}); return; }}"]
        case Branch(cond=cond, then=then, otherwise=otherwise):
            lines = [f"{pad}if ({render_formula(cond)}) {{"]
            lines += _render_block(then, depth + 1, local)
            if otherwise:
                lines.append(f"{pad}}} else {{")
                lines += _render_block(otherwise, depth + 1, local)
            lines.append(f"{pad}}}")
            return lines
        case Loop():
            return _render_loop(stmt, depth, local)


def _render_block(body: Iterable[TargetStatement], depth: int, local: str) -> list[str]:
    return [line for stmt in body for line in _render_statement(stmt, depth, local)]


def _render_loop(loop: Loop, depth: int, local: str) -> list[str]:
    pad = INDENT * depth
    assignable = (render_formula(loc, local) for loc in loop.assignable)
    frame = ", ".join([*assignable, loop.counter])
    annotations = [
        f"loop_invariant {render_formula(inv, local)};" for inv in loop.invariants
    ]
    annotations += [
        f"decreases {render_formula(loop.variant, local)};",
        f"assignable {frame};",
    ]
    lines = [f"{pad}/*@ {annotations[0]}"]
    lines += [f"{pad}  @ {text}" for text in annotations[1:]]
    lines.append(f"{pad}  @*/")
    lines.append(f"{pad}while ({loop.counter} < {loop.bound}) {{")
    lines += _render_block(loop.body, depth + 1, local)
    lines.append(f"{pad}{INDENT}{loop.counter}++;")
    lines.append(f"{pad}}}")
    return lines


def _render_method(method: TargetMethod, local: str) -> list[str]:
    lines: list[str] = []
    if method.permission is not None:
        lines.append(f"{INDENT}// {method.permission}")
    lines += _spec_block(method.spec, 1)
    params = ", ".join(f"{_java_type(p.kind)} {p.name}" for p in method.params)
    lines.append(f"{INDENT}public final static void {method.name}({params}) {{")
    lines += _render_block(method.body, 2, local)
    lines.append(f"{INDENT}}}")
    return lines


def _render_field(static: StaticField) -> str:
    if static.ghost:
        kind = _java_type(static.kind)
        return f"{INDENT}//@ public static ghost {kind} {static.name};"
    return f"{INDENT}public static {_java_type(static.kind)} {static.name};"


def render(unit: TargetUnit) -> str:
    """Pretty-print a compilation unit.

    :param unit: Unit built by :func:`lower`.
    :type unit: TargetUnit
    :return: Java source with JML annotations, newline terminated.
    :rtype: str
    """
    lines: list[str] = []
    if unit.int_semantics is IntSemantics.MATH:
        lines.append(f"/*@ {BIGINT_MODIFIERS} @*/")
    lines.append(f"public class {unit.class_name} {{")

    sections: list[list[str]] = []
    own = [s for s in unit.statics if s.owner == unit.class_name]
    if own:
        sections.append([_render_field(s) for s in own])
    if unit.invariants:
        sections.append(
            [
                f"{INDENT}//@ public static invariant {render_formula(i)};"
                for i in unit.invariants
            ],
        )
    sections += [_render_method(m, unit.class_name) for m in unit.methods]
    for n, section in enumerate(sections):
        if n:
            lines.append("")
        lines += section
    lines.append("}")

    for party in unit.parties:
        lines.append("")
        lines.append(f"class {party} {{")
        lines += [_render_field(s) for s in unit.statics if s.owner == party]
        lines.append("}")
    return "\n".join(lines) + "\n"

