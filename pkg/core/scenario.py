"""Scenario plans: linearized paths through the automaton.

A plan starts at the initial state and follows function transitions without
repeating a state. Pending events become symbolic guards at the first state
where they could fire. Each disjoint cycle met on the way is collapsed into a
single loop segment whose iterations share one set of symbolic arguments.
"""

import logging
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field

from core.analysis import (
    AssetModel,
    ClauseSpec,
    Param,
    classify_assets,
    conservation_invariant,
    derive_specs,
    exclusivity_invariant,
    postcondition,
)
from core.automaton import (
    Automaton,
    CycleReport,
    EventLabel,
    FunctionLabel,
    LinearTrace,
)
from core.enums import BinaryOperator, MethodRole, TargetKind
from core.exceptions import NonLinearDeltaError, NotDisjointError, NotSupportedError
from core.formulas import (
    TRUE,
    ZERO,
    Bin,
    Const,
    Formula,
    Ite,
    LinearForm,
    Loc,
    Mod,
    Old,
    Var,
    add,
    conj,
    conjuncts,
    disj,
    eq,
    ge,
    implies,
    ite,
    locations,
    mul,
    negate,
    normalize,
    sub,
    substitute,
    transform,
    walk,
)
from core.syntax import ContractAst

logger = logging.getLogger(__name__)

GUARD_PREFIX = "ev_"


@dataclass(frozen=True, slots=True)
class Call:
    """Invocation of a function clause with symbolic arguments."""

    clause: str
    args: tuple[str, ...] = ()


@dataclass(frozen=True, slots=True)
class GuardedEvent:
    """``if (ev_eventN) { eventN(...); return; }``."""

    event_index: int
    args: tuple[str, ...] = ()

    @property
    def method(self) -> str:
        return f"event{self.event_index}"

    @property
    def guard(self) -> str:
        return f"{GUARD_PREFIX}{self.method}"


@dataclass(frozen=True, slots=True)
class LoopSegment:
    """One cycle iterated ``counter`` times from its entry state.

    :param int index: Number of the ``loopN`` helper.
    :param str entry: State where the path enters the cycle.
    :param LinearTrace cycle: The cycle, in canonical rotation.
    :param tuple body: One traversal of the cycle starting at ``entry``.
    :param tuple deltas: Per-iteration change of every written location.
    :param tuple params: Symbolic arguments of the body followed by the bound.
    """

    index: int
    entry: str
    cycle: LinearTrace
    body: tuple[Call, ...]
    deltas: tuple[tuple[Loc, LinearForm], ...]
    params: tuple[Param, ...]
    counter: str = "i"
    bound: str = "counter"

    @property
    def method(self) -> str:
        return f"loop{self.index}"

    @property
    def args(self) -> tuple[str, ...]:
        return tuple(p.name for p in self.params)

    @property
    def written(self) -> tuple[Loc, ...]:
        return tuple(loc for loc, _ in self.deltas)

    @property
    def variant(self) -> Formula:
        """Decreases clause of the loop."""
        return sub(Var(self.bound), Var(self.counter))


type ScenarioStep = Call | GuardedEvent | LoopSegment


@dataclass(frozen=True, slots=True)
class ScenarioPlan:
    """A named scenario and the parameters of its method."""

    name: str
    steps: tuple[ScenarioStep, ...]
    params: tuple[Param, ...] = ()

    @property
    def loop(self) -> LoopSegment | None:
        return next((s for s in self.steps if isinstance(s, LoopSegment)), None)


# Symbolic composition


@dataclass
class _Composer:
    """Composes callee effects over the pre-state of the enclosing method."""

    models: Mapping[str, AssetModel]
    state: dict[Loc, Formula] = field(default_factory=dict)
    pre: list[Formula] = field(default_factory=list)
    path: Formula = TRUE
    exits: list[tuple[Formula, dict[Loc, Formula]]] = field(default_factory=list)

    def _current(self, formula: Formula, args: Mapping[Formula, Formula]) -> Formula:
        renamed = substitute(formula, args)
        return transform(
            renamed, lambda n: self.state.get(n) if isinstance(n, Loc) else None
        )

    def _require(self, condition: Formula, path: Formula) -> None:
        guarded = implies(path, condition)
        if guarded != TRUE and guarded not in self.pre:
            self.pre.append(guarded)

    def _applied(
        self, spec: ClauseSpec, args: Mapping[Formula, Formula]
    ) -> dict[Loc, Formula]:
        result = dict(self.state)
        for loc, value in spec.effect:
            value = self._current(value, args)
            model = self.models.get(loc.name)
            divisible = model is not None and model.is_divisible
            result[loc] = normalize(value) if divisible else value
        return result

    def call(self, spec: ClauseSpec, args: Iterable[str]) -> None:
        renaming = _renaming(spec, args)
        for condition in spec.pre:
            self._require(self._current(condition, renaming), self.path)
        self.state = self._applied(spec, renaming)

    def guard(self, guard: str, spec: ClauseSpec, args: Iterable[str]) -> None:
        """Take the early return of an event when ``guard`` holds."""
        renaming = _renaming(spec, args)
        condition = Var(guard)
        taken = conj(self.path, condition)
        for requirement in spec.pre:
            self._require(self._current(requirement, renaming), taken)
        self.exits.append((condition, self._applied(spec, renaming)))
        self.path = conj(self.path, negate(condition))

    def merged(self) -> dict[Loc, Formula]:
        """Final value of every written location across all exits."""
        written: list[Loc] = []
        for _, state in self.exits:
            written += [loc for loc in state if loc not in written]
        written += [loc for loc in self.state if loc not in written]
        merged: dict[Loc, Formula] = {}
        for loc in written:
            value = self.state.get(loc, loc)
            for condition, state in reversed(self.exits):
                value = ite(condition, state.get(loc, loc), value)
            merged[loc] = value
        return merged


def _renaming(spec: ClauseSpec, args: Iterable[str]) -> dict[Formula, Formula]:
    return {
        Var(p.name): Var(a)
        for p, a in zip(spec.params, args, strict=True)
        if p.name != a
    }


def _closed_form(base: Formula, count: Formula, delta: LinearForm) -> Formula:
    """``base + count * delta`` expanded term by term."""
    factors: list[tuple[Formula, int]] = [
        (atom if abs(c) == 1 else mul(Const(value=abs(c)), atom), c)
        for atom, c in delta.terms
    ]
    if delta.constant:
        factors.append((Const(value=abs(delta.constant)), delta.constant))
    result = base
    for factor, coefficient in factors:
        term = mul(count, factor)
        result = add(result, term) if coefficient > 0 else sub(result, term)
    return result


def loop_deltas(
    body: Iterable[Call],
    specs: Mapping[str, ClauseSpec],
    models: Mapping[str, AssetModel],
) -> tuple[tuple[Loc, LinearForm], ...]:
    """Per-iteration change of every location one traversal writes.

    :param body: Calls of one traversal, with loop argument names.
    :param specs: Clause contracts by method name.
    :param models: Asset models by name.
    :return: Delta per written location, in first-write order.
    :raises NonLinearDeltaError: If a change depends on a location the loop
        writes, on a branch, or overwrites a field or an indivisible asset.
    """
    composer = _Composer(models)
    for call in body:
        composer.call(specs[call.clause], call.args)

    deltas: list[tuple[Loc, LinearForm]] = []
    for loc, value in composer.state.items():
        model = models.get(loc.name)
        if model is None or not model.is_divisible:
            if value != loc:
                kind = "field" if model is None else "indivisible asset"
                msg = f"the loop overwrites the {kind}"
                raise NonLinearDeltaError(loc.key, msg)
            continue
        delta = LinearForm.of(sub(value, loc))
        for atom, _ in delta.terms:
            if any(isinstance(node, Ite) for node in walk(atom)):
                raise NonLinearDeltaError(loc.key, "the change depends on a branch")
            for other in locations(atom):
                if other in composer.state:
                    msg = f"the change depends on {other.key}, which the loop writes"
                    raise NonLinearDeltaError(loc.key, msg)
        deltas.append((loc, delta))
    return tuple(deltas)


def synthesize_loop_invariant(
    seg: LoopSegment, models: Iterable[AssetModel]
) -> list[Formula]:
    """Loop invariant of a loop segment.

    The counter is bounded by zero and the loop bound, every written location
    equals its entry value plus ``i`` times its per-iteration change, and the
    exclusivity or conservation condition of every touched asset still holds.

    :param seg: Loop segment with its deltas.
    :type seg: LoopSegment
    :param models: Asset classification.
    :return: Invariant conjuncts in emission order.
    :rtype: list[Formula]
    """
    counter = Var(seg.counter)
    invariant: list[Formula] = [
        Bin(BinaryOperator.LE, ZERO, counter),
        Bin(BinaryOperator.LE, counter, Var(seg.bound)),
    ]
    for loc, delta in seg.deltas:
        invariant.append(eq(loc, _closed_form(Old(loc), counter, delta)))
    touched = {loc.name for loc in seg.written}
    for model in models:
        if model.asset not in touched:
            continue
        if model.is_divisible:
            invariant.append(conservation_invariant(model))
        else:
            invariant.append(exclusivity_invariant(model))
    return invariant


def loop_spec(
    seg: LoopSegment,
    specs: Mapping[str, ClauseSpec],
    models: Mapping[str, AssetModel],
) -> ClauseSpec:
    """Contract of the ``loopN`` helper.

    Every in-loop precondition is checked at the first and the last
    iteration. Divisions in a delta must be exact so that the closed form
    equals the iterated one. Their divisors must be non-zero even for zero
    iterations, as the postcondition still divides by them.
    """
    bound = Var(seg.bound)

    first = _Composer(models)
    for call in seg.body:
        first.call(specs[call.clause], call.args)

    last_count = sub(bound, Const(value=1))
    last = _Composer(
        models,
        state={
            loc: normalize(_closed_form(loc, last_count, d)) for loc, d in seg.deltas
        },
    )
    for call in seg.body:
        last.call(specs[call.clause], call.args)

    divisions = [
        node
        for _, delta in seg.deltas
        for atom, _ in delta.terms
        for node in walk(atom)
        if isinstance(node, Bin) and node.op is BinaryOperator.DIV
    ]
    nonzero = dict.fromkeys(Bin(BinaryOperator.NE, d.right, ZERO) for d in divisions)
    exact = [eq(Mod(d.left, d.right), ZERO) for d in divisions]
    iterations = conj(*first.pre, *last.pre, *exact)
    pre = (ge(bound, ZERO), *nonzero, disj(eq(bound, ZERO), iterations))

    effect = {loc: _closed_form(loc, bound, delta) for loc, delta in seg.deltas}
    return ClauseSpec(
        name=seg.method,
        role=MethodRole.LOOP,
        party=None,
        source_state=seg.entry,
        target_state=seg.entry,
        params=seg.params,
        pre=tuple(p for p in pre if p != TRUE),
        post=tuple(postcondition(effect, models)),
        frame=tuple(effect),
        effect=tuple(effect.items()),
    )


def scenario_spec(
    plan: ScenarioPlan,
    specs: Mapping[str, ClauseSpec],
    models: Mapping[str, AssetModel],
) -> ClauseSpec:
    """Contract of a scenario method, composed from its callees.

    Requirements of a callee reached only when earlier guards are false are
    stated under that path condition. Locations written by an early return
    take a conditional value in the postcondition.
    """
    composer = _Composer(models)
    for step in plan.steps:
        match step:
            case Call(clause=clause, args=args):
                composer.call(specs[clause], args)
            case LoopSegment():
                composer.call(loop_spec(step, specs, models), step.args)
            case GuardedEvent(args=args):
                composer.guard(step.guard, specs[step.method], args)

    effect = composer.merged()
    first, last = _endpoints(plan, specs)
    return ClauseSpec(
        name=plan.name,
        role=MethodRole.SCENARIO,
        party=None,
        source_state=first,
        target_state=last,
        params=plan.params,
        pre=tuple(part for condition in composer.pre for part in conjuncts(condition)),
        post=tuple(postcondition(effect, models)),
        frame=tuple(effect),
        effect=tuple(effect.items()),
    )


def _endpoints(plan: ScenarioPlan, specs: Mapping[str, ClauseSpec]) -> tuple[str, str]:
    states: list[tuple[str, str]] = []
    for step in plan.steps:
        match step:
            case Call(clause=clause):
                states.append((specs[clause].source_state, specs[clause].target_state))
            case LoopSegment(entry=entry):
                states.append((entry, entry))
            case GuardedEvent():
                spec = specs[step.method]
                states.append((spec.source_state, spec.target_state))
    if not states:
        return "", ""
    return states[0][0], states[-1][1]


# Plan enumeration


class _PlanSearch:
    """Depth-first search over function transitions in source order."""

    def __init__(
        self,
        a: Automaton,
        report: CycleReport,
        ast: ContractAst,
        specs: Mapping[str, ClauseSpec],
        models: Mapping[str, AssetModel],
    ) -> None:
        self.a = a
        self.report = report
        self.ast = ast
        self.specs = specs
        self.models = models
        self.found: list[tuple[ScenarioStep, ...]] = []
        self._loops: dict[tuple[object, str], LoopSegment] = {}

    def run(self) -> list[tuple[ScenarioStep, ...]]:
        self._visit(self.a.initial, (), {}, frozenset({self.a.initial}), None)
        return self.found

    def _visit(
        self,
        state: str,
        steps: tuple[ScenarioStep, ...],
        pending: Mapping[int, tuple[str, ...]],
        visited: frozenset[str],
        loop: LoopSegment | None,
    ) -> None:
        cycle = self.report.cycle_through(state)
        if cycle is not None:
            if loop is None:
                loop = self._loop(cycle, state)
                steps = (*steps, loop)
            elif loop.cycle != cycle:
                msg = f"path reaches cycle {cycle} after iterating {loop.cycle}"
                raise NotSupportedError(msg)

        branched = False
        for index in sorted(pending):
            event = self.ast.event(index)
            if event is None or event.trigger_state != state:
                continue
            guarded = GuardedEvent(index, self._event_args(index, pending[index]))
            if self.specs[guarded.method].frame:
                self.found.append((*steps, guarded))
                branched = True
            else:
                steps = (*steps, guarded)
        pending = {
            index: args
            for index, args in pending.items()
            if (event := self.ast.event(index)) is not None
            and event.trigger_state != state
        }

        moved = False
        for t in self.a.outgoing(state):
            if not isinstance(t.label, FunctionLabel) or t.target in visited:
                continue
            call = self._call(t.label.name, loop)
            clause = self.ast.clause(call.clause)
            scheduled = (
                {e.event_index: call.args for e in clause.events} if clause else {}
            )
            self._visit(
                t.target,
                (*steps, call),
                {**pending, **scheduled},
                visited | {t.target},
                loop,
            )
            moved = True

        if not moved and not branched and steps:
            self.found.append(steps)

    def _event_args(
        self, index: int, scheduler_args: tuple[str, ...]
    ) -> tuple[str, ...]:
        scheduler = self.ast.scheduler_of(index)
        if scheduler is None:
            return ()
        names = dict(zip(scheduler.value_params, scheduler_args, strict=False))
        return tuple(names[p.name] for p in self.specs[f"event{index}"].params)

    def _call(self, clause: str, loop: LoopSegment | None) -> Call:
        if loop is not None:
            for call in loop.body:
                if call.clause == clause:
                    return call
        return Call(clause, tuple(p.name for p in self.specs[clause].params))

    def _loop(self, cycle: LinearTrace, entry: str) -> LoopSegment:
        key = (cycle.key, entry)
        if key in self._loops:
            return self._loops[key]
        for t in cycle.steps:
            if isinstance(t.label, EventLabel):
                msg = f"cycle {cycle} contains the event transition {t}"
                raise NotSupportedError(msg)
            clause = self.ast.clause(t.label.name)
            if clause is not None and clause.events:
                msg = f"clause '{clause.name}' schedules events inside cycle {cycle}"
                raise NotSupportedError(msg, clause.pos)

        inside = {
            t.label.name for t in cycle.steps if isinstance(t.label, FunctionLabel)
        }
        outside = {
            p.name
            for c in self.ast.clauses
            if c.name not in inside
            for p in self.specs[c.name].params
        }
        body = tuple(
            Call(
                t.label.name,
                tuple(
                    f"{p.name}_{t.label.name}" if p.name in outside else p.name
                    for p in self.specs[t.label.name].params
                ),
            )
            for t in cycle.rotated_to(entry).steps
            if isinstance(t.label, FunctionLabel)
        )
        params = _unique(
            p for call in body for p in _bind(self.specs[call.clause], call.args)
        )
        seg = LoopSegment(
            index=len(self._loops) + 1,
            entry=entry,
            cycle=cycle,
            body=body,
            deltas=loop_deltas(body, self.specs, self.models),
            params=(*params, Param("counter", TargetKind.INT)),
        )
        self._loops[key] = seg
        return seg


def _unique(params: Iterable[Param]) -> tuple[Param, ...]:
    seen: dict[str, Param] = {}
    for param in params:
        seen.setdefault(param.name, param)
    return tuple(seen.values())


def _bind(spec: ClauseSpec, args: Iterable[str]) -> list[Param]:
    return [Param(a, p.kind) for p, a in zip(spec.params, args, strict=True)]


def _plan_params(
    steps: Iterable[ScenarioStep],
    specs: Mapping[str, ClauseSpec],
) -> tuple[Param, ...]:
    params: list[Param] = []
    for step in steps:
        match step:
            case Call(clause=clause, args=args):
                params += _bind(specs[clause], args)
            case LoopSegment():
                params += step.params
            case GuardedEvent(args=args):
                params += _bind(specs[step.method], args)
                params.append(Param(step.guard, TargetKind.BOOLEAN))
    return _unique(params)


def enumerate_scenarios(
    a: Automaton,
    report: CycleReport,
    ast: ContractAst,
    models: Iterable[AssetModel] | None = None,
    specs: Mapping[str, ClauseSpec] | None = None,
) -> list[ScenarioPlan]:
    """Enumerate the scenario plans of a contract.

    At every state the loop over its cycle comes first, then the early
    returns of pending events in index order, then the function transitions
    in source order. An event without effect is folded into the path. An
    effectful event ends a plan of its own. A path that can go nowhere and
    branched nowhere becomes a plan.

    :param a: Underlying automaton.
    :param report: Cycle report of ``a``.
    :param ast: Canonical contract.
    :param models: Asset classification, derived from ``ast`` when omitted.
    :param specs: Clause contracts by method name, derived when omitted.
    :return: Plans named ``seq1``, ``seq2``, ... in search order.
    :raises NotDisjointError: If two cycles share a state.
    :raises NotSupportedError: For events inside cycles or paths through two cycles.
    :raises NonLinearDeltaError: If a loop changes a location non-linearly.
    """
    if not report.disjoint:
        raise NotDisjointError(report.shared_states, report.witness)
    models = classify_assets(ast) if models is None else list(models)
    if specs is None:
        specs = derive_specs(ast, models)
    model_map = {m.asset: m for m in models}
    found = _PlanSearch(a, report, ast, specs, model_map).run()
    plans = [
        ScenarioPlan(f"seq{n}", steps, _plan_params(steps, specs))
        for n, steps in enumerate(found, start=1)
    ]
    logger.debug("enumerated %s scenario plans for %s", len(plans), ast.name)
    return plans
