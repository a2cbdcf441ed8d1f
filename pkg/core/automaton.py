"""Underlying automaton of a contract, cycle enumeration and DOT export."""

import logging
from collections import deque
from collections.abc import Iterator
from dataclasses import dataclass
from itertools import combinations

from core.syntax import ContractAst

logger = logging.getLogger(__name__)

DOT_KEYWORDS = frozenset({"node", "edge", "graph", "digraph", "subgraph", "strict"})


@dataclass(frozen=True, slots=True)
class FunctionLabel:
    """Transition induced by a function clause."""

    name: str

    @property
    def key(self) -> tuple[int, str | int]:
        return (0, self.name)

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True, slots=True)
class EventLabel:
    """Transition induced by the event with the given index."""

    index: int

    @property
    def key(self) -> tuple[int, str | int]:
        return (1, self.index)

    def __str__(self) -> str:
        return f"ev{self.index}"


type Label = FunctionLabel | EventLabel


@dataclass(frozen=True, slots=True)
class Transition:
    """Labelled edge ``source -label-> target``."""

    source: str
    label: Label
    target: str

    @property
    def key(self) -> tuple[str, tuple[int, str | int], str]:
        """Total order used to canonicalize cycles and sort reports."""
        return (self.source, self.label.key, self.target)

    @property
    def is_self_loop(self) -> bool:
        return self.source == self.target

    def __str__(self) -> str:
        return f"{self.source} -{self.label}-> {self.target}"


@dataclass(frozen=True, slots=True)
class Automaton:
    """States, initial state and transitions in source order."""

    states: frozenset[str]
    initial: str
    transitions: tuple[Transition, ...]

    def outgoing(self, state: str) -> tuple[Transition, ...]:
        """Transitions leaving ``state``, in source order."""
        return tuple(t for t in self.transitions if t.source == state)

    def transition(self, label: Label) -> Transition | None:
        """The transition carrying ``label``, if any."""
        return next((t for t in self.transitions if t.label == label), None)


@dataclass(frozen=True, slots=True)
class LinearTrace:
    """Consecutive transitions without repeated states.

    A cyclic trace ends where it starts.
    """

    steps: tuple[Transition, ...]

    @property
    def states(self) -> tuple[str, ...]:
        """Visited states in order, the closing state of a cycle excluded."""
        if not self.steps:
            return ()
        visited = (self.steps[0].source, *(t.target for t in self.steps))
        return visited[:-1] if self.is_cyclic else visited

    @property
    def first(self) -> str:
        return self.steps[0].source

    @property
    def last(self) -> str:
        return self.steps[-1].target

    @property
    def is_cyclic(self) -> bool:
        return bool(self.steps) and self.steps[0].source == self.steps[-1].target

    @property
    def key(self) -> tuple[tuple[str, tuple[int, str | int], str], ...]:
        return tuple(t.key for t in self.steps)

    def extend(self, transition: Transition) -> "LinearTrace":
        """Append ``transition`` when it continues the trace without repeating a state.

        :param transition: Candidate next step.
        :return: The extended trace, or the trace itself when the step does not fit.
        """
        if transition.source != self.last or transition.target in self.states:
            return self
        return LinearTrace((*self.steps, transition))

    def rotated_to(self, state: str) -> "LinearTrace":
        """The same cycle entered at ``state``."""
        start = next(i for i, t in enumerate(self.steps) if t.source == state)
        return LinearTrace(self.steps[start:] + self.steps[:start])

    def canonical(self) -> "LinearTrace":
        """Rotation of a cycle that starts with its smallest transition."""
        start = min(range(len(self.steps)), key=lambda i: self.steps[i].key)
        return LinearTrace(self.steps[start:] + self.steps[:start])

    def __str__(self) -> str:
        if not self.steps:
            return "<empty>"
        return " ".join([self.first, *(f"-{t.label}-> {t.target}" for t in self.steps)])


@dataclass(frozen=True, slots=True)
class CycleReport:
    """All cycles of an automaton and whether they are pairwise disjoint.

    ``witness`` is the first pair of distinct cycles, in sorted order, that
    share a state.
    """

    cycles: tuple[LinearTrace, ...]
    disjoint: bool
    witness: tuple[LinearTrace, LinearTrace] | None = None
    iterations: int = 0

    @property
    def shared_states(self) -> tuple[str, ...]:
        """States common to both witness cycles."""
        if self.witness is None:
            return ()
        first, second = self.witness
        return tuple(sorted(set(first.states) & set(second.states)))

    def cycle_through(self, state: str) -> LinearTrace | None:
        """The cycle visiting ``state``, if any."""
        return next((c for c in self.cycles if state in c.states), None)


def build_automaton(ast: ContractAst) -> Automaton:
    """Build the underlying automaton of a contract.

    Every function clause contributes one transition, followed by one
    transition per event it schedules.

    :param ast: Canonical contract.
    :type ast: ContractAst
    :return: The automaton.
    :rtype: Automaton
    """
    transitions: list[Transition] = []
    for clause in ast.clauses:
        transitions.append(
            Transition(
                clause.source_state, FunctionLabel(clause.name), clause.target_state
            ),
        )
        transitions.extend(
            Transition(
                event.trigger_state, EventLabel(event.event_index), event.target_state
            )
            for event in clause.events
        )
    states = {ast.agreement.initial_state}
    for t in transitions:
        states |= {t.source, t.target}
    return Automaton(frozenset(states), ast.agreement.initial_state, tuple(transitions))


def _closing_cycles(
    trace: LinearTrace, transition: Transition
) -> Iterator[LinearTrace]:
    for start in range(len(trace.steps)):
        suffix = trace.steps[start:]
        first, last = suffix[0], suffix[-1]
        if first.source == transition.target and last.target == transition.source:
            yield LinearTrace((*suffix, transition)).canonical()


def cycle_fixpoint(
    a: Automaton,
) -> Iterator[tuple[frozenset[LinearTrace], frozenset[LinearTrace]]]:
    """Iterate the trace/cycle fixpoint and yield every ``(traces, cycles)`` pair.

    Traces start at the initial state and never repeat a state. Each round
    extends every trace by one transition where possible, and collects the
    cycles closed by a transition back into a suffix of a trace together with
    self-loops at trace ends. The first pair holds the single-step traces and
    the self-loops at the initial state; the last pair is the fixpoint.

    :param a: Automaton to analyse.
    :type a: Automaton
    :yield: Successive pairs of trace and cycle sets, both monotone.
    """
    traces = frozenset(
        LinearTrace((t,)) for t in a.outgoing(a.initial) if not t.is_self_loop
    )
    cycles = frozenset(
        LinearTrace((t,)) for t in a.outgoing(a.initial) if t.is_self_loop
    )
    yield traces, cycles
    while True:
        next_traces = set(traces)
        next_cycles = set(cycles)
        for trace in traces:
            for t in a.outgoing(trace.last):
                if t.is_self_loop:
                    next_cycles.add(LinearTrace((t,)))
                    continue
                next_traces.add(trace.extend(t))
                next_cycles.update(_closing_cycles(trace, t))
        if next_traces == traces and next_cycles == cycles:
            return
        traces, cycles = frozenset(next_traces), frozenset(next_cycles)
        yield traces, cycles


def enumerate_cycles(a: Automaton) -> CycleReport:
    """Collect the cycles reachable from the initial state and check disjointness.

    :param a: Automaton to analyse.
    :type a: Automaton
    :return: Cycles sorted by their canonical key, with the verdict.
    :rtype: CycleReport
    """
    iterations = 0
    cycles: frozenset[LinearTrace] = frozenset()
    for iterations, (_, cycles) in enumerate(cycle_fixpoint(a)):  # noqa: B007
        pass
    ordered = tuple(sorted(cycles, key=lambda c: c.key))
    logger.debug(
        "cycle fixpoint reached after %s iterations, %s cycles",
        iterations,
        len(ordered),
    )

    for first, second in combinations(ordered, 2):
        if set(first.states) & set(second.states):
            witness = (first, second)
            return CycleReport(
                ordered, disjoint=False, witness=witness, iterations=iterations
            )
    return CycleReport(ordered, disjoint=True, iterations=iterations)


def unreachable_states(a: Automaton) -> list[str]:
    """States that no path from the initial state reaches, sorted by name."""
    seen = {a.initial}
    queue = deque([a.initial])
    while queue:
        for t in a.outgoing(queue.popleft()):
            if t.target not in seen:
                seen.add(t.target)
                queue.append(t.target)
    return sorted(a.states - seen)


def _dot_id(name: str) -> str:
    return f'"{name}"' if name.lower() in DOT_KEYWORDS else name


def to_dot(a: Automaton, name: str = "Contract") -> str:
    """Render the automaton as a Graphviz digraph.

    Nodes are sorted by name and the initial state is drawn bold. Edges are
    sorted by source, target and label.

    :param a: Automaton to render.
    :param name: Graph name, usually the contract name.
    :return: DOT text, newline terminated.
    """
    lines = [f"digraph {_dot_id(name)} {{"]
    for state in sorted(a.states):
        style = " [style=bold]" if state == a.initial else ""
        lines.append(f"    {_dot_id(state)}{style};")
    edges = sorted((t.source, t.target, str(t.label)) for t in a.transitions)
    lines += [
        f'    {_dot_id(source)} -> {_dot_id(target)} [label="{label}"];'
        for source, target, label in edges
    ]
    lines.append("}")
    return "\n".join(lines) + "\n"
