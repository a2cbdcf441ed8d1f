"""Abstract syntax tree of Stipula contracts.

Nodes are frozen dataclasses. Every node carries an optional source
``pos`` that is excluded from equality, so two trees parsed from texts that
differ only in layout compare equal.
"""

from collections.abc import Iterator
from dataclasses import dataclass, field

from core.enums import BinaryOperator, UnaryOperator


@dataclass(frozen=True, slots=True)
class Position:
    """Line and column (both 1-based) of a node in the source text."""

    line: int
    column: int

    def __str__(self) -> str:
        return f"{self.line}:{self.column}"


def _pos() -> Position | None:
    return field(  # type: ignore[return-value]
        default=None, compare=False, repr=False, kw_only=True
    )


# Expressions


@dataclass(frozen=True, slots=True)
class IntLit:
    """Natural number literal."""

    value: int
    pos: Position | None = _pos()


@dataclass(frozen=True, slots=True)
class BoolLit:
    """``true`` or ``false``."""

    value: bool
    pos: Position | None = _pos()


@dataclass(frozen=True, slots=True)
class StrLit:
    """String literal, only legal as a party message or equality operand."""

    value: str
    pos: Position | None = _pos()


@dataclass(frozen=True, slots=True)
class Name:
    """Reference to a field, asset, value parameter or asset parameter."""

    ident: str
    pos: Position | None = _pos()


@dataclass(frozen=True, slots=True)
class BinOp:
    """Binary operation ``left op right``."""

    op: BinaryOperator
    left: "Expression"
    right: "Expression"
    pos: Position | None = _pos()


@dataclass(frozen=True, slots=True)
class UnOp:
    """Unary operation ``op operand``."""

    op: UnaryOperator
    operand: "Expression"
    pos: Position | None = _pos()


type Expression = IntLit | BoolLit | StrLit | Name | BinOp | UnOp


# Statements


@dataclass(frozen=True, slots=True)
class FieldSend:
    """``E -> x``: store the value of ``expr`` in field ``target``."""

    expr: Expression
    target: str
    pos: Position | None = _pos()


@dataclass(frozen=True, slots=True)
class PartySend:
    """``E -> A``: informational message to party ``target``."""

    expr: Expression
    target: str
    pos: Position | None = _pos()


@dataclass(frozen=True, slots=True)
class AssetMove:
    """``E -o h, X``: move ``expr`` units from ``source`` to ``target``."""

    expr: Expression
    source: str
    target: str
    pos: Position | None = _pos()


@dataclass(frozen=True, slots=True)
class AssetDrain:
    """Move everything held in ``source`` to ``target``."""

    source: str
    target: str
    pos: Position | None = _pos()


@dataclass(frozen=True, slots=True)
class AssetShorthand:
    """Surface form ``h -o X``, rewritten to :class:`AssetDrain` by canonicalization."""

    source: str
    target: str
    pos: Position | None = _pos()


@dataclass(frozen=True, slots=True)
class Conditional:
    """``if (cond) { ... } else { ... }``.

    ``else_body`` is ``None`` when the source has no ``else`` branch.
    Canonical trees always carry a tuple.
    """

    cond: Expression
    then_body: tuple["Statement", ...]
    else_body: tuple["Statement", ...] | None = None
    pos: Position | None = _pos()


type Statement = (
    FieldSend | PartySend | AssetMove | AssetDrain | AssetShorthand | Conditional
)


# Declarations


@dataclass(frozen=True, slots=True)
class EventClause:
    """``now + delay >> @trigger_state { body } => @target_state``.

    ``delay`` is either a literal number of ticks or the name of a field or
    value parameter. ``event_index`` counts events in textual order from 1.
    """

    delay: int | str
    trigger_state: str
    body: tuple[Statement, ...]
    target_state: str
    event_index: int = 0
    pos: Position | None = _pos()


@dataclass(frozen=True, slots=True)
class FunctionClause:
    """``@Q A : f(y)[k] (guard) { body ; events } => @Q'``."""

    source_state: str
    party: str
    name: str
    value_params: tuple[str, ...]
    asset_params: tuple[str, ...]
    guard: Expression | None
    body: tuple[Statement, ...]
    events: tuple[EventClause, ...]
    target_state: str
    pos: Position | None = _pos()


@dataclass(frozen=True, slots=True)
class AgreementBinding:
    """``A, B : x, y`` inside the agreement block."""

    parties: tuple[str, ...]
    fields: tuple[str, ...]
    pos: Position | None = _pos()


@dataclass(frozen=True, slots=True)
class AgreementDecl:
    """The agreement block and the initial state it leads to.

    ``fields`` lists the optional second parenthesised field vector.
    """

    bindings: tuple[AgreementBinding, ...]
    initial_state: str
    fields: tuple[str, ...] = ()
    pos: Position | None = _pos()

    @property
    def bound_fields(self) -> tuple[str, ...]:
        """Fields whose initial value is set by the agreement, in binding order."""
        return tuple(f for binding in self.bindings for f in binding.fields)


@dataclass(frozen=True, slots=True)
class ContractAst:
    """A whole ``stipula`` contract."""

    name: str
    assets: tuple[str, ...]
    fields: tuple[str, ...]
    parties: tuple[str, ...]
    agreement: AgreementDecl
    clauses: tuple[FunctionClause, ...]
    pos: Position | None = _pos()

    @property
    def events(self) -> tuple[EventClause, ...]:
        """All events of the contract ordered by index."""
        return tuple(
            sorted(
                (event for clause in self.clauses for event in clause.events),
                key=lambda event: event.event_index,
            ),
        )

    def clause(self, name: str) -> FunctionClause | None:
        """Find a function clause by name.

        :param name: Clause name.
        :return: The clause, or None if the contract has no such clause.
        """
        return next((c for c in self.clauses if c.name == name), None)

    def event(self, index: int) -> EventClause | None:
        """Find an event by its index.

        :param index: Event index, starting from 1.
        :return: The event, or None if the contract has no such event.
        """
        return next((e for e in self.events if e.event_index == index), None)

    def scheduler_of(self, index: int) -> FunctionClause | None:
        """Return the function clause whose body schedules event ``index``."""
        return next(
            (c for c in self.clauses if any(e.event_index == index for e in c.events)),
            None,
        )


def walk_statements(body: tuple[Statement, ...]) -> Iterator[Statement]:
    """Yield every statement of ``body`` depth-first, conditionals included.

    :param body: Statement list.
    :yield: Each statement, parents before their branches.
    """
    for stmt in body:
        yield stmt
        if isinstance(stmt, Conditional):
            yield from walk_statements(stmt.then_body)
            yield from walk_statements(stmt.else_body or ())


def walk_expression(expr: Expression) -> Iterator[Expression]:
    """Yield ``expr`` and all of its subexpressions."""
    yield expr
    match expr:
        case BinOp(left=left, right=right):
            yield from walk_expression(left)
            yield from walk_expression(right)
        case UnOp(operand=operand):
            yield from walk_expression(operand)
        case _:
            pass
