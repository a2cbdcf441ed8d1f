"""Front end: parse Stipula source into a checked AST and canonicalize it.

Parsing runs the LALR grammar in ``grammar.lark``, transforms the Lark tree
into the dataclasses of :mod:`core.syntax`, numbers events in textual order,
and finally runs a checking pass that resolves names, distinguishes field
sends from party sends, and type checks expressions.
"""

import dataclasses
import functools
import logging
from collections.abc import Iterable
from enum import Enum, auto

import lark
from lark.exceptions import (
    UnexpectedCharacters,
    UnexpectedInput,
    UnexpectedToken,
    VisitError,
)

from core.enums import BinaryOperator, UnaryOperator
from core.exceptions import StipulaNameError, StipulaSyntaxError, StipulaTypeError
from core.syntax import (
    AgreementBinding,
    AgreementDecl,
    AssetDrain,
    AssetMove,
    AssetShorthand,
    BinOp,
    BoolLit,
    Conditional,
    ContractAst,
    EventClause,
    Expression,
    FieldSend,
    FunctionClause,
    IntLit,
    Name,
    PartySend,
    Position,
    Statement,
    StrLit,
    UnOp,
)
from utils.suggest import with_suggestion

logger = logging.getLogger(__name__)


def parse_contract(source: str) -> ContractAst:
    """Parse and check the source text of one contract.

    :param source: Contract text.
    :type source: str
    :return: Checked, not yet canonical, syntax tree.
    :rtype: ContractAst
    :raises StipulaSyntaxError: If the text does not follow the grammar.
    :raises StipulaNameError: On undeclared or duplicate identifiers.
    :raises StipulaTypeError: On ill-typed expressions.
    """
    try:
        tree = _parser().parse(source)
    except UnexpectedInput as exc:
        raise _syntax_error(exc) from None
    try:
        ast = _AstBuilder().transform(tree)
    except VisitError as exc:
        raise exc.orig_exc from None
    ast = _Checker(ast).check()
    logger.debug(
        "Parsed contract %s: %d clauses, %d events",
        ast.name,
        len(ast.clauses),
        len(ast.events),
    )
    return ast


def canonicalize(ast: ContractAst) -> ContractAst:
    """Rewrite transfer shorthands and make every else branch explicit.

    ``h -o X`` and ``h -o h, X`` become :class:`AssetDrain`; absent else
    branches become empty tuples. Canonicalizing a canonical tree returns an
    equal tree.

    :param ast: Checked syntax tree.
    :type ast: ContractAst
    :return: Canonical syntax tree.
    :rtype: ContractAst
    """
    clauses = tuple(
        dataclasses.replace(
            clause,
            body=_canonical_body(clause.body),
            events=tuple(
                dataclasses.replace(event, body=_canonical_body(event.body))
                for event in clause.events
            ),
        )
        for clause in ast.clauses
    )
    return dataclasses.replace(ast, clauses=clauses)


def is_canonical(body: Iterable[Statement]) -> bool:
    """Whether every statement of ``body`` is in one of the canonical forms."""
    for stmt in body:
        match stmt:
            case AssetShorthand():
                return False
            case AssetMove(expr=Name(ident=ident), source=source) if ident == source:
                return False
            case Conditional(then_body=then_body, else_body=else_body):
                if else_body is None:
                    return False
                if not (is_canonical(then_body) and is_canonical(else_body)):
                    return False
            case _:
                pass
    return True


def _canonical_body(body: tuple[Statement, ...]) -> tuple[Statement, ...]:
    return tuple(_canonical_statement(stmt) for stmt in body)


def _canonical_statement(stmt: Statement) -> Statement:
    match stmt:
        case AssetShorthand(source=source, target=target, pos=pos):
            return AssetDrain(source, target, pos=pos)
        case AssetMove(
            expr=Name(ident=ident), source=source, target=target, pos=pos
        ) if ident == source:
            return AssetDrain(source, target, pos=pos)
        case Conditional(cond=cond, then_body=then_body, else_body=else_body, pos=pos):
            return Conditional(
                cond,
                _canonical_body(then_body),
                _canonical_body(else_body or ()),
                pos=pos,
            )
        case _:
            return stmt


@functools.cache
def _parser() -> lark.Lark:
    """Create/retrieve the singleton LALR parser."""
    return lark.Lark.open(
        "grammar.lark",
        rel_to=__file__,
        parser="lalr",
        propagate_positions=True,
        maybe_placeholders=True,
    )


def _describe_terminal(name: str) -> str:
    if name == "_LOLLI":
        return "'-o'"
    if name == "$END":
        return "end of input"
    try:
        pattern = _parser().get_terminal(name).pattern
    except KeyError:
        return name
    if isinstance(pattern, lark.lexer.PatternStr):
        return f"'{pattern.value}'"
    return name


def _syntax_error(exc: UnexpectedInput) -> StipulaSyntaxError:
    position = Position(exc.line, exc.column) if exc.line > 0 else None
    if isinstance(exc, UnexpectedToken):
        expected = {_describe_terminal(t) for t in exc.expected}
        if exc.token.type == "$END":
            return StipulaSyntaxError("unexpected end of input", position, expected)
        return StipulaSyntaxError(
            f"unexpected token '{exc.token}'",
            position,
            expected,
        )
    if isinstance(exc, UnexpectedCharacters):
        expected = {_describe_terminal(t) for t in exc.allowed or ()}
        return StipulaSyntaxError(
            f"unexpected character '{exc.char}'",
            position,
            expected,
        )
    return StipulaSyntaxError("unexpected end of input", position)


def _meta_pos(meta: lark.tree.Meta) -> Position | None:
    if meta.empty:
        return None
    return Position(meta.line, meta.column)


def _token_pos(token: lark.Token) -> Position:
    return Position(token.line or 0, token.column or 0)


@dataclasses.dataclass(frozen=True, slots=True)
class _Arrow:
    """``E -> X`` before the checker decides between field and party."""

    expr: Expression
    target: str
    pos: Position | None


@lark.v_args(inline=True, meta=True)
class _AstBuilder(lark.Transformer):
    """Transforms the Lark parse tree into :mod:`core.syntax` nodes."""

    def start(self, meta, name, assets, fields, agreement, *clauses):
        numbered: list[FunctionClause] = []
        counter = 0
        for clause in clauses:
            events = []
            for event in clause.events:
                counter += 1
                events.append(dataclasses.replace(event, event_index=counter))
            numbered.append(dataclasses.replace(clause, events=tuple(events)))
        return ContractAst(
            str(name),
            assets,
            fields,
            agreement.parties,
            agreement.decl,
            tuple(numbered),
            pos=_meta_pos(meta),
        )

    def asset_decl(self, _meta, *names):
        return tuple(str(n) for n in names)

    def field_decl(self, _meta, *names):
        return tuple(str(n) for n in names)

    def name_list(self, _meta, *names):
        return tuple(str(n) for n in names)

    def agreement_fields(self, _meta, names):
        return names

    def binding_parties(self, _meta, *names):
        return tuple(str(n) for n in names)

    def binding_fields(self, _meta, *names):
        return tuple(str(n) for n in names)

    def binding(self, meta, parties, fields):
        return AgreementBinding(parties, fields, pos=_meta_pos(meta))

    def agreement(self, meta, parties, fields, *rest):
        *bindings, state = rest
        decl = AgreementDecl(
            tuple(bindings),
            str(state)[1:],
            fields or (),
            pos=_meta_pos(meta),
        )
        return _Agreement(parties, decl)

    def clause(self, meta, source, party, name, values, assets, guard, body, target):
        statements, events = body
        return FunctionClause(
            str(source)[1:],
            str(party),
            str(name),
            values,
            assets,
            guard,
            statements,
            events,
            str(target)[1:],
            pos=_token_pos(source),
        )

    def guard(self, _meta, expr):
        return expr

    def body(self, _meta, *items):
        statements = tuple(i for i in items if not isinstance(i, EventClause))
        events = tuple(i for i in items if isinstance(i, EventClause))
        return statements, events

    def event(self, meta, delay, trigger, block, target):
        value = int(delay) if delay.type == "INT" else str(delay)
        return EventClause(
            value,
            str(trigger)[1:],
            block,
            str(target)[1:],
            pos=_meta_pos(meta),
        )

    def block(self, _meta, *statements):
        return tuple(statements)

    def send(self, meta, expr, target):
        return _Arrow(expr, str(target), _meta_pos(meta))

    def shorthand(self, meta, expr, target):
        if not isinstance(expr, Name):
            msg = "the source of 'E -o X' must be an asset or asset parameter"
            raise StipulaSyntaxError(msg, _meta_pos(meta))
        return AssetShorthand(expr.ident, str(target), pos=_meta_pos(meta))

    def move(self, meta, expr, source, target):
        return AssetMove(expr, str(source), str(target), pos=_meta_pos(meta))

    def conditional(self, meta, cond, then_body, else_body):
        return Conditional(cond, then_body, else_body, pos=_meta_pos(meta))

    def _binary(self, op, meta, left, right):
        return BinOp(op, left, right, pos=_meta_pos(meta))

    def or_(self, meta, left, right):
        return self._binary(BinaryOperator.OR, meta, left, right)

    def and_(self, meta, left, right):
        return self._binary(BinaryOperator.AND, meta, left, right)

    def eq(self, meta, left, right):
        return self._binary(BinaryOperator.EQ, meta, left, right)

    def ne(self, meta, left, right):
        return self._binary(BinaryOperator.NE, meta, left, right)

    def lt(self, meta, left, right):
        return self._binary(BinaryOperator.LT, meta, left, right)

    def le(self, meta, left, right):
        return self._binary(BinaryOperator.LE, meta, left, right)

    def gt(self, meta, left, right):
        return self._binary(BinaryOperator.GT, meta, left, right)

    def ge(self, meta, left, right):
        return self._binary(BinaryOperator.GE, meta, left, right)

    def add(self, meta, left, right):
        return self._binary(BinaryOperator.ADD, meta, left, right)

    def sub(self, meta, left, right):
        return self._binary(BinaryOperator.SUB, meta, left, right)

    def mul(self, meta, left, right):
        return self._binary(BinaryOperator.MUL, meta, left, right)

    def div(self, meta, left, right):
        return self._binary(BinaryOperator.DIV, meta, left, right)

    def not_(self, meta, operand):
        return UnOp(UnaryOperator.NOT, operand, pos=_meta_pos(meta))

    def neg(self, meta, operand):
        return UnOp(UnaryOperator.NEG, operand, pos=_meta_pos(meta))

    def int_lit(self, _meta, token):
        return IntLit(int(token), pos=_token_pos(token))

    def true_lit(self, meta):
        return BoolLit(value=True, pos=_meta_pos(meta))

    def false_lit(self, meta):
        return BoolLit(value=False, pos=_meta_pos(meta))

    def str_lit(self, _meta, token):
        return StrLit(str(token)[1:-1], pos=_token_pos(token))

    def name(self, _meta, token):
        return Name(str(token), pos=_token_pos(token))


@dataclasses.dataclass(frozen=True, slots=True)
class _Agreement:
    parties: tuple[str, ...]
    decl: AgreementDecl


class _Type(Enum):
    INT = auto()
    BOOL = auto()
    STR = auto()
    ANY = auto()


class _Role(Enum):
    ASSET = auto()
    FIELD = auto()
    PARTY = auto()
    VALUE_PARAM = auto()
    ASSET_PARAM = auto()


class _Checker:
    """Name resolution and static typing over a freshly built AST."""

    def __init__(self, ast: ContractAst) -> None:
        self.ast = ast
        self.globals: dict[str, _Role] = {}

    def check(self) -> ContractAst:
        """Check the whole contract and return it with sends resolved."""
        self._declare(self.ast.assets, _Role.ASSET)
        self._declare(self.ast.fields, _Role.FIELD)
        self._declare(self.ast.parties, _Role.PARTY)
        self._check_agreement()
        seen: dict[str, FunctionClause] = {}
        clauses = []
        for clause in self.ast.clauses:
            if clause.name in seen:
                msg = f"duplicate clause '{clause.name}'"
                raise StipulaNameError(msg, clause.pos)
            seen[clause.name] = clause
            clauses.append(self._check_clause(clause))
        return dataclasses.replace(self.ast, clauses=tuple(clauses))

    def _declare(self, names: tuple[str, ...], role: _Role) -> None:
        for name in names:
            if name in self.globals:
                msg = f"duplicate declaration of '{name}'"
                raise StipulaNameError(msg, self.ast.pos)
            self.globals[name] = role

    def _names_with(self, *roles: _Role) -> list[str]:
        return [name for name, role in self.globals.items() if role in roles]

    def _require(
        self,
        name: str,
        scope: dict[str, _Role],
        roles: set[_Role],
        what: str,
        pos: Position | None,
    ) -> _Role:
        role = scope.get(name)
        if role in roles:
            return role
        candidates = [n for n, r in scope.items() if r in roles]
        if role is None:
            msg = with_suggestion(f"undeclared {what} '{name}'", name, candidates)
        else:
            kind = role.name.lower().replace("_", " ")
            msg = f"'{name}' is a {kind}, expected {what}"
        raise StipulaNameError(msg, pos)

    def _check_agreement(self) -> None:
        agreement = self.ast.agreement
        parties = set(self.ast.parties)
        fields = set(self.ast.fields)
        for name in agreement.fields:
            if name not in fields:
                msg = with_suggestion(f"undeclared field '{name}'", name, fields)
                raise StipulaNameError(msg, agreement.pos)
        bound: dict[str, AgreementBinding] = {}
        for binding in agreement.bindings:
            for party in binding.parties:
                if party not in parties:
                    msg = with_suggestion(f"undeclared party '{party}'", party, parties)
                    raise StipulaNameError(msg, binding.pos)
            for name in binding.fields:
                if name not in fields:
                    msg = with_suggestion(f"undeclared field '{name}'", name, fields)
                    raise StipulaNameError(msg, binding.pos)
                if name in bound:
                    msg = f"field '{name}' is bound by more than one agreement clause"
                    raise StipulaNameError(msg, binding.pos)
                bound[name] = binding

    def _check_clause(self, clause: FunctionClause) -> FunctionClause:
        if clause.party not in self.ast.parties:
            msg = with_suggestion(
                f"undeclared party '{clause.party}'",
                clause.party,
                self.ast.parties,
            )
            raise StipulaNameError(msg, clause.pos)
        scope = dict(self.globals)
        for params, role in (
            (clause.value_params, _Role.VALUE_PARAM),
            (clause.asset_params, _Role.ASSET_PARAM),
        ):
            for param in params:
                if param in scope:
                    msg = f"parameter '{param}' of '{clause.name}' shadows '{param}'"
                    raise StipulaNameError(msg, clause.pos)
                scope[param] = role
        if clause.guard is not None:
            self._expect_condition(clause.guard, scope, "guard")
        body = self._check_body(clause.body, scope)
        event_scope = {n: r for n, r in scope.items() if r is not _Role.ASSET_PARAM}
        events = tuple(self._check_event(event, event_scope) for event in clause.events)
        return dataclasses.replace(clause, body=body, events=events)

    def _check_event(self, event: EventClause, scope: dict[str, _Role]) -> EventClause:
        if isinstance(event.delay, str):
            self._require(
                event.delay,
                scope,
                {_Role.FIELD, _Role.VALUE_PARAM},
                "field or value parameter",
                event.pos,
            )
        return dataclasses.replace(event, body=self._check_body(event.body, scope))

    def _check_body(
        self, body: tuple[Statement, ...], scope: dict[str, _Role]
    ) -> tuple[Statement, ...]:
        return tuple(self._check_statement(stmt, scope) for stmt in body)

    def _check_statement(
        self, stmt: Statement | _Arrow, scope: dict[str, _Role]
    ) -> Statement:
        sources = {_Role.ASSET, _Role.ASSET_PARAM}
        targets = {_Role.ASSET, _Role.PARTY}
        match stmt:
            case _Arrow(expr=expr, target=target, pos=pos):
                kind = self._type_of(expr, scope)
                receivers = {_Role.FIELD, _Role.PARTY}
                role = self._require(target, scope, receivers, "field or party", pos)
                if role is _Role.PARTY:
                    return PartySend(expr, target, pos=pos)
                if kind is _Type.STR:
                    msg = "string values may only be sent to parties"
                    raise StipulaTypeError(msg, pos)
                return FieldSend(expr, target, pos=pos)
            case AssetShorthand(source=source, target=target, pos=pos):
                self._require(source, scope, sources, "asset or asset parameter", pos)
                self._require(target, scope, targets, "asset or party", pos)
                return stmt
            case AssetDrain(source=source, target=target, pos=pos):
                self._require(source, scope, sources, "asset or asset parameter", pos)
                self._require(target, scope, targets, "asset or party", pos)
                return stmt
            case AssetMove(expr=expr, source=source, target=target, pos=pos):
                if self._type_of(expr, scope) not in {_Type.INT, _Type.ANY}:
                    msg = "the amount of an asset move must be a number"
                    raise StipulaTypeError(msg, pos)
                self._require(source, scope, sources, "asset or asset parameter", pos)
                self._require(target, scope, targets, "asset or party", pos)
                return stmt
            case Conditional(
                cond=cond, then_body=then_body, else_body=else_body, pos=pos
            ):
                self._expect_condition(cond, scope, "condition")
                return Conditional(
                    cond,
                    self._check_body(then_body, scope),
                    None if else_body is None else self._check_body(else_body, scope),
                    pos=pos,
                )
            case _:
                return stmt

    def _expect_condition(
        self, expr: Expression, scope: dict[str, _Role], what: str
    ) -> None:
        if self._type_of(expr, scope) not in {_Type.BOOL, _Type.ANY}:
            msg = f"{what} is not boolean"
            raise StipulaTypeError(msg, expr.pos)

    def _type_of(  # noqa: C901
        self, expr: Expression, scope: dict[str, _Role]
    ) -> _Type:
        match expr:
            case IntLit():
                return _Type.INT
            case BoolLit():
                return _Type.BOOL
            case StrLit():
                return _Type.STR
            case Name(ident=ident, pos=pos):
                role = self._require(
                    ident,
                    scope,
                    {_Role.ASSET, _Role.FIELD, _Role.VALUE_PARAM, _Role.ASSET_PARAM},
                    "name",
                    pos,
                )
                if role in {_Role.ASSET, _Role.ASSET_PARAM}:
                    return _Type.INT
                return _Type.ANY
            case UnOp(op=op, operand=operand, pos=pos):
                inner = self._type_of(operand, scope)
                if op is UnaryOperator.NOT:
                    if inner in {_Type.INT, _Type.STR}:
                        raise StipulaTypeError("'!' applied to a non-boolean", pos)
                    return _Type.BOOL
                if inner in {_Type.BOOL, _Type.STR}:
                    raise StipulaTypeError("'-' applied to a non-number", pos)
                return _Type.INT
            case BinOp(op=op, left=left, right=right, pos=pos):
                lhs = self._type_of(left, scope)
                rhs = self._type_of(right, scope)
                operands = {lhs, rhs}
                if op.is_arithmetic:
                    if _Type.STR in operands:
                        raise StipulaTypeError(f"arithmetic '{op}' on strings", pos)
                    if _Type.BOOL in operands:
                        raise StipulaTypeError(f"arithmetic '{op}' on booleans", pos)
                    return _Type.INT
                if op.is_ordering:
                    if operands & {_Type.STR, _Type.BOOL}:
                        raise StipulaTypeError(f"comparison '{op}' on non-numbers", pos)
                    return _Type.BOOL
                if op.is_logical:
                    if operands & {_Type.STR, _Type.INT}:
                        raise StipulaTypeError(f"'{op}' on non-booleans", pos)
                    return _Type.BOOL
                if _Type.ANY not in operands and len(operands) > 1:
                    msg = f"'{op}' compares values of different types"
                    raise StipulaTypeError(msg, pos)
                return _Type.BOOL
            case _:
                msg = f"unknown expression {expr!r}"
                raise StipulaTypeError(msg)
