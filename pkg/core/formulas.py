"""Specification formulas over owner-qualified asset locations.

Formulas are small immutable trees shared by the analysis, scenario and
codegen passes. Inside a ``requires`` formula and inside a symbolic store a
bare :class:`Loc` denotes the pre-state value. Inside an ``ensures`` formula
it denotes the post-state value and :class:`Old` refers back to the pre-state.
"""

from collections.abc import Callable, Iterator, Mapping
from dataclasses import dataclass
from functools import reduce

from core.enums import BinaryOperator, UnaryOperator
from core.exceptions import EvalError
from core.syntax import BinOp, BoolLit, Expression, IntLit, Name, StrLit, UnOp

type Value = int | bool | str


@dataclass(frozen=True, slots=True, eq=False)
class Const:
    """Literal value. ``Const(True)`` and ``Const(1)`` are different constants."""

    value: Value

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Const):
            return NotImplemented
        return type(self.value) is type(other.value) and self.value == other.value

    def __hash__(self) -> int:
        return hash((type(self.value), self.value))


@dataclass(frozen=True, slots=True)
class Var:
    """Symbolic scalar: a parameter, a field, a ghost total or a loop counter."""

    name: str


@dataclass(frozen=True, slots=True)
class Loc:
    """Owner-qualified location such as ``Deposit.flour``.

    Contract fields are locations owned by the contract.
    """

    owner: str
    name: str

    @property
    def key(self) -> str:
        """Qualified name used as valuation key."""
        return f"{self.owner}.{self.name}"


@dataclass(frozen=True, slots=True)
class Old:
    """Pre-state value of ``inner``."""

    inner: "Formula"


@dataclass(frozen=True, slots=True)
class Bin:
    """Arithmetic or comparison; logical operators use :class:`And`/:class:`Or`."""

    op: BinaryOperator
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True, slots=True)
class Mod:
    """Remainder with the sign of the dividend."""

    left: "Formula"
    right: "Formula"


@dataclass(frozen=True, slots=True)
class Not:
    """Logical negation."""

    operand: "Formula"


@dataclass(frozen=True, slots=True)
class Neg:
    """Arithmetic negation."""

    operand: "Formula"


@dataclass(frozen=True, slots=True)
class And:
    """N-ary conjunction; empty means ``true``."""

    parts: tuple["Formula", ...]


@dataclass(frozen=True, slots=True)
class Or:
    """N-ary disjunction; empty means ``false``."""

    parts: tuple["Formula", ...]


@dataclass(frozen=True, slots=True)
class Implies:
    """``left ==> right``."""

    left: "Formula"
    right: "Formula"


@dataclass(frozen=True, slots=True)
class Ite:
    """``cond ? then : otherwise``."""

    cond: "Formula"
    then: "Formula"
    otherwise: "Formula"


type Formula = (
    Const | Var | Loc | Old | Bin | Mod | Not | Neg | And | Or | Implies | Ite
)

TRUE = Const(value=True)
FALSE = Const(value=False)
ZERO = Const(value=0)


# Construction helpers


def conj(*parts: Formula) -> Formula:
    """Conjunction that flattens nested conjunctions and drops ``true``."""
    flat: list[Formula] = []
    for part in parts:
        if isinstance(part, And):
            flat.extend(part.parts)
        elif part == FALSE:
            return FALSE
        elif part != TRUE and part not in flat:
            flat.append(part)
    if not flat:
        return TRUE
    return flat[0] if len(flat) == 1 else And(tuple(flat))


def disj(*parts: Formula) -> Formula:
    """Disjunction that flattens nested disjunctions and drops ``false``."""
    flat: list[Formula] = []
    for part in parts:
        if isinstance(part, Or):
            flat.extend(part.parts)
        elif part == TRUE:
            return TRUE
        elif part != FALSE and part not in flat:
            flat.append(part)
    if not flat:
        return FALSE
    return flat[0] if len(flat) == 1 else Or(tuple(flat))


def negate(formula: Formula) -> Formula:
    """Logical negation folding constants and double negation."""
    match formula:
        case Const(value=bool(value)):
            return Const(value=not value)
        case Not(operand=operand):
            return operand
        case _:
            return Not(formula)


def implies(left: Formula, right: Formula) -> Formula:
    """Implication folding trivial antecedents and consequents."""
    if left == TRUE or right == TRUE:
        return right
    if left == FALSE:
        return TRUE
    return Implies(left, right)


def ite(cond: Formula, then: Formula, otherwise: Formula) -> Formula:
    """Conditional expression folding constant conditions and equal branches."""
    if cond == TRUE or then == otherwise:
        return then
    if cond == FALSE:
        return otherwise
    if (then, otherwise) == (TRUE, FALSE):
        return cond
    if (then, otherwise) == (FALSE, TRUE):
        return negate(cond)
    return Ite(cond, then, otherwise)


def binary(op: BinaryOperator, left: Formula, right: Formula) -> Formula:
    """Binary formula; ``&&`` and ``||`` become n-ary nodes."""
    if op is BinaryOperator.AND:
        return conj(left, right)
    if op is BinaryOperator.OR:
        return disj(left, right)
    return Bin(op, left, right)


def add(left: Formula, right: Formula) -> Formula:
    """``left + right`` dropping zero operands."""
    if right == ZERO:
        return left
    if left == ZERO:
        return right
    return Bin(BinaryOperator.ADD, left, right)


def sub(left: Formula, right: Formula) -> Formula:
    """``left - right`` dropping a zero subtrahend."""
    if right == ZERO:
        return left
    return Bin(BinaryOperator.SUB, left, right)


def mul(left: Formula, right: Formula) -> Formula:
    """``left * right``."""
    return Bin(BinaryOperator.MUL, left, right)


def eq(left: Formula, right: Formula) -> Formula:
    """``left == right``."""
    return Bin(BinaryOperator.EQ, left, right)


def ge(left: Formula, right: Formula) -> Formula:
    """``left >= right``."""
    return Bin(BinaryOperator.GE, left, right)


def from_expression(expr: Expression, resolve: Callable[[str], Formula]) -> Formula:
    """Translate a source expression, resolving names through ``resolve``.

    :param expr: Expression from a clause body, guard or condition.
    :type expr: Expression
    :param resolve: Maps an identifier to its formula in the current context.
    :return: Equivalent formula.
    :rtype: Formula
    """
    match expr:
        case IntLit(value=value) | BoolLit(value=value) | StrLit(value=value):
            return Const(value=value)
        case Name(ident=ident):
            return resolve(ident)
        case UnOp(op=UnaryOperator.NOT, operand=operand):
            return negate(from_expression(operand, resolve))
        case UnOp(op=UnaryOperator.NEG, operand=operand):
            return Neg(from_expression(operand, resolve))
        case BinOp(op=op, left=left, right=right):
            return binary(
                op, from_expression(left, resolve), from_expression(right, resolve)
            )
        case _:
            msg = f"cannot translate {expr!r}"
            raise TypeError(msg)


# Traversal


def children(formula: Formula) -> tuple[Formula, ...]:
    """Direct subformulas of ``formula``."""
    match formula:
        case Old(inner=inner):
            return (inner,)
        case Not(operand=operand) | Neg(operand=operand):
            return (operand,)
        case Bin(left=left, right=right) | Mod(left=left, right=right):
            return (left, right)
        case Implies(left=left, right=right):
            return (left, right)
        case And(parts=parts) | Or(parts=parts):
            return parts
        case Ite(cond=cond, then=then, otherwise=otherwise):
            return (cond, then, otherwise)
        case _:
            return ()


def walk(formula: Formula) -> Iterator[Formula]:
    """Yield ``formula`` and its subformulas, parents first."""
    yield formula
    for child in children(formula):
        yield from walk(child)


def locations(formula: Formula) -> list[Loc]:
    """Locations mentioned in ``formula``, in first-occurrence order."""
    found: list[Loc] = []
    for node in walk(formula):
        if isinstance(node, Loc) and node not in found:
            found.append(node)
    return found


def transform(formula: Formula, fn: Callable[[Formula], Formula | None]) -> Formula:
    """Rebuild ``formula`` top-down.

    :param formula: Formula to rewrite.
    :param fn: Returns a replacement for a node, or None to recurse into it.
    :return: Rewritten formula.
    """
    replacement = fn(formula)
    if replacement is not None:
        return replacement

    def again(child: Formula) -> Formula:
        return transform(child, fn)

    match formula:
        case Old(inner=inner):
            return Old(again(inner))
        case Not(operand=operand):
            return negate(again(operand))
        case Neg(operand=operand):
            return Neg(again(operand))
        case Bin(op=op, left=left, right=right):
            return Bin(op, again(left), again(right))
        case Mod(left=left, right=right):
            return Mod(again(left), again(right))
        case Implies(left=left, right=right):
            return implies(again(left), again(right))
        case And(parts=parts):
            return conj(*map(again, parts))
        case Or(parts=parts):
            return disj(*map(again, parts))
        case Ite(cond=cond, then=then, otherwise=otherwise):
            return ite(again(cond), again(then), again(otherwise))
        case _:
            return formula


def substitute(formula: Formula, mapping: Mapping[Formula, Formula]) -> Formula:
    """Replace every occurrence of a key of ``mapping`` by its value."""
    return transform(formula, mapping.get)


# Linear forms


@dataclass(frozen=True, slots=True)
class LinearForm:
    """``constant + sum(coefficient * atom)`` with atoms in first-occurrence order."""

    terms: tuple[tuple[Formula, int], ...]
    constant: int = 0

    def __add__(self, other: "LinearForm") -> "LinearForm":
        merged = dict(self.terms)
        for atom, coefficient in other.terms:
            merged[atom] = merged.get(atom, 0) + coefficient
        return LinearForm(
            tuple((atom, c) for atom, c in merged.items() if c),
            self.constant + other.constant,
        )

    def scale(self, factor: int) -> "LinearForm":
        """Multiply every coefficient and the constant by ``factor``."""
        if factor == 0:
            return LinearForm(())
        return LinearForm(
            tuple((atom, c * factor) for atom, c in self.terms),
            self.constant * factor,
        )

    def coefficient(self, atom: Formula) -> int:
        """Coefficient of ``atom``, zero when absent."""
        return dict(self.terms).get(atom, 0)

    def without(self, atom: Formula) -> "LinearForm":
        """The form with ``atom`` removed."""
        return LinearForm(tuple(t for t in self.terms if t[0] != atom), self.constant)

    @classmethod
    def of(cls, formula: Formula) -> "LinearForm":
        """Collect ``formula`` into a linear form.

        Sums, differences, negations and products with a constant factor are
        expanded; every other subterm becomes an atom.
        """
        match formula:
            case Const(value=bool()) | Const(value=str()):
                return cls(((formula, 1),))
            case Const(value=int(value)):
                return cls((), value)
            case Bin(op=BinaryOperator.ADD, left=left, right=right):
                return cls.of(left) + cls.of(right)
            case Bin(op=BinaryOperator.SUB, left=left, right=right):
                return cls.of(left) + cls.of(right).scale(-1)
            case Neg(operand=operand):
                return cls.of(operand).scale(-1)
            case Bin(op=BinaryOperator.MUL, left=Const(value=int(k)), right=right) if (
                not isinstance(k, bool)
            ):
                return cls.of(right).scale(k)
            case Bin(op=BinaryOperator.MUL, left=left, right=Const(value=int(k))) if (
                not isinstance(k, bool)
            ):
                return cls.of(left).scale(k)
            case _:
                return cls(((formula, 1),))

    def to_formula(self) -> Formula:
        """Render back to a formula, positive leading term first when possible."""
        result: Formula | None = None
        for atom, coefficient in self.terms:
            magnitude = abs(coefficient)
            term = atom if magnitude == 1 else mul(Const(value=magnitude), atom)
            if result is None:
                result = term if coefficient > 0 else Neg(term)
            elif coefficient > 0:
                result = add(result, term)
            else:
                result = sub(result, term)
        if result is None:
            return Const(value=self.constant)
        if self.constant > 0:
            return add(result, Const(value=self.constant))
        if self.constant < 0:
            return sub(result, Const(value=-self.constant))
        return result


def normalize(formula: Formula) -> Formula:
    """Normalize an arithmetic formula through its linear form."""
    return LinearForm.of(formula).to_formula()


# Evaluation


def truncating_div(left: int, right: int) -> int:
    """Integer division truncating toward zero.

    :raises EvalError: On division by zero.
    """
    if right == 0:
        msg = "division by zero"
        raise EvalError(msg)
    quotient = abs(left) // abs(right)
    return quotient if (left >= 0) == (right >= 0) else -quotient


def truncating_mod(left: int, right: int) -> int:
    """Remainder matching :func:`truncating_div`."""
    return left - right * truncating_div(left, right)


def apply_binary(op: BinaryOperator, left: Value, right: Value) -> Value:
    """Apply a source-level binary operator to two values."""
    match op:
        case BinaryOperator.ADD:
            return int(left) + int(right)
        case BinaryOperator.SUB:
            return int(left) - int(right)
        case BinaryOperator.MUL:
            return int(left) * int(right)
        case BinaryOperator.DIV:
            return truncating_div(int(left), int(right))
        case BinaryOperator.EQ:
            return left == right
        case BinaryOperator.NE:
            return left != right
        case BinaryOperator.LT:
            return left < right  # type: ignore[operator]
        case BinaryOperator.LE:
            return left <= right  # type: ignore[operator]
        case BinaryOperator.GT:
            return left > right  # type: ignore[operator]
        case BinaryOperator.GE:
            return left >= right  # type: ignore[operator]
        case BinaryOperator.AND:
            return bool(left) and bool(right)
        case BinaryOperator.OR:
            return bool(left) or bool(right)


def evaluate(
    formula: Formula,
    current: Mapping[str, Value],
    variables: Mapping[str, Value],
    old: Mapping[str, Value] | None = None,
) -> Value:
    """Evaluate ``formula`` over a concrete valuation.

    :param formula: Formula to evaluate.
    :param current: Location values keyed by ``Owner.asset``.
    :param variables: Values of symbolic variables.
    :param old: Pre-state location values for :class:`Old` subterms.
    :return: The value of the formula.
    :raises EvalError: On division by zero or an unbound name.
    """

    def ev(node: Formula) -> Value:
        return evaluate(node, current, variables, old)

    match formula:
        case Const(value=value):
            return value
        case Var(name=name):
            if name not in variables:
                msg = f"unbound variable '{name}'"
                raise EvalError(msg)
            return variables[name]
        case Loc():
            if formula.key not in current:
                msg = f"unbound location '{formula.key}'"
                raise EvalError(msg)
            return current[formula.key]
        case Old(inner=inner):
            if old is None:
                msg = "\\old outside a postcondition"
                raise EvalError(msg)
            return evaluate(inner, old, variables, old)
        case Bin(op=op, left=left, right=right):
            return apply_binary(op, ev(left), ev(right))
        case Mod(left=left, right=right):
            return truncating_mod(int(ev(left)), int(ev(right)))
        case Not(operand=operand):
            return not ev(operand)
        case Neg(operand=operand):
            return -int(ev(operand))
        case And(parts=parts):
            return all(ev(part) for part in parts)
        case Or(parts=parts):
            return any(ev(part) for part in parts)
        case Implies(left=left, right=right):
            return (not ev(left)) or bool(ev(right))
        case Ite(cond=cond, then=then, otherwise=otherwise):
            return ev(then) if ev(cond) else ev(otherwise)


# JML rendering

(
    _ITE,
    _IMPLIES,
    _OR,
    _AND,
    _EQUALITY,
    _RELATION,
    _SUM,
    _PRODUCT,
    _UNARY,
    _ATOM,
) = range(10)

_BIN_PRECEDENCE = {
    BinaryOperator.EQ: _EQUALITY,
    BinaryOperator.NE: _EQUALITY,
    BinaryOperator.LT: _RELATION,
    BinaryOperator.LE: _RELATION,
    BinaryOperator.GT: _RELATION,
    BinaryOperator.GE: _RELATION,
    BinaryOperator.ADD: _SUM,
    BinaryOperator.SUB: _SUM,
    BinaryOperator.MUL: _PRODUCT,
    BinaryOperator.DIV: _PRODUCT,
}


def render(formula: Formula, local_owner: str | None = None) -> str:
    """Render ``formula`` as a JML expression.

    :param formula: Formula to render.
    :param local_owner: Owner whose locations render unqualified, as inside
        the contract class's own loop bodies.
    :return: JML text.
    """
    return _render(formula, _ITE, local_owner)


def _paren(text: str, precedence: int, context: int) -> str:
    return f"({text})" if precedence < context else text


def _render(  # noqa: C901, PLR0911
    formula: Formula, context: int, local: str | None
) -> str:
    def sub_render(node: Formula, ctx: int) -> str:
        return _render(node, ctx, local)

    match formula:
        case Const(value=bool(value)):
            return "true" if value else "false"
        case Const(value=str(value)):
            return f'"{value}"'
        case Const(value=value):
            text = str(value)
            negative = value < 0  # type: ignore[operator]
            return _paren(text, _UNARY, context) if negative else text
        case Var(name=name):
            return name
        case Loc(owner=owner, name=name):
            return name if owner == local else formula.key
        case Old(inner=inner):
            return f"\\old({sub_render(inner, _ITE)})"
        case Not(operand=operand):
            return _paren(f"!{sub_render(operand, _UNARY)}", _UNARY, context)
        case Neg(operand=operand):
            return _paren(f"-{sub_render(operand, _UNARY)}", _UNARY, context)
        case Bin(op=BinaryOperator.DIV, left=left, right=right):
            text = f"{sub_render(left, _PRODUCT)}/{sub_render(right, _UNARY)}"
            return _paren(text, _PRODUCT, context)
        case Bin(
            op=BinaryOperator.MUL, left=left, right=Bin(op=BinaryOperator.DIV) as right
        ):
            # rendered flat: loop requires demand exact divisibility
            text = f"{sub_render(left, _PRODUCT)} * {sub_render(right, _PRODUCT)}"
            return _paren(text, _PRODUCT, context)
        case Bin(op=op, left=left, right=right):
            precedence = _BIN_PRECEDENCE[op]
            lhs = sub_render(left, precedence)
            text = f"{lhs} {op} {sub_render(right, precedence + 1)}"
            return _paren(text, precedence, context)
        case Mod(left=left, right=right):
            text = f"{sub_render(left, _PRODUCT)} % {sub_render(right, _UNARY)}"
            return _paren(text, _PRODUCT, context)
        case And(parts=()):
            return "true"
        case Or(parts=()):
            return "false"
        case And(parts=parts):
            text = " && ".join(sub_render(part, _EQUALITY) for part in parts)
            return _paren(text, _AND, context)
        case Or(parts=parts):
            text = " || ".join(sub_render(part, _EQUALITY) for part in parts)
            return _paren(text, _OR, context)
        case Implies(left=left, right=right):
            text = f"{sub_render(left, _OR)} ==> {sub_render(right, _IMPLIES)}"
            return _paren(text, _IMPLIES, context)
        case Ite(cond=cond, then=then, otherwise=otherwise):
            text = (
                f"{sub_render(cond, _IMPLIES)} ? {sub_render(then, _IMPLIES)} "
                f": {sub_render(otherwise, _ITE)}"
            )
            return _paren(text, _ITE, context)


def conjuncts(formula: Formula) -> tuple[Formula, ...]:
    """Top-level conjuncts of ``formula``."""
    if isinstance(formula, And):
        return formula.parts
    return () if formula == TRUE else (formula,)


def sum_of(parts: list[Formula]) -> Formula:
    """Left-nested sum, ``0`` when empty."""
    return reduce(add, parts) if parts else ZERO
