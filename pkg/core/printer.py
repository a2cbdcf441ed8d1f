"""Pretty-printer producing parseable Stipula surface syntax."""

from core.enums import BinaryOperator, UnaryOperator
from core.syntax import (
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
    Statement,
    StrLit,
    UnOp,
)

INDENT = "    "

PRECEDENCE: dict[BinaryOperator, int] = {
    BinaryOperator.OR: 1,
    BinaryOperator.AND: 2,
    BinaryOperator.EQ: 3,
    BinaryOperator.NE: 3,
    BinaryOperator.LT: 3,
    BinaryOperator.LE: 3,
    BinaryOperator.GT: 3,
    BinaryOperator.GE: 3,
    BinaryOperator.ADD: 4,
    BinaryOperator.SUB: 4,
    BinaryOperator.MUL: 5,
    BinaryOperator.DIV: 5,
}
UNARY_PRECEDENCE = 6
COMPARISON_PRECEDENCE = 3


def format_expression(expr: Expression, min_precedence: int = 0) -> str:
    """Render an expression with the fewest parentheses that keep its shape.

    :param expr: Expression to render.
    :param min_precedence: Binding strength required by the context.
    :return: Surface syntax of ``expr``.
    """
    match expr:
        case IntLit(value=value):
            return str(value)
        case BoolLit(value=value):
            return "true" if value else "false"
        case StrLit(value=value):
            return f'"{value}"'
        case Name(ident=ident):
            return ident
        case UnOp(op=op, operand=operand):
            inner = format_expression(operand, UNARY_PRECEDENCE)
            # "-o" is the move token
            gap = " " if op is UnaryOperator.NEG and inner.startswith("o") else ""
            text = f"{op}{gap}{inner}"
            return f"({text})" if min_precedence > UNARY_PRECEDENCE else text
        case BinOp(op=op, left=left, right=right):
            precedence = PRECEDENCE[op]
            left_min = precedence + (precedence == COMPARISON_PRECEDENCE)
            text = (
                f"{format_expression(left, left_min)} {op} "
                f"{format_expression(right, precedence + 1)}"
            )
            return f"({text})" if precedence < min_precedence else text
        case _:
            msg = f"cannot format {expr!r}"
            raise TypeError(msg)


def format_statement(stmt: Statement, depth: int = 0) -> list[str]:
    """Render one statement as indented lines."""
    pad = INDENT * depth
    match stmt:
        case FieldSend(expr=expr, target=target) | PartySend(expr=expr, target=target):
            return [f"{pad}{format_expression(expr)} -> {target}"]
        case AssetMove(expr=expr, source=source, target=target):
            return [f"{pad}{format_expression(expr)} -o {source}, {target}"]
        case AssetDrain(source=source, target=target) | AssetShorthand(
            source=source,
            target=target,
        ):
            return [f"{pad}{source} -o {target}"]
        case Conditional(cond=cond, then_body=then_body, else_body=else_body):
            lines = [f"{pad}if ({format_expression(cond)}) {{"]
            lines += _format_body(then_body, depth + 1)
            if else_body is None:
                lines.append(f"{pad}}}")
            else:
                lines.append(f"{pad}}} else {{")
                lines += _format_body(else_body, depth + 1)
                lines.append(f"{pad}}}")
            return lines
        case _:
            msg = f"cannot format {stmt!r}"
            raise TypeError(msg)


def _format_body(body: tuple[Statement, ...], depth: int) -> list[str]:
    return [line for stmt in body for line in format_statement(stmt, depth)]


def _format_event(event: EventClause, depth: int) -> list[str]:
    pad = INDENT * depth
    return [
        f"{pad}now + {event.delay} >> @{event.trigger_state} {{",
        *_format_body(event.body, depth + 1),
        f"{pad}}} => @{event.target_state}",
    ]


def _format_clause(clause: FunctionClause) -> list[str]:
    guard = "" if clause.guard is None else f" ({format_expression(clause.guard)})"
    header = (
        f"{INDENT}@{clause.source_state} {clause.party} : {clause.name}"
        f"({', '.join(clause.value_params)})[{', '.join(clause.asset_params)}]"
        f"{guard} {{"
    )
    lines = [header, *_format_body(clause.body, 2)]
    for event in clause.events:
        lines += _format_event(event, 2)
    lines.append(f"{INDENT}}} => @{clause.target_state}")
    return lines


def format_contract(ast: ContractAst) -> str:
    """Render a whole contract.

    Parsing the result yields a tree equal to ``ast``.

    :param ast: Contract to render.
    :type ast: ContractAst
    :return: Surface syntax, newline terminated.
    :rtype: str
    """
    agreement = ast.agreement
    fields = f"({', '.join(agreement.fields)})" if agreement.fields else ""
    lines = [f"stipula {ast.name} {{"]
    if ast.assets:
        lines.append(f"{INDENT}asset {', '.join(ast.assets)}")
    if ast.fields:
        lines.append(f"{INDENT}field {', '.join(ast.fields)}")
    lines.append(f"{INDENT}agreement ({', '.join(ast.parties)}){fields} {{")
    lines += [
        f"{INDENT * 2}{', '.join(b.parties)} : {', '.join(b.fields)}"
        for b in agreement.bindings
    ]
    lines.append(f"{INDENT}}} => @{agreement.initial_state}")
    for clause in ast.clauses:
        lines.append("")
        lines += _format_clause(clause)
    lines.append("}")
    return "\n".join(lines) + "\n"
