"""Various enums used across the compiler."""

from enum import IntEnum, StrEnum


class BinaryOperator(StrEnum):
    """Binary operators of the expression language.

    Division truncates toward zero.

    :param ADD: Integer addition ('+')
    :param SUB: Integer subtraction ('-')
    :param MUL: Integer multiplication ('*')
    :param DIV: Integer division ('/')
    :param EQ: Equality ('==')
    :param NE: Inequality ('!=')
    :param LT: Less than ('<')
    :param LE: Less or equal ('<=')
    :param GT: Greater than ('>')
    :param GE: Greater or equal ('>=')
    :param AND: Logical conjunction ('&&')
    :param OR: Logical disjunction ('||')
    """

    ADD = "+"
    SUB = "-"
    MUL = "*"
    DIV = "/"
    EQ = "=="
    NE = "!="
    LT = "<"
    LE = "<="
    GT = ">"
    GE = ">="
    AND = "&&"
    OR = "||"

    @property
    def is_arithmetic(self) -> bool:
        """Whether the operator maps integers to an integer."""
        return self in {
            BinaryOperator.ADD,
            BinaryOperator.SUB,
            BinaryOperator.MUL,
            BinaryOperator.DIV,
        }

    @property
    def is_ordering(self) -> bool:
        """Whether the operator compares integers by magnitude."""
        return self in {
            BinaryOperator.LT,
            BinaryOperator.LE,
            BinaryOperator.GT,
            BinaryOperator.GE,
        }

    @property
    def is_logical(self) -> bool:
        """Whether the operator combines booleans."""
        return self in {BinaryOperator.AND, BinaryOperator.OR}


class UnaryOperator(StrEnum):
    """Unary operators of the expression language.

    :param NOT: Logical negation ('!')
    :param NEG: Arithmetic negation ('-')
    """

    NOT = "!"
    NEG = "-"


class AssetKind(StrEnum):
    """Asset classification produced by the usage heuristic.

    :param DIVISIBLE: Quantity conserved in total, rendered as ``int``
    :param INDIVISIBLE: Single unit with exactly one owner, rendered as ``boolean``
    """

    DIVISIBLE = "divisible"
    INDIVISIBLE = "indivisible"


class TargetKind(StrEnum):
    """Types of the emitted compilation unit.

    :param INT: Java ``int``
    :param BOOLEAN: Java ``boolean``
    """

    INT = "int"
    BOOLEAN = "boolean"


class MethodRole(StrEnum):
    """Role of a generated method, which also fixes its rendering order.

    :param CLAUSE: Lowered function clause
    :param EVENT: Lowered event clause (``eventN``)
    :param LOOP: Annotated loop over one cycle (``loopN``)
    :param SCENARIO: Scenario method (``seqN``)
    """

    CLAUSE = "clause"
    EVENT = "event"
    LOOP = "loop"
    SCENARIO = "scenario"


class ObligationStatus(StrEnum):
    """Outcome of one proof obligation.

    :param CLOSED: Proof found
    :param OPEN: Proof not found
    """

    CLOSED = "closed"
    OPEN = "open"


class VerifierStatus(StrEnum):
    """Overall outcome of an external prover run.

    :param PASSED: Every obligation closed
    :param FAILED: At least one obligation open
    :param SKIPPED: No prover configured
    """

    PASSED = "passed"
    FAILED = "failed"
    SKIPPED = "skipped"


class IntSemantics(StrEnum):
    """Integer semantics declared in the emitted unit.

    :param MATH: Mathematical integers, no overflow
    :param JAVA: Two's complement Java integers
    """

    MATH = "math"
    JAVA = "java"


class Subcommand(StrEnum):
    """Subcommands of the ``stipulac`` driver."""

    CHECK = "check"
    GRAPH = "graph"
    REPORT = "report"
    PLAN = "plan"
    TRANSLATE = "translate"
    RUN = "run"
    VERIFY = "verify"


class ExitCode(IntEnum):
    """Process exit codes of the ``stipulac`` driver.

    :param OK: Every check passed (0)
    :param INVALID: Syntax or semantic error (1)
    :param NOT_DISJOINT: Cycles share a state (2)
    :param WRITE_FAILED: Output could not be written (3)
    :param TRACE_FAILED: Trace file invalid or a step failed (4)
    :param PROOF_FAILED: Prover missing, timed out or left obligations open (5)
    """

    OK = 0
    INVALID = 1
    NOT_DISJOINT = 2
    WRITE_FAILED = 3
    TRACE_FAILED = 4
    PROOF_FAILED = 5
