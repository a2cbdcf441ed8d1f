"""Custom exceptions for the compiler, the interpreter and the driver."""

from collections.abc import Sequence

from core.syntax import Position


class StipulaError(Exception):
    """Base class for every error reported against a contract."""

    def __init__(self, message: str, position: Position | None = None) -> None:
        """Initialize with a message and an optional source position.

        :param message: Human readable description.
        :type message: str
        :param position: Where in the source the problem was found.
        :type position: Position | None
        """
        super().__init__(message)
        self.message = message
        self.position = position

    def __str__(self) -> str:
        if self.position is None:
            return self.message
        return f"{self.position}: {self.message}"


class StipulaSyntaxError(StipulaError):
    """Raised when the source text does not follow the grammar."""

    def __init__(
        self,
        message: str,
        position: Position | None = None,
        expected: Sequence[str] = (),
    ) -> None:
        """Initialize with the offending position and the tokens that would fit.

        :param message: Description of the unexpected input.
        :param position: Position of the unexpected input.
        :param expected: Names of the tokens the parser would have accepted.
        """
        self.expected = tuple(sorted(expected))
        if self.expected:
            message = f"{message}; expected one of: {', '.join(self.expected)}"
        super().__init__(message, position)


class StipulaNameError(StipulaError):
    """Raised for undeclared identifiers and duplicate declarations."""


class StipulaTypeError(StipulaError):
    """Raised when an expression is not well typed."""


class ConflictError(StipulaError):
    """Raised when asset usage cannot be classified consistently."""

    def __init__(
        self,
        message: str,
        position: Position | None = None,
        other_position: Position | None = None,
    ) -> None:
        """Initialize with both conflicting source positions.

        :param message: Description of the conflict.
        :param position: First conflicting use.
        :param other_position: Second conflicting use, if any.
        """
        if other_position is not None:
            message = f"{message} (see also {other_position})"
        super().__init__(message, position)
        self.other_position = other_position


class UnsupportedError(StipulaError):
    """Raised for statements outside the canonical forms."""


class KindError(StipulaError):
    """Raised when an invariant is requested for the wrong asset kind."""


class NotDisjointError(StipulaError):
    """Raised when two cycles of the underlying automaton share a state."""

    def __init__(self, shared_states: Sequence[str], witness: object) -> None:
        """Initialize with the shared states and the offending cycle pair.

        :param shared_states: States common to both cycles.
        :param witness: The pair of cycles, as reported by the cycle analysis.
        """
        self.shared_states = tuple(sorted(shared_states))
        self.witness = witness
        super().__init__(
            f"cycles are not disjoint, shared states: {', '.join(self.shared_states)}",
        )


class NotSupportedError(StipulaError):
    """Raised for contract shapes the scenario construction does not handle."""


class NonLinearDeltaError(StipulaError):
    """Raised when a loop changes a location by a non-linear amount."""

    def __init__(self, location: str, reason: str) -> None:
        """Initialize with the location whose change is not linear.

        :param location: Qualified location name, e.g. ``Deposit.flour``.
        :param reason: Why the per-iteration change is not linear.
        """
        super().__init__(f"per-iteration change of {location} is not linear: {reason}")
        self.location = location


class StipulaRuntimeError(StipulaError):
    """Base class for errors raised by the interpreter."""


class InitError(StipulaRuntimeError):
    """Raised when the agreement cannot be initialised."""


class MissingInitError(InitError):
    """Raised when an agreement-bound field has no initial value."""

    def __init__(self, field_name: str) -> None:
        """Initialize with the field that was not given a value.

        :param field_name: Name of the uninitialised field.
        :type field_name: str
        """
        super().__init__(f"agreement field '{field_name}' has no initial value")
        self.field_name = field_name


class EndowmentError(InitError):
    """Raised when initial asset endowments are malformed."""


class WrongStateError(StipulaRuntimeError):
    """Raised when a clause is invoked outside its source state."""

    def __init__(self, clause: str, expected: str, actual: str) -> None:
        """Initialize with the clause and both states.

        :param clause: Invoked clause name.
        :param expected: Source state of the clause.
        :param actual: Current control state.
        """
        super().__init__(
            f"'{clause}' requires state @{expected} but the contract is in @{actual}",
        )
        self.expected = expected
        self.actual = actual


class GuardFalseError(StipulaRuntimeError):
    """Raised when the guard of an invoked clause evaluates to false."""


class InsufficientAssetError(StipulaRuntimeError):
    """Raised when a transfer exceeds what its source holds."""


class UnknownClauseError(StipulaRuntimeError):
    """Raised when a trace names a clause the contract does not declare."""


class ArgumentError(StipulaRuntimeError):
    """Raised when invocation arguments do not match the clause parameters."""


class NotFireableError(StipulaRuntimeError):
    """Raised when an event is fired before its time or outside its state."""


class EvalError(StipulaRuntimeError):
    """Raised when an expression cannot be evaluated."""


class TraceStepError(StipulaRuntimeError):
    """Raised by the trace driver, annotated with the failing step."""

    def __init__(self, step_index: int, cause: Exception) -> None:
        """Initialize with the index of the failing step and the original error.

        :param step_index: Zero-based index of the failing step.
        :param cause: Error raised while executing the step.
        """
        super().__init__(f"step {step_index}: {cause}")
        self.step_index = step_index
        self.cause = cause


class OutputWriteError(Exception):
    """Raised when an artifact cannot be written to disk."""

    def __init__(self, path: object, reason: object) -> None:
        """Initialize with the target path and the underlying OS error.

        :param path: Path that could not be written.
        :param reason: Underlying error.
        """
        super().__init__(f"cannot write '{path}': {reason}")
        self.path = path


class ProverNotFoundError(Exception):
    """Raised when the configured prover executable does not exist."""

    def __init__(self, command: str) -> None:
        """Initialize with the command that could not be found.

        :param command: Executable name or path.
        :type command: str
        """
        super().__init__(f"prover command '{command}' not found")
        self.command = command


class ProverTimeoutError(Exception):
    """Raised when the prover does not finish in time."""

    def __init__(self, timeout: float) -> None:
        """Initialize with the timeout that expired.

        :param timeout: Timeout in seconds.
        :type timeout: float
        """
        super().__init__(f"prover did not finish within {timeout:g} s")
        self.timeout = timeout
