"""Pydantic models for trace files, runtime snapshots, reports and the CLI."""

from pathlib import Path
from typing import Annotated, Literal

from pydantic import BaseModel, ConfigDict, Field, TypeAdapter

from core.enums import (
    AssetKind,
    IntSemantics,
    ObligationStatus,
    Subcommand,
    VerifierStatus,
)

type Value = int | bool | str


# Runtime snapshots


class PendingEvent(BaseModel):
    """An event waiting in the event multiset.

    :param int event_index: Index of the event clause.
    :param int remaining: Ticks left before the event can fire.
    :param str trigger_state: State the contract must be in to fire it.
    :param str target_state: State the event leads to.
    :param dict[str, Value] env: Value parameters of the scheduling call.
    """

    model_config = ConfigDict(frozen=True)

    event_index: int
    remaining: int
    trigger_state: str
    target_state: str
    env: dict[str, Value] = Field(default_factory=dict)


class Message(BaseModel):
    """Informational value sent to a party."""

    model_config = ConfigDict(frozen=True)

    party: str
    value: Value


class Payment(BaseModel):
    """Transfer of an untracked asset parameter to a party.

    :param str clause: Clause that made the payment.
    :param str payer: Calling party.
    :param str param: Asset parameter the units came from.
    :param str party: Receiving party.
    :param int amount: Units paid.
    """

    model_config = ConfigDict(frozen=True)

    clause: str
    payer: str
    param: str
    party: str
    amount: int


class RuntimeState(BaseModel):
    """Immutable snapshot of a running contract.

    Asset amounts are keyed by ``Owner.asset``. Indivisible assets hold 0 or 1.
    Fields not yet set hold None.
    """

    model_config = ConfigDict(frozen=True)

    control: str
    fields: dict[str, Value | None] = Field(default_factory=dict)
    assets: dict[str, int] = Field(default_factory=dict)
    pending: tuple[PendingEvent, ...] = ()
    messages: tuple[Message, ...] = ()
    payments: tuple[Payment, ...] = ()
    clock: int = 0


# Trace files


class InitStep(BaseModel):
    """Agreement initialisation, only valid as the first step."""

    op: Literal["init"]
    fields: dict[str, Value] = Field(default_factory=dict)
    assets: dict[str, int] = Field(default_factory=dict)


class InvokeStep(BaseModel):
    """Function clause invocation."""

    op: Literal["invoke"]
    clause: str
    value_args: dict[str, Value] = Field(default_factory=dict)
    asset_args: dict[str, int] = Field(default_factory=dict)


class TickStep(BaseModel):
    """Advance the clock by ``n`` ticks."""

    op: Literal["tick"]
    n: int = Field(default=1, ge=0)


class FireStep(BaseModel):
    """Fire the pending event with the given index."""

    op: Literal["fire"]
    event: int


type TraceStep = Annotated[
    InitStep | InvokeStep | TickStep | FireStep, Field(discriminator="op")
]

TRACE_ADAPTER: TypeAdapter[list[TraceStep]] = TypeAdapter(list[TraceStep])


# Reports


class AssetReport(BaseModel):
    """Classification of one asset."""

    asset: str
    kind: AssetKind
    locations: list[str]
    invariant: str


class ClauseReport(BaseModel):
    """Rendered contract of one clause or event."""

    name: str
    permission: str
    requires: str
    ensures: str
    assignable: list[str]


class AnalysisReport(BaseModel):
    """Output of the ``report`` subcommand."""

    contract: str
    states: list[str]
    initial: str
    cycles: list[str]
    disjoint: bool
    unreachable: list[str] = Field(default_factory=list)
    assets: list[AssetReport] = Field(default_factory=list)
    clauses: list[ClauseReport] = Field(default_factory=list)


class StepReport(BaseModel):
    """One step of a scenario plan."""

    kind: Literal["call", "event", "loop"]
    name: str
    args: list[str] = Field(default_factory=list)
    body: list["StepReport"] = Field(default_factory=list)


class PlanReport(BaseModel):
    """One scenario plan."""

    name: str
    params: list[str]
    steps: list[StepReport]


class TranslationSummary(BaseModel):
    """Counts printed after a successful translation."""

    output: Path
    methods: int
    scenarios: int
    invariants: int


class Obligation(BaseModel):
    """Outcome of one proof obligation."""

    name: str
    status: ObligationStatus


class VerifierReport(BaseModel):
    """Outcome of an external prover run."""

    status: VerifierStatus
    obligations: list[Obligation] = Field(default_factory=list)
    output: str = ""

    @property
    def open_obligations(self) -> list[Obligation]:
        return [o for o in self.obligations if o.status is ObligationStatus.OPEN]


class SkippedReport(VerifierReport):
    """Report returned when no prover is configured."""

    status: VerifierStatus = VerifierStatus.SKIPPED


# Driver configuration


class CliConfig(BaseModel):
    """Merged command-line and environment configuration.

    :param Subcommand subcommand: Selected subcommand.
    :param Path input: Contract source file.
    :param Path | None output: Output file, None for the default location.
    :param bool as_json: Print machine-readable output.
    :param Path | None trace: Trace file for ``run``.
    :param str | None prover: External prover command line.
    :param float timeout: Prover timeout in seconds.
    :param IntSemantics int_semantics: Integer semantics of the emitted unit.
    """

    model_config = ConfigDict(frozen=True)

    subcommand: Subcommand
    input: Path
    output: Path | None = None
    as_json: bool = False
    trace: Path | None = None
    prover: str | None = None
    timeout: float = Field(default=300.0, gt=0)
    int_semantics: IntSemantics = IntSemantics.MATH
