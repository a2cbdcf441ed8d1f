"""Reference interpreter of the contract semantics.

Every operation takes an immutable :class:`~core.models.RuntimeState` and
returns a new one. The clock only advances on an explicit :meth:`tick`; the
caller decides when the contract is quiescent.
"""

import logging
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field

from core.analysis import AssetModel, asset_param_types, classify_assets
from core.enums import BinaryOperator, UnaryOperator
from core.exceptions import (
    ArgumentError,
    EndowmentError,
    EvalError,
    GuardFalseError,
    InitError,
    InsufficientAssetError,
    MissingInitError,
    NotFireableError,
    StipulaRuntimeError,
    TraceStepError,
    UnknownClauseError,
    WrongStateError,
)
from core.formulas import apply_binary
from core.models import (
    FireStep,
    InitStep,
    InvokeStep,
    Message,
    Payment,
    PendingEvent,
    RuntimeState,
    TickStep,
    TraceStep,
    Value,
)
from core.parser import canonicalize
from core.syntax import (
    AssetDrain,
    AssetMove,
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
from utils.suggest import with_suggestion

logger = logging.getLogger(__name__)


@dataclass
class _Frame:
    """Mutable working copy of a state while one clause body runs."""

    fields: dict[str, Value | None]
    assets: dict[str, int]
    env: dict[str, Value]
    remaining: dict[str, int] = field(default_factory=dict)
    messages: list[Message] = field(default_factory=list)
    payments: list[Payment] = field(default_factory=list)


class Interpreter:
    """Small-step interpreter bound to one contract.

    :param ast: Contract to execute. Non-canonical trees are canonicalized.
    """

    def __init__(self, ast: ContractAst) -> None:
        """Classify the contract's assets and type its asset parameters."""
        self.ast = ast = canonicalize(ast)
        self.models: dict[str, AssetModel] = {m.asset: m for m in classify_assets(ast)}
        self.param_assets = asset_param_types(ast)
        self._events = {e.event_index: e for e in ast.events}

    # Agreement

    def init(
        self,
        field_inits: Mapping[str, Value],
        asset_endowments: Mapping[str, int],
    ) -> RuntimeState:
        """Create the state right after the agreement.

        :param field_inits: Initial values, at least for every agreement-bound field.
        :param asset_endowments: Starting holdings keyed by ``Party.asset``.
        :return: State in the agreement's initial state, nothing pending.
        :raises MissingInitError: If a bound field has no value.
        :raises InitError: For unknown fields.
        :raises EndowmentError: For malformed endowments.
        """
        ast = self.ast
        for name in ast.agreement.bound_fields:
            if name not in field_inits:
                raise MissingInitError(name)
        unknown = sorted(set(field_inits) - set(ast.fields))
        if unknown:
            msg = with_suggestion(
                f"unknown field '{unknown[0]}'", unknown[0], ast.fields
            )
            raise InitError(msg)

        assets = {
            loc.key: 0 for model in self.models.values() for loc in model.locations
        }
        for key, amount in asset_endowments.items():
            owner, _, asset = key.partition(".")
            if key not in assets or owner == ast.name:
                msg = (
                    f"cannot endow '{key}', expected Party.asset"
                    " with a declared party and asset"
                )
                raise EndowmentError(msg)
            if amount < 0:
                msg = f"endowment of '{key}' is negative"
                raise EndowmentError(msg)
            divisible = self.models[asset].is_divisible
            assets[key] = amount if divisible else int(amount > 0)

        for model in self.models.values():
            if model.is_divisible:
                continue
            holders = [loc.key for loc in model.locations if assets[loc.key]]
            if len(holders) != 1:
                msg = (
                    f"indivisible asset '{model.asset}' must be held"
                    " by exactly one party, "
                    f"held by {len(holders)}"
                )
                raise EndowmentError(msg)

        fields: dict[str, Value | None] = dict.fromkeys(ast.fields)
        fields |= field_inits
        return RuntimeState(
            control=ast.agreement.initial_state, fields=fields, assets=assets
        )

    # Function clauses

    def invoke(
        self,
        state: RuntimeState,
        clause_name: str,
        value_args: Mapping[str, Value],
        asset_args: Mapping[str, int],
    ) -> RuntimeState:
        """Invoke a function clause.

        :param state: Current state.
        :param clause_name: Clause to invoke.
        :param value_args: Values of the value parameters.
        :param asset_args: Amounts of the asset parameters.
        :return: State after the body, with the clause's events scheduled.
        :raises UnknownClauseError: If the contract has no such clause.
        :raises WrongStateError: If the contract is not in the clause's state.
        :raises ArgumentError: If the arguments do not match the parameters.
        :raises InsufficientAssetError: If the caller lacks the offered assets
            or a transfer exceeds its source.
        :raises GuardFalseError: If the guard does not hold.
        """
        clause = self.ast.clause(clause_name)
        if clause is None:
            names = [c.name for c in self.ast.clauses]
            msg = with_suggestion(f"unknown clause '{clause_name}'", clause_name, names)
            raise UnknownClauseError(msg)
        if state.control != clause.source_state:
            raise WrongStateError(clause.name, clause.source_state, state.control)
        self._check_arguments(clause, value_args, asset_args)
        self._check_holdings(state, clause, asset_args)

        frame = _Frame(
            fields=dict(state.fields),
            assets=dict(state.assets),
            env=dict(value_args),
            remaining=dict(asset_args),
        )
        if clause.guard is not None and self._eval(clause.guard, frame) is not True:
            msg = f"guard of '{clause.name}' does not hold"
            raise GuardFalseError(msg, clause.guard.pos)

        self._run(clause.body, frame, clause)
        pending = list(state.pending)
        for event in clause.events:
            delay = event.delay
            if not isinstance(delay, int):
                delay = self._lookup(delay, frame)
            if not isinstance(delay, int) or isinstance(delay, bool):
                msg = f"delay of event {event.event_index} is not a number"
                raise EvalError(msg, event.pos)
            pending.append(
                PendingEvent(
                    event_index=event.event_index,
                    remaining=delay,
                    trigger_state=event.trigger_state,
                    target_state=event.target_state,
                    env=dict(value_args),
                ),
            )
        logger.debug("%s: @%s -> @%s", clause.name, state.control, clause.target_state)
        return self._commit(state, frame, clause.target_state, tuple(pending))

    def _check_arguments(
        self,
        clause: FunctionClause,
        value_args: Mapping[str, Value],
        asset_args: Mapping[str, int],
    ) -> None:
        for kind, given, expected in (
            ("value", value_args, clause.value_params),
            ("asset", asset_args, clause.asset_params),
        ):
            missing = sorted(set(expected) - set(given))
            extra = sorted(set(given) - set(expected))
            if missing or extra:
                msg = (
                    f"'{clause.name}' {kind} arguments:"
                    f" missing {missing}, unexpected {extra}"
                )
                raise ArgumentError(msg)
        for name, amount in asset_args.items():
            if isinstance(amount, bool) or not isinstance(amount, int) or amount < 0:
                msg = (
                    f"asset argument '{name}' must be a natural number,"
                    f" got {amount!r}"
                )
                raise ArgumentError(msg)

    def _check_holdings(
        self,
        state: RuntimeState,
        clause: FunctionClause,
        asset_args: Mapping[str, int],
    ) -> None:
        for param in clause.asset_params:
            asset = self.param_assets[clause.name, param]
            if asset is None:
                continue
            key = f"{clause.party}.{asset}"
            needed = asset_args[param] if self.models[asset].is_divisible else 1
            if state.assets[key] < needed:
                held = state.assets[key]
                msg = (
                    f"{clause.party} holds {held} of '{asset}',"
                    f" '{param}' needs {needed}"
                )
                raise InsufficientAssetError(msg)

    # Time

    def tick(self, state: RuntimeState) -> RuntimeState:
        """Advance the clock by one tick.

        Every pending event moves one tick closer; those that become negative
        are discarded.
        """
        pending = tuple(
            e.model_copy(update={"remaining": e.remaining - 1})
            for e in state.pending
            if e.remaining - 1 >= 0
        )
        return state.model_copy(update={"clock": state.clock + 1, "pending": pending})

    def fire_event(self, state: RuntimeState, event_index: int) -> RuntimeState:
        """Fire a pending event whose time has come.

        :param state: Current state.
        :param event_index: Index of the event to fire.
        :return: State after the event body, in the event's target state.
        :raises NotFireableError: If no pending event with that index has
            reached zero in its trigger state.
        """
        candidates = [e for e in state.pending if e.event_index == event_index]
        if not candidates:
            msg = f"event {event_index} is not pending"
            raise NotFireableError(msg)
        position = next(
            (
                i
                for i, e in enumerate(state.pending)
                if e.event_index == event_index
                and e.remaining == 0
                and e.trigger_state == state.control
            ),
            None,
        )
        if position is None:
            first = candidates[0]
            msg = (
                f"event {event_index} needs @{first.trigger_state} with 0 ticks left, "
                f"contract is in @{state.control} with {first.remaining} ticks left"
            )
            raise NotFireableError(msg)

        pending_event = state.pending[position]
        event: EventClause = self._events[event_index]
        frame = _Frame(
            fields=dict(state.fields),
            assets=dict(state.assets),
            env=dict(pending_event.env),
        )
        self._run(event.body, frame, None)
        pending = state.pending[:position] + state.pending[position + 1 :]
        logger.debug(
            "event%s: @%s -> @%s", event_index, state.control, event.target_state
        )
        return self._commit(state, frame, event.target_state, pending)

    # Traces

    def run_trace(self, trace: Sequence[TraceStep]) -> RuntimeState:
        """Fold a trace from its ``init`` step.

        :param trace: Steps, the first of which must be ``init``.
        :return: Final state.
        :raises TraceStepError: On the first failing step, with its index.
        """
        if not trace or not isinstance(trace[0], InitStep):
            raise TraceStepError(0, InitError("a trace must start with an init step"))
        state: RuntimeState | None = None
        for index, step in enumerate(trace):
            try:
                state = self._step(state, step)
            except StipulaRuntimeError as exc:
                raise TraceStepError(index, exc) from exc
        assert state is not None  # noqa: S101
        return state

    def _step(self, state: RuntimeState | None, step: TraceStep) -> RuntimeState:
        match step:
            case InitStep(fields=fields, assets=assets) if state is None:
                return self.init(fields, assets)
            case InitStep():
                msg = "init is only allowed as the first step"
                raise InitError(msg)
            case _ if state is None:
                msg = "a trace must start with an init step"
                raise InitError(msg)
            case InvokeStep(
                clause=clause, value_args=value_args, asset_args=asset_args
            ):
                return self.invoke(state, clause, value_args, asset_args)
            case TickStep(n=n):
                for _ in range(n):
                    state = self.tick(state)
                return state
            case FireStep(event=event):
                return self.fire_event(state, event)

    # Valuations

    def valuation(self, state: RuntimeState) -> dict[str, Value]:
        """Location values of ``state`` as seen by specification formulas.

        Indivisible holdings become booleans and fields are keyed
        ``Contract.field``.
        """
        values: dict[str, Value] = {}
        for key, amount in state.assets.items():
            asset = key.partition(".")[2]
            divisible = self.models[asset].is_divisible
            values[key] = amount if divisible else bool(amount)
        for name, value in state.fields.items():
            if value is not None:
                values[f"{self.ast.name}.{name}"] = value
        return values

    def totals(self, state: RuntimeState) -> dict[str, int]:
        """Owner-sum of every asset."""
        return {
            model.asset: sum(state.assets[loc.key] for loc in model.locations)
            for model in self.models.values()
        }

    # Statements

    def _commit(
        self,
        state: RuntimeState,
        frame: _Frame,
        control: str,
        pending: tuple[PendingEvent, ...],
    ) -> RuntimeState:
        return state.model_copy(
            update={
                "control": control,
                "fields": frame.fields,
                "assets": frame.assets,
                "pending": pending,
                "messages": state.messages + tuple(frame.messages),
                "payments": state.payments + tuple(frame.payments),
            },
        )

    def _run(
        self,
        body: tuple[Statement, ...],
        frame: _Frame,
        clause: FunctionClause | None,
    ) -> None:
        for stmt in body:
            match stmt:
                case FieldSend(expr=expr, target=target):
                    frame.fields[target] = self._eval(expr, frame)
                case PartySend(expr=expr, target=target):
                    value = self._eval(expr, frame)
                    frame.messages.append(Message(party=target, value=value))
                case AssetDrain(source=source, target=target):
                    self._transfer(frame, clause, source, target, None)
                case AssetMove(expr=expr, source=source, target=target):
                    amount = self._eval(expr, frame)
                    if isinstance(amount, bool) or not isinstance(amount, int):
                        msg = f"transfer amount must be a number, got {amount!r}"
                        raise EvalError(msg, stmt.pos)
                    if amount < 0:
                        msg = f"transfer amount is negative ({amount})"
                        raise EvalError(msg, stmt.pos)
                    self._transfer(frame, clause, source, target, amount)
                case Conditional(cond=cond, then_body=then_body, else_body=else_body):
                    taken = self._eval(cond, frame)
                    if not isinstance(taken, bool):
                        msg = f"condition is not a boolean, got {taken!r}"
                        raise EvalError(msg, stmt.pos)
                    self._run(then_body if taken else (else_body or ()), frame, clause)
                case _:
                    msg = f"statement is not canonical: {stmt!r}"
                    raise EvalError(msg)

    def _transfer(
        self,
        frame: _Frame,
        clause: FunctionClause | None,
        source: str,
        target: str,
        amount: int | None,
    ) -> None:
        contract = self.ast.name
        if source in self.models:
            model = self.models[source]
            src = f"{contract}.{source}"
            held = frame.assets[src]
            amount = held if amount is None else amount
            if amount > held or (not model.is_divisible and held == 0):
                msg = f"{contract} holds {held} of '{source}', cannot transfer {amount}"
                raise InsufficientAssetError(msg)
            if not model.is_divisible:
                amount = 1
            frame.assets[f"{target}.{source}"] += amount
            frame.assets[src] -= amount
            return

        assert clause is not None  # noqa: S101
        left = frame.remaining[source]
        amount = left if amount is None else amount
        if amount > left:
            msg = f"'{source}' has {left} left, cannot transfer {amount}"
            raise InsufficientAssetError(msg)
        frame.remaining[source] = left - amount

        asset = self.param_assets[clause.name, source]
        if asset is None:
            frame.payments.append(
                Payment(
                    clause=clause.name,
                    payer=clause.party,
                    param=source,
                    party=target,
                    amount=amount,
                ),
            )
            return
        owner = contract if target == asset else target
        caller = f"{clause.party}.{asset}"
        if not self.models[asset].is_divisible:
            if frame.assets[caller] == 0:
                msg = f"{clause.party} no longer holds '{asset}'"
                raise InsufficientAssetError(msg)
            amount = 1
        frame.assets[f"{owner}.{asset}"] += amount
        frame.assets[caller] -= amount

    # Expressions

    def _lookup(self, name: str, frame: _Frame) -> Value:
        if name in frame.env:
            return frame.env[name]
        if name in frame.remaining:
            return frame.remaining[name]
        if name in frame.fields:
            value = frame.fields[name]
            if value is None:
                msg = f"field '{name}' has no value"
                raise EvalError(msg)
            return value
        if name in self.models:
            return frame.assets[f"{self.ast.name}.{name}"]
        msg = f"unbound name '{name}'"
        raise EvalError(msg)

    def _eval(self, expr: Expression, frame: _Frame) -> Value:
        match expr:
            case IntLit(value=value) | BoolLit(value=value) | StrLit(value=value):
                return value
            case Name(ident=ident):
                return self._lookup(ident, frame)
            case UnOp(op=UnaryOperator.NOT, operand=operand):
                return not self._eval(operand, frame)
            case UnOp(op=UnaryOperator.NEG, operand=operand):
                return -int(self._eval(operand, frame))
            case BinOp(op=BinaryOperator.AND, left=left, right=right):
                return (
                    self._eval(left, frame) is True and self._eval(right, frame) is True
                )
            case BinOp(op=BinaryOperator.OR, left=left, right=right):
                return (
                    self._eval(left, frame) is True or self._eval(right, frame) is True
                )
            case BinOp(op=op, left=left, right=right):
                try:
                    lhs, rhs = self._eval(left, frame), self._eval(right, frame)
                    return apply_binary(op, lhs, rhs)
                except EvalError as exc:
                    raise EvalError(exc.message, expr.pos) from None
                except TypeError as exc:
                    raise EvalError(str(exc), expr.pos) from None
            case _:
                msg = f"cannot evaluate {expr!r}"
                raise EvalError(msg)
