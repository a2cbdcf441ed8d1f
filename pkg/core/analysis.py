"""Asset classification and clause contracts.

Assets are divisible when some transfer moves a computed amount out of them
and indivisible otherwise. Each asset expands to one location per owner, the
contract first and then the parties in declaration order. Clause contracts are
obtained by symbolic execution of the canonical body over those locations.
"""

import logging
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field

from core.enums import AssetKind, BinaryOperator, MethodRole, TargetKind, UnaryOperator
from core.exceptions import ConflictError, KindError, UnsupportedError
from core.formulas import (
    FALSE,
    TRUE,
    ZERO,
    Bin,
    Const,
    Formula,
    Loc,
    Not,
    Old,
    Var,
    add,
    conj,
    disj,
    eq,
    from_expression,
    ge,
    implies,
    ite,
    negate,
    normalize,
    sub,
    sum_of,
    transform,
    walk,
)
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
    Position,
    Statement,
    UnOp,
    walk_expression,
    walk_statements,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True, slots=True)
class AssetModel:
    """Classification of one asset and its ownership expansion."""

    asset: str
    kind: AssetKind
    owners: tuple[str, ...]
    total: Var | None = None

    @property
    def is_divisible(self) -> bool:
        return self.kind is AssetKind.DIVISIBLE

    @property
    def target_kind(self) -> TargetKind:
        """Type of the generated static fields."""
        return TargetKind.INT if self.is_divisible else TargetKind.BOOLEAN

    @property
    def locations(self) -> tuple[Loc, ...]:
        """One location per owner, in owner order."""
        return tuple(Loc(owner, self.asset) for owner in self.owners)

    def location(self, owner: str) -> Loc:
        return Loc(owner, self.asset)


@dataclass(frozen=True, slots=True)
class Param:
    """Method parameter with its target type."""

    name: str
    kind: TargetKind


@dataclass(frozen=True, slots=True)
class ClauseSpec:
    """Contract of one function or event clause.

    ``pre`` is stated over the pre-state. ``post`` uses bare locations for the
    post-state and :class:`~core.formulas.Old` for the pre-state. ``effect``
    maps each written location to its new value over the pre-state, in
    first-write order, and ``frame`` lists the same locations. The control
    state is not part of ``pre``: it is ``source_state`` and shows up in
    :attr:`permission`.
    """

    name: str
    role: MethodRole
    party: str | None
    source_state: str
    target_state: str
    params: tuple[Param, ...]
    pre: tuple[Formula, ...]
    post: tuple[Formula, ...]
    frame: tuple[Loc, ...]
    effect: tuple[tuple[Loc, Formula], ...] = ()

    @property
    def requires(self) -> Formula:
        return conj(*self.pre)

    @property
    def ensures(self) -> Formula:
        return conj(*self.post)

    @property
    def store(self) -> dict[Loc, Formula]:
        return dict(self.effect)

    @property
    def permission(self) -> str:
        """One-line summary of who may call the clause and where it leads."""
        who = self.party or "event"
        return f"@{self.source_state} {who}: {self.name} => @{self.target_state}"


def _clause_statements(clause: FunctionClause) -> Iterable[tuple[Statement, bool]]:
    """Statements of a clause and its events, flagged when inside an event."""
    for stmt in walk_statements(clause.body):
        yield stmt, False
    for event in clause.events:
        for stmt in walk_statements(event.body):
            yield stmt, True


def asset_param_types(ast: ContractAst) -> dict[tuple[str, str], str | None]:
    """Type every asset parameter by the contract asset it flows into.

    A parameter that only flows to parties is an untracked payment and maps
    to None.

    :param ast: Canonical contract.
    :type ast: ContractAst
    :return: Asset per ``(clause name, parameter)``.
    :raises ConflictError: If one parameter flows into two different assets.
    """
    types: dict[tuple[str, str], str | None] = {}
    for clause in ast.clauses:
        for param in clause.asset_params:
            seen: tuple[str, Position | None] | None = None
            for stmt in walk_statements(clause.body):
                if not isinstance(stmt, AssetMove | AssetDrain | AssetShorthand):
                    continue
                if stmt.source != param or stmt.target not in ast.assets:
                    continue
                if seen is not None and seen[0] != stmt.target:
                    msg = (
                        f"asset parameter '{param}' flows into both"
                        f" '{seen[0]}' and '{stmt.target}'"
                    )
                    raise ConflictError(msg, stmt.pos, seen[1])
                seen = (stmt.target, stmt.pos)
            types[clause.name, param] = seen[0] if seen else None
    return types


def classify_assets(ast: ContractAst) -> list[AssetModel]:
    """Classify every asset of the contract.

    :param ast: Canonical contract.
    :type ast: ContractAst
    :return: One model per asset, in declaration order.
    :rtype: list[AssetModel]
    :raises ConflictError: On cross-asset transfers, constant transfers other
        than one unit out of an indivisible asset, or parameters typed twice.
    """
    param_assets = asset_param_types(ast)
    divisible: set[str] = set()
    constant_moves: list[tuple[str, int, Position | None]] = []

    for clause in ast.clauses:
        for stmt, _ in _clause_statements(clause):
            if not isinstance(stmt, AssetMove | AssetDrain | AssetShorthand):
                continue
            if stmt.source in ast.assets:
                asset = stmt.source
                if stmt.target in ast.assets:
                    msg = f"cannot transfer '{stmt.source}' into asset '{stmt.target}'"
                    raise ConflictError(msg, stmt.pos)
            else:
                asset = param_assets.get((clause.name, stmt.source))
                if asset is None:
                    continue
            if not isinstance(stmt, AssetMove):
                continue
            if isinstance(stmt.expr, IntLit):
                constant_moves.append((asset, stmt.expr.value, stmt.pos))
            else:
                divisible.add(asset)

    for asset, amount, pos in constant_moves:
        if asset not in divisible and amount != 1:
            msg = f"indivisible asset '{asset}' cannot be split into {amount} units"
            raise ConflictError(msg, pos)

    owners = (ast.name, *ast.parties)
    models = [
        AssetModel(asset, AssetKind.DIVISIBLE, owners, Var(f"kappa_{asset}"))
        if asset in divisible
        else AssetModel(asset, AssetKind.INDIVISIBLE, owners)
        for asset in ast.assets
    ]
    logger.debug(
        "classified assets: %s",
        ", ".join(f"{m.asset}={m.kind}" for m in models) or "none",
    )
    return models


def exclusivity_invariant(model: AssetModel) -> Formula:
    """Exactly one owner holds the indivisible asset.

    :param model: Indivisible asset.
    :type model: AssetModel
    :return: Disjunction over owners of "this owner and no other".
    :raises KindError: If the asset is divisible.
    """
    if model.is_divisible:
        msg = f"exclusivity applies to indivisible assets, '{model.asset}' is divisible"
        raise KindError(msg)
    return disj(
        *(
            conj(loc, *(Not(other) for other in model.locations if other != loc))
            for loc in model.locations
        ),
    )


def conservation_invariant(model: AssetModel) -> Formula:
    """The owner-sum of a divisible asset equals its ghost total.

    :raises KindError: If the asset is indivisible.
    """
    if not model.is_divisible or model.total is None:
        msg = (
            f"conservation applies to divisible assets,"
            f" '{model.asset}' is indivisible"
        )
        raise KindError(msg)
    return eq(sum_of(list(model.locations)), model.total)


def _boolean_names(expr: Expression, top: bool) -> set[str]:
    """Names used where a boolean is expected."""
    found: set[str] = set()
    if top and isinstance(expr, Name):
        found.add(expr.ident)
    for node in walk_expression(expr):
        match node:
            case BinOp(
                op=BinaryOperator.AND | BinaryOperator.OR, left=left, right=right
            ):
                found |= {n.ident for n in (left, right) if isinstance(n, Name)}
            case UnOp(op=UnaryOperator.NOT, operand=Name(ident=ident)):
                found.add(ident)
            case _:
                pass
    return found


def param_kinds(clause: FunctionClause) -> dict[str, TargetKind]:
    """Target type of every parameter of ``clause``.

    Value parameters are ``boolean`` when used in a boolean context and
    ``int`` otherwise. Asset parameters are always ``int``.
    """
    booleans: set[str] = set()
    if clause.guard is not None:
        booleans |= _boolean_names(clause.guard, top=True)
    for stmt, _ in _clause_statements(clause):
        match stmt:
            case Conditional(cond=cond):
                booleans |= _boolean_names(cond, top=True)
            case FieldSend(expr=expr) | PartySend(expr=expr) | AssetMove(expr=expr):
                booleans |= _boolean_names(expr, top=False)
            case _:
                pass
    kinds = {
        p: TargetKind.BOOLEAN if p in booleans else TargetKind.INT
        for p in clause.value_params
    }
    kinds |= dict.fromkeys(clause.asset_params, TargetKind.INT)
    return kinds


def _is_boolean(expr: Expression, params: Mapping[str, TargetKind]) -> bool:
    match expr:
        case BoolLit():
            return True
        case Name(ident=ident):
            return params.get(ident) is TargetKind.BOOLEAN
        case UnOp(op=op):
            return op is UnaryOperator.NOT
        case BinOp(op=op):
            return not op.is_arithmetic
        case _:
            return False


def field_kinds(ast: ContractAst) -> dict[str, TargetKind]:
    """Target type of every contract field.

    A field is ``boolean`` when it is used as a condition or assigned a
    boolean value, and ``int`` otherwise.
    """
    booleans: set[str] = set()
    for clause in ast.clauses:
        params = param_kinds(clause)
        if clause.guard is not None:
            booleans |= _boolean_names(clause.guard, top=True)
        for stmt, _ in _clause_statements(clause):
            match stmt:
                case Conditional(cond=cond):
                    booleans |= _boolean_names(cond, top=True)
                case FieldSend(expr=expr, target=target):
                    booleans |= _boolean_names(expr, top=False)
                    if _is_boolean(expr, params):
                        booleans.add(target)
                case _:
                    pass
    return {
        f: TargetKind.BOOLEAN if f in booleans else TargetKind.INT for f in ast.fields
    }


@dataclass
class SymbolicExecutor:
    """Executes canonical statements over symbolic pre-state locations.

    :param ast: Contract being analysed.
    :param models: Asset models by name.
    :param party: Calling party, None for events.
    :param param_assets: Asset of each asset parameter of the clause, None for
        untracked payments.
    """

    ast: ContractAst
    models: Mapping[str, AssetModel]
    party: str | None = None
    param_assets: Mapping[str, str | None] = field(default_factory=dict)
    store: dict[Loc, Formula] = field(default_factory=dict)
    remaining: dict[str, Formula] = field(default_factory=dict)
    pre: list[Formula] = field(default_factory=list)
    path: Formula = TRUE
    _denominators: list[Formula] = field(default_factory=list)

    def __post_init__(self) -> None:
        for param in self.param_assets:
            self.remaining.setdefault(param, Var(param))

    def read(self, loc: Loc) -> Formula:
        return self.store.get(loc, loc)

    def write(self, loc: Loc, value: Formula) -> None:
        self.store[loc] = value

    def require(self, condition: Formula) -> None:
        guarded = implies(self.path, condition)
        if guarded != TRUE and guarded not in self.pre:
            self.pre.append(guarded)

    def resolve(self, name: str) -> Formula:
        if name in self.remaining:
            return self.remaining[name]
        if name in self.ast.fields or name in self.ast.assets:
            return self.read(Loc(self.ast.name, name))
        return Var(name)

    def translate(self, expr: Expression) -> Formula:
        """Translate ``expr`` in the current store, queueing non-zero divisors."""
        formula = from_expression(expr, self.resolve)
        for node in walk(formula):
            if isinstance(node, Bin) and node.op is BinaryOperator.DIV:
                divisor = node.right
                if not (isinstance(divisor, Const) and divisor.value != 0):
                    self._denominators.append(Bin(BinaryOperator.NE, divisor, ZERO))
        return formula

    def flush(self) -> None:
        """Require the divisors queued by :meth:`translate`."""
        for condition in self._denominators:
            self.require(condition)
        self._denominators.clear()

    def require_params(self) -> None:
        """Caller-side conditions for every asset parameter."""
        for param, asset in self.param_assets.items():
            amount = Var(param)
            self.require(ge(amount, ZERO))
            if asset is None:
                continue
            holding = Loc(self.party or self.ast.name, asset)
            if self.models[asset].is_divisible:
                self.require(ge(holding, amount))
            else:
                self.require(holding)

    def run(self, body: tuple[Statement, ...]) -> None:
        for stmt in body:
            self.execute(stmt)

    def execute(self, stmt: Statement) -> None:
        """Apply one canonical statement to the store."""
        match stmt:
            case FieldSend(expr=expr, target=target):
                value = self.translate(expr)
                self.flush()
                self.write(Loc(self.ast.name, target), value)
            case PartySend(expr=expr):
                self.translate(expr)
                self.flush()
            case AssetDrain(source=source, target=target):
                self._transfer(source, target, None, stmt.pos)
            case AssetMove(expr=expr, source=source, target=target):
                amount = self.translate(expr)
                self.flush()
                self._transfer(source, target, amount, stmt.pos)
            case Conditional(cond=cond, then_body=then_body, else_body=else_body):
                self._branch(cond, then_body, else_body or ())
            case _:
                msg = f"statement is not canonical: {stmt!r}"
                raise UnsupportedError(msg, getattr(stmt, "pos", None))

    def _branch(
        self,
        cond: Expression,
        then_body: tuple[Statement, ...],
        else_body: tuple[Statement, ...],
    ) -> None:
        condition = self.translate(cond)
        self.flush()
        saved = (dict(self.store), dict(self.remaining), self.path)

        self.path = conj(saved[2], condition)
        self.run(then_body)
        then_store, then_remaining = self.store, self.remaining

        self.store, self.remaining = dict(saved[0]), dict(saved[1])
        self.path = conj(saved[2], negate(condition))
        self.run(else_body)
        else_store, else_remaining = self.store, self.remaining

        self.store, self.remaining, self.path = dict(saved[0]), dict(saved[1]), saved[2]
        for loc in [*then_store, *(k for k in else_store if k not in then_store)]:
            base = saved[0].get(loc, loc)
            self.write(
                loc,
                ite(condition, then_store.get(loc, base), else_store.get(loc, base)),
            )
        for param, base in saved[1].items():
            self.remaining[param] = ite(
                condition,
                then_remaining.get(param, base),
                else_remaining.get(param, base),
            )

    def _transfer(
        self,
        source: str,
        target: str,
        amount: Formula | None,
        pos: Position | None,
    ) -> None:
        if source in self.models:
            self._transfer_held(self.models[source], target, amount, pos)
        elif source in self.param_assets:
            self._transfer_param(source, target, amount)
        else:
            msg = f"'{source}' is neither an asset nor an asset parameter"
            raise UnsupportedError(msg, pos)

    def _transfer_held(
        self,
        model: AssetModel,
        target: str,
        amount: Formula | None,
        pos: Position | None,
    ) -> None:
        if target not in self.ast.parties:
            msg = f"cannot transfer '{model.asset}' into '{target}'"
            raise UnsupportedError(msg, pos)
        src = model.location(self.ast.name)
        dst = model.location(target)
        if not model.is_divisible:
            self.require(self.read(src))
            self.write(dst, TRUE)
            self.write(src, FALSE)
            return
        if amount is None:
            held = self.read(src)
            self.write(dst, normalize(add(self.read(dst), held)))
            self.write(src, ZERO)
            return
        self._require_amount(self.read(src), amount)
        self.write(dst, normalize(add(self.read(dst), amount)))
        self.write(src, normalize(sub(self.read(src), amount)))

    def _transfer_param(self, param: str, target: str, amount: Formula | None) -> None:
        left = self.remaining[param]
        if amount is None:
            amount = left
            self.remaining[param] = ZERO
        else:
            self._require_amount(left, amount)
            self.remaining[param] = normalize(sub(left, amount))

        asset = self.param_assets[param]
        if asset is None:
            return
        model = self.models[asset]
        owner = self.ast.name if target == asset else target
        dst = model.location(owner)
        caller = model.location(self.party or self.ast.name)
        if not model.is_divisible:
            if owner == self.ast.name:
                self.require(negate(self.read(dst)))
            self.write(dst, TRUE)
            self.write(caller, FALSE)
            return
        self.write(dst, normalize(add(self.read(dst), amount)))
        self.write(caller, normalize(sub(self.read(caller), amount)))

    def _require_amount(self, available: Formula, amount: Formula) -> None:
        self.require(ge(available, amount))
        natural = (
            isinstance(amount, Const)
            and isinstance(amount.value, int)
            and amount.value >= 0
        )
        if not natural:
            self.require(ge(amount, ZERO))

    def postcondition(self) -> list[Formula]:
        """Ensures conjuncts for the current store."""
        return postcondition(self.store, self.models)


def postcondition(
    written: Mapping[Loc, Formula],
    models: Mapping[str, AssetModel],
) -> list[Formula]:
    """Ensures conjuncts for a symbolic store over the pre-state.

    Written locations come first in first-write order, followed by the
    untouched owners of every asset the store touched. Only written locations
    are read through \\old.
    """

    def old_written(node: Formula) -> Formula | None:
        return Old(node) if isinstance(node, Loc) and node in written else None

    post: list[Formula] = []
    for loc, value in written.items():
        if value == TRUE:
            post.append(loc)
        elif value == FALSE:
            post.append(Not(loc))
        else:
            post.append(eq(loc, transform(value, old_written)))
    touched = {loc.name for loc in written if loc.name in models}
    if not written:
        touched = set(models)
    for model in models.values():
        if model.asset in touched:
            post += [eq(loc, Old(loc)) for loc in model.locations if loc not in written]
    return post


def _model_map(models: Iterable[AssetModel]) -> dict[str, AssetModel]:
    return {model.asset: model for model in models}


def _event_params(ast: ContractAst, event: EventClause) -> tuple[Param, ...]:
    scheduler = ast.scheduler_of(event.event_index)
    if scheduler is None:
        return ()
    used = {
        node.ident
        for stmt in walk_statements(event.body)
        for expr in _expressions(stmt)
        for node in walk_expression(expr)
        if isinstance(node, Name)
    }
    kinds = param_kinds(scheduler)
    return tuple(Param(p, kinds[p]) for p in scheduler.value_params if p in used)


def _expressions(stmt: Statement) -> tuple[Expression, ...]:
    match stmt:
        case FieldSend(expr=expr) | PartySend(expr=expr) | AssetMove(expr=expr):
            return (expr,)
        case Conditional(cond=cond):
            return (cond,)
        case _:
            return ()


def derive_clause_spec(
    clause: FunctionClause | EventClause,
    models: Iterable[AssetModel],
    ast: ContractAst,
) -> ClauseSpec:
    """Derive the contract of a function or event clause.

    :param clause: Clause of ``ast``.
    :param models: Classification of the contract's assets.
    :param ast: Canonical contract the clause belongs to.
    :return: Requires, ensures, frame and symbolic effect.
    :rtype: ClauseSpec
    :raises UnsupportedError: For statements outside the canonical forms.
    """
    model_map = _model_map(models)
    if isinstance(clause, EventClause):
        executor = SymbolicExecutor(ast, model_map)
        executor.run(clause.body)
        name = f"event{clause.event_index}"
        role, party, params = MethodRole.EVENT, None, _event_params(ast, clause)
        source_state = clause.trigger_state
    else:
        param_assets = asset_param_types(ast)
        executor = SymbolicExecutor(
            ast,
            model_map,
            party=clause.party,
            param_assets={p: param_assets[clause.name, p] for p in clause.asset_params},
        )
        if clause.guard is not None:
            guard = executor.translate(clause.guard)
            executor.flush()
            executor.require(guard)
        executor.require_params()
        executor.run(clause.body)
        kinds = param_kinds(clause)
        name, role, party = clause.name, MethodRole.CLAUSE, clause.party
        names = (*clause.value_params, *clause.asset_params)
        params = tuple(Param(p, kinds[p]) for p in names)
        source_state = clause.source_state

    return ClauseSpec(
        name=name,
        role=role,
        party=party,
        source_state=source_state,
        target_state=clause.target_state,
        params=params,
        pre=tuple(executor.pre),
        post=tuple(executor.postcondition()),
        frame=tuple(executor.store),
        effect=tuple(executor.store.items()),
    )


def derive_specs(
    ast: ContractAst, models: Iterable[AssetModel]
) -> dict[str, ClauseSpec]:
    """Contracts of every clause and event, keyed by method name."""
    models = list(models)
    specs = {c.name: derive_clause_spec(c, models, ast) for c in ast.clauses}
    specs |= {
        f"event{e.event_index}": derive_clause_spec(e, models, ast) for e in ast.events
    }
    return specs

