from functools import cache

import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from core.analysis import field_kinds, param_kinds
from core.enums import TargetKind
from core.exceptions import (
    ArgumentError,
    EndowmentError,
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
from core.interp import Interpreter
from core.models import TRACE_ADAPTER, Message, Payment, RuntimeState
from tests.conftest import CASE_STUDIES, fixture_path, load

LICENSE_FIELDS = {"t_start": 10, "t_limit": 20, "cost": 5}
LICENSE_ASSETS = {"Licensor.token": 1, "Licensee.balance": 1}


def read_trace(name: str):
    return TRACE_ADAPTER.validate_json(fixture_path(name).read_bytes())


@pytest.fixture
def license_interp() -> Interpreter:
    return Interpreter(load("license"))


@pytest.fixture
def deposit_interp() -> Interpreter:
    return Interpreter(load("deposit"))


@pytest.fixture
def offered(license_interp: Interpreter) -> RuntimeState:
    state = license_interp.init(LICENSE_FIELDS, LICENSE_ASSETS)
    return license_interp.invoke(state, "offer", {"x": 42}, {"n": 1})


class TestTraces:
    def test_license_trace(self, license_interp: Interpreter):
        state = license_interp.run_trace(read_trace("license_trace.json"))
        assert state.control == "End"
        assert state.clock == 3
        assert state.fields["code"] == 42
        assert state.assets["Licensor.balance"] == 1
        assert state.assets["Licensee.token"] == 1
        assert state.assets["License.token"] == state.assets["License.balance"] == 0
        assert state.messages == (Message(party="Licensee", value=42),)
        assert [(e.event_index, e.remaining) for e in state.pending] == [(1, 7), (2, 20)]

    def test_deposit_trace(self, deposit_interp: Interpreter):
        state = deposit_interp.run_trace(read_trace("deposit_trace.json"))
        assert state.control == "RunC"
        assert state.assets == {"Deposit.flour": 12, "Client.flour": 3, "Farm.flour": 85}
        assert deposit_interp.totals(state) == {"flour": 100}
        assert state.payments == (
            Payment(clause="buy", payer="Client", param="w", party="Farm", amount=6),
        )
        assert [(e.event_index, e.remaining) for e in state.pending] == [(1, 365), (2, 365)]

    def test_failing_step_is_reported_with_its_index(self, deposit_interp: Interpreter):
        with pytest.raises(TraceStepError) as excinfo:
            deposit_interp.run_trace(read_trace("wrong_state_trace.json"))
        assert excinfo.value.step_index == 1
        assert isinstance(excinfo.value.cause, WrongStateError)

    def test_trace_must_start_with_init(self, deposit_interp: Interpreter):
        trace = TRACE_ADAPTER.validate_python([{"op": "tick"}])
        with pytest.raises(TraceStepError, match="must start with an init step"):
            deposit_interp.run_trace(trace)

    def test_second_init_is_rejected(self, deposit_interp: Interpreter):
        step = {"op": "init", "fields": {"cost_flour": 2}}
        trace = TRACE_ADAPTER.validate_python([step, step])
        with pytest.raises(TraceStepError) as excinfo:
            deposit_interp.run_trace(trace)
        assert excinfo.value.step_index == 1
        assert isinstance(excinfo.value.cause, InitError)

    def test_valuation_uses_booleans_for_indivisible_assets(self, license_interp, offered):
        values = license_interp.valuation(offered)
        assert values["License.token"] is True
        assert values["Licensor.token"] is False
        assert values["License.code"] == 42
        assert "License.balance" in values


class TestInit:
    def test_missing_bound_field(self, deposit_interp: Interpreter):
        with pytest.raises(MissingInitError, match="'cost_flour'"):
            deposit_interp.init({}, {})

    def test_unknown_field_suggests_closest(self, deposit_interp: Interpreter):
        with pytest.raises(InitError, match="did you mean 'cost_flour'"):
            deposit_interp.init({"cost_flour": 2, "cost_flours": 3}, {})

    def test_indivisible_asset_held_twice(self, license_interp: Interpreter):
        assets = {"Licensor.token": 1, "Licensee.token": 1, "Licensee.balance": 1}
        with pytest.raises(EndowmentError, match="held by 2"):
            license_interp.init(LICENSE_FIELDS, assets)

    def test_contract_cannot_be_endowed(self, deposit_interp: Interpreter):
        with pytest.raises(EndowmentError):
            deposit_interp.init({"cost_flour": 2}, {"Deposit.flour": 5})

    def test_unset_fields_start_empty(self, license_interp: Interpreter):
        state = license_interp.init(LICENSE_FIELDS, LICENSE_ASSETS)
        assert state.control == "Init"
        assert state.fields["code"] is None
        assert state.pending == ()


class TestInvoke:
    def test_wrong_state(self, license_interp: Interpreter):
        state = license_interp.init(LICENSE_FIELDS, LICENSE_ASSETS)
        with pytest.raises(WrongStateError, match="requires state @Trial"):
            license_interp.invoke(state, "buy", {}, {})

    def test_guard_false(self, license_interp: Interpreter, offered: RuntimeState):
        with pytest.raises(GuardFalseError, match="guard of 'activate'"):
            license_interp.invoke(offered, "activate", {}, {"b": 4})

    def test_caller_lacks_assets(self, deposit_interp: Interpreter):
        state = deposit_interp.init({"cost_flour": 2}, {"Farm.flour": 100})
        with pytest.raises(InsufficientAssetError, match="Farm holds 100"):
            deposit_interp.invoke(state, "begin", {}, {"h": 200})

    def test_argument_mismatch(self, deposit_interp: Interpreter):
        state = deposit_interp.init({"cost_flour": 2}, {"Farm.flour": 100})
        with pytest.raises(ArgumentError, match="missing"):
            deposit_interp.invoke(state, "begin", {}, {})
        with pytest.raises(ArgumentError, match="natural number"):
            deposit_interp.invoke(state, "begin", {}, {"h": -1})

    def test_unknown_clause_suggests_closest(self, license_interp, offered):
        with pytest.raises(UnknownClauseError, match="did you mean 'buy'"):
            license_interp.invoke(offered, "bye", {}, {})

    def test_invoke_does_not_mutate_input(self, license_interp, offered):
        before = offered.model_copy(deep=True)
        license_interp.invoke(offered, "activate", {}, {"b": 5})
        assert offered == before


class TestEvents:
    def test_event_cannot_fire_early(self, license_interp, offered):
        with pytest.raises(NotFireableError, match="0 ticks left"):
            license_interp.fire_event(offered, 1)

    def test_event_not_pending(self, license_interp, offered):
        with pytest.raises(NotFireableError, match="event 2 is not pending"):
            license_interp.fire_event(offered, 2)

    def test_event_fires_at_zero(self, license_interp, offered):
        state = offered
        for _ in range(10):
            state = license_interp.tick(state)
        state = license_interp.fire_event(state, 1)
        assert state.control == "End"
        assert state.assets["Licensor.token"] == 1
        assert state.assets["License.token"] == 0
        assert state.pending == ()

    def test_expired_events_are_discarded(self, license_interp, offered):
        state = offered
        for _ in range(11):
            state = license_interp.tick(state)
        assert state.pending == ()
        assert state.clock == 11

    def test_event_needs_trigger_state(self, license_interp, offered):
        state = license_interp.invoke(offered, "activate", {}, {"b": 5})
        for _ in range(10):
            state = license_interp.tick(state)
        with pytest.raises(NotFireableError, match="@Prop"):
            license_interp.fire_event(state, 1)


@cache
def case_interpreter(case: str) -> Interpreter:
    return Interpreter(load(case))


def draw_start(data: st.DataObject, interp: Interpreter) -> RuntimeState:
    """A state right after the agreement with random fields and endowments."""
    ast = interp.ast
    fields = {
        name: data.draw(
            st.booleans() if kind is TargetKind.BOOLEAN else st.integers(0, 12),
            label=name,
        )
        for name, kind in field_kinds(ast).items()
    }
    assets: dict[str, int] = {}
    for model in interp.models.values():
        keys = [f"{party}.{model.asset}" for party in ast.parties]
        if model.is_divisible:
            assets |= {key: data.draw(st.integers(0, 50), label=key) for key in keys}
        else:
            assets[data.draw(st.sampled_from(keys), label=model.asset)] = 1
    return interp.init(fields, assets)


def random_actions(interp: Interpreter, start: RuntimeState) -> st.SearchStrategy:
    """Invocations with random arguments, tick runs and fire attempts."""
    amounts = st.one_of(
        st.sampled_from(sorted({v for v in start.fields.values() if type(v) is int} | {0})),
        st.integers(min_value=-1, max_value=30),
    )
    invocations = [
        st.tuples(
            st.just("invoke"),
            st.just(clause.name),
            st.fixed_dictionaries(
                {
                    p: st.booleans() if kind is TargetKind.BOOLEAN else amounts
                    for p, kind in param_kinds(clause).items()
                    if p in clause.value_params
                },
            ),
            st.fixed_dictionaries(dict.fromkeys(clause.asset_params, amounts)),
        )
        for clause in interp.ast.clauses
    ]
    ticks = st.tuples(
        st.just("tick"),
        st.one_of(st.integers(min_value=0, max_value=12), st.sampled_from([30, 365])),
    )
    indices = [e.event_index for e in interp.ast.events] or [1]
    fires = st.tuples(st.just("fire"), st.sampled_from(indices))
    return st.one_of(*invocations, ticks, fires)


def step(interp: Interpreter, state: RuntimeState, action: tuple) -> RuntimeState:
    match action:
        case ("invoke", clause, value_args, asset_args):
            return interp.invoke(state, clause, value_args, asset_args)
        case ("tick", n):
            for _ in range(n):
                state = interp.tick(state)
            return state
        case ("fire", index):
            return interp.fire_event(state, index)


class TestConservation:
    @pytest.mark.slow
    @pytest.mark.parametrize("case", CASE_STUDIES)
    @settings(max_examples=400, deadline=None, suppress_health_check=[HealthCheck.too_slow])
    @given(data=st.data())
    def test_random_runs_keep_holdings(self, case: str, data: st.DataObject):
        """Totals never change and indivisible assets keep exactly one holder."""
        interp = case_interpreter(case)
        state = draw_start(data, interp)
        totals = interp.totals(state)
        actions = data.draw(st.lists(random_actions(interp, state), min_size=10, max_size=30))
        for action in actions:
            try:
                state = step(interp, state, action)
            except StipulaRuntimeError:
                pass
            assert interp.totals(state) == totals
            assert min(state.assets.values(), default=0) >= 0
            for model in interp.models.values():
                if not model.is_divisible:
                    holders = [loc.key for loc in model.locations if state.assets[loc.key]]
                    assert len(holders) == 1
                    assert state.assets[holders[0]] == 1
