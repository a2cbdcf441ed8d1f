import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from core.analysis import Param, classify_assets, derive_specs
from core.automaton import build_automaton, enumerate_cycles
from core.enums import MethodRole, TargetKind
from core.exceptions import NonLinearDeltaError, NotDisjointError, NotSupportedError
from core.formulas import evaluate, render
from core.interp import Interpreter
from core.parser import canonicalize, parse_contract
from core.scenario import (
    Call,
    GuardedEvent,
    LoopSegment,
    enumerate_scenarios,
    loop_spec,
    scenario_spec,
    synthesize_loop_invariant,
)
from tests.conftest import Analysed, analyse, load, shared
from tests.test_parser import contract


def plans_of(analysed: Analysed):
    return enumerate_scenarios(
        analysed.automaton,
        analysed.cycles,
        analysed.ast,
        analysed.models,
        analysed.specs,
    )


def plans_from_source(*clauses: str):
    ast = canonicalize(parse_contract(contract(*clauses)))
    automaton = build_automaton(ast)
    return enumerate_scenarios(automaton, enumerate_cycles(automaton), ast)


def shape(plan) -> list[str]:
    names = []
    for step in plan.steps:
        match step:
            case Call(clause=clause):
                names.append(clause)
            case GuardedEvent():
                names.append(step.guard)
            case LoopSegment():
                names.append(step.method)
    return names


class TestPlans:
    def test_license(self, license_contract):
        plans = plans_of(license_contract)
        assert [p.name for p in plans] == ["seq1", "seq2", "seq3"]
        assert [shape(p) for p in plans] == [
            ["offer", "ev_event1"],
            ["offer", "activate", "ev_event2"],
            ["offer", "activate", "buy"],
        ]
        assert plans[0].params == (
            Param("x", TargetKind.INT),
            Param("n", TargetKind.INT),
            Param("ev_event1", TargetKind.BOOLEAN),
        )

    def test_loan_folds_events_without_effect(self, loan_contract):
        plans = plans_of(loan_contract)
        assert [shape(p) for p in plans] == [
            [
                "give_money",
                "ev_event1",
                "pay_installment1",
                "ev_event2",
                "pay_installment2",
                "ev_event3",
                "pay_installment3",
            ],
            ["withdraw"],
        ]
        assert [p.name for p in plans[0].params] == [
            "w",
            "ev_event1",
            "h",
            "ev_event2",
            "ev_event3",
        ]

    def test_betting(self, betting_contract):
        plans = plans_of(betting_contract)
        assert [shape(p) for p in plans] == [
            ["place_bet1", "ev_event1"],
            ["place_bet1", "place_bet2", "ev_event2"],
            ["place_bet1", "place_bet2", "data"],
        ]

    def test_deposit_collapses_the_cycle(self, deposit_contract):
        plans = plans_of(deposit_contract)
        assert [shape(p) for p in plans] == [
            ["begin", "loop1", "ev_event2"],
            ["begin", "loop1", "buy", "ev_event1"],
        ]
        assert plans[0].loop is plans[1].loop
        assert [p.name for p in plans[0].params] == ["h", "w", "h_send", "counter", "ev_event2"]

    def test_loop_segment(self, deposit_contract):
        seg = plans_of(deposit_contract)[0].loop
        assert seg is not None
        assert seg.method == "loop1"
        assert seg.entry == "RunC"
        assert seg.body == (Call("buy", ("w",)), Call("send", ("h_send",)))
        assert seg.params == (
            Param("w", TargetKind.INT),
            Param("h_send", TargetKind.INT),
            Param("counter", TargetKind.INT),
        )
        assert [loc.key for loc in seg.written] == ["Client.flour", "Deposit.flour", "Farm.flour"]
        assert render(seg.variant) == "counter - i"

    def test_loop_reuses_its_arguments_after_the_loop(self, deposit_contract):
        plan = plans_of(deposit_contract)[1]
        assert plan.steps[2] == Call("buy", ("w",))

    def test_overlapping_cycles(self):
        with pytest.raises(NotDisjointError, match="shared states: T"):
            plans_of(analyse("overlapping"))


class TestUnsupportedShapes:
    def test_loop_overwriting_a_field(self):
        with pytest.raises(NonLinearDeltaError, match="overwrites the field") as excinfo:
            plans_from_source("@Q0 A : f(z)[] { z -> y } => @Q1", "@Q1 A : g()[] { } => @Q0")
        assert excinfo.value.location == "C.y"

    def test_change_depending_on_written_location(self):
        with pytest.raises(NonLinearDeltaError, match="which the loop writes"):
            plans_from_source(
                "@Q0 A : f()[] { (h / 2) -o h, B } => @Q1",
                "@Q1 B : g()[] { } => @Q0",
            )

    def test_cycle_clause_scheduling_events(self):
        with pytest.raises(NotSupportedError, match="schedules events inside cycle"):
            plans_from_source(
                "@Q0 A : f()[] { now + 1 >> @Q1 { } => @Q2 } => @Q1",
                "@Q1 A : g()[] { } => @Q0",
            )

    def test_path_through_two_cycles(self):
        with pytest.raises(NotSupportedError, match="after iterating"):
            plans_from_source(
                "@Q0 A : f()[] { } => @Q1",
                "@Q1 A : g()[] { } => @Q0",
                "@Q1 B : h()[] { } => @Q2",
                "@Q2 B : k()[] { } => @Q3",
                "@Q3 B : m()[] { } => @Q2",
            )


class TestLoopInvariant:
    def test_deposit_invariant(self, deposit_contract):
        seg = plans_of(deposit_contract)[0].loop
        invariant = [render(f) for f in synthesize_loop_invariant(seg, deposit_contract.models)]
        assert invariant[:2] == ["0 <= i", "i <= counter"]
        assert (
            "Deposit.flour == \\old(Deposit.flour) - i * w/Deposit.cost_flour + i * h_send"
            in invariant
        )
        assert "Farm.flour == \\old(Farm.flour) - i * h_send" in invariant
        assert invariant[-1] == "Deposit.flour + Client.flour + Farm.flour == kappa_flour"

    @settings(max_examples=300, deadline=None)
    @given(
        cost=st.integers(min_value=1, max_value=9),
        per_buy=st.integers(min_value=0, max_value=6),
        h_send=st.integers(min_value=0, max_value=20),
        counter=st.integers(min_value=0, max_value=6),
        slack=st.integers(min_value=0, max_value=40),
        spare=st.integers(min_value=0, max_value=40),
    )
    def test_invariant_holds_at_every_iteration(
        self, cost: int, per_buy: int, h_send: int, counter: int, slack: int, spare: int
    ):
        """The invariant evaluates to true after each interpreted iteration."""
        deposit = shared("deposit")
        invariant = synthesize_loop_invariant(plans_of(deposit)[0].loop, deposit.models)
        w = cost * per_buy
        h = counter * per_buy + slack
        kappa = h + counter * h_send + spare

        interp = Interpreter(deposit.ast)
        state = interp.init({"cost_flour": cost}, {"Farm.flour": kappa})
        state = interp.invoke(state, "begin", {}, {"h": h})
        entry = interp.valuation(state)
        for i in range(counter + 1):
            if i:
                state = interp.invoke(state, "buy", {}, {"w": w})
                state = interp.invoke(state, "send", {}, {"h": h_send})
            variables = {
                "i": i,
                "counter": counter,
                "w": w,
                "h_send": h_send,
                "kappa_flour": kappa,
            }
            current = interp.valuation(state)
            for formula in invariant:
                assert evaluate(formula, current, variables, entry) is True, render(formula)

    @pytest.mark.parametrize("iterations", [0, 1, 3])
    def test_loop_contract_holds_on_concrete_runs(self, deposit_contract, iterations: int):
        seg = plans_of(deposit_contract)[0].loop
        spec = loop_spec(seg, deposit_contract.specs, deposit_contract.model_map)
        assert spec.role is MethodRole.LOOP
        assert render(spec.pre[0]) == "counter >= 0"

        interp = Interpreter(load("deposit"))
        state = interp.init({"cost_flour": 2}, {"Farm.flour": 100})
        state = interp.invoke(state, "begin", {}, {"h": 10})
        entry = interp.valuation(state)
        variables = {"counter": iterations, "w": 4, "h_send": 3}
        assert evaluate(spec.requires, entry, variables) is True
        for _ in range(iterations):
            state = interp.invoke(state, "buy", {}, {"w": 4})
            state = interp.invoke(state, "send", {}, {"h": 3})
        assert evaluate(spec.ensures, interp.valuation(state), variables, entry) is True

    def test_zero_iterations_still_need_a_divisor(self, deposit_contract):
        seg = plans_of(deposit_contract)[0].loop
        spec = loop_spec(seg, deposit_contract.specs, deposit_contract.model_map)
        assert render(spec.pre[1]) == "Deposit.cost_flour != 0"
        entry = {"Deposit.cost_flour": 0, "Deposit.flour": 5, "Client.flour": 0, "Farm.flour": 5}
        assert evaluate(spec.requires, entry, {"counter": 0, "w": 4, "h_send": 3}) is False


class TestScenarioSpec:
    def test_endpoints(self, loan_contract, deposit_contract):
        loan_plans = plans_of(loan_contract)
        seq1 = scenario_spec(loan_plans[0], loan_contract.specs, loan_contract.model_map)
        assert (seq1.source_state, seq1.target_state) == ("Init", "Success")
        assert seq1.role is MethodRole.SCENARIO

        deposit_plans = plans_of(deposit_contract)
        spec = scenario_spec(deposit_plans[0], deposit_contract.specs, deposit_contract.model_map)
        assert (spec.source_state, spec.target_state) == ("Start", "End")
        assert spec.params == deposit_plans[0].params

    def test_requirements_after_a_guard_are_conditional(self, loan_contract):
        plan = plans_of(loan_contract)[0]
        spec = scenario_spec(plan, loan_contract.specs, loan_contract.model_map)
        pre = [render(p) for p in spec.pre]
        assert pre[0] == "w == Loan.amount"
        assert any(p.startswith("!ev_event1 ==> ") for p in pre)

    def test_derived_when_omitted(self):
        ast = load("license")
        automaton = build_automaton(ast)
        models = classify_assets(ast)
        explicit = enumerate_scenarios(
            automaton, enumerate_cycles(automaton), ast, models, derive_specs(ast, models)
        )
        assert enumerate_scenarios(automaton, enumerate_cycles(automaton), ast) == explicit
