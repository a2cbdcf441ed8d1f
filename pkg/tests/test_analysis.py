import pytest

from core.analysis import (
    Param,
    classify_assets,
    conservation_invariant,
    exclusivity_invariant,
    field_kinds,
    param_kinds,
    postcondition,
)
from core.enums import AssetKind, MethodRole, TargetKind
from core.exceptions import ConflictError, KindError
from core.formulas import Loc, render
from core.parser import canonicalize, parse_contract
from tests.test_parser import contract


def rendered(formulas) -> list[str]:
    return [render(f) for f in formulas]


def classify(*clauses: str, header: str = "asset h\n    field x, y"):
    return classify_assets(canonicalize(parse_contract(contract(*clauses, header=header))))


class TestClassification:
    def test_license_assets_are_indivisible(self, license_contract):
        models = license_contract.model_map
        assert [m.asset for m in license_contract.models] == ["balance", "token"]
        assert all(m.kind is AssetKind.INDIVISIBLE for m in models.values())
        assert models["token"].target_kind is TargetKind.BOOLEAN
        assert models["token"].total is None

    def test_deposit_flour_is_divisible(self, deposit_contract):
        flour = deposit_contract.model_map["flour"]
        assert flour.is_divisible
        assert flour.target_kind is TargetKind.INT
        assert flour.owners == ("Deposit", "Client", "Farm")
        keys = [loc.key for loc in flour.locations]
        assert keys == ["Deposit.flour", "Client.flour", "Farm.flour"]

    def test_betting_wallets_have_four_owners(self, betting_contract):
        for name in ("wallet1", "wallet2"):
            model = betting_contract.model_map[name]
            assert model.is_divisible
            assert model.owners == ("Betting", "Better1", "Better2", "DataProvider")

    def test_contract_without_assets(self, loan_contract):
        assert loan_contract.models == []

    def test_single_unit_moves_keep_asset_indivisible(self):
        (model,) = classify("@Q0 A : f()[] { 1 -o h, B } => @Q1")
        assert model.kind is AssetKind.INDIVISIBLE

    def test_cross_asset_transfer(self):
        with pytest.raises(ConflictError, match="cannot transfer 'h' into asset 'k'"):
            classify("@Q0 A : f()[] { h -o k } => @Q1", header="asset h, k\n    field x")

    def test_indivisible_asset_cannot_be_split(self):
        with pytest.raises(ConflictError, match="cannot be split into 2 units"):
            classify("@Q0 A : f()[] { 2 -o h, A } => @Q1")

    def test_parameter_flowing_into_two_assets(self):
        with pytest.raises(ConflictError, match="flows into both 'h' and 'k'"):
            classify(
                "@Q0 A : f()[m] {\n        1 -o m, h\n        1 -o m, k\n    } => @Q1",
                header="asset h, k\n    field x",
            )


class TestInvariants:
    def test_exclusivity(self, license_contract):
        token = license_contract.model_map["token"]
        assert render(exclusivity_invariant(token)) == (
            "(License.token && !Licensor.token && !Licensee.token)"
            " || (Licensor.token && !License.token && !Licensee.token)"
            " || (Licensee.token && !License.token && !Licensor.token)"
        )

    def test_conservation(self, deposit_contract):
        flour = deposit_contract.model_map["flour"]
        assert render(conservation_invariant(flour)) == (
            "Deposit.flour + Client.flour + Farm.flour == kappa_flour"
        )

    def test_conservation_over_four_owners(self, betting_contract):
        wallet = betting_contract.model_map["wallet1"]
        assert render(conservation_invariant(wallet)) == (
            "Betting.wallet1 + Better1.wallet1 + Better2.wallet1 + DataProvider.wallet1"
            " == kappa_wallet1"
        )

    def test_wrong_kind(self, license_contract, deposit_contract):
        with pytest.raises(KindError, match="divisible"):
            exclusivity_invariant(deposit_contract.model_map["flour"])
        with pytest.raises(KindError, match="indivisible"):
            conservation_invariant(license_contract.model_map["token"])


class TestKinds:
    def test_condition_makes_parameter_boolean(self):
        source = contract("@Q0 A : f(z, v)[k] { if (z) { v -> x } } => @Q1")
        ast = canonicalize(parse_contract(source))
        assert param_kinds(ast.clauses[0]) == {
            "z": TargetKind.BOOLEAN,
            "v": TargetKind.INT,
            "k": TargetKind.INT,
        }

    def test_logical_operands_are_boolean(self):
        ast = parse_contract(contract("@Q0 A : f(a, b)[] { (a && b) -> y } => @Q1"))
        kinds = param_kinds(ast.clauses[0])
        assert kinds["a"] is kinds["b"] is TargetKind.BOOLEAN

    def test_field_assigned_a_comparison_is_boolean(self):
        ast = parse_contract(contract("@Q0 A : f(z)[] { (z > 0) -> y\n z -> x } => @Q1"))
        assert field_kinds(ast) == {"x": TargetKind.INT, "y": TargetKind.BOOLEAN}

    def test_case_study_fields_are_ints(self, deposit_ast, license_ast):
        assert set(field_kinds(deposit_ast).values()) == {TargetKind.INT}
        assert set(field_kinds(license_ast).values()) == {TargetKind.INT}


class TestLicenseSpecs:
    def test_buy(self, license_contract):
        buy = license_contract.specs["buy"]
        assert buy.role is MethodRole.CLAUSE
        assert buy.params == ()
        assert render(buy.requires) == "License.balance && License.token"
        assert render(buy.ensures) == (
            "Licensor.balance && !License.balance && Licensee.token && !License.token"
            " && Licensee.balance == \\old(Licensee.balance)"
            " && Licensor.token == \\old(Licensor.token)"
        )

    def test_offer(self, license_contract):
        offer = license_contract.specs["offer"]
        assert offer.params == (Param("x", TargetKind.INT), Param("n", TargetKind.INT))
        assert rendered(offer.pre) == ["n >= 0", "Licensor.token", "!License.token"]
        assert render(offer.ensures) == (
            "License.token && !Licensor.token && License.code == x"
            " && Licensee.token == \\old(Licensee.token)"
        )
        assert offer.frame == (
            Loc("License", "token"),
            Loc("Licensor", "token"),
            Loc("License", "code"),
        )

    def test_permissions(self, license_contract):
        specs = license_contract.specs
        assert specs["buy"].permission == "@Trial Licensee: buy => @End"
        assert specs["event1"].permission == "@Prop event: event1 => @End"
        assert specs["event2"].role is MethodRole.EVENT
        assert specs["event2"].party is None

    def test_control_state_stays_out_of_pre(self, license_contract):
        buy = license_contract.specs["buy"]
        assert (buy.source_state, buy.target_state) == ("Trial", "End")
        assert not any("Trial" in render(f) for f in buy.pre)
        assert not any("End" in render(f) for f in buy.post)

    def test_every_clause_and_event_has_a_spec(self, license_contract):
        assert list(license_contract.specs) == ["offer", "activate", "buy", "event1", "event2"]


class TestDepositSpecs:
    def test_send(self, deposit_contract):
        send = deposit_contract.specs["send"]
        assert render(send.requires) == "h >= 0 && Farm.flour >= h"
        assert rendered(send.post) == [
            "Deposit.flour == \\old(Deposit.flour) + h",
            "Farm.flour == \\old(Farm.flour) - h",
            "Client.flour == \\old(Client.flour)",
        ]
        assert set(send.store) == {Loc("Deposit", "flour"), Loc("Farm", "flour")}

    def test_buy_requires_divisor_before_guard(self, deposit_contract):
        buy = deposit_contract.specs["buy"]
        assert render(buy.requires) == (
            "Deposit.cost_flour != 0 && w/Deposit.cost_flour <= Deposit.flour && w >= 0"
            " && Deposit.flour >= w/Deposit.cost_flour && w/Deposit.cost_flour >= 0"
        )
        assert render(buy.ensures) == (
            "Client.flour == \\old(Client.flour) + w/Deposit.cost_flour"
            " && Deposit.flour == \\old(Deposit.flour) - w/Deposit.cost_flour"
            " && Farm.flour == \\old(Farm.flour)"
        )

    def test_draining_event(self, deposit_contract):
        event1 = deposit_contract.specs["event1"]
        assert render(event1.requires) == "true"
        assert event1.params == ()
        assert rendered(event1.post) == [
            "Farm.flour == \\old(Farm.flour) + \\old(Deposit.flour)",
            "Deposit.flour == 0",
            "Client.flour == \\old(Client.flour)",
        ]


class TestOtherSpecs:
    def test_untracked_payment(self, loan_contract):
        give_money = loan_contract.specs["give_money"]
        assert rendered(give_money.pre) == ["w == Loan.amount", "w >= 0"]
        assert give_money.frame == ()
        assert render(give_money.ensures) == "true"

    def test_betting_fee_requirements(self, betting_contract):
        data = rendered(betting_contract.specs["data"].pre)
        assert "Betting.wallet1 >= Betting.fee" in data
        assert "Betting.wallet2 >= Betting.fee" in data
        assert "Betting.fee >= 0" in data


class TestPostcondition:
    def test_empty_store_keeps_every_location(self, license_contract):
        post = postcondition({}, license_contract.model_map)
        assert rendered(post) == [
            "License.balance == \\old(License.balance)",
            "Licensor.balance == \\old(Licensor.balance)",
            "Licensee.balance == \\old(Licensee.balance)",
            "License.token == \\old(License.token)",
            "Licensor.token == \\old(Licensor.token)",
            "Licensee.token == \\old(Licensee.token)",
        ]
