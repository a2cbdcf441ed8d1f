import pytest

from core.enums import BinaryOperator
from core.exceptions import StipulaNameError, StipulaSyntaxError, StipulaTypeError
from core.parser import canonicalize, is_canonical, parse_contract
from core.syntax import (
    AssetDrain,
    AssetMove,
    AssetShorthand,
    BinOp,
    Conditional,
    FieldSend,
    Name,
    PartySend,
    StrLit,
)
from tests.conftest import CASE_STUDIES, fixture_path, load


def contract(*clauses: str, header: str = "asset h\n    field x, y") -> str:
    """Small two-party contract around the given clause texts."""
    body = "\n    ".join(clauses)
    return (
        "stipula C {\n"
        f"    {header}\n"
        "    agreement (A, B)(x) {\n"
        "        A, B : x\n"
        "    } => @Q0\n"
        f"    {body}\n"
        "}\n"
    )


class TestCaseStudies:
    @pytest.mark.parametrize("name", CASE_STUDIES)
    def test_case_studies_parse(self, name: str):
        ast = load(name)
        assert ast.name.lower() == name
        assert ast.clauses

    def test_license_declarations(self, license_ast):
        assert license_ast.name == "License"
        assert license_ast.assets == ("balance", "token")
        assert license_ast.fields == ("t_start", "t_limit", "cost", "code")
        assert license_ast.parties == ("Licensor", "Licensee")
        assert license_ast.agreement.initial_state == "Init"
        assert license_ast.agreement.bound_fields == ("t_start", "t_limit", "cost")
        assert [c.name for c in license_ast.clauses] == ["offer", "activate", "buy"]

    def test_events_are_numbered_in_textual_order(self, license_ast, deposit_ast):
        """Event indices count from 1 across the whole contract."""
        assert [(e.event_index, e.trigger_state) for e in license_ast.events] == [
            (1, "Prop"),
            (2, "Trial"),
        ]
        assert [(e.event_index, e.trigger_state) for e in deposit_ast.events] == [
            (1, "RunF"),
            (2, "RunC"),
        ]
        assert license_ast.events[0].delay == "t_start"
        assert deposit_ast.events[0].delay == 365

    def test_sends_are_resolved_by_target(self, license_ast):
        """``x -> code`` stores a field, ``code -> Licensee`` messages a party."""
        offer = license_ast.clause("offer")
        activate = license_ast.clause("activate")
        assert any(isinstance(s, FieldSend) and s.target == "code" for s in offer.body)
        assert any(isinstance(s, PartySend) and s.target == "Licensee" for s in activate.body)

    def test_string_message_to_party(self, loan_ast):
        withdraw = loan_ast.clause("withdraw")
        sends = [s for s in withdraw.body if isinstance(s, PartySend)]
        assert sends == [PartySend(StrLit("The_Bank_withdraws"), "Client")]

    def test_positions_are_recorded(self, license_ast):
        offer = license_ast.clause("offer")
        assert offer.pos is not None
        assert offer.pos.line == 7

    def test_comments_are_ignored(self, betting_ast):
        assert betting_ast.name == "Betting"


class TestCanonicalForm:
    def test_shorthand_becomes_drain(self):
        ast = parse_contract(contract("@Q0 A : f()[k] { k -o h } => @Q1"))
        assert isinstance(ast.clauses[0].body[0], AssetShorthand)
        assert not is_canonical(ast.clauses[0].body)

        canonical = canonicalize(ast)
        assert canonical.clauses[0].body == (AssetDrain("k", "h"),)
        assert is_canonical(canonical.clauses[0].body)

    def test_self_move_becomes_drain(self):
        ast = canonicalize(parse_contract(contract("@Q0 A : f()[] { h -o h, B } => @Q1")))
        assert ast.clauses[0].body == (AssetDrain("h", "B"),)

    def test_partial_move_is_kept(self):
        ast = canonicalize(parse_contract(contract("@Q0 A : f()[] { (h / 2) -o h, B } => @Q1")))
        assert isinstance(ast.clauses[0].body[0], AssetMove)

    def test_move_token_needs_a_word_boundary(self):
        """``z -owner`` subtracts ``owner`` instead of moving ``z``."""
        source = contract("@Q0 A : f(z, owner)[] { z -owner -> y } => @Q1")
        stmt = canonicalize(parse_contract(source)).clauses[0].body[0]
        assert isinstance(stmt, FieldSend)
        assert stmt.target == "y"
        assert isinstance(stmt.expr, BinOp)
        assert stmt.expr.op is BinaryOperator.SUB
        assert isinstance(stmt.expr.right, Name)
        assert stmt.expr.right.ident == "owner"

    def test_missing_else_becomes_empty(self):
        ast = parse_contract(contract("@Q0 A : f(z)[] { if (z > 0) { z -> y } } => @Q1"))
        assert ast.clauses[0].body[0].else_body is None
        stmt = canonicalize(ast).clauses[0].body[0]
        assert isinstance(stmt, Conditional)
        assert stmt.else_body == ()

    @pytest.mark.parametrize("name", CASE_STUDIES)
    def test_canonicalize_is_idempotent(self, name: str):
        once = load(name)
        assert canonicalize(once) == once


class TestErrors:
    def test_empty_input(self):
        source = fixture_path("empty").read_text(encoding="utf-8")
        with pytest.raises(StipulaSyntaxError, match="unexpected end of input"):
            parse_contract(source)

    def test_unexpected_token_reports_position(self):
        with pytest.raises(StipulaSyntaxError) as excinfo:
            parse_contract("stipula C {\n    field x\n    agreement (A) { } @Q0\n}\n")
        assert excinfo.value.position is not None
        assert excinfo.value.position.line == 3
        assert "expected one of" in str(excinfo.value)

    def test_undeclared_party_suggests_closest(self):
        with pytest.raises(StipulaNameError, match="did you mean 'A'") as excinfo:
            parse_contract(contract("@Q0 AA : f()[] { } => @Q1"))
        assert "undeclared party 'AA'" in excinfo.value.message

    def test_undeclared_name_in_guard(self):
        with pytest.raises(StipulaNameError, match="undeclared name 'zz'"):
            parse_contract(contract("@Q0 A : f()[] (zz > 0) { } => @Q1"))

    def test_duplicate_clause(self):
        with pytest.raises(StipulaNameError, match="duplicate clause 'f'"):
            parse_contract(
                contract("@Q0 A : f()[] { } => @Q1", "@Q1 A : f()[] { } => @Q0"),
            )

    def test_duplicate_declaration(self):
        with pytest.raises(StipulaNameError, match="duplicate declaration of 'x'"):
            parse_contract(contract("@Q0 A : f()[] { } => @Q1", header="asset x\n    field x"))

    def test_parameter_shadowing_global(self):
        with pytest.raises(StipulaNameError, match="shadows 'x'"):
            parse_contract(contract("@Q0 A : f(x)[] { } => @Q1"))

    def test_asset_parameter_not_visible_in_event(self):
        with pytest.raises(StipulaNameError):
            parse_contract(
                contract("@Q0 A : f()[k] { k -o h ; now + 1 >> @Q1 { k -o B } => @Q2 } => @Q1"),
            )

    def test_string_sent_to_field(self):
        with pytest.raises(StipulaTypeError, match="only be sent to parties"):
            parse_contract(contract('@Q0 A : f()[] { "s" -> y } => @Q1'))

    def test_guard_must_be_boolean(self):
        with pytest.raises(StipulaTypeError, match="guard is not boolean"):
            parse_contract(contract("@Q0 A : f()[k] (k + 1) { } => @Q1"))

    def test_arithmetic_on_booleans(self):
        with pytest.raises(StipulaTypeError, match="arithmetic"):
            parse_contract(contract("@Q0 A : f()[] { (true + 1) -> y } => @Q1"))

    def test_agreement_binds_unknown_field(self):
        source = contract("@Q0 A : f()[] { } => @Q1").replace("A, B : x", "A, B : w")
        with pytest.raises(StipulaNameError, match="undeclared field 'w'"):
            parse_contract(source)
