import shlex
import sys
from pathlib import Path

import pytest

from core.enums import ObligationStatus, VerifierStatus
from core.exceptions import ProverNotFoundError, ProverTimeoutError
from core.models import Obligation, SkippedReport
from core.prover import parse_obligations, verify_external


def fake_prover(tmp_path: Path, body: str) -> str:
    """Command line running ``body`` as a Python script."""
    script = tmp_path / "prover.py"
    script.write_text(f"import sys, time\n{body}\n", encoding="utf-8")
    return shlex.join([sys.executable, str(script)])


@pytest.fixture
def unit(tmp_path: Path) -> Path:
    path = tmp_path / "Deposit.java"
    path.write_text("public class Deposit {\n}\n", encoding="utf-8")
    return path


class TestParseObligations:
    def test_status_lines(self):
        output = "starting\nloop1: closed\n  seq1 : OPEN\nsummary: 1 of 2 closed\n"
        assert parse_obligations(output) == [
            Obligation(name="loop1", status=ObligationStatus.CLOSED),
            Obligation(name="seq1", status=ObligationStatus.OPEN),
        ]

    def test_no_status_lines(self):
        assert parse_obligations("") == []
        assert parse_obligations("Proof closed for all methods") == []


class TestVerifyExternal:
    async def test_skipped_without_prover(self, unit: Path):
        for command in (None, "", "   "):
            report = await verify_external(unit, command)
            assert isinstance(report, SkippedReport)
            assert report.status is VerifierStatus.SKIPPED

    async def test_reported_obligations(self, tmp_path: Path, unit: Path):
        command = fake_prover(tmp_path, "print('buy: closed')\nprint('seq1: open')")
        report = await verify_external(unit, command)
        assert report.status is VerifierStatus.FAILED
        assert [o.name for o in report.open_obligations] == ["seq1"]
        assert "buy: closed" in report.output

    async def test_all_closed(self, tmp_path: Path, unit: Path):
        command = fake_prover(tmp_path, "print('buy: closed')\nprint('send: closed')")
        report = await verify_external(unit, command)
        assert report.status is VerifierStatus.PASSED
        assert len(report.obligations) == 2

    async def test_file_is_the_last_argument(self, tmp_path: Path, unit: Path):
        command = fake_prover(tmp_path, "print(sys.argv[-1].rsplit('/', 1)[-1] + ': closed')")
        report = await verify_external(unit, command)
        assert report.obligations == [
            Obligation(name="Deposit.java", status=ObligationStatus.CLOSED),
        ]

    @pytest.mark.parametrize(
        ("code", "status", "outcome"),
        [
            (0, ObligationStatus.CLOSED, VerifierStatus.PASSED),
            (1, ObligationStatus.OPEN, VerifierStatus.FAILED),
        ],
    )
    async def test_exit_status_fallback(self, tmp_path, unit, code, status, outcome):
        command = fake_prover(tmp_path, f"print('checking')\nsys.exit({code})")
        report = await verify_external(unit, command)
        assert report.obligations == [Obligation(name="Deposit.java", status=status)]
        assert report.status is outcome

    async def test_missing_executable(self, unit: Path):
        with pytest.raises(ProverNotFoundError, match="no-such-prover"):
            await verify_external(unit, "no-such-prover --batch")

    async def test_timeout(self, tmp_path: Path, unit: Path):
        command = fake_prover(tmp_path, "time.sleep(30)")
        with pytest.raises(ProverTimeoutError, match="0.5 s"):
            await verify_external(unit, command, timeout=0.5)
