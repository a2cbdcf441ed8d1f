"""Bridge to an external deductive verifier.

The prover is any command line that accepts the generated file as its last
argument. Lines of the form ``name: closed`` or ``name: open`` on its output
report individual proof obligations; without them the exit status decides a
single obligation named after the file.
"""

import asyncio
import logging
import re
import shlex
import shutil
from pathlib import Path

from core.enums import ObligationStatus, VerifierStatus
from core.exceptions import ProverNotFoundError, ProverTimeoutError
from core.models import Obligation, SkippedReport, VerifierReport

logger = logging.getLogger(__name__)

DEFAULT_TIMEOUT = 300.0
OBLIGATION_PATTERN = re.compile(
    r"^\s*(?P<name>[\w.$<>()-]+)\s*:\s*(?P<status>closed|open)\s*$",
    re.IGNORECASE,
)


def parse_obligations(output: str) -> list[Obligation]:
    """Collect the obligation lines of a prover transcript.

    :param output: Combined standard output and error of the prover.
    :type output: str
    :return: Obligations in the order they were reported.
    :rtype: list[Obligation]
    """
    obligations = []
    for line in output.splitlines():
        if match := OBLIGATION_PATTERN.match(line):
            status = ObligationStatus(match["status"].lower())
            obligations.append(Obligation(name=match["name"], status=status))
    return obligations


def _resolve_command(prover_cmd: str) -> list[str]:
    argv = shlex.split(prover_cmd)
    if not argv:
        raise ProverNotFoundError(prover_cmd)
    executable = shutil.which(argv[0])
    if executable is None:
        raise ProverNotFoundError(argv[0])
    return [executable, *argv[1:]]


async def verify_external(
    path: Path,
    prover_cmd: str | None,
    timeout: float = DEFAULT_TIMEOUT,
) -> VerifierReport:
    """Run the external prover on a generated file.

    :param path: Rendered compilation unit.
    :type path: Path
    :param prover_cmd: Prover command line, None or empty when not configured.
    :type prover_cmd: str | None
    :param timeout: Seconds before the prover is killed.
    :type timeout: float
    :return: Per-obligation outcome, or a skipped report without a prover.
    :rtype: VerifierReport
    :raises ProverNotFoundError: If the configured executable does not exist.
    :raises ProverTimeoutError: If the prover does not finish in time.
    """
    if not prover_cmd or not prover_cmd.strip():
        logger.info("no prover configured, skipping verification of %s", path)
        return SkippedReport()

    argv = [*_resolve_command(prover_cmd), str(path)]
    logger.debug("starting prover: %s", shlex.join(argv))
    process = await asyncio.create_subprocess_exec(
        *argv,
        stdout=asyncio.subprocess.PIPE,
        stderr=asyncio.subprocess.STDOUT,
    )
    try:
        stdout, _ = await asyncio.wait_for(process.communicate(), timeout=timeout)
    except TimeoutError:
        process.kill()
        await process.wait()
        raise ProverTimeoutError(timeout) from None

    output = stdout.decode(errors="replace")
    obligations = parse_obligations(output)
    if not obligations:
        closed = process.returncode == 0
        status = ObligationStatus.CLOSED if closed else ObligationStatus.OPEN
        obligations = [Obligation(name=path.name, status=status)]

    failed = any(o.status is ObligationStatus.OPEN for o in obligations)
    logger.info(
        "prover finished with exit status %s, %s obligation(s), %s open",
        process.returncode,
        len(obligations),
        sum(o.status is ObligationStatus.OPEN for o in obligations),
    )
    return VerifierReport(
        status=VerifierStatus.FAILED if failed else VerifierStatus.PASSED,
        obligations=obligations,
        output=output,
    )
