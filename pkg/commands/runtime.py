"""Dynamic subcommands: run a trace and verify a translation."""

import logging

from core.enums import ExitCode, VerifierStatus
from core.exceptions import InitError
from core.interp import Interpreter
from core.models import TRACE_ADAPTER, CliConfig
from core.prover import verify_external
from utils.async_file_utils import read_text

from .pipeline import compile_contract, emit, load_contract, translate

logger = logging.getLogger(__name__)
diagnostics = logging.getLogger("diagnostics")


async def cmd_run(cfg: CliConfig) -> ExitCode:
    """Execute a trace file against the contract and print the final state.

    :raises pydantic.ValidationError: If the trace file is malformed.
    :raises TraceStepError: If a step of the trace fails.
    """
    ast = await load_contract(cfg.input)
    if cfg.trace is None:
        msg = "run needs a trace file (--trace)"
        raise InitError(msg)
    trace = TRACE_ADAPTER.validate_json(await read_text(cfg.trace))
    logger.debug("running %s step(s) of %s", len(trace), cfg.trace)
    state = Interpreter(ast).run_trace(trace)
    emit(state.model_dump_json(indent=2))
    return ExitCode.OK


async def cmd_verify(cfg: CliConfig) -> ExitCode:
    """Translate the contract and hand the result to the external prover."""
    compilation = await compile_contract(cfg.input)
    path, _ = await translate(compilation, cfg)
    report = await verify_external(path, cfg.prover, cfg.timeout)

    if cfg.as_json:
        emit(report.model_dump_json(indent=2))
    elif report.status is VerifierStatus.SKIPPED:
        diagnostics.warning(
            "%s: warning: no prover configured, verification skipped", path
        )
    else:
        lines = [f"{o.name}: {o.status}" for o in report.obligations]
        lines.append(f"{path}: {report.status}, {len(report.open_obligations)} open")
        emit("\n".join(lines))

    if report.status is VerifierStatus.FAILED:
        return ExitCode.PROOF_FAILED
    return ExitCode.OK
