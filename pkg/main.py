"""Main entry point for the stipulac command line driver.

Parses arguments into a validated configuration, sets up logging and runs
the selected subcommand on the event loop. Every error a subcommand raises
is mapped to an exit code here.
"""

import argparse
import asyncio
import logging
import logging.config
import sys
from collections.abc import Sequence
from pathlib import Path
from typing import NoReturn

from pydantic import ValidationError

from commands import COMMANDS
from config import INT_SEMANTICS, LOGGING_CONFIG, PROVER_COMMAND, PROVER_TIMEOUT
from core.enums import ExitCode, IntSemantics, Subcommand
from core.exceptions import (
    NotDisjointError,
    OutputWriteError,
    ProverNotFoundError,
    ProverTimeoutError,
    StipulaError,
    TraceStepError,
)
from core.models import CliConfig

logger = logging.getLogger("stipulac")
diagnostics = logging.getLogger("diagnostics")

HELP = {
    Subcommand.CHECK: "parse and analyse a contract",
    Subcommand.GRAPH: "export the underlying automaton in DOT format",
    Subcommand.REPORT: "print cycles, asset classification and clause contracts",
    Subcommand.PLAN: "print the scenario plans",
    Subcommand.TRANSLATE: "write the annotated compilation unit",
    Subcommand.RUN: "execute a trace file",
    Subcommand.VERIFY: "translate and run the external prover",
}


class ArgumentParser(argparse.ArgumentParser):
    """Argument parser that reports usage errors with the invalid-input exit code."""

    def error(self, message: str) -> NoReturn:
        self.print_usage(sys.stderr)
        self.exit(ExitCode.INVALID, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    """Build the argument parser with one subparser per subcommand."""
    parser = ArgumentParser(
        prog="stipulac",
        description="Analyse, execute and translate Stipula contracts.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True, metavar="COMMAND")
    for command in Subcommand:
        p = sub.add_parser(command.value, help=HELP[command])
        p.add_argument("input", type=Path, help="contract source file")
        p.add_argument(
            "--json",
            dest="as_json",
            action="store_true",
            help="machine-readable output",
        )
        if command in {Subcommand.GRAPH, Subcommand.TRANSLATE, Subcommand.VERIFY}:
            p.add_argument("-o", "--output", type=Path, help="output file")
        if command is Subcommand.RUN:
            p.add_argument(
                "--trace", type=Path, required=True, help="trace file (JSON)"
            )
        if command in {Subcommand.TRANSLATE, Subcommand.VERIFY}:
            p.add_argument(
                "--int-semantics",
                choices=[s.value for s in IntSemantics],
                default=INT_SEMANTICS,
                help="integer semantics of the generated unit (default: %(default)s)",
            )
        if command is Subcommand.VERIFY:
            p.add_argument(
                "--prover", default=PROVER_COMMAND, help="prover command line"
            )
            p.add_argument(
                "--timeout",
                type=float,
                default=PROVER_TIMEOUT,
                help="prover timeout in seconds (default: %(default)s)",
            )
    return parser


def parse_config(argv: Sequence[str] | None = None) -> CliConfig:
    """Parse the command line, falling back to the environment defaults.

    :param argv: Arguments without the program name, ``sys.argv`` when None.
    :return: Validated driver configuration.
    :raises ValidationError: If an option value is out of range.
    """
    args = build_parser().parse_args(argv)
    return CliConfig.model_validate(
        {key: value for key, value in vars(args).items() if value is not None},
    )


def _report(cfg: CliConfig, exc: BaseException) -> None:
    position = getattr(exc, "position", None)
    where = f"{cfg.input}:{position}" if position is not None else str(cfg.input)
    message = exc.message if isinstance(exc, StipulaError) else str(exc)
    diagnostics.error("%s: error: %s", where, message)


async def dispatch(cfg: CliConfig) -> ExitCode:
    """Run the selected subcommand and map its errors to exit codes.

    :param cfg: Driver configuration.
    :type cfg: CliConfig
    :return: Process exit code.
    :rtype: ExitCode
    """
    logger.debug("running %s on %s", cfg.subcommand, cfg.input)
    try:
        return await COMMANDS[cfg.subcommand](cfg)
    except NotDisjointError as e:
        _report(cfg, e)
        if e.witness is not None:
            for cycle in e.witness:
                diagnostics.error("  cycle: %s", cycle)
        return ExitCode.NOT_DISJOINT
    except TraceStepError as e:
        _report(cfg, e)
        return ExitCode.TRACE_FAILED
    except ValidationError as e:
        diagnostics.error(
            "%s: error: malformed trace file\n%s", cfg.trace or cfg.input, e
        )
        return ExitCode.TRACE_FAILED
    except StipulaError as e:
        _report(cfg, e)
        return ExitCode.INVALID
    except OutputWriteError as e:
        _report(cfg, e)
        return ExitCode.WRITE_FAILED
    except (ProverNotFoundError, ProverTimeoutError) as e:
        _report(cfg, e)
        return ExitCode.PROOF_FAILED
    except OSError as e:
        diagnostics.error("%s: error: %s", e.filename or cfg.input, e.strerror or e)
        return ExitCode.INVALID


def main(argv: Sequence[str] | None = None) -> int:
    """Configure logging, parse the command line and run the subcommand."""
    logging.config.dictConfig(LOGGING_CONFIG)
    try:
        cfg = parse_config(argv)
    except ValidationError as e:
        diagnostics.error("stipulac: error: %s", e)
        return ExitCode.INVALID
    return asyncio.run(dispatch(cfg))


def run() -> None:
    """Console script entry point."""
    sys.exit(main())


if __name__ == "__main__":
    run()
