"""Subcommands of the ``stipulac`` driver."""

from collections.abc import Awaitable, Callable

from core.enums import ExitCode, Subcommand
from core.models import CliConfig

from .pipeline import cmd_check, cmd_graph, cmd_plan, cmd_report, cmd_translate
from .runtime import cmd_run, cmd_verify

type Command = Callable[[CliConfig], Awaitable[ExitCode]]

COMMANDS: dict[Subcommand, Command] = {
    Subcommand.CHECK: cmd_check,
    Subcommand.GRAPH: cmd_graph,
    Subcommand.REPORT: cmd_report,
    Subcommand.PLAN: cmd_plan,
    Subcommand.TRANSLATE: cmd_translate,
    Subcommand.RUN: cmd_run,
    Subcommand.VERIFY: cmd_verify,
}

__all__ = [
    "COMMANDS",
    "Command",
    "cmd_check",
    "cmd_graph",
    "cmd_plan",
    "cmd_report",
    "cmd_run",
    "cmd_translate",
    "cmd_verify",
]
