import logging
import sys
from typing import Optional, TextIO

from .bound_command import BoundCommand
from .command_base import CommandResult
from .config import RunConfig
from .csv_output import write_comments, write_table
from .curve_command import CurveCommand
from .errors import CapabilityError, ConfigError, DomainError, PreconditionError
from .expand_command import ExpandCommand
from .rescale_command import RescaleCheckCommand

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_USAGE = 2
EXIT_CAPABILITY = 3


class CommandManager:
    def __init__(self, tool: str = "susceptibility", version: Optional[str] = None):
        from . import __version__

        self.tool = tool
        self.version = version or __version__
        self.commands = {
            BoundCommand.name: BoundCommand(),
            ExpandCommand.name: ExpandCommand(),
            CurveCommand.name: CurveCommand(),
            RescaleCheckCommand.name: RescaleCheckCommand(),
        }

    def list_commands(self):
        return list(self.commands.keys())

    def run(self, config: RunConfig) -> CommandResult:
        """Run a command and return its table; library errors propagate."""
        command = self.commands.get(config.command)
        if not command:
            raise ConfigError(f"Unknown command: {config.command}")
        return command.handle(config)

    def handle(self, config: RunConfig, out: Optional[TextIO] = None, err: Optional[TextIO] = None) -> int:
        """
        Run a command, write its CSV and map failures to exit codes.

        Args:
            config: resolved configuration naming the command
            out: CSV destination (default stdout)
            err: destination of error messages (default stderr)

        Returns:
            0 on success, 1 when a checked property is violated,
            2 for bad input or a violated theorem hypothesis,
            3 for an unsupported combination
        """
        out = out or sys.stdout
        err = err or sys.stderr
        try:
            result = self.run(config)
        except (PreconditionError, DomainError, ConfigError) as e:
            err.write(f"error: {e}\n")
            return EXIT_USAGE
        except CapabilityError as e:
            err.write(f"error: {e}\n")
            return EXIT_CAPABILITY

        write_comments(out, self.tool, self.version, config, result.seed)
        write_table(out, result.header, result.rows)
        if result.exit_code != EXIT_OK:
            err.write(f"error: {result.message}\n")
        return result.exit_code
