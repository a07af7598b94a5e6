"""Command-line entry point: python cli.py <command> [--flag value ...]"""
import argparse
import logging
import sys
from typing import List, Optional

from susceptibility import CommandManager, __version__
from susceptibility.config import RunConfig
from susceptibility.errors import ConfigError
from susceptibility.manager import EXIT_USAGE

# flags that may be given without a value
_FLAG_CONSTS = {"inject_fault": "1.5", "random_start": "true"}
_GLOBAL_KEYS = ("seed", "threads")


def build_parser(manager: CommandManager) -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value file; flags take precedence")
    common.add_argument("--output", help="write CSV here instead of stdout")
    common.add_argument("--seed", help="random seed (required by sampling commands)")
    common.add_argument("--threads", help="worker threads; results do not depend on it")
    common.add_argument("--log-level", default="WARNING", help="DEBUG, INFO, WARNING or ERROR")

    parser = argparse.ArgumentParser(
        prog="susceptibility", description="Adversarial susceptibility bounds, oracles and experiments."
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, command in manager.commands.items():
        cmd_parser = sub.add_parser(name, parents=[common], help=command.help, description=command.help)
        for key, text in command.options.items():
            flag = "--" + key.replace("_", "-")
            if key in _FLAG_CONSTS:
                cmd_parser.add_argument(flag, dest=key, nargs="?", const=_FLAG_CONSTS[key], help=text)
            else:
                cmd_parser.add_argument(flag, dest=key, help=text)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    manager = CommandManager("susceptibility", __version__)
    args = build_parser(manager).parse_args(argv)

    level = getattr(logging, str(args.log_level).upper(), None)
    if not isinstance(level, int):
        sys.stderr.write(f"error: unknown log level {args.log_level!r}\n")
        return EXIT_USAGE
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")

    command = manager.commands[args.command]
    keys = list(command.options) + list(_GLOBAL_KEYS)
    flags = {key: getattr(args, key, None) for key in keys}
    try:
        config = RunConfig.from_sources(args.command, flags, args.config)
    except ConfigError as e:
        sys.stderr.write(f"error: {e}\n")
        return EXIT_USAGE

    if args.output:
        with open(args.output, "w", newline="") as fh:
            return manager.handle(config, out=fh)
    return manager.handle(config)


if __name__ == "__main__":
    sys.exit(main())
