"""CSV writer shared by every command: '#' comments, a header row, then data rows."""
import csv
import math
from typing import Any, Iterable, Sequence, TextIO

from .config import RunConfig


def format_cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return format(value, ".17g")
    return str(value)


def write_comments(stream: TextIO, tool: str, version: str, config: RunConfig, seed=None) -> None:
    stream.write(f"# tool: {tool} {version}\n")
    stream.write(f"# command: {config.command}\n")
    stream.write(f"# seed: {'none' if seed is None else seed}\n")
    for key, value in config.resolved.items():
        stream.write(f"# config: {key}={value}\n")


def write_table(stream: TextIO, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_cell(v) for v in row])
