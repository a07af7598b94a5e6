from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Protocol, Sequence

from .config import RunConfig


@dataclass
class CommandResult:
    """Table produced by a command plus its verdict."""

    header: Sequence[str]
    rows: List[Sequence[Any]] = field(default_factory=list)
    exit_code: int = 0
    message: str = ""
    seed: Optional[int] = None


class BaseCommand(Protocol):
    """Minimal command interface."""

    name: str
    help: str
    options: Dict[str, str]

    def handle(self, config: RunConfig) -> CommandResult:
        """Run the command on a resolved configuration."""

        ...
