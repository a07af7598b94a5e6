__version__ = "0.1.0"

from .manager import CommandManager

__all__ = ["CommandManager", "__version__"]
