"""Run configuration: flags over an optional key=value file, with typed getters.

Numeric values are expressions, so ``--eps "sqrt(n*log(2)/2)"`` works; they are
evaluated with sympy when it is installed and with a small AST evaluator
otherwise.
"""

try:
    from sympy import E, Integer, sympify
    _HAS_SYMPY = True
except Exception:
    sympify = None
    Integer = None
    E = None
    _HAS_SYMPY = False

import ast
import logging
import math
import operator as _operator
import re
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence

import numpy as np

from .errors import ConfigError

logger = logging.getLogger(__name__)

_MISSING = object()
_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}
_INFINITE = {"inf", "+inf", "infinity", "∞", "oo"}


def normalize_key(key: str) -> str:
    return key.strip().lstrip("-").lower().replace("-", "_")


def _normalize(expr: str) -> str:
    expr = expr.strip()
    expr = expr.replace('−', '-')  # unicode minus
    expr = expr.replace('×', '*')
    expr = expr.replace('÷', '/')
    expr = expr.replace('^', '**')
    expr = expr.replace('π', 'pi')
    # implicit multiplication such as 2n or 2pi; 1e-3 stays a literal
    expr = re.sub(r"(?P<num>\d)(?![eE][-+]?\d)\s*(?P<var>[a-zA-Z(])", r"\g<num>*\g<var>", expr)
    return expr


_FUNCS = {"sqrt": math.sqrt, "log": math.log, "exp": math.exp, "asin": math.asin, "sin": math.sin, "cos": math.cos}
_OPS = {
    ast.Add: _operator.add,
    ast.Sub: _operator.sub,
    ast.Mult: _operator.mul,
    ast.Div: _operator.truediv,
    ast.Pow: _operator.pow,
}


def _check_allowed(expr: str, names: Sequence[str]) -> None:
    """Reject anything but numbers, + - * / **, the given names and the _FUNCS calls.

    Runs before sympify, which evaluates its input with eval().
    """
    try:
        tree = ast.parse(expr, mode='eval')
    except SyntaxError as e:
        raise ConfigError(f"cannot parse {expr!r}: {e.msg}")

    def _check(n):
        if isinstance(n, ast.Expression):
            return _check(n.body)
        if isinstance(n, ast.Constant) and isinstance(n.value, (int, float)) and not isinstance(n.value, bool):
            return
        if isinstance(n, ast.BinOp) and type(n.op) in _OPS:
            _check(n.left)
            return _check(n.right)
        if isinstance(n, ast.UnaryOp) and isinstance(n.op, (ast.UAdd, ast.USub)):
            return _check(n.operand)
        if isinstance(n, ast.Name):
            if n.id in names:
                return
            raise ConfigError(f"{expr!r} depends on unknown name {n.id!r}")
        if (
            isinstance(n, ast.Call)
            and isinstance(n.func, ast.Name)
            and n.func.id in _FUNCS
            and len(n.args) == 1
            and not n.keywords
        ):
            return _check(n.args[0])
        raise ConfigError(f"{expr!r} is not a plain numeric expression")

    _check(tree)


def _safe_eval(expr: str, names: Mapping[str, float]):
    """Numeric expressions with +, -, *, /, **, the names given and a few math functions."""
    node = ast.parse(expr, mode='eval')

    def _eval(n):
        if isinstance(n, ast.Expression):
            return _eval(n.body)
        if isinstance(n, ast.Constant) and isinstance(n.value, (int, float)):
            return n.value
        if isinstance(n, ast.BinOp) and type(n.op) in _OPS:
            return _OPS[type(n.op)](_eval(n.left), _eval(n.right))
        if isinstance(n, ast.UnaryOp) and isinstance(n.op, (ast.UAdd, ast.USub)):
            operand = _eval(n.operand)
            return -operand if isinstance(n.op, ast.USub) else operand
        if isinstance(n, ast.Name):
            if n.id in names:
                return names[n.id]
            raise ValueError(f"unknown name {n.id!r}")
        if isinstance(n, ast.Call) and isinstance(n.func, ast.Name) and n.func.id in _FUNCS and len(n.args) == 1:
            return _FUNCS[n.func.id](_eval(n.args[0]))
        raise ValueError(f"unsupported expression: {ast.dump(n)}")

    return _eval(node)


@lru_cache(maxsize=256)
def evaluate_expression(text: str, n: Optional[int] = None) -> float:
    """Evaluate a numeric expression that may mention n, pi and e."""
    raw = text.strip()
    if raw.lower() in _INFINITE:
        return math.inf
    expr = _normalize(raw)
    if not expr:
        raise ConfigError("empty numeric value")
    try:
        value = float(expr)
    except ValueError:
        pass
    else:
        if math.isnan(value):
            raise ConfigError(f"{text!r} is not a number")
        return value

    _check_allowed(expr, ("pi", "e") if n is None else ("pi", "e", "n"))
    if _HAS_SYMPY:
        local = {"e": E}
        if n is not None:
            local["n"] = Integer(n)
        try:
            value = sympify(expr, locals=local)
        except Exception as e:
            raise ConfigError(f"cannot parse {text!r}: {e}")
        if not hasattr(value, "evalf"):
            raise ConfigError(f"{text!r} is not a single number")
        if value.free_symbols:
            names = ", ".join(sorted(str(s) for s in value.free_symbols))
            raise ConfigError(f"{text!r} depends on unknown names: {names}")
        try:
            return float(value.evalf(30))
        except TypeError as e:
            raise ConfigError(f"{text!r} is not a real number: {e}")

    logger.warning("sympy not installed; evaluating %r with the restricted evaluator", text)
    names = {"pi": math.pi, "e": math.e}
    if n is not None:
        names["n"] = float(n)
    try:
        return float(_safe_eval(expr, names))
    except (ValueError, SyntaxError, ZeroDivisionError, OverflowError) as e:
        raise ConfigError(f"cannot evaluate {text!r}: {e}")


def load_config_file(path: str) -> Dict[str, str]:
    """key=value lines; '#' starts a comment, blank lines are skipped."""
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e}")
    values: Dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, value = line.split("=", 1)
        values[normalize_key(key)] = value.strip()
    return values


@dataclass
class RunConfig:
    """Raw string values for one command; getters validate and record what was used."""

    command: str
    values: Dict[str, str] = field(default_factory=dict)
    resolved: Dict[str, str] = field(default_factory=dict)

    @classmethod
    def from_sources(cls, command: str, flags: Mapping[str, Optional[str]], config_path: Optional[str] = None) -> "RunConfig":
        values = load_config_file(config_path) if config_path else {}
        for key, value in flags.items():
            if value is not None:
                values[normalize_key(key)] = str(value)
        return cls(command, values)

    def has(self, key: str) -> bool:
        return normalize_key(key) in self.values

    def _raw(self, key: str, default):
        key = normalize_key(key)
        if key in self.values:
            return self.values[key]
        if default is _MISSING:
            raise ConfigError(f"missing required option --{key.replace('_', '-')}")
        return default

    def _record(self, key: str, value) -> None:
        if isinstance(value, float):
            text = format(value, ".17g")
        elif isinstance(value, (list, tuple)):
            text = ",".join(format(v, ".17g") if isinstance(v, float) else str(v) for v in value)
        else:
            text = str(value)
        self.resolved[normalize_key(key)] = text

    def get_str(self, key: str, default=_MISSING, choices: Optional[Sequence[str]] = None) -> str:
        value = self._raw(key, default)
        if value is not None:
            value = str(value).strip()
            if choices is not None and value not in choices:
                raise ConfigError(f"--{normalize_key(key).replace('_', '-')} must be one of {', '.join(choices)}, got {value!r}")
        self._record(key, value)
        return value

    def get_float(self, key: str, default=_MISSING, n: Optional[int] = None) -> float:
        value = self._raw(key, default)
        if value is not None and not isinstance(value, float):
            value = evaluate_expression(str(value), n)
        self._record(key, value)
        return value

    def get_int(self, key: str, default=_MISSING, minimum: Optional[int] = None, n: Optional[int] = None) -> int:
        value = self._raw(key, default)
        if value is not None and not isinstance(value, int):
            number = evaluate_expression(str(value), n)
            if not float(number).is_integer():
                raise ConfigError(f"--{normalize_key(key).replace('_', '-')} must be an integer, got {value!r}")
            value = int(number)
        if value is not None and minimum is not None and value < minimum:
            raise ConfigError(f"--{normalize_key(key).replace('_', '-')} must be >= {minimum}, got {value}")
        self._record(key, value)
        return value

    def get_float_list(self, key: str, default=_MISSING, n: Optional[int] = None) -> List[float]:
        """Comma-separated expressions, or start:stop:count for an evenly spaced grid."""
        value = self._raw(key, default)
        if isinstance(value, (list, tuple)):
            values = [float(v) for v in value]
        else:
            text = str(value).strip()
            if text.count(":") == 2 and "," not in text:
                start, stop, count = text.split(":")
                num = evaluate_expression(count, n)
                if not num.is_integer() or num < 1:
                    raise ConfigError(f"grid count must be a positive integer, got {count!r}")
                grid = np.linspace(evaluate_expression(start, n), evaluate_expression(stop, n), int(num))
                values = [float(v) for v in grid]
            else:
                values = [evaluate_expression(part, n) for part in text.split(",") if part.strip()]
        if not values:
            raise ConfigError(f"--{normalize_key(key).replace('_', '-')} is empty")
        self._record(key, values)
        return values

    def get_bool(self, key: str, default=_MISSING) -> bool:
        value = self._raw(key, default)
        if not isinstance(value, bool):
            text = str(value).strip().lower()
            if text not in _TRUE | _FALSE:
                raise ConfigError(f"--{normalize_key(key).replace('_', '-')} must be true or false, got {value!r}")
            value = text in _TRUE
        self._record(key, value)
        return value

    def require_seed(self) -> int:
        """The run seed; commands that sample refuse to run without one."""
        if not self.has("seed"):
            raise ConfigError(f"--seed is required for '{self.command}' (there is no clock-based default)")
        seed = self.get_int("seed", minimum=0)
        if seed >= 2 ** 64:
            raise ConfigError(f"--seed must fit in 64 bits, got {seed}")
        return seed
