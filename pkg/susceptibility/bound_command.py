"""`bound`: evaluate one closed-form bound over a list of radii."""
import logging
from typing import Callable, Dict, List, Tuple

from . import bounds
from .bounds import BoundValue, ClassStats, NormOrder
from .command_base import CommandResult
from .config import RunConfig
from .errors import ConfigError

logger = logging.getLogger(__name__)

Row = Tuple[float, float, bool, str]


def _norm(config: RunConfig, default: str = "2") -> NormOrder:
    return NormOrder.parse(config.get_str("p", default))


def _stats(config: RunConfig, n: int, density_key: str = "uc") -> ClassStats:
    return ClassStats(n, config.get_float("fc", 0.5, n=n), config.get_float(density_key, 1.0, n=n))


def _bound_row(value: BoundValue) -> Tuple[float, bool, str]:
    return value.probability, value.valid, value.note


class BoundCommand:
    name = "bound"
    help = "Evaluate a susceptibility or expansion lower bound."
    options = {
        "theorem": "which bound to evaluate",
        "n": "ambient dimension",
        "p": "norm order: 0, a positive real, or inf",
        "eps": "radius, or a comma list / start:stop:count grid",
        "fc": "class fraction f_c (default 0.5)",
        "uc": "density supremum U_c on the cube (default 1)",
        "vc": "density supremum V_c on the sphere (default 1)",
        "vol": "set volume",
        "metric": "sphere metric: geodesic, l2 or linf",
        "variant": "simple cube bound variant: mills or as_printed",
        "form": "cube susceptibility form",
        "alpha": "free exponent of the small-p bound",
        "support_vol": "support volume for existence-check",
        "pfool": "fooling probability for transfer",
        "b": "upsampling factor for transfer",
        "direction": "transfer direction: up or down",
    }

    def __init__(self):
        self.theorems: Dict[str, Callable[[RunConfig], List[Tuple[str, float, float, bool, str]]]] = {
            "half-sphere": self._half_sphere,
            "sphere": self._sphere,
            "cube-expansion": self._cube_expansion,
            "cube-expansion-simple": self._cube_expansion_simple,
            "cube": self._cube,
            "small-p": self._small_p,
            "small-p-tight": self._small_p_tight,
            "small-p-alpha": self._small_p_alpha,
            "small-p-susceptibility": self._small_p_susceptibility,
            "sparse": self._sparse,
            "existence": self._existence,
            "existence-check": self._existence_check,
            "transfer": self._transfer,
        }

    def handle(self, config: RunConfig) -> CommandResult:
        theorem = config.get_str("theorem", choices=sorted(self.theorems))
        rows = self.theorems[theorem](config)
        for params, eps, value, valid, note in rows:
            if not valid or note.startswith("vacuous"):
                logger.warning("%s at eps=%g: %s", theorem, eps, note)
        return CommandResult(
            header=["theorem", "parameters", "eps", "value", "valid", "note"],
            rows=[[theorem, params, eps, value, valid, note] for params, eps, value, valid, note in rows],
        )

    @staticmethod
    def _params(config: RunConfig, keys) -> str:
        return ";".join(f"{k}={config.resolved[k]}" for k in keys if k in config.resolved)

    def _each_eps(self, config: RunConfig, n, evaluate, keys) -> List[Tuple[str, float, float, bool, str]]:
        grid = config.get_float_list("eps", n=n)
        out = []
        for eps in grid:
            value, valid, note = evaluate(eps)
            out.append((self._params(config, keys), eps, value, valid, note))
        return out

    def _half_sphere(self, config):
        n = config.get_int("n", minimum=2)
        return self._each_eps(config, n, lambda e: _bound_row(bounds.half_sphere_expansion_bound(n, e)), ["n"])

    def _sphere(self, config):
        n = config.get_int("n", minimum=2)
        stats = _stats(config, n, density_key="vc")
        metric = config.get_str("metric", "geodesic", choices=bounds.SPHERE_METRICS)
        return self._each_eps(
            config, n, lambda e: _bound_row(bounds.sphere_susceptibility_bound(stats, e, metric)), ["n", "fc", "vc", "metric"]
        )

    def _cube_expansion(self, config):
        n = config.get_int("n", minimum=1)
        vol = config.get_float("vol", n=n)
        norm = _norm(config)
        return self._each_eps(
            config, n, lambda e: _bound_row(bounds.cube_expansion_bound_tight(vol, norm, n, e)), ["n", "p", "vol"]
        )

    def _cube_expansion_simple(self, config):
        n = config.get_int("n", minimum=1)
        norm = _norm(config)
        variant = config.get_str("variant", "mills", choices=bounds.SIMPLE_VARIANTS)
        return self._each_eps(
            config, n, lambda e: _bound_row(bounds.cube_expansion_bound_simple(norm, n, e, variant)), ["n", "p", "variant"]
        )

    def _cube(self, config):
        n = config.get_int("n", minimum=1)
        stats = _stats(config, n)
        norm = _norm(config)
        form = config.get_str("form", "tight", choices=bounds.CUBE_FORMS)
        return self._each_eps(
            config, n, lambda e: _bound_row(bounds.cube_susceptibility_bound(stats, norm, e, form)), ["n", "p", "fc", "uc", "form"]
        )

    def _small_p(self, config):
        n = config.get_int("n", minimum=1)
        vol = config.get_float("vol", n=n)
        norm = _norm(config, "0")
        return self._each_eps(
            config, n, lambda e: _bound_row(bounds.small_p_expansion_bound(vol, norm, n, e)), ["n", "p", "vol"]
        )

    def _small_p_tight(self, config):
        n = config.get_int("n", minimum=1)
        vol = config.get_float("vol", n=n)
        norm = _norm(config, "0")
        return self._each_eps(
            config, n, lambda e: _bound_row(bounds.small_p_expansion_bound_tight(vol, norm, n, e)), ["n", "p", "vol"]
        )

    def _small_p_alpha(self, config):
        n = config.get_int("n", minimum=1)
        vol = config.get_float("vol", n=n)
        norm = _norm(config, "0")
        alpha = config.get_float("alpha", 1.0, n=n)
        return self._each_eps(
            config,
            n,
            lambda e: _bound_row(bounds.small_p_expansion_bound_alpha(vol, norm, n, e, alpha)),
            ["n", "p", "vol", "alpha"],
        )

    def _small_p_susceptibility(self, config):
        n = config.get_int("n", minimum=1)
        stats = _stats(config, n)
        norm = _norm(config, "0")
        return self._each_eps(
            config, n, lambda e: _bound_row(bounds.small_p_susceptibility_bound(stats, norm, e)), ["n", "p", "fc", "uc"]
        )

    def _sparse(self, config):
        n = config.get_int("n", minimum=1)
        stats = _stats(config, n)
        return self._each_eps(config, n, lambda e: _bound_row(bounds.sparse_susceptibility_bound(stats, e)), ["n", "fc", "uc"])

    def _existence_n(self, config, norm: NormOrder) -> int:
        if config.has("n"):
            return config.get_int("n", minimum=1)
        if not norm.is_zero and norm.p_star() == 2.0:
            # the threshold does not depend on n once p >= 2
            return config.get_int("n", 1)
        raise ConfigError(f"missing required option --n (the existence threshold depends on n for {norm})")

    def _existence(self, config):
        norm = _norm(config)
        n = self._existence_n(config, norm)

        def evaluate(e):
            result = bounds.existence_support_threshold(norm, n, e)
            return result.threshold, result.valid, result.note

        return self._each_eps(config, n, evaluate, ["n", "p"])

    def _existence_check(self, config):
        norm = _norm(config)
        n = self._existence_n(config, norm)
        support = config.get_float("support_vol", n=n)

        def evaluate(e):
            threshold = bounds.existence_support_threshold(norm, n, e).threshold
            found = bounds.existence_check(support, norm, n, e)
            return threshold, True, f"support_vol={support:.6g} {'>=' if found else '<'} threshold: {str(found).lower()}"

        return self._each_eps(config, n, evaluate, ["n", "p", "support_vol"])

    def _transfer(self, config):
        p_fool = config.get_float("pfool")
        b = config.get_int("b", minimum=1)
        direction = config.get_str("direction", "up", choices=("up", "down"))

        def evaluate(e):
            result = bounds.mnist_rescale_transfer(e, p_fool, b, direction)
            return result.eps, True, f"p_fool={result.p_fool:.17g}"

        return self._each_eps(config, None, evaluate, ["pfool", "b", "direction"])
