"""`expand`: a lower bound, the exact oracle and a Monte Carlo estimate side by side, per ε."""
import logging
import math
from typing import Optional, Tuple

from . import bounds, geometry
from .bounds import NormOrder
from .command_base import CommandResult
from .config import RunConfig
from .errors import CapabilityError, DomainError

logger = logging.getLogger(__name__)

SETS = ("half-sphere", "slab", "subcube", "halfspace")
SLAB_VARIANTS = ("tight",) + bounds.SIMPLE_VARIANTS


class ExpandCommand:
    name = "expand"
    help = "Compare an expansion bound with the exact expansion and a Monte Carlo estimate."
    options = {
        "set": "half-sphere, slab, subcube or halfspace",
        "n": "ambient dimension",
        "p": "metric: geodesic (sphere) or a norm order",
        "eps": "radius grid",
        "width": "slab width a (default 0.5)",
        "side": "sub-cube side a (default 0.5)",
        "offset": "half-space offset (default 0)",
        "variant": "slab bound: tight, mills or as_printed",
        "samples": "Monte Carlo samples per radius (0 skips sampling)",
    }

    def handle(self, config: RunConfig) -> CommandResult:
        kind = config.get_str("set", choices=SETS)
        n = config.get_int("n", minimum=1)
        samples = config.get_int("samples", 0, minimum=0)
        seed = config.require_seed() if samples > 0 else None
        threads = config.get_int("threads", 1, minimum=1)

        region, metric, row = self._setup(kind, n, config)
        grid = config.get_float_list("eps", n=n)

        rows = []
        for eps in grid:
            bound, oracle, note = row(eps)
            if bound is not None and oracle is not None and bound > oracle:
                note = "; ".join(filter(None, ["bound exceeds exact expansion", note]))
                logger.warning("%s eps=%g: bound %.6g > exact %.6g", kind, eps, bound, oracle)
            mc, stderr = None, None
            if samples > 0:
                estimate = geometry.mc_expansion_measure(region, n, metric, eps, samples, seed, threads)
                mc, stderr = estimate.estimate, estimate.stderr
            rows.append([eps, bound, oracle, mc, stderr, note])
        return CommandResult(
            header=["eps", "bound", "oracle_exact", "mc_estimate", "mc_stderr", "note"],
            rows=rows,
            seed=seed,
        )

    def _setup(self, kind: str, n: int, config: RunConfig):
        if kind == "half-sphere":
            metric = geometry.resolve_metric(config.get_str("p", geometry.GEODESIC))
            if metric != geometry.GEODESIC:
                raise CapabilityError(f"half-sphere expansion is available in the geodesic metric only, not {metric}")
            if n < 2:
                raise DomainError(f"the sphere needs n >= 2, got {n}")

            def row(eps) -> Tuple[Optional[float], Optional[float], str]:
                b = bounds.half_sphere_expansion_bound(n, eps)
                return b.probability, geometry.half_sphere_expansion_exact(n, eps), b.note

            return geometry.SphereCap(math.pi / 2.0), metric, row

        if kind == "slab":
            a = config.get_float("width", 0.5, n=n)
            norm = self._norm(config, "2")
            variant = config.get_str("variant", "tight", choices=SLAB_VARIANTS)

            def row(eps):
                oracle = geometry.slab_expansion_exact(a, eps, norm)
                if norm.is_zero:
                    b = bounds.small_p_expansion_bound(a, norm, n, eps)
                elif variant == "tight":
                    b = bounds.cube_expansion_bound_tight(a, norm, n, eps)
                elif eps == 0.0:
                    return None, oracle, "simple bound needs eps > 0"
                else:
                    b = bounds.cube_expansion_bound_simple(norm, n, eps, variant)
                    if a < 0.5:
                        return b.probability, oracle, "; ".join(filter(None, ["simple bound assumes vol >= 1/2", b.note]))
                return b.probability, oracle, b.note

            return geometry.CubeSlab(a), norm, row

        if kind == "subcube":
            a = config.get_float("side", 0.5, n=n)
            norm = self._norm(config, "0")
            vol = a ** n
            if vol <= 0.0:
                raise DomainError(f"sub-cube volume {a}^{n} underflows")

            def row(eps):
                b = bounds.small_p_expansion_bound(vol, norm, n, eps)
                if norm.is_zero:
                    return b.probability, geometry.subcube_hamming_expansion_exact(a, n, eps), b.note
                return b.probability, None, "; ".join(filter(None, ["no closed-form expansion for p > 0", b.note]))

            return geometry.SubCube(a), norm, row

        offset = config.get_float("offset", 0.0, n=n)
        norm = self._norm(config, "2")
        if norm.is_zero or norm.is_infinity or norm.p != 2.0:
            raise CapabilityError(f"Gaussian isoperimetry is stated for l2, not {norm}")
        mass = geometry.GaussianHalfSpace(offset).exact_measure(n)

        def row(eps):
            value = geometry.gaussian_halfspace_expansion_exact(mass, eps)
            return value, value, ""

        return geometry.GaussianHalfSpace(offset), norm, row

    @staticmethod
    def _norm(config: RunConfig, default: str) -> NormOrder:
        metric = geometry.resolve_metric(config.get_str("p", default))
        if metric == geometry.GEODESIC:
            raise CapabilityError("the geodesic metric applies to the sphere only")
        return metric
