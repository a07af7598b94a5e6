"""Exact expansion oracles and Monte Carlo estimates on the sphere, cube and Gaussian space.

Sets are small frozen descriptors with a closed-form point-to-set distance.
``mc_expansion_measure`` samples the ambient space, counts the points within
ε of the set and reports a Bernoulli estimate with its standard error.
Samples are split into shards whose size depends only on n; each shard draws
from its own Philox stream keyed by (seed, shard), so the count does not
depend on how many threads run the shards.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Protocol, Sequence, Tuple, Union

import numpy as np
from scipy import integrate, special, stats

from .bounds import NormOrder, gaussian_shift
from .errors import CapabilityError, DomainError
from .specfun import std_normal_cdf, std_normal_cdf_array, std_normal_quantile

logger = logging.getLogger(__name__)

Metric = Union[str, NormOrder]

GEODESIC = "geodesic"
SPHERE_TOL = 1e-9
GAUSSIAN_CAP_CUTOFF = 10 ** 6
QUAD_RTOL = 1e-10
MAX_SHARD_ROWS = 65536
SHARD_BUDGET = 2 ** 22


def resolve_metric(metric: Metric) -> Metric:
    """'geodesic' or a NormOrder; strings such as 'l2', 'linf', '0' are parsed."""
    if isinstance(metric, NormOrder):
        return metric
    if isinstance(metric, str) and metric.strip().lower() == GEODESIC:
        return GEODESIC
    return NormOrder.parse(metric)


def _check_n(n, minimum: int = 1) -> int:
    if int(n) != n or n < minimum:
        raise DomainError(f"dimension must be an integer >= {minimum}, got {n}")
    return int(n)


# -- sampling -------------------------------------------------------------------


def sample_sphere_batch(count: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """count uniform points on S^{n-1}: normalized Gaussian vectors, one per row."""
    n = _check_n(n, 2)
    g = rng.standard_normal((count, n))
    norms = np.linalg.norm(g, axis=1, keepdims=True)
    # a zero Gaussian vector has probability zero; redraw rather than divide by it
    while np.any(norms == 0.0):
        bad = norms[:, 0] == 0.0
        g[bad] = rng.standard_normal((int(bad.sum()), n))
        norms = np.linalg.norm(g, axis=1, keepdims=True)
    return g / norms


def sample_sphere(n: int, rng: np.random.Generator) -> np.ndarray:
    return sample_sphere_batch(1, n, rng)[0]


def sample_cube_batch(count: int, n: int, rng: np.random.Generator) -> np.ndarray:
    return rng.random((count, _check_n(n)))


def sample_gaussian_batch(count: int, n: int, rng: np.random.Generator) -> np.ndarray:
    return rng.standard_normal((count, _check_n(n)))


# -- distances --------------------------------------------------------------------


def lp_rows(diff: np.ndarray, norm: NormOrder) -> np.ndarray:
    """Row-wise ‖·‖_p of a 2-D array; ℓ0 counts nonzero entries, p < 1 is the quasi-norm."""
    if norm.is_zero:
        return np.count_nonzero(diff, axis=1).astype(float)
    if norm.is_infinity:
        return np.max(np.abs(diff), axis=1)
    return np.linalg.norm(diff, ord=norm.p, axis=1)


def lp_power_distance(x, y, p: float) -> float:
    """Σ|x_i - y_i|^p, the additive form of the ℓp distance for 0 < p < 1."""
    x, y = _pair(x, y)
    if not p > 0:
        raise DomainError(f"p must be > 0, got {p}")
    return float(np.sum(np.abs(x - y) ** p))


def geodesic_rows(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    # atan2 form stays accurate for nearly equal and nearly antipodal points
    return 2.0 * np.arctan2(np.linalg.norm(x - y, axis=-1), np.linalg.norm(x + y, axis=-1))


def _pair(x, y) -> Tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise DomainError(f"dimension mismatch: {x.shape} vs {y.shape}")
    return x, y


def _check_on_sphere(points: np.ndarray) -> None:
    if not np.all(np.abs(np.linalg.norm(np.atleast_2d(points), axis=-1) - 1.0) <= SPHERE_TOL):
        raise DomainError("geodesic distance needs points on the unit sphere")


def distance(x, y, metric: Metric) -> float:
    x, y = _pair(x, y)
    metric = resolve_metric(metric)
    if metric == GEODESIC:
        _check_on_sphere(x)
        _check_on_sphere(y)
        return float(geodesic_rows(x, y))
    return float(lp_rows((x - y)[None, :], metric)[0])


# -- exact oracles ------------------------------------------------------------------


def _cap_quadrature(n: int, theta: float) -> float:
    """∫₀^θ sin^{n-2} / ∫₀^π sin^{n-2} for θ ≤ π/2, integrand scaled by its peak on [0, θ]."""
    if theta == 0.0:
        return 0.0
    k = n - 2
    if k == 0:
        return theta / math.pi
    log_peak = k * math.log(math.sin(theta))

    def scaled(t: float) -> float:
        s = math.sin(t)
        return 0.0 if s <= 0.0 else math.exp(k * math.log(s) - log_peak)

    def unit(t: float) -> float:
        return math.sin(t) ** k

    part, _ = integrate.quad(scaled, 0.0, theta, epsabs=0.0, epsrel=QUAD_RTOL, limit=500)
    half, _ = integrate.quad(unit, 0.0, math.pi / 2.0, epsabs=0.0, epsrel=QUAD_RTOL, limit=500)
    if part <= 0.0:
        return 0.0
    return math.exp(math.log(part) + log_peak - math.log(2.0 * half))


def cap_measure(n: int, theta: float, method: str = "beta") -> float:
    """Normalized measure of the polar cap {x : angle(x, e₁) ≤ θ} on S^{n-1}.

    ``beta`` evaluates ½·I_{sin²θ}((n-1)/2, ½); ``quadrature`` integrates
    sin^{n-2} directly. Both mirror at π/2, so θ = π/2 gives exactly 1/2.
    """
    n = _check_n(n, 2)
    theta = float(theta)
    if not (0.0 <= theta <= math.pi):
        raise DomainError(f"cap angle must lie in [0, pi], got {theta}")
    if method not in ("beta", "quadrature"):
        raise DomainError(f"unknown cap method {method!r}")
    if n > GAUSSIAN_CAP_CUTOFF:
        logger.warning("cap_measure: n=%d above %d, using the Gaussian approximation", n, GAUSSIAN_CAP_CUTOFF)
        return std_normal_cdf(-math.sqrt(n) * math.cos(theta))
    upper = theta > math.pi / 2.0
    t = math.pi - theta if upper else theta
    if method == "beta":
        lower = 0.5 * float(special.betainc((n - 1) / 2.0, 0.5, math.sin(t) ** 2))
    else:
        lower = _cap_quadrature(n, t)
    return 1.0 - lower if upper else lower


def half_sphere_expansion_exact(n: int, eps: float, method: str = "beta") -> float:
    eps = float(eps)
    if not (0.0 <= eps <= math.pi / 2.0):
        raise DomainError(f"half-sphere expansion needs eps in [0, pi/2], got {eps}")
    return cap_measure(n, math.pi / 2.0 + eps, method=method)


def slab_expansion_exact(a: float, eps: float, norm: NormOrder) -> float:
    """Volume of {x₁ ≤ a} grown by ε; the distance to the slab involves x₁ alone."""
    if not (0.0 < a < 1.0):
        raise DomainError(f"slab width must lie in (0, 1), got {a}")
    if not (math.isfinite(eps) and eps >= 0.0):
        raise DomainError(f"eps must be finite and >= 0, got {eps}")
    if norm.is_zero:
        return a if eps < 1.0 else 1.0
    return min(1.0, a + eps)


def subcube_hamming_expansion_exact(a: float, n: int, eps: int) -> float:
    """Volume of points with at most ε coordinates above a: the binomial tail Σ_{k≤ε} C(n,k)(1-a)^k a^{n-k}."""
    if not (0.0 < a < 1.0):
        raise DomainError(f"sub-cube side must lie in (0, 1), got {a}")
    n = _check_n(n)
    if int(eps) != eps or eps < 0:
        raise DomainError(f"l0 radius must be a nonnegative integer, got {eps}")
    eps = int(eps)
    if eps >= n:
        return 1.0
    k = np.arange(eps + 1)
    log_terms = stats.binom.logpmf(k, n, 1.0 - a)
    return min(1.0, float(np.exp(special.logsumexp(log_terms))))


def gaussian_halfspace_expansion_exact(mass: float, eps: float) -> float:
    """Φ(Φ⁻¹(mass) + ε): exact for half-spaces, a lower bound for any Gaussian set of that mass."""
    if not (0.0 < mass < 1.0):
        raise DomainError(f"Gaussian mass must lie in (0, 1), got {mass}")
    if not (math.isfinite(eps) and eps >= 0.0):
        raise DomainError(f"eps must be finite and >= 0, got {eps}")
    return std_normal_cdf(std_normal_quantile(mass) + eps)


def gauss_to_cube_transport(z) -> np.ndarray:
    """Coordinatewise Φ; pushes the standard Gaussian onto the uniform cube."""
    return std_normal_cdf_array(z)


def pullback_lipschitz_constant(norm: NormOrder, n: int) -> float:
    """n^{1/p*}/√(2πn): ‖Φ(z) - Φ(w)‖_p ≤ this · ‖z - w‖₂."""
    return 1.0 / gaussian_shift(norm, _check_n(n))


# -- set descriptors --------------------------------------------------------------------


class ExpansionSet(Protocol):
    kind: str
    ambient: str

    def distance_to(self, points: np.ndarray, metric: Metric) -> np.ndarray:
        ...

    def exact_measure(self, n: int) -> float:
        ...


def _unsupported(kind: str, metric: Metric) -> CapabilityError:
    return CapabilityError(f"set {kind!r} has no closed-form distance in metric {metric}")


@dataclass(frozen=True, eq=False)
class SphereCap:
    """{x ∈ S^{n-1} : angle(x, axis) ≤ angle}; axis defaults to e₁."""

    angle: float = math.pi / 2.0
    axis: Optional[Sequence[float]] = None
    kind: str = field(default="sphere_cap", init=False)
    ambient: str = field(default="sphere", init=False)

    def __post_init__(self):
        if not (0.0 <= self.angle <= math.pi):
            raise DomainError(f"cap angle must lie in [0, pi], got {self.angle}")
        if self.axis is not None:
            _check_on_sphere(np.asarray(self.axis, dtype=float))

    def _cosines(self, points: np.ndarray) -> np.ndarray:
        if self.axis is None:
            return points[:, 0]
        axis = np.asarray(self.axis, dtype=float)
        if axis.shape[0] != points.shape[1]:
            raise DomainError(f"cap axis has dimension {axis.shape[0]}, points have {points.shape[1]}")
        return points @ axis

    def distance_to(self, points: np.ndarray, metric: Metric) -> np.ndarray:
        metric = resolve_metric(metric)
        points = np.atleast_2d(points)
        angles = np.arccos(np.clip(self._cosines(points), -1.0, 1.0))
        geodesic = np.maximum(0.0, angles - self.angle)
        if metric == GEODESIC:
            return geodesic
        if isinstance(metric, NormOrder) and not metric.is_zero and not metric.is_infinity and metric.p == 2.0:
            # nearest cap point lies on the great circle through x and the axis
            return 2.0 * np.sin(geodesic / 2.0)
        raise _unsupported(self.kind, metric)

    def exact_measure(self, n: int) -> float:
        return cap_measure(n, self.angle)


@dataclass(frozen=True)
class CubeSlab:
    """{x ∈ [0,1]ⁿ : x_i ≤ width} for i = coord_index."""

    width: float
    coord_index: int = 0
    kind: str = field(default="cube_slab", init=False)
    ambient: str = field(default="cube", init=False)

    def __post_init__(self):
        if not (0.0 < self.width < 1.0):
            raise DomainError(f"slab width must lie in (0, 1), got {self.width}")
        if self.coord_index < 0:
            raise DomainError(f"coord_index must be >= 0, got {self.coord_index}")

    def distance_to(self, points: np.ndarray, metric: Metric) -> np.ndarray:
        metric = resolve_metric(metric)
        if metric == GEODESIC:
            raise _unsupported(self.kind, metric)
        points = np.atleast_2d(points)
        if self.coord_index >= points.shape[1]:
            raise DomainError(f"coord_index {self.coord_index} out of range for n={points.shape[1]}")
        excess = np.maximum(0.0, points[:, self.coord_index] - self.width)
        if metric.is_zero:
            return (excess > 0.0).astype(float)
        return excess

    def exact_measure(self, n: int) -> float:
        return self.width


@dataclass(frozen=True)
class SubCube:
    """[0, side]ⁿ."""

    side: float
    kind: str = field(default="sub_cube", init=False)
    ambient: str = field(default="cube", init=False)

    def __post_init__(self):
        if not (0.0 < self.side < 1.0):
            raise DomainError(f"sub-cube side must lie in (0, 1), got {self.side}")

    def distance_to(self, points: np.ndarray, metric: Metric) -> np.ndarray:
        metric = resolve_metric(metric)
        if metric == GEODESIC:
            raise _unsupported(self.kind, metric)
        excess = np.maximum(0.0, np.atleast_2d(points) - self.side)
        return lp_rows(excess, metric)

    def exact_measure(self, n: int) -> float:
        return float(self.side ** _check_n(n))


@dataclass(frozen=True)
class GaussianHalfSpace:
    """{z ∈ ℝⁿ : z₁ ≤ offset} under the standard Gaussian."""

    offset: float = 0.0
    kind: str = field(default="gaussian_halfspace", init=False)
    ambient: str = field(default="gaussian", init=False)

    def __post_init__(self):
        if not math.isfinite(self.offset):
            raise DomainError(f"half-space offset must be finite, got {self.offset}")

    def distance_to(self, points: np.ndarray, metric: Metric) -> np.ndarray:
        metric = resolve_metric(metric)
        if metric == GEODESIC:
            raise _unsupported(self.kind, metric)
        excess = np.maximum(0.0, np.atleast_2d(points)[:, 0] - self.offset)
        if metric.is_zero:
            return (excess > 0.0).astype(float)
        return excess

    def exact_measure(self, n: int) -> float:
        return std_normal_cdf(self.offset)


@dataclass(frozen=True)
class FiniteUnion:
    """Union of sets sharing one ambient space; distance is the smallest member distance."""

    members: Tuple[ExpansionSet, ...]
    kind: str = field(default="finite_union", init=False)

    def __post_init__(self):
        if not self.members:
            raise DomainError("a finite union needs at least one member")
        ambients = {m.ambient for m in self.members}
        if len(ambients) != 1:
            raise DomainError(f"union members live in different spaces: {sorted(ambients)}")

    @property
    def ambient(self) -> str:
        return self.members[0].ambient

    def distance_to(self, points: np.ndarray, metric: Metric) -> np.ndarray:
        return np.min(np.stack([m.distance_to(points, metric) for m in self.members]), axis=0)

    def exact_measure(self, n: int) -> float:
        if len(self.members) == 1:
            return self.members[0].exact_measure(n)
        raise CapabilityError("no closed-form measure for a union of several sets")


# -- Monte Carlo ----------------------------------------------------------------------


@dataclass(frozen=True)
class ExpansionEstimate:
    estimate: float
    stderr: float
    samples: int
    seed: int


_SAMPLERS = {
    "sphere": sample_sphere_batch,
    "cube": sample_cube_batch,
    "gaussian": sample_gaussian_batch,
}


def shard_rows(n: int) -> int:
    """Rows per shard; a function of n only so results never depend on the worker count."""
    return max(1, min(MAX_SHARD_ROWS, SHARD_BUDGET // n))


def shard_generator(seed: int, shard: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(shard,))))


def _count_shard(region: ExpansionSet, n: int, metric: Metric, eps: float, seed: int, shard: int, rows: int) -> int:
    rng = shard_generator(seed, shard)
    points = _SAMPLERS[region.ambient](rows, n, rng)
    return int(np.count_nonzero(region.distance_to(points, metric) <= eps))


def mc_expansion_measure(
    region: ExpansionSet,
    n: int,
    metric: Metric,
    eps: float,
    samples: int,
    seed: int,
    threads: int = 1,
) -> ExpansionEstimate:
    """Bernoulli estimate of the measure of region's ε-expansion."""
    n = _check_n(n, 2 if region.ambient == "sphere" else 1)
    metric = resolve_metric(metric)
    if int(samples) != samples or samples < 1:
        raise DomainError(f"samples must be a positive integer, got {samples}")
    if int(seed) != seed or not (0 <= seed < 2 ** 64):
        raise DomainError(f"seed must be a 64-bit unsigned integer, got {seed}")
    if not (math.isfinite(eps) and eps >= 0.0):
        raise DomainError(f"eps must be finite and >= 0, got {eps}")
    if region.ambient not in _SAMPLERS:
        raise CapabilityError(f"no sampler for ambient space {region.ambient!r}")
    # fail on an unsupported metric before spawning work
    region.distance_to(_SAMPLERS[region.ambient](1, n, shard_generator(seed, 0)), metric)

    samples, seed = int(samples), int(seed)
    rows = shard_rows(n)
    jobs = []
    for shard, start in enumerate(range(0, samples, rows)):
        jobs.append((shard, min(rows, samples - start)))
    logger.debug("mc_expansion_measure: %s n=%d samples=%d shards=%d threads=%d", region.kind, n, samples, len(jobs), threads)

    if threads <= 1 or len(jobs) == 1:
        hits = sum(_count_shard(region, n, metric, eps, seed, s, r) for s, r in jobs)
    else:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            hits = sum(ex.map(lambda job: _count_shard(region, n, metric, eps, seed, *job), jobs))

    estimate = hits / samples
    stderr = math.sqrt(estimate * (1.0 - estimate) / samples)
    return ExpansionEstimate(estimate, stderr, samples, seed)
