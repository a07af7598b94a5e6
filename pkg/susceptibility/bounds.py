"""Closed-form lower bounds on ε-expansions and adversarial susceptibility.

Every bound returns a :class:`BoundValue`: a probability clamped to [0, 1],
a validity flag and a short note. A formula that drops to zero or below is
still a true (vacuous) statement and comes back with ``valid=True`` and a
note; only a violated theorem hypothesis raises :class:`PreconditionError`.

Exponentials are assembled in log-space and exponentiated once, so n up to
10⁶ neither overflows nor underflows.
"""
import logging
import math
from dataclasses import dataclass
from typing import Union

from .errors import DomainError, PreconditionError
from .specfun import (
    log_std_normal_sf,
    std_normal_cdf,
    std_normal_quantile,
)

logger = logging.getLogger(__name__)

_LOG_2PI = math.log(2.0 * math.pi)
_LOG_SQRT_PI_OVER_8 = 0.5 * math.log(math.pi / 8.0)
_LOG_HALF = math.log(0.5)

SIMPLE_VARIANTS = ("mills", "as_printed")
CUBE_FORMS = ("tight", "simple_mills", "simple_as_printed", "linf_refined")
SPHERE_METRICS = ("geodesic", "l2", "linf")

AS_PRINTED_NOTE = (
    "as printed: not a valid lower bound in general "
    "(slab a=1/2, n=100, p=2, eps=0.2 has exact expansion 0.7)"
)


@dataclass(frozen=True)
class NormOrder:
    """Which ℓp geometry is in force: p = 0, finite p > 0, or ∞."""

    kind: str
    p: float = 0.0

    def __post_init__(self):
        if self.kind not in ("zero", "finite", "infinity"):
            raise DomainError(f"unknown norm kind {self.kind!r}")
        if self.kind == "finite" and not (math.isfinite(self.p) and self.p > 0.0):
            raise DomainError(f"finite norm order needs p > 0, got {self.p}")

    @classmethod
    def zero(cls) -> "NormOrder":
        return cls("zero", 0.0)

    @classmethod
    def finite(cls, p: float) -> "NormOrder":
        if p == 0:
            return cls.zero()
        return cls("finite", float(p))

    @classmethod
    def infinity(cls) -> "NormOrder":
        return cls("infinity", math.inf)

    @classmethod
    def parse(cls, text: Union[str, float, int, "NormOrder"]) -> "NormOrder":
        if isinstance(text, NormOrder):
            return text
        if isinstance(text, (int, float)):
            return cls.infinity() if math.isinf(text) else cls.finite(float(text))
        t = str(text).strip().lower()
        if t.startswith("l") and t not in ("linf",):
            t = t[1:]
        if t in ("inf", "linf", "infinity", "∞", "l∞"):
            return cls.infinity()
        try:
            value = float(t)
        except ValueError:
            raise DomainError(f"cannot parse norm order {text!r}")
        if math.isinf(value):
            return cls.infinity()
        if value < 0:
            raise DomainError(f"norm order must be >= 0, got {text!r}")
        return cls.finite(value)

    @property
    def is_zero(self) -> bool:
        return self.kind == "zero"

    @property
    def is_infinity(self) -> bool:
        return self.kind == "infinity"

    def p_star(self) -> float:
        """min(p, 2); ∞ counts as 2. Undefined for p = 0."""
        if self.is_zero:
            raise DomainError("p* is undefined for the l0 metric; use the small-p bounds")
        if self.is_infinity:
            return 2.0
        return min(self.p, 2.0)

    def __str__(self) -> str:
        if self.is_zero:
            return "l0"
        if self.is_infinity:
            return "linf"
        return f"l{self.p:g}"


@dataclass(frozen=True)
class ClassStats:
    """Scalar constants a bound consumes for one class c."""

    n: int
    f_c: float
    density_sup: float = 1.0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise DomainError(f"dimension n must be a positive integer, got {self.n}")
        if not (0.0 <= self.f_c <= 1.0):
            raise DomainError(f"class fraction f_c must lie in [0, 1], got {self.f_c}")
        if not (math.isfinite(self.density_sup) and self.density_sup >= 1.0):
            raise DomainError(
                f"density supremum must be >= 1 (a density on a unit-measure domain), got {self.density_sup}"
            )

    def require_minority(self, strict: bool = False) -> None:
        if strict and not self.f_c < 0.5:
            raise PreconditionError(f"hypothesis f_c < 1/2 violated (f_c = {self.f_c})")
        if self.f_c > 0.5:
            raise PreconditionError(f"hypothesis f_c ≤ 1/2 violated (f_c = {self.f_c})")


@dataclass(frozen=True)
class BoundValue:
    probability: float
    valid: bool = True
    note: str = ""


@dataclass(frozen=True)
class ExistenceThreshold:
    threshold: float
    valid: bool
    note: str = ""


@dataclass(frozen=True)
class TransferResult:
    eps: float
    p_fool: float


def _clamped(raw: float, valid: bool = True, note: str = "") -> BoundValue:
    if math.isnan(raw):
        raise DomainError("bound evaluated to NaN")
    notes = [note] if note else []
    if raw <= 0.0:
        notes.append("vacuous: formula is non-positive, clamped to 0")
    return BoundValue(min(1.0, max(0.0, raw)), valid, "; ".join(notes))


def _one_minus_exp(log_term: float) -> float:
    """1 - e^{log_term}, accurate near 1 and overflow-safe for large terms."""
    if log_term == -math.inf:
        return 1.0
    return -math.expm1(min(log_term, 700.0))


def _check_dimension(n, minimum: int = 1) -> int:
    if int(n) != n or n < minimum:
        raise DomainError(f"dimension must be an integer >= {minimum}, got {n}")
    return int(n)


def _check_eps(eps, strict: bool = False) -> float:
    eps = float(eps)
    if not math.isfinite(eps) or eps < 0.0 or (strict and eps == 0.0):
        bound = "> 0" if strict else ">= 0"
        raise DomainError(f"eps must be finite and {bound}, got {eps}")
    return eps


def _check_integer_eps(eps) -> int:
    value = _check_eps(eps)
    if not value.is_integer():
        raise DomainError(f"l0 radius must be an integer number of coordinates, got {eps}")
    return int(value)


def _check_volume(vol, allow_one: bool = True) -> float:
    vol = float(vol)
    upper_ok = vol <= 1.0 if allow_one else vol < 1.0
    if not (vol > 0.0 and upper_ok):
        interval = "(0, 1]" if allow_one else "(0, 1)"
        raise DomainError(f"set volume must lie in {interval}, got {vol}")
    return vol


def _require_positive_p(norm: NormOrder, operation: str) -> None:
    if norm.is_zero:
        raise DomainError(f"{operation} needs p > 0; use the small-p bounds for l0")


def _log_n_power(n: int, exponent: float) -> float:
    return exponent * math.log(n)


def _pow_2p(eps: float, norm: NormOrder) -> float:
    """ε^{2p} for p > 0, ε² for p = 0, capped where the bound saturates."""
    if norm.is_infinity:
        raise DomainError("the small-p bounds are not defined for l_inf")
    if eps == 0.0:
        return 0.0
    exponent = 2.0 if norm.is_zero else 2.0 * norm.p
    return math.exp(min(exponent * math.log(eps), 700.0))


def gaussian_shift(norm: NormOrder, n: int) -> float:
    """√(2πn)/n^{1/p*}: the Gaussian radius matching a unit ℓp radius on the cube."""
    _require_positive_p(norm, "gaussian_shift")
    return math.exp(0.5 * _LOG_2PI + _log_n_power(n, 0.5 - 1.0 / norm.p_star()))


def lp_norm_comparison_factor(norm: NormOrder, n: int) -> float:
    """n^{1/p* - 1/2}, the constant in ‖u‖_p ≤ n^{1/p*-1/2}‖u‖₂."""
    _require_positive_p(norm, "lp_norm_comparison_factor")
    n = _check_dimension(n)
    return math.exp(_log_n_power(n, 1.0 / norm.p_star() - 0.5))


# -- sphere -------------------------------------------------------------------


def half_sphere_expansion_bound(n: int, eps: float) -> BoundValue:
    """Lower bound 1 - √(π/8)·exp(-(n-1)ε²/2) on the geodesic ε-expansion of a half sphere."""
    n = _check_dimension(n, 2)
    eps = _check_eps(eps)
    log_term = _LOG_SQRT_PI_OVER_8 - 0.5 * (n - 1) * eps * eps
    return _clamped(_one_minus_exp(log_term))


def sphere_susceptibility_bound(stats: ClassStats, eps: float, metric: str = "geodesic") -> BoundValue:
    """Probability that a point of class c is misclassified or has an ε-adversarial example on S^{n-1}."""
    n = _check_dimension(stats.n, 2)
    eps = _check_eps(eps)
    stats.require_minority()
    note = ""
    if metric == "geodesic":
        eps_g = eps
    elif metric == "l2":
        # an ℓ2 ball of radius ε on the sphere is the geodesic ball of radius 2·asin(ε/2)
        eps_g = math.pi if eps >= 2.0 else 2.0 * math.asin(eps / 2.0)
        note = f"l2 radius converted to geodesic radius {eps_g:.6g}"
    elif metric == "linf":
        eps_g = eps
        note = "conservative: geodesic bound reused for l_inf since d_inf <= d_g"
    else:
        raise DomainError(f"sphere metric must be one of {SPHERE_METRICS}, got {metric!r}")
    log_term = math.log(stats.density_sup) + _LOG_SQRT_PI_OVER_8 - 0.5 * (n - 1) * eps_g * eps_g
    return _clamped(_one_minus_exp(log_term), note=note)


# -- cube, p > 0 ---------------------------------------------------------------


def cube_expansion_bound_tight(vol: float, norm: NormOrder, n: int, eps: float) -> BoundValue:
    """Φ(Φ⁻¹(vol) + √(2πn)·n^{-1/p*}·ε), the Gaussian-transport bound on the cube."""
    _require_positive_p(norm, "cube_expansion_bound_tight")
    n = _check_dimension(n)
    vol = _check_volume(vol, allow_one=False)
    eps = _check_eps(eps)
    if eps == 0.0:
        return BoundValue(vol)
    alpha = std_normal_quantile(vol)
    return _clamped(std_normal_cdf(alpha + gaussian_shift(norm, n) * eps))


def _simple_log_delta(norm: NormOrder, n: int, eps: float, variant: str) -> float:
    """log of the tail term subtracted from 1 in the simplified cube bound."""
    if variant not in SIMPLE_VARIANTS:
        raise DomainError(f"variant must be one of {SIMPLE_VARIANTS}, got {variant!r}")
    p_star = norm.p_star()
    log_delta = (
        -math.pi * math.exp(_log_n_power(n, 1.0 - 2.0 / p_star)) * eps * eps
        - _LOG_2PI
        - _log_n_power(n, 0.5 - 1.0 / p_star)
    )
    if variant == "mills":
        log_delta -= math.log(eps)
    return log_delta


def cube_expansion_bound_simple(norm: NormOrder, n: int, eps: float, variant: str = "mills") -> BoundValue:
    """Simplified cube expansion bound for sets of volume at least 1/2.

    ``mills`` applies the Mills-ratio tail bound to the tight form at vol = 1/2
    and keeps the ε in the denominator; ``as_printed`` drops it and is kept for
    comparison only. Callers are responsible for vol(A) ≥ 1/2.
    """
    _require_positive_p(norm, "cube_expansion_bound_simple")
    n = _check_dimension(n)
    eps = _check_eps(eps, strict=True)
    log_delta = _simple_log_delta(norm, n, eps, variant)
    note = AS_PRINTED_NOTE if variant == "as_printed" else ""
    return _clamped(_one_minus_exp(log_delta), note=note)


def cube_susceptibility_bound(stats: ClassStats, norm: NormOrder, eps: float, form: str = "tight") -> BoundValue:
    """Probability that a random point of class c is misclassified or has an ℓp ε-adversarial example."""
    if form not in CUBE_FORMS:
        raise DomainError(f"form must be one of {CUBE_FORMS}, got {form!r}")
    _require_positive_p(norm, "cube_susceptibility_bound")
    n = _check_dimension(stats.n)
    stats.require_minority(strict=form == "linf_refined")
    eps = _check_eps(eps, strict=form.startswith("simple"))
    log_u = math.log(stats.density_sup)
    if stats.f_c == 0.0:
        return BoundValue(1.0, True, "f_c = 0: every point of class c is misclassified")

    if form.startswith("simple"):
        variant = form[len("simple_"):]
        log_term = log_u + _simple_log_delta(norm, n, eps, variant)
        note = AS_PRINTED_NOTE if variant == "as_printed" else ""
        return _clamped(_one_minus_exp(log_term), note=note)

    alpha = -std_normal_quantile(stats.f_c) if stats.f_c < 0.5 else 0.0
    if form == "linf_refined":
        if norm.p_star() != 2.0:
            raise PreconditionError(f"linf_refined form requires p >= 2, got {norm}")
        z = alpha + math.sqrt(2.0 * math.pi) * eps
    else:
        z = alpha + gaussian_shift(norm, n) * eps
    return _clamped(_one_minus_exp(log_u + log_std_normal_sf(z)))


# -- cube, small p and l0 -------------------------------------------------------


def small_p_expansion_bound(vol: float, norm: NormOrder, n: int, eps: float) -> BoundValue:
    """1 - exp(-ε^{2p}/n)/vol for p > 0, 1 - exp(-ε²/n)/vol for p = 0."""
    return small_p_expansion_bound_alpha(vol, norm, n, eps, alpha=1.0)


def small_p_expansion_bound_alpha(vol: float, norm: NormOrder, n: int, eps: float, alpha: float) -> BoundValue:
    """1 - exp(-2α·ε^{2p}/(n(α+1)))/vol^α, the bound before α is chosen."""
    n = _check_dimension(n)
    vol = _check_volume(vol)
    if not (math.isfinite(alpha) and alpha > 0.0):
        raise DomainError(f"alpha must be > 0, got {alpha}")
    if norm.is_zero:
        eps = _check_integer_eps(eps)
        if eps >= n:
            return BoundValue(1.0, True, "eps >= n: every point is within eps coordinates")
    else:
        eps = _check_eps(eps)
    power = _pow_2p(float(eps), norm)
    log_term = -2.0 * alpha * power / (n * (alpha + 1.0)) - alpha * math.log(vol)
    return _clamped(_one_minus_exp(log_term))


def small_p_expansion_bound_tight(vol: float, norm: NormOrder, n: int, eps: float) -> BoundValue:
    """1 - exp(-(2/n)(ε^p - √(n·log(1/vol)/2))²), valid once ε^p reaches the square root.

    For p = 0 the radius enters as ε itself.
    """
    n = _check_dimension(n)
    vol = _check_volume(vol)
    if norm.is_infinity:
        raise DomainError("the small-p bounds are not defined for l_inf")
    eps = _check_eps(eps)
    if norm.is_zero:
        eps_p = eps
    else:
        eps_p = 0.0 if eps == 0.0 else math.exp(min(norm.p * math.log(eps), 700.0))
    threshold = math.sqrt(n * -math.log(vol) / 2.0)
    valid = eps_p >= threshold
    note = "" if valid else f"requires eps^p >= sqrt(n*log(1/vol)/2) = {threshold:.6g}"
    gap = eps_p - threshold
    if abs(gap) > 1e150:
        raw = 1.0
    else:
        raw = -math.expm1(-(2.0 / n) * gap * gap)
    return _clamped(raw, valid=valid, note=note)


def sparse_susceptibility_bound(stats: ClassStats, eps: int) -> BoundValue:
    """1 - 2·U_c·exp(-ε²/n): misclassified or fooled by changing at most ε coordinates."""
    return small_p_susceptibility_bound(stats, NormOrder.zero(), eps)


def small_p_susceptibility_bound(stats: ClassStats, norm: NormOrder, eps: float) -> BoundValue:
    """1 - 2·U_c·exp(-ε^{2p}/n); p = 0 is the sparse bound."""
    n = _check_dimension(stats.n)
    stats.require_minority()
    eps = _check_integer_eps(eps) if norm.is_zero else _check_eps(eps)
    power = _pow_2p(float(eps), norm)
    log_term = math.log(2.0) + math.log(stats.density_sup) - power / n
    return _clamped(_one_minus_exp(log_term))


# -- existence --------------------------------------------------------------------


def existence_support_threshold(norm: NormOrder, n: int, eps: float) -> ExistenceThreshold:
    """Support volume above which some point of the class admits an ε-adversarial example."""
    n = _check_dimension(n)
    if norm.is_zero:
        eps = _check_integer_eps(eps)
        edge = math.sqrt(n * math.log(2.0) / 2.0)
        valid = eps >= edge
        threshold = math.exp(-2.0 * (eps - edge) ** 2 / n)
        note = "" if valid else f"l0 branch requires eps >= sqrt(n*log(2)/2) = {edge:.6g}"
        return ExistenceThreshold(min(1.0, threshold), valid, note)
    eps = _check_eps(eps, strict=True)
    scale = math.exp(_log_n_power(n, 1.0 - 2.0 / norm.p_star()))
    return ExistenceThreshold(math.exp(_LOG_HALF - math.pi * eps * eps * scale), True)


def existence_check(support_vol: float, norm: NormOrder, n: int, eps: float) -> bool:
    support_vol = float(support_vol)
    if not (0.0 <= support_vol <= 1.0):
        raise DomainError(f"support volume must lie in [0, 1], got {support_vol}")
    result = existence_support_threshold(norm, n, eps)
    if not result.valid:
        raise PreconditionError(result.note)
    return support_vol >= result.threshold


# -- resolution change --------------------------------------------------------------


def mnist_rescale_transfer(eps: float, p_fool: float, b: int, direction: str) -> TransferResult:
    """Carry a susceptibility statement between a resolution and its b-fold upsampling.

    Going up multiplies the ℓ2 radius by b, going down divides it; the
    probability is unchanged either way.
    """
    if int(b) != b or b < 1:
        raise DomainError(f"expansion factor b must be an integer >= 1, got {b}")
    eps = _check_eps(eps)
    if not (0.0 <= p_fool <= 1.0):
        raise DomainError(f"p_fool must lie in [0, 1], got {p_fool}")
    if direction == "up":
        return TransferResult(eps * b, p_fool)
    if direction == "down":
        return TransferResult(eps / b, p_fool)
    raise DomainError(f"direction must be 'up' or 'down', got {direction!r}")
