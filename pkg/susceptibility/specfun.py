"""Standard-normal special functions.

All cube bounds go through Φ, its survival function Φ̂ and Φ⁻¹. Values come
from scipy's Cephes-based kernels; the quantile gets one Newton step against
the density on whichever tail is smaller. Log-space variants exist because
bounds at large n underflow in linear space.

Note: some texts write the Gaussian measure on ℝⁿ as (2π)^{-n/2} e^{-n x²/2};
everything here uses the standard density (2π)^{-n/2} e^{-‖x‖²/2}, which is
what makes the coordinatewise Φ transport measure preserving. The Mills-type
tail inequality is likewise used in its e^{-t²/2} form.
"""
import logging
import math

import numpy as np
from scipy import special

from .errors import DomainError

logger = logging.getLogger(__name__)

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


def _check_finite(z: float) -> float:
    try:
        z = float(z)
    except (TypeError, ValueError):
        raise DomainError(f"expected a real number, got {z!r}")
    if not math.isfinite(z):
        raise DomainError(f"z must be finite, got {z}")
    return z


def _check_open_probability(p: float) -> float:
    try:
        p = float(p)
    except (TypeError, ValueError):
        raise DomainError(f"expected a probability, got {p!r}")
    if not (0.0 < p < 1.0):
        raise DomainError(f"quantile needs 0 < p < 1, got {p}")
    return p


def std_normal_pdf(z: float) -> float:
    z = _check_finite(z)
    return math.exp(-0.5 * z * z - _LOG_SQRT_2PI)


def std_normal_cdf(z: float) -> float:
    """Φ(z)."""
    return float(special.ndtr(_check_finite(z)))


def std_normal_sf(z: float) -> float:
    """Φ̂(z) = Φ(-z), evaluated directly so large z does not cancel."""
    return float(special.ndtr(-_check_finite(z)))


def log_std_normal_cdf(z: float) -> float:
    return float(special.log_ndtr(_check_finite(z)))


def log_std_normal_sf(z: float) -> float:
    return float(special.log_ndtr(-_check_finite(z)))


def std_normal_quantile(p: float) -> float:
    """Φ⁻¹(p) for 0 < p < 1.

    ndtri gives the starting point; one Newton step on the smaller tail
    tightens the round trip cdf(quantile(p)) = p.
    """
    p = _check_open_probability(p)
    z = float(special.ndtri(p))
    if not math.isfinite(z):
        # ndtri saturates only for p within an ulp of 0 or 1
        raise DomainError(f"quantile of {p} is not representable")
    dens = std_normal_pdf(z)
    if dens > 0.0:
        if p <= 0.5:
            residual = float(special.ndtr(z)) - p
        else:
            # 1 - p is exact for p > 0.5
            residual = (1.0 - p) - float(special.ndtr(-z))
        step = residual / dens
        if abs(step) < 1e-3:
            z -= step
    return z


def mills_sf_upper(z: float) -> float:
    """Mills-ratio upper bound e^{-z²/2}/(√(2π) z) on Φ̂(z), z > 0."""
    return math.exp(log_mills_sf_upper(z))


def log_mills_sf_upper(z: float) -> float:
    z = _check_finite(z)
    if z <= 0.0:
        raise DomainError(f"Mills bound needs z > 0, got {z}")
    return -0.5 * z * z - _LOG_SQRT_2PI - math.log(z)


def gaussian_quantile_lower_bound(eta: float) -> float:
    """Lower bound -√(log(1/(4η²))) on Φ⁻¹(η), valid for 0 < η ≤ 1/2."""
    eta = _check_open_probability(eta)
    if eta > 0.5:
        raise DomainError(f"quantile lower bound needs eta <= 1/2, got {eta}")
    return -math.sqrt(max(0.0, -math.log(4.0 * eta * eta)))


def std_normal_cdf_array(z: np.ndarray) -> np.ndarray:
    """Vectorized Φ for sampling code; rejects non-finite entries."""
    z = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(z)):
        raise DomainError("all coordinates must be finite")
    return special.ndtr(z)
