"""Block upsampling and downsampling of images, with checks of the norm laws they obey.

Upsampling by b replicates each pixel into a b×b block, so ℓ2 distances grow
by exactly b, ℓ0 counts by b² and ℓ∞ stays put. Downsampling averages blocks
and contracts ℓ2 distances by at least 1/b. Pixels are real numbers in
[0, 1]; nothing is quantized.

Grids are stored either as plain CSV (one row per line) or as a binary file:
a 16-byte little-endian header ``<8sII`` (magic ``SUSCIMG1``, height, width)
followed by height·width float64 values in row-major order.
"""
import csv
import logging
import math
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, List, Optional, Tuple, Union

import numpy as np

from .bounds import mnist_rescale_transfer
from .errors import DomainError
from .geometry import shard_generator

logger = logging.getLogger(__name__)

MAGIC = b"SUSCIMG1"
_HEADER = struct.Struct("<8sII")
L2_RTOL = 1e-12
ROUNDTRIP_ATOL = 1e-14
CHUNK_PAIRS = 256

PathLike = Union[str, Path]


@dataclass(frozen=True, eq=False)
class ImageGrid:
    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=float)
        if px.ndim != 2 or px.shape[0] < 1 or px.shape[1] < 1:
            raise DomainError(f"image must be a non-empty 2-D grid, got shape {px.shape}")
        if not np.all(np.isfinite(px)) or px.min() < 0.0 or px.max() > 1.0:
            raise DomainError("pixels must be finite and lie in [0, 1]")
        object.__setattr__(self, "pixels", px)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    def __eq__(self, other):
        return isinstance(other, ImageGrid) and np.array_equal(self.pixels, other.pixels)


def _check_factor(b) -> int:
    if int(b) != b or b < 1:
        raise DomainError(f"block factor b must be an integer >= 1, got {b}")
    return int(b)


def _up(pixels: np.ndarray, b: int) -> np.ndarray:
    return np.repeat(np.repeat(pixels, b, axis=-2), b, axis=-1)


def _down(pixels: np.ndarray, b: int) -> np.ndarray:
    h, w = pixels.shape[-2:]
    blocks = pixels.reshape(pixels.shape[:-2] + (h // b, b, w // b, b))
    return blocks.mean(axis=(-3, -1))


def upsample(img: ImageGrid, b: int) -> ImageGrid:
    return ImageGrid(_up(img.pixels, _check_factor(b)))


def downsample(img: ImageGrid, b: int) -> ImageGrid:
    b = _check_factor(b)
    if img.height % b or img.width % b:
        raise DomainError(f"{img.height}x{img.width} image is not divisible into {b}x{b} blocks")
    return ImageGrid(_down(img.pixels, b))


def random_image(height: int, width: int, rng: np.random.Generator) -> ImageGrid:
    return ImageGrid(rng.random((height, width)))


def perturb_in_ball(img: ImageGrid, eps: float, rng: np.random.Generator) -> ImageGrid:
    """A point of the ℓ2 ε-ball around img, clipped back into [0, 1]."""
    if not (math.isfinite(eps) and eps >= 0.0):
        raise DomainError(f"eps must be finite and >= 0, got {eps}")
    direction = rng.standard_normal(img.pixels.shape)
    direction /= max(np.linalg.norm(direction), np.finfo(float).tiny)
    radius = eps * rng.random()
    return ImageGrid(np.clip(img.pixels + radius * direction, 0.0, 1.0))


# -- file formats ----------------------------------------------------------------


def write_csv_grid(path: PathLike, img: ImageGrid) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for row in img.pixels:
            writer.writerow([format(v, ".17g") for v in row])


def read_csv_grid(path: PathLike) -> ImageGrid:
    with open(path, newline="") as fh:
        rows = [row for row in csv.reader(fh) if row and not row[0].startswith("#")]
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise DomainError(f"{path}: ragged or empty grid")
    try:
        return ImageGrid(np.array([[float(v) for v in r] for r in rows]))
    except ValueError as e:
        raise DomainError(f"{path}: {e}")


def write_binary_grid(path: PathLike, img: ImageGrid) -> None:
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, img.height, img.width))
        fh.write(img.pixels.astype("<f8").tobytes())


def read_binary_grid(path: PathLike) -> ImageGrid:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise DomainError(f"{path}: truncated header")
    magic, height, width = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise DomainError(f"{path}: bad magic {magic!r}")
    expected = _HEADER.size + 8 * height * width
    if len(data) != expected:
        raise DomainError(f"{path}: expected {expected} bytes for {height}x{width}, got {len(data)}")
    pixels = np.frombuffer(data, dtype="<f8", offset=_HEADER.size).reshape(height, width)
    return ImageGrid(pixels.astype(float))


# -- law checks ---------------------------------------------------------------------


@dataclass
class LawCheck:
    law: str
    b: int
    trials: int = 0
    violations: int = 0
    max_error: float = 0.0


@dataclass
class RescaleReport:
    checks: List[LawCheck] = field(default_factory=list)
    first_violation: Optional[Tuple[str, int, ImageGrid, ImageGrid]] = None

    @property
    def passed(self) -> bool:
        return all(c.violations == 0 for c in self.checks)


LAWS = ("l2_scaling", "l0_scaling", "linf_invariance", "contraction", "roundtrip", "transfer")


def _faulty_up(pixels: np.ndarray, b: int, fault: float) -> np.ndarray:
    """Upsample, then scale the top-left block of each image by ``fault``."""
    out = _up(pixels, b)
    out[..., :b, :b] = np.clip(out[..., :b, :b] * fault, 0.0, 1.0)
    return out


def _rows(a: np.ndarray) -> np.ndarray:
    return a.reshape(a.shape[0], -1)


def _check_one_factor(
    b: int, pairs: int, seed: int, height: int, width: int, eps: float, fault: Optional[float]
) -> RescaleReport:
    """All laws for one factor, drawn from that factor's own stream."""
    report = RescaleReport()
    rng = shard_generator(seed, b)
    checks = {law: LawCheck(law, b) for law in LAWS}
    eps_up = mnist_rescale_transfer(eps, 1.0, b, "up").eps
    done = 0
    while done < pairs:
        k = min(CHUNK_PAIRS, pairs - done)
        x = rng.random((k, height, width))
        y = rng.random((k, height, width))
        up_x = _faulty_up(x, b, fault) if fault is not None else _up(x, b)
        up_y = _up(y, b)
        d_low = _rows(x - y)
        d_up = _rows(up_x - up_y)

        l2_low = np.linalg.norm(d_low, axis=1)
        l2_up = np.linalg.norm(d_up, axis=1)
        l2_err = np.abs(l2_up - b * l2_low) / np.maximum(1.0, b * l2_low)
        l0_err = np.abs(np.count_nonzero(d_up, axis=1) - b * b * np.count_nonzero(d_low, axis=1)).astype(float)
        linf_err = np.abs(np.max(np.abs(d_up), axis=1) - np.max(np.abs(d_low), axis=1))

        hx = rng.random((k, height * b, width * b))
        hy = rng.random((k, height * b, width * b))
        contraction = np.linalg.norm(_rows(_down(hx, b) - _down(hy, b)), axis=1)
        bound = np.linalg.norm(_rows(hx - hy), axis=1) / b
        contraction_err = np.maximum(0.0, contraction - bound * (1.0 + L2_RTOL))

        back = _down(up_x, b)
        roundtrip_err = np.max(np.abs(_rows(back - x)), axis=1)

        # an ε-perturbation in low resolution stays within bε after upsampling
        direction = rng.standard_normal((k, height, width))
        direction /= np.linalg.norm(_rows(direction), axis=1)[:, None, None]
        moved = np.clip(x + eps * rng.random((k, 1, 1)) * direction, 0.0, 1.0)
        up_moved = _faulty_up(moved, b, fault) if fault is not None else _up(moved, b)
        spread = np.linalg.norm(_rows(up_moved - _up(x, b)), axis=1)
        transfer_err = np.maximum(0.0, spread - eps_up * (1.0 + L2_RTOL))

        errors = {
            "l2_scaling": (l2_err, l2_err > L2_RTOL),
            "l0_scaling": (l0_err, l0_err > 0),
            "linf_invariance": (linf_err, linf_err > 0),
            "contraction": (contraction_err, contraction_err > 0),
            "roundtrip": (roundtrip_err, roundtrip_err > ROUNDTRIP_ATOL),
            "transfer": (transfer_err, transfer_err > 0),
        }
        for law, (err, bad) in errors.items():
            check = checks[law]
            check.trials += k
            check.violations += int(np.count_nonzero(bad))
            check.max_error = max(check.max_error, float(err.max()))
            if report.first_violation is None and np.any(bad):
                i = int(np.argmax(bad))
                pair = (x[i], y[i]) if law != "contraction" else (hx[i], hy[i])
                report.first_violation = (law, b, ImageGrid(pair[0]), ImageGrid(pair[1]))
        done += k
    report.checks.extend(checks.values())
    logger.debug("rescale laws b=%d: %s", b, {c.law: c.violations for c in checks.values()})
    return report


def check_rescale_laws(
    b_values: Iterable[int] = (1, 2, 3, 4),
    pairs: int = 10_000,
    seed: int = 0,
    height: int = 28,
    width: int = 28,
    eps: float = 1.0,
    fault: Optional[float] = None,
    threads: int = 1,
) -> RescaleReport:
    """Check every norm law on random image pairs for each b.

    ``fault`` is a test hook: when set, the upsampling of the first image in
    each pair has its top-left block scaled by that factor. Factors run on
    up to ``threads`` workers; each has its own stream, so the report does
    not depend on the worker count.
    """
    if pairs < 1:
        raise DomainError(f"pairs must be >= 1, got {pairs}")
    factors = [_check_factor(b) for b in b_values]

    def run(b: int) -> RescaleReport:
        return _check_one_factor(b, pairs, seed, height, width, eps, fault)

    if threads <= 1 or len(factors) <= 1:
        parts = [run(b) for b in factors]
    else:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            parts = list(ex.map(run, factors))

    report = RescaleReport()
    for part in parts:
        report.checks.extend(part.checks)
        if report.first_violation is None:
            report.first_violation = part.first_violation
    return report
