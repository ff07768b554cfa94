"""Raster primitives shared by the transmitter and the receiver.

Images are plain numpy arrays: a gray image is a 2-D ``uint8`` array of
shape ``(height, width)``, an RGB image is ``(height, width, 3)``.  All
operations return new arrays and never modify their inputs.

Rounding everywhere is half away from zero followed by a clamp to
``[0, 255]``.  Integer-valued stages (desaturation, kernel convolution,
equalization) are computed with exact integer arithmetic so results do
not depend on floating point summation order.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy import ndimage


class DegenerateHistogramError(ValueError):
    """Raised when an operation needs at least two distinct gray levels."""


def as_gray(img) -> np.ndarray:
    a = np.asarray(img)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise ValueError(f"expected a 2-D gray image, got shape {a.shape}")
    if a.dtype != np.uint8:
        if a.size and (a.min() < 0 or a.max() > 255):
            raise ValueError("gray values must lie in [0, 255]")
        a = a.astype(np.uint8)
    return a


def is_rgb(img) -> bool:
    a = np.asarray(img)
    return a.ndim == 3 and a.shape[2] == 3


def round_clamp(x) -> np.ndarray:
    """Round half away from zero, clamp to [0, 255] and return uint8."""
    x = np.asarray(x, dtype=np.float64)
    r = np.sign(x) * np.floor(np.abs(x) + 0.5)
    return np.clip(r, 0, 255).astype(np.uint8)


def _div_round(num: np.ndarray, den: int) -> np.ndarray:
    # exact integer num/den, rounded half away from zero
    num = np.asarray(num, dtype=np.int64)
    sign = np.sign(num) * (1 if den > 0 else -1)
    q = (2 * np.abs(num) + abs(den)) // (2 * abs(den))
    return sign * q


# ---------------------------------------------------------------- kernels

@dataclass(frozen=True)
class Kernel:
    """Square convolution matrix stored as integer numerators over a divisor."""

    numerators: tuple[tuple[int, ...], ...]
    divisor: int = 1
    name: str = ""

    def __post_init__(self):
        size = len(self.numerators)
        if size < 1 or size % 2 == 0:
            raise ValueError("kernel size must be odd and >= 1")
        if any(len(row) != size for row in self.numerators):
            raise ValueError("kernel must be square")
        if self.divisor == 0:
            raise ValueError("kernel divisor must be nonzero")

    @property
    def size(self) -> int:
        return len(self.numerators)

    def array(self) -> np.ndarray:
        return np.array(self.numerators, dtype=np.int64)

    def scaled_sum(self):
        """Sum of coefficients after division, as an exact fraction."""
        return Fraction(int(self.array().sum()), self.divisor)


def _binomial5():
    b = [1, 4, 6, 4, 1]
    m = [[x * y for y in b] for x in b]
    m[2][2] = -476
    return tuple(tuple(row) for row in m)


UNSHARP5 = Kernel(_binomial5(), -256, "unsharp5")
EMBOSS3 = Kernel(((3, -1, 0), (-1, 1, 1), (0, 1, -3)), 1, "emboss3")
SHARPEN3 = Kernel(((0, -1, 0), (-1, 5, -1), (0, -1, 0)), 1, "sharpen3")
STRONG5 = Kernel(
    (
        (0, 0, -1, 0, 0),
        (0, 0, -2, 0, 0),
        (-1, -2, 13, -2, -1),
        (0, 0, -2, 0, 0),
        (0, 0, -1, 0, 0),
    ),
    1,
    "strong5",
)
IDENTITY1 = Kernel(((1,),), 1, "identity")

BUILTIN_KERNELS = {k.name: k for k in (UNSHARP5, EMBOSS3, SHARPEN3, STRONG5)}


# ------------------------------------------------------------- operations

def desaturate(img) -> np.ndarray:
    """Luma from RGB with weights 0.299/0.587/0.114."""
    a = np.asarray(img)
    if not is_rgb(a):
        raise ValueError(f"expected an RGB image, got shape {a.shape}")
    a = a.astype(np.int64)
    num = 299 * a[..., 0] + 587 * a[..., 1] + 114 * a[..., 2]
    return np.clip(_div_round(num, 1000), 0, 255).astype(np.uint8)


def to_gray(img) -> np.ndarray:
    return desaturate(img) if is_rgb(img) else as_gray(img)


def convolve(img, kernel: Kernel) -> np.ndarray:
    """Apply ``kernel`` as a correlation stencil with clamp-to-edge borders.

    Coefficient ``[i][j]`` multiplies the pixel at offset
    ``(i - r, j - r)`` from the output pixel, matching how image editors
    apply user-defined convolution matrices.
    """
    g = as_gray(img)
    n = kernel.size
    h, w = g.shape
    if h < n or w < n:
        raise ValueError(f"image {w}x{h} is smaller than the {n}x{n} kernel")
    r = n // 2
    padded = np.pad(g.astype(np.int64), r, mode="edge")
    acc = np.zeros((h, w), dtype=np.int64)
    for i, row in enumerate(kernel.numerators):
        for j, c in enumerate(row):
            if c:
                acc += c * padded[i : i + h, j : j + w]
    return np.clip(_div_round(acc, kernel.divisor), 0, 255).astype(np.uint8)


def histogram(img) -> np.ndarray:
    return np.bincount(as_gray(img).ravel(), minlength=256).astype(np.int64)


def equalize_histogram(img) -> np.ndarray:
    g = as_gray(img)
    hist = histogram(g)
    if np.count_nonzero(hist) < 2:
        return g.copy()
    cdf = np.cumsum(hist)
    cdf_min = int(cdf[hist.nonzero()[0][0]])
    n = g.size
    lut = _div_round((cdf - cdf_min) * 255, n - cdf_min)
    lut = np.clip(lut, 0, 255).astype(np.uint8)
    return lut[g]


def otsu_threshold(img) -> int:
    """Smallest level t maximizing between-class variance of (<= t, > t).

    Variances are compared exactly as rationals so that ties resolve
    deterministically to the lowest level.
    """
    hist = histogram(img)
    if np.count_nonzero(hist) < 2:
        raise DegenerateHistogramError("Otsu threshold needs two distinct values")
    total_n = int(hist.sum())
    total_s = int((hist * np.arange(256)).sum())
    best_t, best_num, best_den = 0, 0, 1
    n0 = s0 = 0
    for t in range(255):
        n0 += int(hist[t])
        s0 += t * int(hist[t])
        n1 = total_n - n0
        if n0 == 0 or n1 == 0:
            continue
        s1 = total_s - s0
        # n0*n1*(m0 - m1)^2 up to the constant 1/N^2
        num = (s0 * n1 - s1 * n0) ** 2
        den = n0 * n1
        if num * best_den > best_num * den:
            best_t, best_num, best_den = t, num, den
    return best_t


def binarize(img, level: int) -> np.ndarray:
    g = as_gray(img)
    return np.where(g > level, 255, 0).astype(np.uint8)


def gaussian_weights(sigma: float) -> np.ndarray:
    """Normalized 1-D Gaussian taps truncated at three sigma."""
    if sigma <= 0:
        return np.ones(1)
    radius = max(1, int(np.ceil(3.0 * sigma)))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    # far taps underflow to 0 for tiny sigma; that is the intended limit
    with np.errstate(over="ignore", under="ignore"):
        w = np.exp(-0.5 * (x / sigma) ** 2)
    return w / w.sum()


def gaussian_blur(a, sigma: float) -> np.ndarray:
    """Separable Gaussian blur with clamp-to-edge borders; float output."""
    a = np.asarray(a, dtype=np.float64)
    if sigma <= 0:
        return a.copy()
    w = gaussian_weights(sigma)
    out = ndimage.correlate1d(a, w, axis=0, mode="nearest")
    return ndimage.correlate1d(out, w, axis=1, mode="nearest")


def unsharp_mask(img, radius: float = 40, amount: float = 4.0, threshold: float = 0) -> np.ndarray:
    """Blur-difference sharpening, blur sigma = radius / 3.

    Pixels whose difference from the blurred image is below ``threshold``
    are passed through untouched.
    """
    if radius < 1:
        raise ValueError("radius must be >= 1")
    if amount <= 0:
        raise ValueError("amount must be positive")
    if not 0 <= threshold <= 255:
        raise ValueError("threshold must lie in [0, 255]")
    g = as_gray(img)
    f = g.astype(np.float64)
    diff = f - gaussian_blur(f, radius / 3.0)
    sharpened = round_clamp(f + amount * diff)
    return np.where(np.abs(diff) >= threshold, sharpened, g).astype(np.uint8)
