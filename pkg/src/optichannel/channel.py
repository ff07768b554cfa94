"""Camera capture simulator.

Stills go through a fixed pipeline::

    projective warp -> area-average downscale -> Gaussian blur
        -> gamma -> additive Gaussian noise -> round + clamp

Video first integrates the display frames seen during each camera
exposure window (weighted by temporal overlap) and then runs every
integrated frame through the still pipeline.  Randomness for camera
frame k is drawn from a generator seeded with ``(seed, k)`` so frames
can be processed in any order.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from fractions import Fraction
from importlib import resources

import numpy as np

from .imaging import as_gray, gaussian_blur, round_clamp

Quad = tuple[tuple[float, float], tuple[float, float], tuple[float, float], tuple[float, float]]


@dataclass(frozen=True)
class CaptureModel:
    scale: float = 1.0
    warp: Quad | None = None
    blur_sigma: float = 0.0
    noise_sigma: float = 0.0
    gamma: float = 1.0
    camera_fps: float = 30.0
    exposure: float = 1.0 / 30.0
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.scale <= 1:
            raise ValueError("scale must lie in (0, 1]")
        if self.blur_sigma < 0 or self.noise_sigma < 0:
            raise ValueError("blur and noise sigmas must be non-negative")
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if self.camera_fps <= 0:
            raise ValueError("camera_fps must be positive")
        if not 0 < self.exposure <= 1.0 / self.camera_fps + 1e-12:
            raise ValueError("exposure must lie in (0, 1/camera_fps]")
        if self.warp is not None:
            quad = tuple(tuple(float(v) for v in p) for p in self.warp)
            if len(quad) != 4 or any(len(p) != 2 for p in quad):
                raise ValueError("warp must be four (x, y) corner points")
            object.__setattr__(self, "warp", quad)

    @property
    def is_identity(self) -> bool:
        return (
            self.scale == 1
            and self.warp is None
            and self.blur_sigma == 0
            and self.noise_sigma == 0
            and self.gamma == 1
        )

    def with_seed(self, seed: int) -> "CaptureModel":
        return replace(self, seed=int(seed))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["warp"] = [list(p) for p in self.warp] if self.warp else None
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "CaptureModel":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown capture model fields: {sorted(unknown)}")
        d = dict(d)
        if d.get("warp") is not None:
            d["warp"] = tuple(tuple(p) for p in d["warp"])
        return cls(**d)


def load_presets() -> dict[str, dict]:
    """Named distance presets, in order of increasing severity."""
    text = resources.files("optichannel").joinpath("data/capture_presets.json").read_text()
    data = json.loads(text)
    return dict(data["presets"])


def preset(name: str, **overrides) -> CaptureModel:
    presets = load_presets()
    if name not in presets:
        raise KeyError(f"unknown capture preset {name!r}; known: {', '.join(presets)}")
    d = {k: v for k, v in presets[name].items() if not k.startswith("_")}
    d.update(overrides)
    return CaptureModel.from_dict(d)


# ------------------------------------------------------------- stages

def homography(src, dst) -> np.ndarray:
    """3x3 matrix mapping the four ``src`` points onto ``dst``."""
    A = []
    b = []
    for (x, y), (u, v) in zip(src, dst):
        A.append([x, y, 1, 0, 0, 0, -u * x, -u * y])
        A.append([0, 0, 0, x, y, 1, -v * x, -v * y])
        b += [u, v]
    h = np.linalg.solve(np.array(A, float), np.array(b, float))
    return np.append(h, 1.0).reshape(3, 3)


def frame_homography(shape, warp: Quad) -> np.ndarray:
    h, w = shape
    corners = [(0, 0), (w, 0), (w, h), (0, h)]
    return homography(corners, warp)


def apply_homography(H: np.ndarray, x, y):
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    d = H[2, 0] * x + H[2, 1] * y + H[2, 2]
    return (H[0, 0] * x + H[0, 1] * y + H[0, 2]) / d, (H[1, 0] * x + H[1, 1] * y + H[1, 2]) / d


def bilinear_sample(a: np.ndarray, x, y) -> np.ndarray:
    """Sample at continuous pixel-center coordinates, clamp to edge."""
    h, w = a.shape
    x = np.clip(x, 0, w - 1)
    y = np.clip(y, 0, h - 1)
    x0 = np.floor(x).astype(int)
    y0 = np.floor(y).astype(int)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = x - x0
    fy = y - y0
    top = a[y0, x0] * (1 - fx) + a[y0, x1] * fx
    bot = a[y1, x0] * (1 - fx) + a[y1, x1] * fx
    return top * (1 - fy) + bot * fy


def warp_frame(a: np.ndarray, warp: Quad) -> np.ndarray:
    """Project the frame so its corners land on ``warp``; same output size."""
    H = frame_homography(a.shape, warp)
    inv = np.linalg.inv(H)
    ys, xs = np.mgrid[0 : a.shape[0], 0 : a.shape[1]]
    sx, sy = apply_homography(inv, xs + 0.5, ys + 0.5)
    return bilinear_sample(a, sx - 0.5, sy - 0.5)


def _area_weights(n_in: int, scale: float) -> np.ndarray:
    n_out = math.ceil(n_in * scale - 1e-9)
    W = np.zeros((n_out, n_in))
    step = 1.0 / scale
    for i in range(n_out):
        lo = i * step
        hi = min((i + 1) * step, n_in)
        j0 = int(math.floor(lo))
        j1 = int(math.ceil(hi))
        for j in range(j0, j1):
            W[i, j] = min(hi, j + 1) - max(lo, j)
        W[i] /= W[i].sum()
    return W


def output_shape(shape, scale: float) -> tuple[int, int]:
    h, w = shape
    return math.ceil(h * scale - 1e-9), math.ceil(w * scale - 1e-9)


def downscale(a: np.ndarray, scale: float) -> np.ndarray:
    if scale == 1:
        return a
    Wy = _area_weights(a.shape[0], scale)
    Wx = _area_weights(a.shape[1], scale)
    return Wy @ a @ Wx.T


def _optics(a: np.ndarray, m: CaptureModel) -> np.ndarray:
    if m.warp is not None:
        a = warp_frame(a, m.warp)
    a = downscale(a, m.scale)
    if m.blur_sigma > 0:
        a = gaussian_blur(a, m.blur_sigma)
    return a


def _sensor(a: np.ndarray, m: CaptureModel, frame_index: int) -> np.ndarray:
    if m.gamma != 1:
        a = 255.0 * np.power(np.clip(a, 0, 255) / 255.0, m.gamma)
    if m.noise_sigma > 0:
        rng = np.random.default_rng([m.seed & (2**64 - 1), frame_index])
        a = a + rng.normal(0.0, m.noise_sigma, size=a.shape)
    return round_clamp(a)


@dataclass
class CapturedStill:
    image: np.ndarray
    model: CaptureModel


@dataclass
class CapturedSequence:
    frames: list
    model: CaptureModel
    camera_fps: float = 30.0
    source_frames: list = field(default_factory=list)  # display frames per camera frame

    def __len__(self):
        return len(self.frames)


def capture_still(frame, m: CaptureModel, frame_index: int = 0) -> CapturedStill:
    g = as_gray(frame)
    if m.is_identity:
        return CapturedStill(g.copy(), m)
    return CapturedStill(_sensor(_optics(g.astype(np.float64), m), m, frame_index), m)


def exposure_weights(n_display: int, display_fps: float, camera_fps: float, exposure: float):
    """Per camera frame, the (display index, weight) pairs it integrates.

    Only camera frames whose whole exposure window lies inside the
    displayed sequence are produced.
    """
    df = Fraction(display_fps).limit_denominator(10**6)
    cf = Fraction(camera_fps).limit_denominator(10**6)
    ex = Fraction(exposure).limit_denominator(10**6)
    end = Fraction(n_display) / df
    out = []
    k = 0
    while True:
        t0 = Fraction(k) / cf
        t1 = t0 + ex
        if t1 > end:
            break
        pairs = []
        j = int(t0 * df)
        while j < n_display and Fraction(j) / df < t1:
            lo = max(t0, Fraction(j) / df)
            hi = min(t1, Fraction(j + 1) / df)
            if hi > lo:
                pairs.append((j, (hi - lo) / ex))
            j += 1
        out.append(pairs)
        k += 1
    return out


def capture_video(seq, m: CaptureModel) -> CapturedSequence:
    frames = getattr(seq, "frames", None)
    display_fps = getattr(seq, "display_fps", None)
    if not frames:
        raise ValueError("cannot capture an empty sequence")
    if m.camera_fps > display_fps:
        raise ValueError("camera_fps must not exceed the display rate")
    windows = exposure_weights(len(frames), display_fps, m.camera_fps, m.exposure)
    if not windows:
        raise ValueError("sequence shorter than one camera exposure")
    stack = [np.asarray(f, dtype=np.float64) for f in frames]
    out = []
    for k, pairs in enumerate(windows):
        acc = sum(float(w) * stack[j] for j, w in pairs)
        if m.is_identity:
            out.append(round_clamp(acc))
        else:
            out.append(_sensor(_optics(acc, m), m, k))
    return CapturedSequence(out, m, m.camera_fps, [[j for j, _ in p] for p in windows])
