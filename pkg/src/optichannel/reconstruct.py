"""Receiver side: enhancement chain, blink-frame detection, symbol sampling."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .channel import CaptureModel, apply_homography, frame_homography
from .codecs.qr import SIZE, Payload, QRError, qr_decode
from .imaging import (
    BUILTIN_KERNELS,
    UNSHARP5,
    DegenerateHistogramError,
    as_gray,
    convolve,
    equalize_histogram,
    gaussian_blur,
    is_rgb,
    desaturate,
    otsu_threshold,
    round_clamp,
    unsharp_mask,
)
from .pnm import save_pnm

SUPPLEMENTARY_RETRY_ORDER = ("sharpen3", "strong5", "emboss3")
MAX_FINDER_CANDIDATES = 12


class LocateError(ValueError):
    pass


class SymbolNotFoundError(LocateError):
    pass


class AmbiguousSymbolError(LocateError):
    pass


# ------------------------------------------------------------- enhancement

@dataclass(frozen=True)
class UnsharpParams:
    radius: float = 40.0
    amount: float = 4.0
    threshold: float = 0.0

    def __post_init__(self):
        if not 30 <= self.radius <= 50:
            raise ValueError("unsharp radius must lie in [30, 50]")
        if not 3.5 <= self.amount <= 5.0:
            raise ValueError("unsharp amount must lie in [3.5, 5.0]")
        if not 0 <= self.threshold <= 10:
            raise ValueError("unsharp threshold must lie in [0, 10]")


@dataclass(frozen=True)
class ReconParams:
    """``unsharp`` is the string ``"fixed"`` for the 5x5 matrix, an
    UnsharpParams for the radius/amount/threshold form, or None to skip
    sharpening."""

    equalize: bool = True
    unsharp: UnsharpParams | str | None = "fixed"
    supplementary: tuple[str, ...] = ()

    def __post_init__(self):
        if isinstance(self.unsharp, str) and self.unsharp != "fixed":
            raise ValueError(f"unknown unsharp mode {self.unsharp!r}")
        for name in self.supplementary:
            if name not in BUILTIN_KERNELS or name == "unsharp5":
                raise ValueError(f"unknown supplementary kernel {name!r}")
        object.__setattr__(self, "supplementary", tuple(self.supplementary))

    @classmethod
    def from_dict(cls, d: dict | None) -> "ReconParams":
        if not d:
            return cls()
        unsharp = d.get("unsharp", "fixed")
        if isinstance(unsharp, dict):
            unsharp = UnsharpParams(**unsharp)
        elif unsharp == "parametric":
            unsharp = UnsharpParams()
        elif unsharp in (None, "none"):
            unsharp = None
        return cls(bool(d.get("equalize", True)), unsharp, tuple(d.get("supplementary", ())))


def reconstruct_stages(img, p: ReconParams | None = None) -> dict[str, np.ndarray]:
    """Every stage output, keyed by its dump name, in pipeline order."""
    p = p or ReconParams()
    stages = {}
    cur = desaturate(img) if is_rgb(img) else as_gray(img).copy()
    stages["01-desaturate"] = cur
    if p.equalize:
        cur = equalize_histogram(cur)
    stages["02-equalize"] = cur
    if p.unsharp == "fixed":
        cur = convolve(cur, UNSHARP5)
    elif p.unsharp is not None:
        cur = unsharp_mask(cur, p.unsharp.radius, p.unsharp.amount, p.unsharp.threshold)
    stages["03-unsharp"] = cur
    for name in p.supplementary:
        cur = convolve(cur, BUILTIN_KERNELS[name])
        stages[f"04-{name}"] = cur
    return stages


def reconstruct(img, p: ReconParams | None = None) -> np.ndarray:
    return list(reconstruct_stages(img, p).values())[-1]


def dump_stages(stages: dict[str, np.ndarray], directory) -> list[Path]:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, img in stages.items():
        path = d / f"{name}.pgm"
        save_pnm(img, path)
        paths.append(path)
    return paths


# ------------------------------------------------------------- blink frames

def frame_scores(frames) -> np.ndarray:
    """Mean absolute deviation of each frame from the per-pixel median frame."""
    stack = np.stack([np.asarray(f, dtype=np.float64) for f in frames])
    med = np.median(stack, axis=0)
    return np.abs(stack - med).mean(axis=(1, 2))


def detect_object_frames(seq, sensitivity: float = 3.0) -> list[int]:
    frames = getattr(seq, "frames", seq)
    if len(frames) < 3:
        raise ValueError("frame detection needs at least three frames")
    scores = frame_scores(frames)
    cutoff = sensitivity * float(np.median(scores))
    return [i for i, s in enumerate(scores) if s > cutoff]


# ------------------------------------------------------------- geometry

_ROT = {
    0: np.array([[1, 0], [0, 1]]),
    90: np.array([[0, -1], [1, 0]]),
    180: np.array([[-1, 0], [0, -1]]),
    270: np.array([[0, 1], [-1, 0]]),
}


@dataclass(frozen=True)
class SymbolGeometry:
    """Placement of a 29x29 symbol in an image.

    ``origin`` is the image position of the symbol's own top-left corner;
    symbol axes are scaled by ``pitch`` and then turned clockwise by
    ``rotation`` degrees.  When ``homography`` is set, module positions
    are first computed in display coordinates, mapped through it, and
    then multiplied by ``capture_scale``.
    """

    origin: tuple[float, float]
    pitch: tuple[float, float]
    rotation: int = 0
    homography: tuple | None = None
    capture_scale: float = 1.0

    def __post_init__(self):
        if self.pitch[0] <= 0 or self.pitch[1] <= 0:
            raise ValueError("pitch must be positive")
        if self.rotation not in _ROT:
            raise ValueError("rotation must be 0, 90, 180 or 270")

    def module_centers(self) -> tuple[np.ndarray, np.ndarray]:
        r, c = np.mgrid[0:SIZE, 0:SIZE]
        u = (c + 0.5) * self.pitch[0]
        v = (r + 0.5) * self.pitch[1]
        R = _ROT[self.rotation]
        x = self.origin[0] + R[0, 0] * u + R[0, 1] * v
        y = self.origin[1] + R[1, 0] * u + R[1, 1] * v
        if self.homography is not None:
            x, y = apply_homography(np.array(self.homography), x, y)
            x, y = x * self.capture_scale, y * self.capture_scale
        return x, y


def oracle_geometry(manifest: dict, capture: CaptureModel | dict | None = None) -> SymbolGeometry:
    """Ground-truth geometry from a concealment manifest and capture model."""
    if isinstance(capture, dict):
        capture = CaptureModel.from_dict(capture)
    s = capture.scale if capture else 1.0
    ox, oy = manifest["object_origin"]
    cell = manifest["scale"]
    qz = manifest.get("quiet_zone", 0)
    ox, oy = ox + qz * cell, oy + qz * cell
    if capture is not None and capture.warp is not None:
        h, w = manifest["screen_size"][1], manifest["screen_size"][0]
        H = frame_homography((h, w), capture.warp)
        return SymbolGeometry((ox, oy), (cell, cell), 0, tuple(map(tuple, H)), s)
    return SymbolGeometry((ox * s, oy * s), (cell * s, cell * s), 0)


def _runs(line: np.ndarray):
    """(value, start, length) runs of a boolean row."""
    change = np.flatnonzero(np.diff(line.astype(np.int8))) + 1
    starts = np.concatenate(([0], change))
    ends = np.concatenate((change, [len(line)]))
    return [(bool(line[s]), int(s), int(e - s)) for s, e in zip(starts, ends)]


def _ratio_ok(lengths) -> float | None:
    """Module size if the five runs look like 1:1:3:1:1, else None.

    The size comes from the inner light-dark-light runs; the outer dark
    runs only need a loose bound because blur bleeds them into the
    surroundings.
    """
    inner = lengths[1] + lengths[2] + lengths[3]
    if inner < 5:
        return None
    unit = inner / 5.0
    tol = unit / 2.0 + 0.5
    if abs(lengths[1] - unit) > tol or abs(lengths[3] - unit) > tol:
        return None
    if abs(lengths[2] - 3 * unit) > 3 * tol:
        return None
    for n in (lengths[0], lengths[4]):
        if not 0.5 * unit - 0.5 <= n <= 2.0 * unit + 1:
            return None
    return unit


def _cross_check(dark: np.ndarray, x: int, y: int, vertical: bool):
    """Re-measure the 1:1:3:1:1 pattern through (x, y) along the other axis."""
    line = dark[:, x] if vertical else dark[y, :]
    i = y if vertical else x
    if not line[i]:
        return None
    n = len(line)
    # extent of the center run
    a = i
    while a > 0 and line[a - 1]:
        a -= 1
    b = i
    while b < n - 1 and line[b + 1]:
        b += 1
    lengths = [0, 0, b - a + 1, 0, 0]
    p = a - 1
    for k, want in ((1, False), (0, True)):
        while p >= 0 and bool(line[p]) == want:
            lengths[k] += 1
            p -= 1
    q = b + 1
    for k, want in ((3, False), (4, True)):
        while q < n and bool(line[q]) == want:
            lengths[k] += 1
            q += 1
    unit = _ratio_ok(lengths)
    if unit is None:
        return None
    return (a + b + 1) / 2.0, unit


def _row_candidates(dark: np.ndarray):
    """Vectorized scan for dark-light-dark-light-dark runs in 1:1:3:1:1."""
    h, w = dark.shape
    starts = np.ones((h, w), dtype=bool)
    starts[:, 1:] = dark[:, 1:] != dark[:, :-1]
    idx = np.flatnonzero(starts)
    if len(idx) < 5:
        return []
    lengths = np.diff(np.append(idx, h * w)).astype(np.float64)
    rows = idx // w
    vals = dark.ravel()[idx]
    n = len(idx) - 4
    win = np.stack([lengths[i : i + n] for i in range(5)])
    unit = (win[1] + win[2] + win[3]) / 5.0
    tol = unit / 2.0 + 0.5
    ok = (np.abs(win[1] - unit) <= tol) & (np.abs(win[3] - unit) <= tol)
    ok &= np.abs(win[2] - 3 * unit) <= 3 * tol
    for outer in (win[0], win[4]):
        ok &= (outer >= 0.5 * unit - 0.5) & (outer <= 2.0 * unit + 1)
    ok &= (unit >= 1) & vals[:n] & (rows[:n] == rows[4 : n + 4])
    out = []
    for k in np.flatnonzero(ok):
        center_start = idx[k + 2] - rows[k] * w
        out.append((center_start + lengths[k + 2] / 2.0, int(rows[k]), float(unit[k])))
    return out


def find_finder_centers(img, smooth: float = 1.0) -> list[tuple[float, float, float, int]]:
    """Clusters of finder-pattern hits as (x, y, module size, hit count).

    The image is lightly blurred before binarization so sensor speckle
    does not break up the runs.
    """
    g = as_gray(img)
    if smooth > 0:
        g = round_clamp(gaussian_blur(g, smooth))
    try:
        t = otsu_threshold(g)
    except DegenerateHistogramError:
        return []
    dark = g <= t
    hits = []
    for cx, y, unit in _row_candidates(dark):
        v = _cross_check(dark, int(cx), y, vertical=True)
        if v is None:
            continue
        cy, vunit = v
        hh = _cross_check(dark, int(cx), int(cy), vertical=False)
        if hh is None:
            continue
        cx2, hunit = hh
        hits.append((cx2, cy, (unit + vunit + hunit) / 3.0))
    clusters: list[list[float]] = []
    for x, y, u in hits:
        for c in clusters:
            if math.hypot(c[0] / c[3] - x, c[1] / c[3] - y) < 1.5 * u + 1:
                c[0] += x
                c[1] += y
                c[2] += u
                c[3] += 1
                break
        else:
            clusters.append([x, y, u, 1])
    out = [(c[0] / c[3], c[1] / c[3], c[2] / c[3], c[3]) for c in clusters]
    # a real center stone is hit on about three modules' worth of rows
    out = [c for c in out if c[3] >= max(2, 1.5 * c[2])]
    out.sort(key=lambda c: -c[3])
    return out[:MAX_FINDER_CANDIDATES]


def _triple_geometry(triple):
    """Geometry if the three finder centers form a plausible symbol, else None."""
    units = [t[2] for t in triple]
    if max(units) > 1.6 * min(units):
        return None
    pts = [np.array(t[:2]) for t in triple]
    for corner in range(3):
        a, b = [pts[i] for i in range(3) if i != corner]
        tl = pts[corner]
        v1, v2 = a - tl, b - tl
        cross = v1[0] * v2[1] - v1[1] * v2[0]
        if cross < 0:
            v1, v2 = v2, v1
        # v1: along symbol columns, v2: along symbol rows
        l1, l2 = np.hypot(*v1), np.hypot(*v2)
        if l1 == 0 or l2 == 0:
            continue
        cos = abs(float(v1 @ v2)) / (l1 * l2)
        if cos > 0.1 or abs(l1 - l2) > 0.2 * max(l1, l2):
            continue
        unit = float(np.mean(units))
        if not 0.7 < (l1 / 22.0) / unit < 1.4:
            continue
        angle = math.degrees(math.atan2(v1[1], v1[0])) % 360
        rotation = int(round(angle / 90.0)) % 4 * 90
        if abs(((angle - rotation + 180) % 360) - 180) > 10:
            continue
        pitch = (l1 / 22.0, l2 / 22.0)
        R = _ROT[rotation]
        off = R @ np.array([3.5 * pitch[0], 3.5 * pitch[1]])
        return SymbolGeometry((float(tl[0] - off[0]), float(tl[1] - off[1])), pitch, rotation)
    return None


def locate_symbol(img, mode: str = "finder", manifest: dict | None = None, capture=None) -> SymbolGeometry:
    if mode == "oracle":
        if manifest is None:
            raise LocateError("oracle localization needs a manifest")
        return oracle_geometry(manifest, capture)
    if mode != "finder":
        raise ValueError(f"unknown locate mode {mode!r}")
    centers = find_finder_centers(img)
    if len(centers) < 3:
        raise SymbolNotFoundError(f"found {len(centers)} finder candidates, need 3")
    found = []
    for triple in itertools.combinations(centers, 3):
        g = _triple_geometry(triple)
        if g is not None:
            found.append((sum(t[3] for t in triple), g))
    if not found:
        raise SymbolNotFoundError("no three finder candidates form a symbol")
    if len(found) > 1:
        found.sort(key=lambda f: -f[0])
        # distinct geometries only; overlapping clusters of one symbol agree
        first = found[0][1]
        for _, g in found[1:]:
            if math.hypot(g.origin[0] - first.origin[0], g.origin[1] - first.origin[1]) > 2 * first.pitch[0]:
                raise AmbiguousSymbolError("several candidate symbols in the image")
    return found[0][1]


# ------------------------------------------------------------- sampling

def sample_means(img, g: SymbolGeometry) -> np.ndarray:
    a = as_gray(img).astype(np.float64)
    h, w = a.shape
    x, y = g.module_centers()
    xi = np.floor(x).astype(int)
    yi = np.floor(y).astype(int)
    if xi.min() < 1 or yi.min() < 1 or xi.max() > w - 2 or yi.max() > h - 2:
        raise LocateError("symbol geometry falls outside the image")
    acc = np.zeros(xi.shape)
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            acc += a[yi + dy, xi + dx]
    return acc / 9.0


def sample_symbol(img, g: SymbolGeometry) -> np.ndarray:
    """29x29 module matrix, True = dark (3x3 mean at or below the Otsu level)."""
    means = round_clamp(sample_means(img, g))
    t = otsu_threshold(means)
    return means <= t


def module_accuracy(a, b) -> float:
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    return 100.0 * float(np.mean(a == b))


# ------------------------------------------------------------- end to end

@dataclass
class RecoveryResult:
    payload: Payload | None
    decode_success: bool
    module_accuracy_pct: float | None = None
    modules: np.ndarray | None = None
    detected_frames: list | None = None
    supplementary_used: str | None = None
    error: str | None = None
    stages: dict = field(default_factory=dict, repr=False)


def integrate_frames(frames, detected: list[int]) -> np.ndarray:
    use = detected if detected else range(len(frames))
    stack = np.stack([np.asarray(frames[i], dtype=np.float64) for i in use])
    return round_clamp(stack.mean(axis=0))


def _attempt(img, mode, manifest, capture, polarity):
    if polarity == "dark":
        # ink is lighter than a dark surface
        img = 255 - as_gray(img)
    g = locate_symbol(img, mode, manifest, capture)
    return sample_symbol(img, g)


def recover_payload(
    source,
    params: ReconParams | None = None,
    mode: str = "finder",
    manifest: dict | None = None,
    capture=None,
    truth=None,
    sensitivity: float = 3.0,
    polarity: str | None = None,
) -> RecoveryResult:
    """Detect (video) -> reconstruct -> locate -> sample -> decode.

    ``source`` is a still image or a captured sequence.  ``truth`` is the
    ground-truth module matrix used for the accuracy figure.  Without a
    ``polarity`` (or manifest) both bright and dark readings are tried.
    Decode and localization failures are reported in the result, not
    raised.
    """
    params = params or ReconParams()
    if polarity is None and manifest is not None:
        polarity = manifest.get("polarity")
    polarities = (polarity,) if polarity else ("bright", "dark")
    detected = None
    frames = getattr(source, "frames", None)
    if frames is None and isinstance(source, (list, tuple)):
        frames = source
    if frames is not None:
        if capture is None and hasattr(source, "model"):
            capture = source.model
        detected = detect_object_frames(frames, sensitivity) if len(frames) >= 3 else []
        still = integrate_frames(frames, detected)
    else:
        still = source
    stages = reconstruct_stages(still, params)
    base = list(stages.values())[-1]

    kernels = [None]
    if not params.supplementary:
        kernels += list(SUPPLEMENTARY_RETRY_ORDER)
    first_modules = None
    last_error = None
    for name, pol in itertools.product(kernels, polarities):
        img = base if name is None else convolve(base, BUILTIN_KERNELS[name])
        try:
            modules = _attempt(img, mode, manifest, capture, pol)
        except (LocateError, DegenerateHistogramError) as exc:
            last_error = f"{type(exc).__name__}: {exc}"
            continue
        if first_modules is None:
            first_modules = modules
        try:
            payload = qr_decode(modules)
        except QRError as exc:
            last_error = f"{type(exc).__name__}: {exc}"
            continue
        if name is not None:
            stages[f"04-{name}"] = img
        acc = module_accuracy(modules, truth) if truth is not None else None
        return RecoveryResult(payload, True, acc, modules, detected, name, None, stages)
    acc = None
    if truth is not None:
        acc = module_accuracy(first_modules, truth) if first_modules is not None else 0.0
    return RecoveryResult(None, False, acc, first_modules, detected, None, last_error, stages)
