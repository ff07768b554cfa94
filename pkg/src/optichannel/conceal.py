"""Transmitter side: stealth gating, surface search, embedding and blinking."""
from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .imaging import as_gray
from .pnm import load_pnm, save_pnm

POLARITIES = ("bright", "dark")
MODES = ("static", "blink60", "blink30")
OBJECT_KINDS = ("qr", "text", "image")
BLINK_HZ = {"blink60": 60, "blink30": 30}
MANIFEST_NAME = "manifest.json"
SCHEMA_VERSION = 1

# Human detection thresholds in contrast percent, 40 subjects:
# (minimal, average, stdev) per (polarity, mode, object kind).
DETECTION_THRESHOLDS = {
    ("bright", "static", "qr"): (2.11, 2.45, 0.39),
    ("bright", "static", "text"): (3.50, 4.46, 0.49),
    ("bright", "static", "image"): (1.83, 3.18, 0.93),
    ("bright", "blink60", "qr"): (3.68, 5.79, 1.22),
    ("bright", "blink60", "text"): (12.00, 16.03, 3.27),
    ("bright", "blink60", "image"): (4.26, 6.36, 1.09),
    ("bright", "blink30", "qr"): (4.08, 5.61, 0.79),
    ("bright", "blink30", "text"): (13.50, 15.88, 1.99),
    ("bright", "blink30", "image"): (4.74, 5.98, 0.72),
    ("dark", "static", "qr"): (0.20, 0.36, 0.19),
    ("dark", "static", "text"): (2.50, 4.53, 1.57),
    ("dark", "static", "image"): (0.15, 0.94, 0.70),
    ("dark", "blink60", "qr"): (0.20, 0.86, 0.50),
    ("dark", "blink60", "text"): (6.00, 13.80, 3.91),
    ("dark", "blink60", "image"): (0.68, 1.52, 0.63),
    ("dark", "blink30", "qr"): (0.39, 0.92, 0.51),
    ("dark", "blink30", "text"): (6.50, 14.23, 3.63),
    ("dark", "blink30", "image"): (0.49, 1.58, 0.64),
}


class ConcealmentError(ValueError):
    pass


class InfeasibleStealthError(ConcealmentError):
    pass


@dataclass(frozen=True)
class StealthProfile:
    object_kind: str
    polarity: str
    mode: str
    min_threshold_pct: float

    def __post_init__(self):
        if self.min_threshold_pct <= 0:
            raise ValueError("min_threshold_pct must be positive")

    @classmethod
    def lookup(cls, object_kind: str, polarity: str, mode: str) -> "StealthProfile":
        try:
            minimal = DETECTION_THRESHOLDS[(polarity, mode, object_kind)][0]
        except KeyError:
            raise KeyError(f"no stealth profile for {object_kind}/{polarity}/{mode}") from None
        return cls(object_kind, polarity, mode, minimal)


def all_profiles() -> list[StealthProfile]:
    return [StealthProfile(k, p, m, v[0]) for (p, m, k), v in DETECTION_THRESHOLDS.items()]


# ------------------------------------------------------------- contrast

def contrast_fraction(p_b: int, p_i: int) -> Fraction:
    return Fraction(100 * abs(int(p_b) - int(p_i)), 255)


def contrast_percent(p_b: int, p_i: int) -> float:
    """Contrast between background and object luma, in percent of full scale."""
    for v in (p_b, p_i):
        if not 0 <= v <= 255:
            raise ValueError("luma values must lie in [0, 255]")
    return float(contrast_fraction(p_b, p_i))


def max_delta_below(threshold_pct: float) -> int | None:
    """Largest integer delta whose contrast is strictly below the threshold.

    None when even a one-level step is too visible.
    """
    t = Fraction(str(threshold_pct))
    if not 0 < t <= 100:
        raise ValueError("threshold must lie in (0, 100]")
    # 100*d/255 < t  <=>  d < 255*t/100
    bound = t * 255 / 100
    d = int(bound)
    if d == bound:
        d -= 1
    d = min(d, 255)
    return d if d >= 1 else None


@dataclass(frozen=True)
class StealthVerdict:
    status: str  # "pass" | "fail" | "infeasible"
    margin_pct: float | None = None
    excess_pct: float | None = None

    @property
    def passed(self) -> bool:
        return self.status == "pass"


def stealth_check(plan_or_delta, profile: StealthProfile) -> StealthVerdict:
    delta = plan_or_delta.delta if isinstance(plan_or_delta, ConcealmentPlan) else int(plan_or_delta)
    t = Fraction(str(profile.min_threshold_pct))
    if Fraction(100, 255) >= t:
        return StealthVerdict("infeasible")
    eff = Fraction(100 * delta, 255)
    if eff < t:
        return StealthVerdict("pass", margin_pct=float(t - eff))
    return StealthVerdict("fail", excess_pct=float(eff - t))


# ------------------------------------------------------------- plan

@dataclass(frozen=True)
class BlinkSchedule:
    display_fps: int
    period: int
    on_frames: int = 1
    phase: int = 0

    def __post_init__(self):
        if self.period < 1 or not 1 <= self.on_frames <= self.period:
            raise ValueError("blink needs period >= 1 and 1 <= on_frames <= period")

    def is_on(self, frame: int) -> bool:
        return (frame - self.phase) % self.period < self.on_frames

    @classmethod
    def for_mode(cls, display_fps: int, mode: str, on_frames: int = 1, phase: int = 0) -> "BlinkSchedule":
        if display_fps not in (60, 120):
            raise ConcealmentError(f"unsupported display rate {display_fps} fps")
        if mode not in BLINK_HZ:
            raise ConcealmentError(f"unsupported blink mode {mode!r}")
        hz = BLINK_HZ[mode]
        if display_fps < 2 * hz:
            raise ConcealmentError(f"{mode} needs a display of at least {2 * hz} fps")
        return cls(display_fps, display_fps // hz, on_frames, phase)


@dataclass(frozen=True)
class ConcealmentPlan:
    polarity: str
    base: int
    delta: int
    origin: tuple[int, int] = (0, 0)
    scale: int = 1
    blink: BlinkSchedule | None = None

    def __post_init__(self):
        if self.polarity not in POLARITIES:
            raise ValueError(f"unknown polarity {self.polarity!r}")
        if self.delta < 1:
            raise ValueError("delta must be >= 1")
        if self.scale < 1:
            raise ValueError("scale must be >= 1")
        if not 0 <= self.base <= 255:
            raise ValueError("base luma must lie in [0, 255]")
        if not 0 <= self.object_luma <= 255:
            raise ValueError(f"delta {self.delta} drives object luma out of range from base {self.base}")

    @property
    def object_luma(self) -> int:
        return self.base - self.delta if self.polarity == "bright" else self.base + self.delta

    @property
    def contrast_pct(self) -> float:
        return 100.0 * self.delta / 255.0


def schedule_blink(display_fps: int, mode: str, duration_frames: int) -> list[int]:
    """Display frames that carry the object, one frame on per period."""
    sched = BlinkSchedule.for_mode(display_fps, mode)
    return [f for f in range(duration_frames) if sched.is_on(f)]


# ------------------------------------------------------------- surfaces

def find_surface(screen, w: int, h: int, polarity: str, uniformity_tol: int = 0):
    """Top-left (x, y) of the first uniform w x h window in raster order, or None."""
    s = as_gray(screen)
    H, W = s.shape
    if w > W or h > H or w < 1 or h < 1:
        raise ConcealmentError(f"object {w}x{h} does not fit on a {W}x{H} screen")
    target = 255 if polarity == "bright" else 0
    ok = (np.abs(s.astype(np.int16) - target) <= uniformity_tol).astype(np.int64)
    ii = np.zeros((H + 1, W + 1), dtype=np.int64)
    ii[1:, 1:] = ok.cumsum(0).cumsum(1)
    counts = ii[h:, w:] - ii[:-h, w:] - ii[h:, :-w] + ii[:-h, :-w]
    ys, xs = np.nonzero(counts == w * h)
    if len(ys) == 0:
        return None
    return int(xs[0]), int(ys[0])


# ------------------------------------------------------------- embedding

def ink_mask(obj) -> np.ndarray:
    """Boolean cells to embed: True modules of a symbol or 0-valued pixels."""
    a = np.asarray(obj)
    if a.dtype == bool:
        return a.copy()
    return as_gray(a) == 0


def embed(screen, obj, plan: ConcealmentPlan) -> np.ndarray:
    s = as_gray(screen)
    mask = ink_mask(obj)
    if plan.scale > 1:
        mask = np.kron(mask, np.ones((plan.scale, plan.scale), dtype=bool))
    x, y = plan.origin
    h, w = mask.shape
    if x < 0 or y < 0 or y + h > s.shape[0] or x + w > s.shape[1]:
        raise ConcealmentError(f"object {w}x{h} at {(x, y)} falls outside the {s.shape[1]}x{s.shape[0]} screen")
    out = s.copy()
    region = out[y : y + h, x : x + w]
    region[mask] = plan.object_luma
    return out


@dataclass
class FrameSequence:
    display_fps: int
    frames: list = field(default_factory=list)

    def __post_init__(self):
        if not self.frames:
            raise ValueError("a frame sequence needs at least one frame")
        shape = np.asarray(self.frames[0]).shape
        if any(np.asarray(f).shape != shape for f in self.frames):
            raise ValueError("frames must share dimensions")

    def __len__(self):
        return len(self.frames)


def render_sequence(screen, obj, plan: ConcealmentPlan, duration_frames: int, display_fps: int | None = None) -> FrameSequence:
    if duration_frames < 1:
        raise ValueError("duration must be at least one frame")
    clean = as_gray(screen)
    loaded = embed(clean, obj, plan)
    fps = plan.blink.display_fps if plan.blink else (display_fps or 60)
    frames = []
    for i in range(duration_frames):
        on = plan.blink is None or plan.blink.is_on(i)
        frames.append(loaded if on else clean)
    return FrameSequence(fps, frames)


# ------------------------------------------------------------- on disk

def frame_name(i: int) -> str:
    return f"frame_{i:05d}.pgm"


def write_sequence(seq: FrameSequence, directory: str | os.PathLike, manifest: dict) -> Path:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    for i, f in enumerate(seq.frames):
        save_pnm(f, d / frame_name(i))
    m = dict(manifest)
    m["schema_version"] = SCHEMA_VERSION
    m["display_fps"] = seq.display_fps
    m["frame_count"] = len(seq)
    with open(d / MANIFEST_NAME, "w") as fh:
        json.dump(m, fh, indent=2, sort_keys=True)
    return d


def read_manifest(directory: str | os.PathLike) -> dict:
    p = Path(directory) / MANIFEST_NAME
    if not p.is_file():
        raise FileNotFoundError(f"missing {MANIFEST_NAME} in {directory}")
    with open(p) as fh:
        m = json.load(fh)
    if m.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported manifest schema_version {m.get('schema_version')!r}")
    return m


def read_sequence(directory: str | os.PathLike) -> tuple[FrameSequence, dict]:
    m = read_manifest(directory)
    d = Path(directory)
    frames = [load_pnm(d / frame_name(i)) for i in range(int(m["frame_count"]))]
    return FrameSequence(int(m["display_fps"]), frames), m


def plan_manifest(plan: ConcealmentPlan, object_shape: tuple[int, int]) -> dict:
    """Ground-truth geometry fields of the on-disk manifest."""
    h, w = object_shape
    blink = asdict(plan.blink) if plan.blink else None
    if blink:
        blink = {"period": blink["period"], "on": blink["on_frames"], "phase": blink["phase"]}
    return {
        "object_origin": list(plan.origin),
        "object_size_px": [w * plan.scale, h * plan.scale],
        "scale": plan.scale,
        "delta": plan.delta,
        "base": plan.base,
        "polarity": plan.polarity,
        "blink": blink,
    }
