"""Closed-loop trials: conceal -> capture -> reconstruct -> score."""
from __future__ import annotations

import random
from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np

from ..channel import CaptureModel, capture_still, capture_video, downscale, load_presets, preset, warp_frame
from ..codecs.font import rasterize_text
from ..codecs.objects import prepare_image_object, rectangle_object, synthetic_floor_plan
from ..codecs.qr import BYTE_CAPACITY, NUMERIC_CAPACITY, Payload, qr_encode
from ..conceal import (
    BlinkSchedule,
    ConcealmentError,
    ConcealmentPlan,
    InfeasibleStealthError,
    StealthProfile,
    embed,
    find_surface,
    max_delta_below,
    plan_manifest,
    render_sequence,
    stealth_check,
)
from ..imaging import DegenerateHistogramError, otsu_threshold, to_gray
from ..pnm import load_pnm
from ..reconstruct import ReconParams, detect_object_frames, integrate_frames, reconstruct, recover_payload
from .screen import desktop_screen

CONFIG_SCHEMA_VERSION = 1
OBJECT_KINDS = ("qr", "text", "image", "rect")
# cells of untouched background kept around the object
QUIET_CELLS = {"qr": 4, "text": 2, "image": 2, "rect": 8}
DEFAULT_CELL_PX = {"qr": 8, "text": 4, "image": 2, "rect": 1}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ObjectSpec:
    kind: str = "qr"
    payload: str | None = None  # None: random payload per trial
    payload_mode: str = "numeric"
    text: str = "PASSWORD 1234"
    image_path: str | None = None  # None: synthetic floor plan
    size: int = 100  # rect side in pixels
    cell_px: int | None = None

    def __post_init__(self):
        if self.kind not in OBJECT_KINDS:
            raise ConfigError(f"unknown object kind {self.kind!r}")
        if self.payload_mode not in ("numeric", "byte"):
            raise ConfigError(f"unknown payload mode {self.payload_mode!r}")

    @property
    def cell(self) -> int:
        return self.cell_px or DEFAULT_CELL_PX[self.kind]

    @property
    def profile_kind(self) -> str:
        # a flashing block is judged like a picture
        return "image" if self.kind == "rect" else self.kind


@dataclass(frozen=True)
class ExperimentConfig:
    object: ObjectSpec = field(default_factory=ObjectSpec)
    polarity: str = "bright"
    mode: str = "static"
    delta: int | None = None
    display_fps: int | None = None  # None: 120 for blink60, else 60
    duration_frames: int = 16
    on_frames: int = 1
    phase: int = 0
    screen_size: tuple[int, int] = (480, 400)
    uniformity_tol: int = 0
    capture: str | dict = "identity"
    trials: int = 1
    seed: int = 0
    metrics: str = "both"
    locate: str = "oracle"
    recon: dict | None = None
    allow_at_risk: bool = False
    pixel_success_pct: float = 90.0

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.metrics not in ("decode_rate", "module_accuracy", "both"):
            raise ConfigError(f"unknown metrics selector {self.metrics!r}")
        if self.locate not in ("oracle", "finder"):
            raise ConfigError(f"unknown locate mode {self.locate!r}")

    def capture_model(self) -> CaptureModel:
        if isinstance(self.capture, str):
            return preset(self.capture)
        return CaptureModel.from_dict(self.capture)

    @property
    def fps(self) -> int:
        if self.display_fps is not None:
            return self.display_fps
        return 120 if self.mode == "blink60" else 60

    @property
    def capture_label(self) -> str:
        return self.capture if isinstance(self.capture, str) else "custom"


_TOP_KEYS = {f for f in ExperimentConfig.__dataclass_fields__} | {"schema_version", "sweep", "profile"}


def experiment_from_dict(d: dict[str, Any]) -> ExperimentConfig:
    """Build a config from its JSON form; unknown keys are rejected."""
    if d.get("schema_version", CONFIG_SCHEMA_VERSION) != CONFIG_SCHEMA_VERSION:
        raise ConfigError(f"unsupported config schema_version {d.get('schema_version')!r}")
    unknown = set(d) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    kw = {k: v for k, v in d.items() if k in ExperimentConfig.__dataclass_fields__}
    if "profile" in d:
        prof = d["profile"]
        kw.setdefault("polarity", prof.get("polarity", "bright"))
        kw.setdefault("mode", prof.get("mode", "static"))
    obj = kw.get("object", {})
    if isinstance(obj, dict):
        try:
            kw["object"] = ObjectSpec(**obj)
        except TypeError as exc:
            raise ConfigError(f"bad object spec: {exc}") from None
    if "screen_size" in kw:
        kw["screen_size"] = tuple(kw["screen_size"])
    try:
        return ExperimentConfig(**kw)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def experiment_to_dict(cfg: ExperimentConfig) -> dict:
    d = {k: getattr(cfg, k) for k in ExperimentConfig.__dataclass_fields__}
    d["object"] = dict(cfg.object.__dict__)
    d["screen_size"] = list(cfg.screen_size)
    d["schema_version"] = CONFIG_SCHEMA_VERSION
    return d


# ------------------------------------------------------------- objects

def random_payload(rng: random.Random, mode: str | None = None) -> Payload:
    mode = mode or rng.choice(("numeric", "byte"))
    if mode == "numeric":
        n = rng.randint(1, NUMERIC_CAPACITY)
        return Payload.numeric("".join(rng.choice("0123456789") for _ in range(n)))
    n = rng.randint(0, BYTE_CAPACITY)
    return Payload.from_bytes(bytes(rng.randrange(256) for _ in range(n)))


def payload_for(spec: ObjectSpec, seed: int) -> Payload:
    if spec.payload is None:
        return random_payload(random.Random(seed), spec.payload_mode)
    if spec.payload_mode == "numeric":
        return Payload.numeric(spec.payload)
    return Payload.from_bytes(spec.payload.encode("utf-8"))


def build_object(spec: ObjectSpec, seed: int = 0):
    """(object cells, payload or None); cells are bool modules or 0/255 pixels."""
    if spec.kind == "qr":
        p = payload_for(spec, seed)
        return qr_encode(p), p
    if spec.kind == "text":
        return rasterize_text(spec.text, 1), None
    if spec.kind == "image":
        src = synthetic_floor_plan() if spec.image_path is None else to_gray(load_pnm(spec.image_path))
        return prepare_image_object(src), None
    return rectangle_object(spec.size), None


def payload_to_json(p: Payload | None):
    if p is None:
        return None
    if p.mode == "numeric":
        return {"mode": "numeric", "content": p.content}
    return {"mode": "byte", "content_hex": p.content.hex()}


def payload_from_json(d) -> Payload | None:
    if d is None:
        return None
    if d["mode"] == "numeric":
        return Payload.numeric(d["content"])
    return Payload.from_bytes(bytes.fromhex(d["content_hex"]))


# ------------------------------------------------------------- planning

@dataclass
class Concealment:
    plan: ConcealmentPlan
    profile: StealthProfile
    verdict: Any
    at_risk: bool
    screen: np.ndarray
    cells: Any
    payload: Payload | None


def choose_delta(cfg: ExperimentConfig, profile: StealthProfile) -> tuple[int, Any, bool]:
    """Delta obeying the stealth gate, the verdict, and the at-risk flag."""
    if cfg.delta is None:
        delta = max_delta_below(profile.min_threshold_pct)
        if delta is None:
            if not cfg.allow_at_risk:
                raise InfeasibleStealthError(
                    f"{profile.object_kind}/{profile.polarity}/{profile.mode}: threshold "
                    f"{profile.min_threshold_pct}% is below one 8-bit step (0.3922%); "
                    "rerun with --allow-at-risk to embed at delta 1"
                )
            return 1, stealth_check(1, profile), True
        return delta, stealth_check(delta, profile), False
    verdict = stealth_check(cfg.delta, profile)
    if not verdict.passed:
        if not cfg.allow_at_risk:
            raise InfeasibleStealthError(
                f"delta {cfg.delta} is not below the {profile.min_threshold_pct}% detection threshold ({verdict.status})"
            )
        return cfg.delta, verdict, True
    return cfg.delta, verdict, False


def conceal(cfg: ExperimentConfig, seed: int | None = None) -> Concealment:
    seed = cfg.seed if seed is None else seed
    spec = cfg.object
    profile = StealthProfile.lookup(spec.profile_kind, cfg.polarity, cfg.mode)
    delta, verdict, at_risk = choose_delta(cfg, profile)
    cells, payload = build_object(spec, seed)
    screen = desktop_screen(*cfg.screen_size, theme=cfg.polarity)
    h, w = np.asarray(cells).shape
    cell = spec.cell
    margin = QUIET_CELLS[spec.kind] * cell
    found = find_surface(screen, w * cell + 2 * margin, h * cell + 2 * margin, cfg.polarity, cfg.uniformity_tol)
    if found is None:
        raise ConcealmentError(f"no uniform {cfg.polarity} surface large enough for the object")
    origin = (found[0] + margin, found[1] + margin)
    blink = None
    if cfg.mode != "static":
        blink = BlinkSchedule.for_mode(cfg.fps, cfg.mode, cfg.on_frames, cfg.phase)
    base = 255 if cfg.polarity == "bright" else 0
    plan = ConcealmentPlan(cfg.polarity, base, delta, origin, cell, blink)
    return Concealment(plan, profile, verdict, at_risk, screen, cells, payload)


def manifest_for(cfg: ExperimentConfig, c: Concealment) -> dict:
    h, w = np.asarray(c.cells).shape
    m = plan_manifest(c.plan, (h, w))
    m.update(
        {
            "object": {
                "kind": cfg.object.kind,
                "payload": payload_to_json(c.payload),
                "text": cfg.object.text if cfg.object.kind == "text" else None,
                "cells": [w, h],
            },
            "mode": cfg.mode,
            "profile": {
                "object_kind": c.profile.object_kind,
                "polarity": c.profile.polarity,
                "mode": c.profile.mode,
                "min_threshold_pct": c.profile.min_threshold_pct,
            },
            "stealth": {
                "status": c.verdict.status,
                "margin_pct": c.verdict.margin_pct,
                "excess_pct": c.verdict.excess_pct,
            },
            "contrast_pct": round(c.plan.contrast_pct, 4),
            "at_risk": c.at_risk,
            "screen_size": [int(cfg.screen_size[0]), int(cfg.screen_size[1])],
            "object_luma": c.plan.object_luma,
        }
    )
    return m


def render(cfg: ExperimentConfig, c: Concealment):
    frames = 1 if cfg.mode == "static" else cfg.duration_frames
    return render_sequence(c.screen, c.cells, c.plan, frames, display_fps=cfg.fps)


# ------------------------------------------------------------- scoring

def ink_truth_mask(shape, cells, plan: ConcealmentPlan) -> np.ndarray:
    """Full-screen boolean mask of embedded pixels."""
    screen = np.zeros(shape, dtype=np.uint8)
    marked = embed(np.full(shape, 255, np.uint8), cells, replace(plan, polarity="bright", base=255, delta=255))
    screen[marked == 0] = 1
    return screen.astype(bool)


def pixel_accuracy(recon: np.ndarray, truth: np.ndarray, roi, polarity: str) -> float:
    """Percent of ROI pixels whose binarized class matches the truth mask."""
    y0, y1, x0, x1 = roi
    r = recon[y0:y1, x0:x1]
    t = truth[y0:y1, x0:x1]
    if r.size == 0:
        return 0.0
    try:
        level = otsu_threshold(r)
        ink = r <= level if polarity == "bright" else r > level
    except DegenerateHistogramError:
        ink = np.zeros(r.shape, dtype=bool)
    return 100.0 * float(np.mean(ink == t))


def captured_truth(mask: np.ndarray, m: CaptureModel) -> np.ndarray:
    a = mask.astype(np.float64)
    if m.warp is not None:
        a = warp_frame(a, m.warp)
    return downscale(a, m.scale) > 0.5


@dataclass
class TrialResult:
    seed: int
    success: bool
    accuracy_pct: float
    at_risk: bool
    error: str | None = None


def run_trial(cfg: ExperimentConfig, index: int) -> TrialResult:
    """One seeded trial; every failure is reported, never raised."""
    seed = cfg.seed + index
    # stealth and placement problems belong to the configuration, not the trial
    c = conceal(cfg, seed)
    try:
        seq = render(cfg, c)
        model = cfg.capture_model().with_seed(seed)
        if cfg.mode == "static":
            captured = capture_still(seq.frames[0], model).image
        else:
            captured = capture_video(seq, model)
        params = ReconParams.from_dict(cfg.recon)
        if cfg.object.kind == "qr":
            manifest = manifest_for(cfg, c)
            r = recover_payload(
                captured, params, cfg.locate, manifest=manifest, capture=model, truth=c.cells, polarity=cfg.polarity
            )
            ok = r.decode_success and r.payload == c.payload
            return TrialResult(seed, ok, float(r.module_accuracy_pct or 0.0), c.at_risk, r.error)
        if cfg.mode == "static":
            still = captured
        else:
            frames = captured.frames
            detected = detect_object_frames(frames) if len(frames) >= 3 else []
            still = integrate_frames(frames, detected)
        recon = reconstruct(still, params)
        truth = captured_truth(ink_truth_mask(c.screen.shape, c.cells, c.plan), model)
        h, w = np.asarray(c.cells).shape
        cell = c.plan.scale
        pad = max(QUIET_CELLS[cfg.object.kind] * cell, 8)
        s = model.scale
        x0, y0 = c.plan.origin
        roi = (
            max(0, int((y0 - pad) * s)),
            min(recon.shape[0], int(np.ceil((y0 + h * cell + pad) * s))),
            max(0, int((x0 - pad) * s)),
            min(recon.shape[1], int(np.ceil((x0 + w * cell + pad) * s))),
        )
        acc = pixel_accuracy(recon, truth, roi, cfg.polarity)
        return TrialResult(seed, acc >= cfg.pixel_success_pct, acc, c.at_risk)
    except Exception as exc:  # a broken trial is a failed trial
        return TrialResult(seed, False, 0.0, c.at_risk, f"{type(exc).__name__}: {exc}")


def preset_order() -> list[str]:
    return list(load_presets())
