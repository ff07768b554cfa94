import json
from fractions import Fraction

import numpy as np
import pytest

from optichannel.codecs.qr import Payload, qr_encode
from optichannel.conceal import (
    DETECTION_THRESHOLDS,
    ConcealmentError,
    ConcealmentPlan,
    FrameSequence,
    StealthProfile,
    BlinkSchedule,
    all_profiles,
    contrast_percent,
    embed,
    find_surface,
    max_delta_below,
    plan_manifest,
    read_sequence,
    render_sequence,
    schedule_blink,
    stealth_check,
    write_sequence,
)

from oracles import contrast_pct_exact, first_uniform_window

# minimal detection thresholds, transcribed independently for cross-checking
TABLE3_MINIMA = {
    ("bright", "static"): {"qr": 2.11, "text": 3.50, "image": 1.83},
    ("bright", "blink60"): {"qr": 3.68, "text": 12.00, "image": 4.26},
    ("bright", "blink30"): {"qr": 4.08, "text": 13.50, "image": 4.74},
    ("dark", "static"): {"qr": 0.20, "text": 2.50, "image": 0.15},
    ("dark", "blink60"): {"qr": 0.20, "text": 6.00, "image": 0.68},
    ("dark", "blink30"): {"qr": 0.39, "text": 6.50, "image": 0.49},
}


def test_threshold_table_matches_transcription():
    assert len(DETECTION_THRESHOLDS) == 18
    for (pol, mode), row in TABLE3_MINIMA.items():
        for kind, minimum in row.items():
            assert StealthProfile.lookup(kind, pol, mode).min_threshold_pct == minimum
    assert len(all_profiles()) == 18


def test_threshold_table_averages_sample():
    assert DETECTION_THRESHOLDS[("bright", "static", "qr")] == (2.11, 2.45, 0.39)
    assert DETECTION_THRESHOLDS[("dark", "blink60", "text")] == (6.00, 13.80, 3.91)


@pytest.mark.parametrize("pb,pi,expected", [(255, 255, 0.0), (0, 255, 100.0), (255, 250, 1.9608)])
def test_contrast_percent(pb, pi, expected):
    assert round(contrast_percent(pb, pi), 4) == expected


def test_contrast_rejects_out_of_range():
    with pytest.raises(ValueError):
        contrast_percent(256, 0)


@pytest.mark.parametrize("t,expected", [(2.11, 5), (0.20, None), (100, 254), (0.3922, 1), (0.39, None)])
def test_max_delta_below(t, expected):
    assert max_delta_below(t) == expected


def test_max_delta_below_brute_force():
    for t in [x / 100 for x in range(1, 10001, 37)]:
        feasible = [d for d in range(1, 256) if contrast_pct_exact(0, d) < Fraction(str(t))]
        assert max_delta_below(t) == (max(feasible) if feasible else None)


def test_stealth_check_examples():
    prof = StealthProfile.lookup("qr", "bright", "static")
    v = stealth_check(5, prof)
    assert v.status == "pass" and round(v.margin_pct, 4) == 0.1492
    v = stealth_check(6, prof)
    assert v.status == "fail" and round(v.excess_pct, 4) == 0.2429
    assert stealth_check(1, StealthProfile.lookup("image", "dark", "static")).status == "infeasible"


def test_stealth_check_monotone_in_delta():
    for prof in all_profiles():
        statuses = [stealth_check(d, prof).status for d in range(1, 40)]
        if statuses[0] == "infeasible":
            assert set(statuses) == {"infeasible"}
            continue
        first_fail = statuses.index("fail") if "fail" in statuses else len(statuses)
        assert all(s == "pass" for s in statuses[:first_fail])
        assert all(s == "fail" for s in statuses[first_fail:])


def test_plan_rejects_bad_values():
    with pytest.raises(ValueError):
        ConcealmentPlan("bright", 255, 0)
    with pytest.raises(ValueError):
        ConcealmentPlan("dark", 250, 10)
    with pytest.raises(ValueError):
        ConcealmentPlan("bright", 3, 5)


def test_schedule_blink_examples():
    assert schedule_blink(60, "blink30", 8) == [0, 2, 4, 6]
    assert schedule_blink(120, "blink60", 8) == [0, 2, 4, 6]
    assert schedule_blink(120, "blink30", 8) == [0, 4]
    with pytest.raises(ConcealmentError):
        schedule_blink(60, "blink60", 8)
    with pytest.raises(ConcealmentError):
        schedule_blink(50, "blink30", 8)


@pytest.mark.parametrize("fps,mode,period", [(60, "blink30", 2), (120, "blink30", 4), (120, "blink60", 2)])
def test_schedule_blink_count(fps, mode, period):
    for n in range(1, 30):
        frames = schedule_blink(fps, mode, n)
        assert len(frames) == -(-n // period)
        assert all(b - a == period for a, b in zip(frames, frames[1:]))


# ------------------------------------------------------------- surfaces

def test_find_surface_trivial():
    s = np.full((30, 40), 255, np.uint8)
    assert find_surface(s, 10, 10, "bright") == (0, 0)
    assert find_surface(s, 10, 10, "dark") is None


def test_find_surface_patch():
    s = np.zeros((200, 300), np.uint8)
    s[50:90, 100:140] = 254
    assert find_surface(s, 32, 32, "bright", 4) == (100, 50)
    assert find_surface(s, 32, 32, "bright", 0) is None


def test_find_surface_matches_exhaustive_scan():
    rng = np.random.default_rng(3)
    for _ in range(15):
        s = np.where(rng.random((14, 17)) < 0.08, rng.integers(0, 256), 255).astype(np.uint8)
        w, h = int(rng.integers(1, 7)), int(rng.integers(1, 7))
        tol = int(rng.integers(0, 3))
        assert find_surface(s, w, h, "bright", tol) == first_uniform_window(s.tolist(), w, h, 255, tol)


def test_find_surface_object_too_large():
    with pytest.raises(ConcealmentError):
        find_surface(np.zeros((5, 5), np.uint8), 6, 2, "dark")


# ------------------------------------------------------------- embedding

def test_embed_bright_and_dark_lumas():
    obj = np.array([[0, 255], [255, 0]], np.uint8)
    out = embed(np.full((4, 4), 255, np.uint8), obj, ConcealmentPlan("bright", 255, 5, (1, 1)))
    assert out[1, 1] == 250 and out[2, 2] == 250 and out[1, 2] == 255 and out[0, 0] == 255
    out = embed(np.zeros((4, 4), np.uint8), obj, ConcealmentPlan("dark", 0, 1))
    assert out[0, 0] == 1 and out[0, 1] == 0


def test_embed_support_equals_scaled_mask():
    m = qr_encode(Payload.numeric("123"))
    plan = ConcealmentPlan("bright", 255, 5, (7, 3), 3)
    screen = np.full((100, 100), 255, np.uint8)
    out = embed(screen, m, plan)
    diff = screen.astype(int) - out
    expected = np.zeros_like(diff, dtype=bool)
    expected[3 : 3 + 87, 7 : 7 + 87] = np.kron(m, np.ones((3, 3), bool))
    assert np.array_equal(diff != 0, expected)
    assert set(np.unique(out).tolist()) == {250, 255}
    for v in np.unique(out):
        assert contrast_percent(255, int(v)) in (0.0, 100 * 5 / 255)


def test_embed_out_of_bounds():
    with pytest.raises(ConcealmentError):
        embed(np.full((10, 10), 255, np.uint8), np.zeros((4, 4), np.uint8), ConcealmentPlan("bright", 255, 5, (8, 8)))


def test_render_static_and_blink():
    screen = np.full((20, 20), 255, np.uint8)
    obj = np.zeros((4, 4), np.uint8)
    seq = render_sequence(screen, obj, ConcealmentPlan("bright", 255, 5, (2, 2)), 5)
    assert len(seq) == 5 and all(np.array_equal(f, seq.frames[0]) for f in seq.frames)
    blink = BlinkSchedule.for_mode(60, "blink30")
    seq = render_sequence(screen, obj, ConcealmentPlan("bright", 255, 5, (2, 2), blink=blink), 4)
    assert seq.display_fps == 60
    assert (seq.frames[0] != screen).any() and (seq.frames[2] != screen).any()
    assert np.array_equal(seq.frames[1], screen) and np.array_equal(seq.frames[3], screen)
    diff = seq.frames[0].astype(int) - seq.frames[1]
    assert np.array_equal(diff != 0, np.pad(np.ones((4, 4), bool), ((2, 14), (2, 14))))


def test_frame_sequence_invariants():
    with pytest.raises(ValueError):
        FrameSequence(60, [])
    with pytest.raises(ValueError):
        FrameSequence(60, [np.zeros((2, 2)), np.zeros((3, 2))])


def test_sequence_disk_roundtrip(tmp_path):
    screen = np.full((20, 24), 255, np.uint8)
    plan = ConcealmentPlan("bright", 255, 5, (2, 3), 2, BlinkSchedule.for_mode(60, "blink30"))
    obj = np.zeros((3, 4), np.uint8)
    seq = render_sequence(screen, obj, plan, 6)
    write_sequence(seq, tmp_path, plan_manifest(plan, obj.shape))
    names = sorted(p.name for p in tmp_path.iterdir())
    assert names == ["frame_00000.pgm", "frame_00001.pgm", "frame_00002.pgm", "frame_00003.pgm",
                     "frame_00004.pgm", "frame_00005.pgm", "manifest.json"]
    back, m = read_sequence(tmp_path)
    assert all(np.array_equal(a, b) for a, b in zip(back.frames, seq.frames))
    for key in ("display_fps", "frame_count", "object_origin", "object_size_px", "scale", "delta", "polarity", "blink"):
        assert key in m
    assert m["blink"] == {"period": 2, "on": 1, "phase": 0}
    assert m["object_size_px"] == [8, 6] and m["object_origin"] == [2, 3]
    assert json.loads((tmp_path / "manifest.json").read_text())["schema_version"] == 1


def test_read_sequence_missing_manifest(tmp_path):
    with pytest.raises(FileNotFoundError):
        read_sequence(tmp_path)
