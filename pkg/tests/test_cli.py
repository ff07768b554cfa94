import json

import numpy as np
import pytest

from optichannel.conceal import read_manifest, read_sequence
from optichannel.harness.cli import EXIT_DECODE_FAILURE, EXIT_ERROR, EXIT_OK, main


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_conceal_bright_default(tmp_path, capsys):
    code, out, _ = run(capsys, "conceal", "--out", tmp_path / "f")
    assert code == EXIT_OK
    summary = json.loads(out)
    assert summary["delta"] == 5 and summary["stealth"] == "pass"
    m = read_manifest(tmp_path / "f")
    assert m["delta"] == 5 and m["frame_count"] == 1 and m["polarity"] == "bright"


def test_conceal_dark_refuses_without_override(tmp_path, capsys):
    code, _, err = run(capsys, "conceal", "--polarity", "dark", "--out", tmp_path / "f")
    assert code == EXIT_ERROR
    msg = json.loads(err)
    assert msg["error"] == "InfeasibleStealthError"
    assert "allow-at-risk" in msg["message"]
    assert not (tmp_path / "f").exists()
    code, out, _ = run(capsys, "--allow-at-risk", "conceal", "--polarity", "dark", "--out", tmp_path / "f")
    assert code == EXIT_OK and json.loads(out)["at_risk"] is True


def test_conceal_blink30_two_periodic(tmp_path, capsys):
    code, _, _ = run(capsys, "conceal", "--mode", "blink30", "--frames", 8, "--out", tmp_path / "f")
    assert code == EXIT_OK
    seq, m = read_sequence(tmp_path / "f")
    assert m["display_fps"] == 60 and m["blink"]["period"] == 2
    assert all(np.array_equal(seq.frames[i], seq.frames[i % 2]) for i in range(8))
    assert not np.array_equal(seq.frames[0], seq.frames[1])


def test_flags_accepted_before_or_after_subcommand(tmp_path, capsys):
    run(capsys, "--seed", 4, "conceal", "--out", tmp_path / "a")
    run(capsys, "conceal", "--seed", 4, "--out", tmp_path / "b")
    assert (tmp_path / "a" / "frame_00000.pgm").read_bytes() == (tmp_path / "b" / "frame_00000.pgm").read_bytes()


def test_capture_identity_byte_identical(tmp_path, capsys):
    run(capsys, "conceal", "--out", tmp_path / "f")
    code, _, _ = run(capsys, "capture", tmp_path / "f", "--preset", "identity", "--out", tmp_path / "c")
    assert code == EXIT_OK
    assert (tmp_path / "f" / "frame_00000.pgm").read_bytes() == (tmp_path / "c" / "frame_00000.pgm").read_bytes()
    m = read_manifest(tmp_path / "c")
    assert m["capture"]["scale"] == 1.0 and m["capture_kind"] == "still" and m["delta"] == 5


def test_capture_presets_distinct_and_deterministic(tmp_path, capsys):
    run(capsys, "conceal", "--out", tmp_path / "f")
    for name, preset in (("a", "8m"), ("b", "8m"), ("c", "50cm")):
        run(capsys, "capture", tmp_path / "f", "--preset", preset, "--seed", 9, "--out", tmp_path / name)
    a = (tmp_path / "a" / "frame_00000.pgm").read_bytes()
    assert a == (tmp_path / "b" / "frame_00000.pgm").read_bytes()
    assert a != (tmp_path / "c" / "frame_00000.pgm").read_bytes()


def test_capture_missing_manifest(tmp_path, capsys):
    (tmp_path / "empty").mkdir()
    code, _, err = run(capsys, "capture", tmp_path / "empty", "--out", tmp_path / "c")
    assert code == EXIT_ERROR and "manifest" in json.loads(err)["message"]


def test_reconstruct_identity_and_stage_dump(tmp_path, capsys):
    run(capsys, "conceal", "--payload", "hello", "--out", tmp_path / "f")
    run(capsys, "capture", tmp_path / "f", "--out", tmp_path / "c")
    code, out, _ = run(capsys, "reconstruct", tmp_path / "c", "--dump-stages", "--out", tmp_path / "r")
    assert code == EXIT_OK
    res = json.loads(out)
    assert res["decode_success"] and res["text"] == "hello" and res["module_accuracy_pct"] == 100.0
    assert sorted(p.name for p in (tmp_path / "r" / "stages").iterdir()) == [
        "01-desaturate.pgm",
        "02-equalize.pgm",
        "03-unsharp.pgm",
    ]


def test_reconstruct_oracle_and_finder_agree(tmp_path, capsys):
    run(capsys, "conceal", "--payload", "31337", "--out", tmp_path / "f")
    run(capsys, "capture", tmp_path / "f", "--out", tmp_path / "c")
    _, a, _ = run(capsys, "reconstruct", tmp_path / "c", "--locate", "oracle")
    _, b, _ = run(capsys, "reconstruct", tmp_path / "c", "--locate", "finder")
    assert json.loads(a)["payload"] == json.loads(b)["payload"] == {"mode": "numeric", "content": "31337"}


def test_reconstruct_blink_video(tmp_path, capsys):
    run(capsys, "conceal", "--mode", "blink30", "--payload", "777", "--out", tmp_path / "f")
    code, out, _ = run(capsys, "capture", tmp_path / "f", "--out", tmp_path / "c")
    assert json.loads(out)["capture_kind"] == "video"
    code, out, _ = run(capsys, "reconstruct", tmp_path / "c")
    assert code == EXIT_OK and json.loads(out)["text"] == "777"


def test_reconstruct_corrupt_dir(tmp_path, capsys):
    run(capsys, "conceal", "--out", tmp_path / "f")
    run(capsys, "capture", tmp_path / "f", "--out", tmp_path / "c")
    frame = tmp_path / "c" / "frame_00000.pgm"
    frame.write_bytes(frame.read_bytes()[:200])
    code, _, err = run(capsys, "reconstruct", tmp_path / "c")
    assert code == EXIT_ERROR and json.loads(err)["error"] == "PnmError"


def test_reconstruct_decode_failure_exit_code(tmp_path, capsys):
    run(capsys, "conceal", "--out", tmp_path / "f")
    cfg = tmp_path / "noisy.json"
    cfg.write_text(json.dumps({"capture": {"noise_sigma": 64}}))
    run(capsys, "capture", tmp_path / "f", "--config", cfg, "--out", tmp_path / "c")
    code, out, _ = run(capsys, "reconstruct", tmp_path / "c")
    assert code == EXIT_DECODE_FAILURE and json.loads(out)["decode_success"] is False


def test_evaluate_writes_csv(tmp_path, capsys):
    cfg = tmp_path / "sweep.json"
    cfg.write_text(json.dumps({"schema_version": 1, "trials": 2, "sweep": {"presets": ["identity", "50cm"]}}))
    code, out, _ = run(capsys, "evaluate", "--config", cfg)
    assert code == EXIT_OK
    lines = out.strip().splitlines()
    assert lines[0].startswith("object_kind,polarity,mode,contrast_pct,delta,preset")
    assert len(lines) == 3 and ",identity," in lines[1] and ",100.00," in lines[1]
    code, _, _ = run(capsys, "evaluate", "--config", cfg, "--out", tmp_path / "rep")
    assert (tmp_path / "rep" / "report.csv").read_text().replace("\r\n", "\n").strip() == out.replace("\r\n", "\n").strip()


def test_evaluate_needs_config(capsys):
    code, _, _ = run(capsys, "evaluate")
    assert code == EXIT_ERROR


@pytest.mark.parametrize(
    "args,code,status",
    [((), EXIT_OK, "pass"), (("--noise", 64), EXIT_DECODE_FAILURE, "fail"), (("--payload", ""), EXIT_OK, "pass")],
)
def test_roundtrip(capsys, args, code, status):
    got, out, _ = run(capsys, "roundtrip", *args)
    res = json.loads(out)
    assert got == code and res["status"] == status
    if status == "fail":
        assert res["decode_failures"] > 0
