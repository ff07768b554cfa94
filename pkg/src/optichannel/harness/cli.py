"""Command-line entry point: conceal, capture, reconstruct, evaluate, roundtrip."""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from ..channel import CaptureModel, capture_still, capture_video, preset
from ..codecs.qr import Payload, QRError, qr_encode
from ..conceal import ConcealmentError, FrameSequence, read_sequence, write_sequence
from ..pnm import PnmError, save_pnm
from ..reconstruct import (
    ReconParams,
    detect_object_frames,
    dump_stages,
    integrate_frames,
    reconstruct_stages,
    recover_payload,
)
from .experiment import (
    ConfigError,
    ExperimentConfig,
    ObjectSpec,
    conceal,
    experiment_from_dict,
    experiment_to_dict,
    manifest_for,
    payload_from_json,
    payload_to_json,
    render,
    run_trial,
)
from .sweep import evaluate, rows_to_csv, write_report

EXIT_OK = 0
EXIT_DECODE_FAILURE = 1
EXIT_ERROR = 2

_GLOBAL_DEFAULTS = {"config": None, "seed": None, "out": None, "allow_at_risk": False, "dump_stages": False}


class CliError(Exception):
    pass


def _global_flags() -> argparse.ArgumentParser:
    # SUPPRESS lets the flags appear before or after the subcommand
    p = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    p.add_argument("--config", help="experiment or sweep config (JSON)")
    p.add_argument("--seed", type=int, help="base seed")
    p.add_argument("--out", help="output directory")
    p.add_argument("--allow-at-risk", action="store_true", help="embed at delta 1 where the stealth gate is infeasible")
    p.add_argument("--dump-stages", action="store_true", help="write one PGM per reconstruction stage")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _global_flags()
    parser = argparse.ArgumentParser(prog="optichannel", parents=[common], description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("conceal", parents=[common], help="embed an object and write frames plus manifest")
    p.add_argument("--kind", choices=("qr", "text", "image", "rect"))
    p.add_argument("--payload")
    p.add_argument("--payload-mode", choices=("numeric", "byte"))
    p.add_argument("--text")
    p.add_argument("--image")
    p.add_argument("--polarity", choices=("bright", "dark"))
    p.add_argument("--mode", choices=("static", "blink60", "blink30"))
    p.add_argument("--delta", type=int)
    p.add_argument("--display-fps", type=int)
    p.add_argument("--frames", type=int, help="sequence length for blink modes")

    p = sub.add_parser("capture", parents=[common], help="pass a frame directory through the capture model")
    p.add_argument("frames_dir")
    p.add_argument("--preset", default=None)

    p = sub.add_parser("reconstruct", parents=[common], help="recover the payload from a captured directory")
    p.add_argument("captured_dir")
    p.add_argument("--locate", choices=("oracle", "finder"), default="oracle")
    p.add_argument("--unsharp", choices=("fixed", "parametric", "none"), default=None)
    p.add_argument("--kernel", action="append", default=None, help="supplementary kernel, repeatable")

    p = sub.add_parser("evaluate", parents=[common], help="run a sweep and write the CSV report")
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("roundtrip", parents=[common], help="conceal, capture and decode one payload")
    p.add_argument("--payload", default="314159265358979")
    p.add_argument("--noise", type=float, default=None, help="noise sigma added to the capture model")
    p.add_argument("--preset", default="identity")
    p.add_argument("--trials", type=int, default=1)
    return parser


def _load_config(path) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            d = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot read config {path}: {exc}") from None
    if not isinstance(d, dict):
        raise CliError("config must be a JSON object")
    return d


def _payload_mode(text: str) -> str:
    return "numeric" if text.isdigit() else "byte"


def _emit(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True))


# ------------------------------------------------------------- commands

def cmd_conceal(args) -> int:
    d = _load_config(args.config)
    d.pop("sweep", None)
    obj = dict(d.get("object", {}))
    for flag, key in (("kind", "kind"), ("payload", "payload"), ("payload_mode", "payload_mode"), ("text", "text"), ("image", "image_path")):
        if getattr(args, flag) is not None:
            obj[key] = getattr(args, flag)
    if args.payload is not None and args.payload_mode is None:
        obj["payload_mode"] = _payload_mode(args.payload)
    d["object"] = obj
    for flag, key in (("polarity", "polarity"), ("mode", "mode"), ("delta", "delta"), ("display_fps", "display_fps"), ("frames", "duration_frames")):
        if getattr(args, flag) is not None:
            d[key] = getattr(args, flag)
    if args.seed is not None:
        d["seed"] = args.seed
    if args.allow_at_risk:
        d["allow_at_risk"] = True
    cfg = experiment_from_dict(d)
    c = conceal(cfg)
    seq = render(cfg, c)
    out = Path(args.out or "conceal_out")
    manifest = manifest_for(cfg, c)
    manifest["config"] = experiment_to_dict(cfg)
    write_sequence(seq, out, manifest)
    _emit(
        {
            "out": str(out),
            "frames": len(seq),
            "delta": c.plan.delta,
            "contrast_pct": round(c.plan.contrast_pct, 4),
            "stealth": c.verdict.status,
            "at_risk": c.at_risk,
        }
    )
    return EXIT_OK


def _capture_model(args, manifest) -> tuple[CaptureModel, str]:
    d = _load_config(args.config)
    if args.preset is not None:
        name, model = args.preset, preset(args.preset)
    elif isinstance(d.get("capture"), dict):
        name, model = "custom", CaptureModel.from_dict(d["capture"])
    else:
        name = d.get("capture", "identity")
        model = preset(name)
    seed = args.seed if args.seed is not None else d.get("seed", manifest.get("config", {}).get("seed", 0))
    return model.with_seed(seed), name


def cmd_capture(args) -> int:
    seq, manifest = read_sequence(args.frames_dir)
    model, name = _capture_model(args, manifest)
    if manifest.get("blink"):
        captured = capture_video(seq, model)
        frames, kind, fps = captured.frames, "video", model.camera_fps
    else:
        frames = [capture_still(f, model, i).image for i, f in enumerate(seq.frames)]
        kind, fps = "still", seq.display_fps
    out = Path(args.out or "capture_out")
    m = dict(manifest)
    m.update({"capture": model.to_dict(), "capture_preset": name, "capture_kind": kind, "camera_fps": model.camera_fps})
    m["source_display_fps"] = seq.display_fps
    write_sequence(FrameSequence(fps, frames), out, m)
    _emit({"out": str(out), "frames": len(frames), "capture_kind": kind, "preset": name})
    return EXIT_OK


def _recon_params(args, d: dict) -> ReconParams:
    params = ReconParams.from_dict(d.get("recon"))
    if args.unsharp is not None:
        params = replace(params, unsharp=ReconParams.from_dict({"unsharp": args.unsharp}).unsharp)
    if args.kernel:
        params = replace(params, supplementary=tuple(args.kernel))
    return params


def cmd_reconstruct(args) -> int:
    seq, manifest = read_sequence(args.captured_dir)
    d = _load_config(args.config)
    params = _recon_params(args, d)
    capture = CaptureModel.from_dict(manifest["capture"]) if manifest.get("capture") else None
    source = seq.frames[0] if len(seq) == 1 else seq.frames
    out = Path(args.out) if args.out else None
    obj = manifest.get("object") or {}
    if obj.get("kind", "qr") != "qr":
        still = source if len(seq) == 1 else None
        if still is None:
            still = integrate_frames(seq.frames, detect_object_frames(seq.frames))
        stages = reconstruct_stages(still, params)
        if out is not None:
            out.mkdir(parents=True, exist_ok=True)
            save_pnm(list(stages.values())[-1], out / "reconstructed.pgm")
            if args.dump_stages:
                dump_stages(stages, out / "stages")
        _emit({"object_kind": obj.get("kind"), "stages": list(stages)})
        return EXIT_OK

    truth_payload = payload_from_json(obj.get("payload"))
    truth = qr_encode(truth_payload) if truth_payload is not None else None
    r = recover_payload(
        source,
        params,
        args.locate,
        manifest=manifest if args.locate == "oracle" else None,
        capture=capture,
        truth=truth,
        polarity=manifest.get("polarity"),
    )
    if args.dump_stages:
        dump_stages(r.stages, (out or Path(args.captured_dir)) / "stages")
    result = {
        "decode_success": r.decode_success,
        "payload": payload_to_json(r.payload),
        "module_accuracy_pct": r.module_accuracy_pct,
        "detected_frames": r.detected_frames,
        "supplementary_used": r.supplementary_used,
        "error": r.error,
    }
    if r.payload is not None and r.payload.mode == "numeric":
        result["text"] = r.payload.content
    elif r.payload is not None:
        result["text"] = r.payload.content.decode("utf-8", errors="replace")
    if truth_payload is not None:
        result["matches_manifest"] = r.payload == truth_payload
    _emit(result)
    return EXIT_OK if r.decode_success else EXIT_DECODE_FAILURE


def cmd_evaluate(args) -> int:
    if args.config is None:
        raise CliError("evaluate needs --config")
    d = _load_config(args.config)
    if args.seed is not None:
        d["seed"] = args.seed
    if args.allow_at_risk:
        d["allow_at_risk"] = True
    rows = evaluate(d, jobs=max(1, args.jobs))
    if args.out:
        path = write_report(rows, Path(args.out) / "report.csv", config=d)
        print(f"wrote {len(rows)} rows to {path}")
    else:
        sys.stdout.write(rows_to_csv(rows))
    return EXIT_OK


def cmd_roundtrip(args) -> int:
    d = _load_config(args.config)
    d.pop("sweep", None)
    capture = preset(args.preset).to_dict()
    if args.noise is not None:
        capture["noise_sigma"] = args.noise
    d.update(
        {
            "object": ObjectSpec(kind="qr", payload=args.payload, payload_mode=_payload_mode(args.payload)).__dict__,
            "capture": capture,
            "trials": args.trials,
        }
    )
    if args.seed is not None:
        d["seed"] = args.seed
    if args.allow_at_risk:
        d["allow_at_risk"] = True
    cfg: ExperimentConfig = experiment_from_dict(d)
    results = [run_trial(cfg, i) for i in range(cfg.trials)]
    failures = sum(not r.success for r in results)
    _emit(
        {
            "payload": args.payload,
            "preset": args.preset,
            "noise_sigma": capture["noise_sigma"],
            "trials": cfg.trials,
            "decode_failures": failures,
            "mean_module_accuracy_pct": sum(r.accuracy_pct for r in results) / len(results),
            "status": "pass" if failures == 0 else "fail",
        }
    )
    return EXIT_OK if failures == 0 else EXIT_DECODE_FAILURE


COMMANDS = {
    "conceal": cmd_conceal,
    "capture": cmd_capture,
    "reconstruct": cmd_reconstruct,
    "evaluate": cmd_evaluate,
    "roundtrip": cmd_roundtrip,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    for k, v in _GLOBAL_DEFAULTS.items():
        if not hasattr(args, k):
            setattr(args, k, v)
    try:
        return COMMANDS[args.command](args)
    except (
        CliError,
        ConfigError,
        ConcealmentError,
        QRError,
        PnmError,
        FileNotFoundError,
        KeyError,
        ValueError,
    ) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc).strip("'\"")}), file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
