"""Parameter sweeps aggregated into CSV report rows."""
from __future__ import annotations

import csv
import io
import itertools
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

from .experiment import (
    ConfigError,
    ExperimentConfig,
    TrialResult,
    experiment_from_dict,
    experiment_to_dict,
    preset_order,
    run_trial,
)

REPORT_COLUMNS = (
    "object_kind",
    "polarity",
    "mode",
    "contrast_pct",
    "delta",
    "preset",
    "scale",
    "blur_sigma",
    "noise_sigma",
    "trials",
    "decode_rate_pct",
    "mean_module_accuracy_pct",
    "at_risk",
    "object_size_px",
)

SCORING_NOTE = (
    "QR rows: decode_rate_pct is the share of trials whose payload decoded exactly; "
    "mean_module_accuracy_pct compares sampled modules with the encoded symbol. "
    "Text, image and rect rows are scored without OCR: accuracy is the pixel agreement "
    "of the Otsu-binarized reconstruction with the object mask around the object, and a "
    "trial counts as a success when it reaches pixel_success_pct."
)

_AXES = {
    "polarities": "polarity",
    "modes": "mode",
    "presets": "capture",
    "deltas": "delta",
}


@dataclass
class ReportRow:
    object_kind: str
    polarity: str
    mode: str
    contrast_pct: float
    delta: int
    preset: str
    scale: float
    blur_sigma: float
    noise_sigma: float
    trials: int
    decode_rate_pct: float | None
    mean_module_accuracy_pct: float | None
    at_risk: bool
    object_size_px: int
    successes: int = 0
    failures: int = 0

    def csv_values(self) -> list[str]:
        def num(v, digits):
            return "" if v is None else f"{v:.{digits}f}"

        return [
            self.object_kind,
            self.polarity,
            self.mode,
            num(self.contrast_pct, 4),
            str(self.delta),
            self.preset,
            num(self.scale, 4),
            num(self.blur_sigma, 4),
            num(self.noise_sigma, 4),
            str(self.trials),
            num(self.decode_rate_pct, 2),
            num(self.mean_module_accuracy_pct, 2),
            "true" if self.at_risk else "false",
            str(self.object_size_px),
        ]


def expand_sweep(d: dict) -> list[ExperimentConfig]:
    """Every configuration named by the ``sweep`` block of a config dict."""
    base_dict = {k: v for k, v in d.items() if k != "sweep"}
    base = experiment_from_dict(base_dict)
    sweep = d.get("sweep") or {}
    unknown = set(sweep) - set(_AXES) - {"sizes"}
    if unknown:
        raise ConfigError(f"unknown sweep axes: {sorted(unknown)}")
    axes = []
    for key, attr in _AXES.items():
        if key in sweep:
            axes.append([(attr, v) for v in sweep[key]])
    if "sizes" in sweep:
        axes.append([("size", v) for v in sweep["sizes"]])
    configs = []
    for combo in itertools.product(*axes):
        cfg = base
        for attr, value in combo:
            if attr == "size":
                cfg = replace(cfg, object=replace(cfg.object, size=int(value)))
            else:
                cfg = replace(cfg, **{attr: value})
        configs.append(cfg)
    return configs


def _run(args):
    cfg, i = args
    return run_trial(cfg, i)


def run_trials(cfg: ExperimentConfig, jobs: int = 1) -> list[TrialResult]:
    work = [(cfg, i) for i in range(cfg.trials)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_run, work))
    return [_run(w) for w in work]


def aggregate(cfg: ExperimentConfig, results: list[TrialResult]) -> ReportRow:
    from .experiment import conceal

    c = conceal(cfg, cfg.seed)
    model = cfg.capture_model()
    ok = sum(r.success for r in results)
    n = len(results)
    h, w = c.cells.shape
    show_rate = cfg.metrics in ("decode_rate", "both")
    show_acc = cfg.metrics in ("module_accuracy", "both")
    return ReportRow(
        object_kind=cfg.object.kind,
        polarity=cfg.polarity,
        mode=cfg.mode,
        contrast_pct=c.plan.contrast_pct,
        delta=c.plan.delta,
        preset=cfg.capture_label,
        scale=model.scale,
        blur_sigma=model.blur_sigma,
        noise_sigma=model.noise_sigma,
        trials=n,
        decode_rate_pct=100.0 * ok / n if show_rate else None,
        mean_module_accuracy_pct=sum(r.accuracy_pct for r in results) / n if show_acc else None,
        at_risk=any(r.at_risk for r in results) or c.at_risk,
        object_size_px=max(h, w) * c.plan.scale,
        successes=ok,
        failures=n - ok,
    )


def _sort_key(row: ReportRow):
    order = preset_order()
    rank = order.index(row.preset) if row.preset in order else len(order)
    # custom capture models share a label, so their knobs break ties
    return (
        rank,
        row.preset,
        row.contrast_pct,
        row.object_kind,
        row.polarity,
        row.mode,
        row.object_size_px,
        -row.scale,
        row.blur_sigma,
        row.noise_sigma,
    )


def evaluate(d: dict, jobs: int = 1) -> list[ReportRow]:
    rows = [aggregate(cfg, run_trials(cfg, jobs)) for cfg in expand_sweep(d)]
    return sorted(rows, key=_sort_key)


def rows_to_csv(rows: list[ReportRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(REPORT_COLUMNS)
    for r in rows:
        w.writerow(r.csv_values())
    return buf.getvalue()


def write_report(rows: list[ReportRow], path: str | Path, config: dict | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(rows_to_csv(rows))
    meta = {"columns": list(REPORT_COLUMNS), "scoring": SCORING_NOTE}
    if config is not None:
        meta["config"] = config
    with open(path.with_suffix(".meta.json"), "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
    return path


__all__ = [
    "REPORT_COLUMNS",
    "ReportRow",
    "aggregate",
    "evaluate",
    "expand_sweep",
    "experiment_to_dict",
    "rows_to_csv",
    "run_trials",
    "write_report",
]
