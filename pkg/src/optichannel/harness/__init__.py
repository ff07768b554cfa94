"""Experiment runner, sweeps and the command-line interface."""
from .experiment import ExperimentConfig, ObjectSpec, TrialResult, conceal, experiment_from_dict, run_trial
from .sweep import REPORT_COLUMNS, ReportRow, evaluate, rows_to_csv, write_report

__all__ = [
    "ExperimentConfig",
    "ObjectSpec",
    "REPORT_COLUMNS",
    "ReportRow",
    "TrialResult",
    "conceal",
    "evaluate",
    "experiment_from_dict",
    "rows_to_csv",
    "run_trial",
    "write_report",
]
