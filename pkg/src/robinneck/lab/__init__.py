"""Sweeps, profile extraction, fits and reports."""
from .analysis import (FitError, SlopeFit, analyze, dichotomy_table, envelope_check,
                       fit_blowup_slope, window_sensitivity)
from .config import ConfigError, ExperimentConfig, PhiSpec, parse_config, serialize_config
from .profile import fit_profile_to_h, odd_mode, symmetric_grid, vertical_profile
from .report import emit_report, records_from_csv, records_to_csv, svg_plot
from .sweep import CSV_COLUMNS, CellFailure, SweepError, SweepRecord, SweepResult, run_cell, run_sweep

__all__ = [
    "CSV_COLUMNS", "CellFailure", "ConfigError", "ExperimentConfig", "FitError", "PhiSpec",
    "SlopeFit", "SweepError", "SweepRecord", "SweepResult", "analyze", "dichotomy_table",
    "emit_report", "envelope_check", "fit_blowup_slope", "fit_profile_to_h", "odd_mode",
    "parse_config", "records_from_csv", "records_to_csv", "run_cell", "run_sweep",
    "serialize_config", "svg_plot", "symmetric_grid", "vertical_profile", "window_sensitivity",
]
