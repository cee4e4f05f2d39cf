"""Experiment harness: config loading, sweeps, detector validation, output and CLI."""

from .config import SCHEMES, ExperimentConfig, config_from_dict, load_config, load_preset, parse_config
from .output import CSV_COLUMNS, emit_results, records_from_json, records_to_csv, records_to_json
from .sweep import (
    DrawOutcome,
    ResultRecord,
    ValidationRecord,
    aggregate,
    channel_draw,
    run_detection_validation,
    run_sweep,
    run_sweep_outcomes,
    solve_once,
    target_grid,
)
