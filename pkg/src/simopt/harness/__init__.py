"""Config files, presets, experiment runner, and the command-line front end."""

from .config import SCHEMA, ConfigError, format_config, override_value, parse_config
from .experiment import (
    build_dist,
    build_simopt_config,
    build_spec,
    build_target,
    curves_csv_text,
    evaluate_policy,
    records_jsonl_text,
    replay_records,
    resolve_workers,
    run_experiment,
    train_only,
)
from .presets import (
    REFERENCE_DEFAULTS,
    default_values,
    preset_names,
    preset_values,
    reference_defaults_table,
    resolve,
)

__all__ = [
    "SCHEMA",
    "ConfigError",
    "format_config",
    "override_value",
    "parse_config",
    "build_dist",
    "build_simopt_config",
    "build_spec",
    "build_target",
    "curves_csv_text",
    "evaluate_policy",
    "records_jsonl_text",
    "replay_records",
    "resolve_workers",
    "run_experiment",
    "train_only",
    "REFERENCE_DEFAULTS",
    "default_values",
    "preset_names",
    "preset_values",
    "reference_defaults_table",
    "resolve",
]
