"""Flat line-oriented experiment configuration.

The format is one `section.key = value` assignment per line, UTF-8, with
full-line # comments and blank lines allowed. Arrays are bracketed comma
lists. Every key is declared in the schema below with its type; anything
else is rejected with the offending line number. Parsing and formatting
round-trip exactly: parse(format(values)) == values.
"""

from __future__ import annotations

__all__ = ["ConfigError", "SCHEMA", "parse_config", "format_config", "override_value"]


class ConfigError(ValueError):
    """Config text that does not parse or validate."""


# key -> type, in canonical output order
SCHEMA: dict = {
    "env.task": "str",
    "env.episode_length": "int",
    "simopt.mode": "str",
    "simopt.max_iterations": "int",
    "simopt.samples_per_update": "int",
    "simopt.real_rollouts_per_iteration": "int",
    "simopt.rl_iterations_first": "int",
    "simopt.rl_iterations_warm": "int",
    "simopt.success_eval_trials": "int",
    "simopt.success_threshold": "float",
    "simopt.seed": "int",
    "simopt.workers": "int",
    "ppo.n_agents": "int",
    "ppo.epochs": "int",
    "ppo.minibatch_size": "int",
    "ppo.step_size": "float",
    "ppo.clip_ratio": "float",
    "ppo.gamma": "float",
    "ppo.lam": "float",
    "ppo.desired_kl": "float",
    "ppo.entropy_coef": "float",
    "ppo.segment_length": "int",
    "reps.epsilon": "float",
    "reps.eta_min": "float",
    "reps.updates_per_iteration": "int",
    "discrepancy.w_l1": "float",
    "discrepancy.w_l2": "float",
    "discrepancy.smooth_std": "float",
    "discrepancy.smooth_truncation": "float",
    "discrepancy.dim_weights": "float_list",
    "discrepancy.stack_prev": "int_list",
    "discrepancy.sim_rollouts_per_xi": "int",
    "dist.mean": "float_list",
    "dist.variance": "float_list",
    "target.true_params": "float_list",
    "target.hidden_dims": "int_list",
    "study.seeds": "int",
    "study.cabinet_sigmas": "float_list",
}


def _parse_int(text: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ValueError(f"expected an integer, got {text!r}") from None


def _parse_float(text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ValueError(f"expected a number, got {text!r}") from None


def _parse_list(text: str, element) -> tuple:
    if not (text.startswith("[") and text.endswith("]")):
        raise ValueError(f"expected a bracketed list, got {text!r}")
    inner = text[1:-1].strip()
    if not inner:
        return ()
    return tuple(element(part.strip()) for part in inner.split(","))


def _parse_value(text: str, kind: str):
    if kind == "int":
        return _parse_int(text)
    if kind == "float":
        return _parse_float(text)
    if kind == "str":
        if not text:
            raise ValueError("expected a value")
        return text
    if kind == "int_list":
        return _parse_list(text, _parse_int)
    if kind == "float_list":
        return _parse_list(text, _parse_float)
    raise AssertionError(f"unhandled kind {kind}")


def parse_config(text: str) -> dict:
    """Parse config text into a {key: typed value} dict.

    Raises ConfigError with the line number on unknown keys, duplicate
    keys, malformed lines, and values of the wrong type.
    """
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'section.key = value', got {raw.strip()!r}")
        key, _, rhs = line.partition("=")
        key = key.strip()
        rhs = rhs.strip()
        if key not in SCHEMA:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            values[key] = _parse_value(rhs, SCHEMA[key])
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: {key}: {exc}") from None
    return values


def _format_value(value, kind: str) -> str:
    if kind == "int":
        return str(value)
    if kind == "float":
        return repr(float(value))
    if kind == "str":
        return value
    if kind == "int_list":
        return "[" + ", ".join(str(v) for v in value) + "]"
    if kind == "float_list":
        return "[" + ", ".join(repr(float(v)) for v in value) + "]"
    raise AssertionError(f"unhandled kind {kind}")


def format_config(values: dict) -> str:
    """Render values as config text, keys in schema order, sections spaced."""
    unknown = set(values) - set(SCHEMA)
    if unknown:
        raise ConfigError(f"unknown keys: {sorted(unknown)}")
    lines = []
    section = None
    for key, kind in SCHEMA.items():
        if key not in values:
            continue
        head = key.split(".", 1)[0]
        if section is not None and head != section:
            lines.append("")
        section = head
        lines.append(f"{key} = {_format_value(values[key], kind)}")
    return "\n".join(lines) + "\n"


def override_value(values: dict, assignment: str) -> dict:
    """Apply one 'section.key=value' override string to a values dict."""
    if "=" not in assignment:
        raise ConfigError(f"override must look like section.key=value, got {assignment!r}")
    key, _, rhs = assignment.partition("=")
    key = key.strip()
    rhs = rhs.strip()
    if key not in SCHEMA:
        raise ConfigError(f"unknown override key {key!r}")
    try:
        parsed = _parse_value(rhs, SCHEMA[key])
    except ValueError as exc:
        raise ConfigError(f"override {key}: {exc}") from None
    out = dict(values)
    out[key] = parsed
    return out
