"""Named experiment presets and the reference-defaults table.

Presets are config files shipped as package data under ``presets/``. Each
one is generated from the value dicts in this module (see
``preset_values``), so parsing a shipped file always reproduces the dict
exactly.
"""

from __future__ import annotations

import math
from importlib import resources
from pathlib import Path

from .config import ConfigError, format_config, parse_config

__all__ = [
    "REFERENCE_DEFAULTS",
    "default_values",
    "preset_names",
    "preset_values",
    "resolve",
    "reference_defaults_table",
]

# Constants that downstream analysis relies on; changing any of these is a
# semantics change, not a tuning tweak. The docs table in
# docs/preset_defaults.md is generated from this dict.
REFERENCE_DEFAULTS = {
    "ppo.clip_ratio": 0.2,
    "ppo.gamma": 0.99,
    "ppo.lam": 0.95,
    "reps.epsilon": 1.0,
    "reps.eta_min": 0.001,
    "discrepancy.w_l1": 0.5,
    "discrepancy.w_l2": 1.0,
    "discrepancy.smooth_std": 5.0,
    "discrepancy.smooth_truncation": 4.0,
}

# Initial sampling distribution for the drawer task, internal space.
# Log-transformed dims (damping, scaling, friction) hold log(physical);
# joint compliances and cabinet_x are plain coordinates.
_DRAWER_MEAN = (
    0.7,
    0.7,
    math.log(0.8),
    math.log(0.8),
    math.log(1.2),
    math.log(1.2),
    0.0,
    math.log(0.3),
    0.22,
)
_DRAWER_VARIANCE = (0.04, 0.04, 0.01, 0.01, 0.0025, 0.0025, 0.01, 0.04, 0.002025)

# Physical-space truth used by the sim-to-sim drawer presets: every
# parameter at the center of the initial distribution except cabinet_x,
# which each preset offsets.
_DRAWER_TRUE_BASE = (0.7, 0.7, 0.8, 0.8, 1.2, 1.2, 1.0, 0.3, 0.22)

_PEG_MEAN = (
    0.5,
    0.5,
    math.log(0.7),
    math.log(0.7),
    0.0,
    0.0,
    -4.0,
    math.log(0.4),
    math.log(0.25),
    math.log(0.15),
)
_PEG_VARIANCE = (0.04, 0.04, 0.01, 0.01, 0.0025, 0.0025, 0.09, 0.01, 0.01, 0.01)

# Peg truth: rope length and peg mass off-center, the rest at the prior's
# physical center.
_PEG_TRUE = (0.5, 0.5, 0.7, 0.7, 1.0, 1.0, -4.0, 0.4, 0.31, 0.21)


def _drawer_true(cabinet_x: float) -> tuple:
    vals = list(_DRAWER_TRUE_BASE)
    vals[-1] = cabinet_x
    return tuple(vals)


def default_values(task: str) -> dict:
    """Complete config dict for a task with every knob at its default."""
    if task == "drawer":
        mean, variance = _DRAWER_MEAN, _DRAWER_VARIANCE
        true_params = _drawer_true(0.22)
        updates, epochs, rl_first = 20, 5, 200
    elif task == "peg":
        mean, variance = _PEG_MEAN, _PEG_VARIANCE
        true_params = _PEG_TRUE
        updates, epochs, rl_first = 3, 10, 100
    else:
        raise ConfigError(f"unknown task {task!r}, expected 'drawer' or 'peg'")
    return {
        "env.task": task,
        "env.episode_length": 150,
        "simopt.mode": "loop",
        "simopt.max_iterations": 8,
        "simopt.samples_per_update": 512,
        "simopt.real_rollouts_per_iteration": 3,
        "simopt.rl_iterations_first": rl_first,
        "simopt.rl_iterations_warm": 10,
        "simopt.success_eval_trials": 20,
        "simopt.success_threshold": 0.8,
        "simopt.seed": 0,
        "simopt.workers": 0,
        "ppo.n_agents": 32,
        "ppo.epochs": epochs,
        "ppo.minibatch_size": 2400,
        "ppo.step_size": 5e-4,
        "ppo.clip_ratio": REFERENCE_DEFAULTS["ppo.clip_ratio"],
        "ppo.gamma": REFERENCE_DEFAULTS["ppo.gamma"],
        "ppo.lam": REFERENCE_DEFAULTS["ppo.lam"],
        "ppo.desired_kl": 0.01,
        "ppo.entropy_coef": 0.0,
        "ppo.segment_length": 0,
        "reps.epsilon": REFERENCE_DEFAULTS["reps.epsilon"],
        "reps.eta_min": REFERENCE_DEFAULTS["reps.eta_min"],
        "reps.updates_per_iteration": updates,
        "discrepancy.w_l1": REFERENCE_DEFAULTS["discrepancy.w_l1"],
        "discrepancy.w_l2": REFERENCE_DEFAULTS["discrepancy.w_l2"],
        "discrepancy.smooth_std": REFERENCE_DEFAULTS["discrepancy.smooth_std"],
        "discrepancy.smooth_truncation": REFERENCE_DEFAULTS["discrepancy.smooth_truncation"],
        "discrepancy.dim_weights": (),
        "discrepancy.stack_prev": (),
        "discrepancy.sim_rollouts_per_xi": 1,
        "dist.mean": mean,
        "dist.variance": variance,
        "target.true_params": true_params,
        "target.hidden_dims": (),
        "study.seeds": 1,
        "study.cabinet_sigmas": (),
    }


def _preset_drawer_sim2sim_15() -> dict:
    values = default_values("drawer")
    values["target.true_params"] = _drawer_true(0.37)
    return values


def _preset_drawer_sim2sim_22() -> dict:
    values = default_values("drawer")
    values["target.true_params"] = _drawer_true(0.44)
    values["simopt.max_iterations"] = 10
    return values


def _preset_peg_sim2sim() -> dict:
    return default_values("peg")


def _preset_wide_randomization() -> dict:
    values = default_values("drawer")
    values["simopt.mode"] = "randomization-sweep"
    values["study.seeds"] = 3
    values["study.cabinet_sigmas"] = (0.02, 0.04, 0.07, 0.1)
    return values


def _preset_openloop_vs_closedloop() -> dict:
    values = default_values("drawer")
    values["simopt.mode"] = "openloop-ablation"
    values["target.true_params"] = _drawer_true(0.37)
    # handle_x (obs column 2) is withheld from the target observations, so
    # the cost never sees the dimension that most directly reveals cabinet_x
    values["target.hidden_dims"] = (2,)
    values["discrepancy.dim_weights"] = (1.0, 1.0, 1.0, 1.0)
    values["study.seeds"] = 20
    return values


_PRESETS = {
    "drawer-sim2sim-15": _preset_drawer_sim2sim_15,
    "drawer-sim2sim-22": _preset_drawer_sim2sim_22,
    "peg-sim2sim": _preset_peg_sim2sim,
    "wide-randomization-ablation": _preset_wide_randomization,
    "openloop-vs-closedloop": _preset_openloop_vs_closedloop,
}


def preset_names() -> tuple:
    return tuple(sorted(_PRESETS))


def preset_values(name: str) -> dict:
    """The value dict a shipped preset file was generated from."""
    try:
        return _PRESETS[name]()
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(preset_names())}") from None


def preset_text(name: str) -> str:
    return format_config(preset_values(name))


def resolve(name_or_path: str) -> dict:
    """Load a config by preset name or filesystem path.

    Exact paths win; otherwise the name (with any leading ``presets/`` and
    trailing ``.cfg`` stripped) is looked up among the shipped presets.
    """
    path = Path(name_or_path)
    if path.is_file():
        return parse_config(path.read_text(encoding="utf-8"))
    name = name_or_path
    if name.startswith("presets/"):
        name = name[len("presets/") :]
    if name.endswith(".cfg"):
        name = name[: -len(".cfg")]
    if name in _PRESETS:
        resource = resources.files("simopt.harness").joinpath("presets", f"{name}.cfg")
        return parse_config(resource.read_text(encoding="utf-8"))
    raise ConfigError(
        f"{name_or_path!r} is neither a config file nor a preset; "
        f"available presets: {', '.join(preset_names())}"
    )


def reference_defaults_table() -> str:
    """Markdown table of the pinned reference constants."""
    lines = [
        "# Reference defaults",
        "",
        "Pinned constants shared by every preset. Generated from",
        "`simopt.harness.presets.REFERENCE_DEFAULTS`; do not edit by hand.",
        "",
        "| key | value |",
        "| --- | --- |",
    ]
    for key, value in REFERENCE_DEFAULTS.items():
        lines.append(f"| `{key}` | {value!r} |")
    return "\n".join(lines) + "\n"
