"""Turn a parsed config into runtime objects, run it, persist the outputs.

Every run writes its effective config back out (``config.cfg``) plus
mode-specific files. The adaptation loop produces ``records.jsonl`` (one
JSON object per iteration), ``curves.csv`` derived from those records,
every intermediate distribution, and every iteration's best policy.
``replay_records`` rebuilds ``curves.csv`` from ``records.jsonl`` alone,
through the same row formatter, so a replayed file is byte-identical to
the original.
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from ..discrepancy import DiscrepancyConfig
from ..envs import (
    DRAWER_TRANSFORMS,
    PEG_TRANSFORMS,
    EnvSpec,
    TargetEnv,
    make_drawer_spec,
    make_peg_spec,
    make_target,
    target_rollout,
)
from ..param_space import ParamDistribution, SimParams
from ..policy import PolicySnapshot
from ..ppo import PpoConfig, train
from ..reps import RepsConfig
from ..rng import derive_seed
from ..simopt import (
    IterationRecord,
    LoopState,
    SimOptConfig,
    TrainCarry,
    ablation_open_loop,
    run,
)
from .config import ConfigError, format_config

__all__ = [
    "resolve_workers",
    "build_spec",
    "build_dist",
    "build_target",
    "build_simopt_config",
    "curves_csv_text",
    "records_jsonl_text",
    "replay_records",
    "run_experiment",
    "train_only",
    "evaluate_policy",
]

CURVE_COLUMNS = ("iteration", "target_success", "median_cost", "kl_used")


def resolve_workers(requested: int) -> int:
    """Worker count to use: explicit > 0 wins, else SIMOPT_WORKERS, else cores."""
    if requested > 0:
        return requested
    if requested < 0:
        raise ConfigError(f"simopt.workers must be >= 0, got {requested}")
    env = os.environ.get("SIMOPT_WORKERS", "").strip()
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ConfigError(f"SIMOPT_WORKERS must be an integer, got {env!r}") from None
        if n < 1:
            raise ConfigError(f"SIMOPT_WORKERS must be >= 1, got {n}")
        return n
    return max(1, os.cpu_count() or 1)


def build_spec(values: dict) -> EnvSpec:
    task = values["env.task"]
    length = values["env.episode_length"]
    if length < 1:
        raise ConfigError(f"env.episode_length must be >= 1, got {length}")
    if task == "drawer":
        return make_drawer_spec(length)
    if task == "peg":
        return make_peg_spec(length)
    raise ConfigError(f"env.task must be 'drawer' or 'peg', got {task!r}")


def build_dist(values: dict, spec: EnvSpec) -> ParamDistribution:
    names = spec.param_names
    mean = np.asarray(values["dist.mean"], dtype=np.float64)
    variance = np.asarray(values["dist.variance"], dtype=np.float64)
    if mean.shape != (len(names),):
        raise ConfigError(f"dist.mean needs {len(names)} entries for {spec.task}, got {mean.shape[0]}")
    if variance.shape != (len(names),):
        raise ConfigError(
            f"dist.variance needs {len(names)} entries for {spec.task}, got {variance.shape[0]}"
        )
    if np.any(variance <= 0):
        raise ConfigError("dist.variance entries must be positive")
    transforms = DRAWER_TRANSFORMS if spec.task == "drawer" else PEG_TRANSFORMS
    return ParamDistribution(names, mean, np.diag(variance), transforms)


def build_target(values: dict, spec: EnvSpec) -> TargetEnv:
    names = spec.param_names
    vals = np.asarray(values["target.true_params"], dtype=np.float64)
    if vals.shape != (len(names),):
        raise ConfigError(
            f"target.true_params needs {len(names)} entries for {spec.task}, got {vals.shape[0]}"
        )
    hidden = tuple(values["target.hidden_dims"])
    try:
        return make_target(spec, SimParams(names, vals), hidden)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def build_simopt_config(values: dict) -> SimOptConfig:
    dim_weights = tuple(values["discrepancy.dim_weights"]) or None
    ppo = PpoConfig(
        n_iterations=values["simopt.rl_iterations_first"],
        n_agents=values["ppo.n_agents"],
        epochs=values["ppo.epochs"],
        minibatch_size=values["ppo.minibatch_size"],
        step_size=values["ppo.step_size"],
        clip_ratio=values["ppo.clip_ratio"],
        gamma=values["ppo.gamma"],
        lam=values["ppo.lam"],
        desired_kl=values["ppo.desired_kl"],
        entropy_coef=values["ppo.entropy_coef"],
        segment_length=values["ppo.segment_length"],
    )
    reps = RepsConfig(
        epsilon=values["reps.epsilon"],
        eta_min=values["reps.eta_min"],
        updates_per_iteration=values["reps.updates_per_iteration"],
    )
    disc = DiscrepancyConfig(
        w_l1=values["discrepancy.w_l1"],
        w_l2=values["discrepancy.w_l2"],
        smooth_std=values["discrepancy.smooth_std"],
        smooth_truncation=values["discrepancy.smooth_truncation"],
        dim_weights=dim_weights,
        stack_prev=tuple(values["discrepancy.stack_prev"]),
        sim_rollouts_per_xi=values["discrepancy.sim_rollouts_per_xi"],
    )
    try:
        return SimOptConfig(
            max_iterations=values["simopt.max_iterations"],
            samples_per_update=values["simopt.samples_per_update"],
            real_rollouts_per_iteration=values["simopt.real_rollouts_per_iteration"],
            rl_iterations_first=values["simopt.rl_iterations_first"],
            rl_iterations_warm=values["simopt.rl_iterations_warm"],
            success_eval_trials=values["simopt.success_eval_trials"],
            success_threshold=values["simopt.success_threshold"],
            seed=values["simopt.seed"],
            workers=resolve_workers(values["simopt.workers"]),
            ppo=ppo,
            reps=reps,
            discrepancy=disc,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


# --- output files ---------------------------------------------------------


def _curve_row(record: IterationRecord) -> str:
    return "{},{!r},{!r},{!r}".format(
        record.iteration,
        float(record.target_success),
        float(record.cost_median),
        float(record.kl_used),
    )


def curves_csv_text(records: list) -> str:
    lines = [",".join(CURVE_COLUMNS)]
    lines.extend(_curve_row(r) for r in records)
    return "\n".join(lines) + "\n"


def records_jsonl_text(records: list) -> str:
    return "".join(json.dumps(r.as_dict(), sort_keys=True) + "\n" for r in records)


def parse_records_jsonl(text: str) -> list:
    records = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            records.append(IterationRecord.from_dict(json.loads(line)))
        except (json.JSONDecodeError, TypeError) as exc:
            raise ValueError(f"records line {lineno}: {exc}") from None
    return records


def replay_records(text: str) -> str:
    """records.jsonl text -> curves.csv text, via the original row formatter."""
    return curves_csv_text(parse_records_jsonl(text))


def _write(path: Path, text: str) -> None:
    path.write_text(text, encoding="utf-8")


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


# --- experiment modes -----------------------------------------------------


def _run_loop(values: dict, out: Path) -> dict:
    spec = build_spec(values)
    dist = build_dist(values, spec)
    target = build_target(values, spec)
    config = build_simopt_config(values)
    t0 = time.perf_counter()
    result = run(config, dist, target)
    elapsed = time.perf_counter() - t0

    _write(out / "records.jsonl", records_jsonl_text(result.records))
    _write(out / "curves.csv", curves_csv_text(result.records))
    for i, d in enumerate(result.dists):
        _write(out / f"dist_{i}.json", d.to_json())
    for record, snapshot in zip(result.records, result.snapshots):
        _write(out / record.policy_ref, snapshot.to_json())
    summary = {
        "mode": "loop",
        "task": spec.task,
        "stop_reason": result.stop_reason,
        "iterations": len(result.records),
        "initial_success": result.initial_success,
        "final_success": result.records[-1].target_success if result.records else result.initial_success,
        "success_series": result.success_series,
        "final_mean": result.final_dist.mean.tolist(),
        "wall_time_s": elapsed,
    }
    _write(out / "summary.json", _json_text(summary))
    return summary


def _run_sweep(values: dict, out: Path) -> dict:
    sigmas = values["study.cabinet_sigmas"]
    n_seeds = values["study.seeds"]
    if not sigmas:
        raise ConfigError("randomization-sweep needs study.cabinet_sigmas")
    if values["env.task"] != "drawer":
        raise ConfigError("randomization-sweep varies cabinet_x, which only the drawer task has")
    if n_seeds < 1:
        raise ConfigError(f"study.seeds must be >= 1, got {n_seeds}")
    spec = build_spec(values)
    target = build_target(values, spec)
    config = build_simopt_config(values)
    base_seed = config.seed
    cab = spec.param_names.index("cabinet_x")

    t0 = time.perf_counter()
    rows = []
    for sigma in sigmas:
        # the sweep isolates cabinet-position randomization: every other
        # dimension is pinned to the preset mean (near-zero variance floor)
        swept = dict(values)
        variance = [1.0e-12] * len(values["dist.variance"])
        variance[cab] = float(sigma) ** 2
        swept["dist.variance"] = tuple(variance)
        dist = build_dist(swept, spec)
        for s in range(n_seeds):
            # seeds depend on the seed index only, so every sigma trains and
            # evaluates on the same seed set
            ppo_cfg = replace(config.ppo, n_iterations=config.rl_iterations_first)
            result = train(spec, dist, ppo_cfg, derive_seed(base_seed, "sweep", s))
            eval_seeds = [
                derive_seed(base_seed, "sweep-eval", s, k) for k in range(config.success_eval_trials)
            ]
            hits = sum(target_rollout(target, result.snapshot, es).success for es in eval_seeds)
            rows.append(
                {
                    "sigma": float(sigma),
                    "seed_index": s,
                    "success": hits / config.success_eval_trials,
                    "mean_reward": float(result.curve[-1]),
                }
            )
    elapsed = time.perf_counter() - t0

    lines = ["sigma,seed_index,success,mean_reward"]
    lines.extend(
        "{!r},{},{!r},{!r}".format(r["sigma"], r["seed_index"], r["success"], r["mean_reward"])
        for r in rows
    )
    _write(out / "sweep.csv", "\n".join(lines) + "\n")
    per_sigma = {}
    for r in rows:
        per_sigma.setdefault(r["sigma"], []).append(r["success"])
    summary = {
        "mode": "randomization-sweep",
        "task": spec.task,
        "sigmas": [float(s) for s in sigmas],
        "seeds": n_seeds,
        "mean_success": {repr(k): float(np.mean(v)) for k, v in per_sigma.items()},
        "rows": rows,
        "wall_time_s": elapsed,
    }
    _write(out / "summary.json", _json_text(summary))
    return summary


def _run_ablation(values: dict, out: Path) -> dict:
    n_seeds = values["study.seeds"]
    if n_seeds < 1:
        raise ConfigError(f"study.seeds must be >= 1, got {n_seeds}")
    spec = build_spec(values)
    dist = build_dist(values, spec)
    target = build_target(values, spec)
    config = build_simopt_config(values)
    focus = ("cabinet_x",) if spec.task == "drawer" else None

    t0 = time.perf_counter()
    ppo_cfg = replace(config.ppo, n_iterations=config.rl_iterations_first)
    result = train(spec, dist, ppo_cfg, derive_seed(config.seed, "train", 0))
    carry = TrainCarry(result.snapshot, result.final_value, result.normalizer)
    state = LoopState(target, dist, carry, iteration=1)

    reports = []
    for i in range(n_seeds):
        rep = ablation_open_loop(state, config, derive_seed(config.seed, "ablation", i), focus=focus)
        rep["seed_index"] = i
        reports.append(rep)
    elapsed = time.perf_counter() - t0

    _write(out / "ablation.jsonl", "".join(json.dumps(r, sort_keys=True) + "\n" for r in reports))
    lines = ["seed_index,closed_cosine,open_cosine,closed_magnitude,open_magnitude"]
    lines.extend(
        "{},{!r},{!r},{!r},{!r}".format(
            r["seed_index"],
            r["closed_loop"]["cosine_to_truth"],
            r["open_loop"]["cosine_to_truth"],
            r["closed_loop"]["magnitude"],
            r["open_loop"]["magnitude"],
        )
        for r in reports
    )
    _write(out / "ablation.csv", "\n".join(lines) + "\n")
    closed = [r["closed_loop"]["cosine_to_truth"] for r in reports]
    opened = [r["open_loop"]["cosine_to_truth"] for r in reports]
    summary = {
        "mode": "openloop-ablation",
        "task": spec.task,
        "focus": reports[0]["focus"],
        "seeds": n_seeds,
        "closed_positive_fraction": float(np.mean([c > 0 for c in closed])),
        "open_positive_fraction": float(np.mean([c > 0 for c in opened])),
        "closed_mean_cosine": float(np.mean(closed)),
        "open_mean_cosine": float(np.mean(opened)),
        "wall_time_s": elapsed,
    }
    _write(out / "summary.json", _json_text(summary))
    return summary


_MODES = {
    "loop": _run_loop,
    "randomization-sweep": _run_sweep,
    "openloop-ablation": _run_ablation,
}


def run_experiment(values: dict, out_dir) -> dict:
    """Run the mode named by ``simopt.mode`` and write its files to out_dir."""
    mode = values["simopt.mode"]
    if mode not in _MODES:
        raise ConfigError(f"simopt.mode must be one of {sorted(_MODES)}, got {mode!r}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write(out / "config.cfg", format_config(values))
    return _MODES[mode](values, out)


def train_only(values: dict, out_dir) -> dict:
    """Train one policy on the config's initial distribution; no adaptation."""
    spec = build_spec(values)
    dist = build_dist(values, spec)
    target = build_target(values, spec)
    config = build_simopt_config(values)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write(out / "config.cfg", format_config(values))

    t0 = time.perf_counter()
    ppo_cfg = replace(config.ppo, n_iterations=config.rl_iterations_first)
    result = train(spec, dist, ppo_cfg, derive_seed(config.seed, "train", 0))
    eval_seeds = [
        derive_seed(config.seed, "success-eval", "eval", k) for k in range(config.success_eval_trials)
    ]
    hits = sum(target_rollout(target, result.snapshot, es).success for es in eval_seeds)
    elapsed = time.perf_counter() - t0

    _write(out / "policy.json", result.snapshot.to_json())
    lines = ["iteration,mean_reward,mean_kl,clip_fraction"]
    lines.extend(
        "{},{!r},{!r},{!r}".format(
            m["iteration"], float(m["mean_reward"]), float(m["kl"]), float(m["clip_fraction"])
        )
        for m in result.metrics
    )
    _write(out / "train_curve.csv", "\n".join(lines) + "\n")
    summary = {
        "mode": "train",
        "task": spec.task,
        "iterations": int(len(result.curve)),
        "best_iteration": int(result.best_iteration),
        "best_reward": float(result.best_reward),
        "final_reward": float(result.curve[-1]),
        "target_success": hits / config.success_eval_trials,
        "wall_time_s": elapsed,
    }
    _write(out / "summary.json", _json_text(summary))
    return summary


def evaluate_policy(policy_path, values: dict) -> dict:
    """Deterministic success-rate evaluation of a saved policy on the target."""
    spec = build_spec(values)
    target = build_target(values, spec)
    config = build_simopt_config(values)
    snapshot = PolicySnapshot.from_json(Path(policy_path).read_text(encoding="utf-8"))
    if snapshot.obs_mean.shape != (spec.obs_dim,):
        raise ConfigError(
            f"policy expects {snapshot.obs_mean.shape[0]}-dim observations, task has {spec.obs_dim}"
        )
    eval_seeds = [
        derive_seed(config.seed, "success-eval", "eval", k) for k in range(config.success_eval_trials)
    ]
    hits = sum(target_rollout(target, snapshot, es).success for es in eval_seeds)
    return {
        "task": spec.task,
        "trials": config.success_eval_trials,
        "successes": int(hits),
        "success_rate": hits / config.success_eval_trials,
    }
