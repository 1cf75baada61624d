"""Seeded experiment runs: train, evaluate frozen policies, write versioned CSVs.

Layout under the output root::

    <out>/<method>/<scenario>/seed_<s>/learning_log.csv   (learning methods)
    <out>/<method>/<scenario>/seed_<s>/checkpoint.lbck    (learning methods)
    <out>/<method>/<scenario>/seed_<s>/steps.csv          per evaluation step
    <out>/<method>/<scenario>/seeds.csv                   per-seed evaluation means
    <out>/<method>/<scenario>/summary.csv                 mean and sd across seeds
"""

from __future__ import annotations

import csv
import dataclasses
import logging
import math
import time
from pathlib import Path

import numpy as np

from ..agents.baselines import NonLBPolicy, RuleBasedPolicy
from ..agents.learner import MultiAgentLearner
from ..agents.train import EVAL_STREAM, episode_seed, train
from ..env import LoadBalancingEnv
from ..errors import ConfigurationError, SchemaError
from ..nn import load_checkpoint, save_checkpoint
from ..sim.scenario import load_scenario
from .config import ExperimentConfig

log = logging.getLogger(__name__)

METRICS = ("g_aver", "g_min", "g_sd", "reward")

STEPS_SCHEMA = "lbmarl.steps.v1"
LEARNING_SCHEMA = "lbmarl.learning_log.v1"
SEEDS_SCHEMA = "lbmarl.seeds.v1"
SUMMARY_SCHEMA = "lbmarl.summary.v1"

LEARNING_COLUMNS = ("episode", "agent", "mean_reward", "critic_loss", "actor_objective",
                    "nature_mean", "nature_std")
SEEDS_COLUMNS = ("method", "scenario", "day", "seed") + METRICS
SUMMARY_COLUMNS = ("schema_id", "method", "scenario", "day", "seed_count",
                   "g_aver_mean", "g_aver_sd", "g_min_mean", "g_min_sd",
                   "g_sd_mean", "g_sd_sd", "reward_mean", "reward_sd")


def steps_columns(n_bs: int) -> tuple[str, ...]:
    return (("episode", "step") + METRICS + ("handoffs", "active_ues")
            + tuple(f"reward_bs{k}" for k in range(n_bs)))


# -- CSV helpers ---------------------------------------------------------------

def fmt(value) -> str:
    """Deterministic text for a CSV cell; floats round-trip exactly."""
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path, schema_id: str, columns, rows) -> Path:
    """Write ``rows`` (sequences or dicts keyed by column) under a ``# schema_id:`` comment line."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(f"# schema_id: {schema_id}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            if isinstance(row, dict):
                row = [row[c] for c in columns]
            w.writerow([fmt(v) for v in row])
    return path


def read_csv(path, required=()):
    """Return ``(schema_id, rows)`` with rows as dicts of strings.

    An empty file gives ``(None, [])``; a missing required column raises
    :class:`SchemaError` naming it.
    """
    schema = None
    lines = []
    with open(path, newline="") as fh:
        for line in fh:
            if line.startswith("#"):
                if schema is None and "schema_id:" in line:
                    schema = line.split("schema_id:", 1)[1].strip()
                continue
            if line.strip():
                lines.append(line)
    if not lines:
        return schema, []
    reader = csv.DictReader(lines)
    missing = [c for c in required if c not in (reader.fieldnames or ())]
    if missing:
        raise SchemaError(f"{path}: missing column {missing[0]!r}")
    return schema, list(reader)


# -- building blocks ---------------------------------------------------------

def make_env(cfg: ExperimentConfig, scenario=None) -> LoadBalancingEnv:
    scenario = scenario or load_scenario(cfg.scenario)
    return LoadBalancingEnv(scenario, n_bs=cfg.n_bs, inter_site_distance=cfg.inter_site_distance,
                            sim_params=cfg.sim_params(), lb_enabled=cfg.method != "non-lb")


def baseline_policy(cfg: ExperimentConfig, n_agents: int):
    if cfg.method == "non-lb":
        return NonLBPolicy(n_agents=n_agents)
    return RuleBasedPolicy(cfg.rule_action, n_agents=n_agents)


def run_dir(cfg: ExperimentConfig, scenario) -> Path:
    return Path(cfg.out) / cfg.method / scenario.tag


def seed_dir(cfg: ExperimentConfig, scenario, seed: int) -> Path:
    return run_dir(cfg, scenario) / f"seed_{seed}"


def checkpoint_meta(cfg: ExperimentConfig, scenario, seed: int) -> dict:
    return {"method": cfg.method, "scenario": scenario.tag, "seed": int(seed),
            "episodes": cfg.episodes, "n_bs": cfg.n_bs,
            "learner": dataclasses.asdict(cfg.train_config().learner_config())}


def ensure_writable(out) -> Path:
    out = Path(out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise ConfigurationError(f"output directory {out} is not writable: {exc}") from exc
    return out


def evaluate_policy(env: LoadBalancingEnv, policy, seed: int, episodes: int) -> list[list]:
    """Roll out a frozen policy for ``episodes`` evaluation episodes; one row per step."""
    rows = []
    for ep in range(episodes):
        obs = env.reset(episode_seed(seed, EVAL_STREAM, ep))
        done = False
        while not done:
            obs, rewards, done, info = env.step(policy.act(obs, 0.0))
            rep = info.report
            rows.append([ep, env.t, rep.g_aver, rep.g_min, rep.g_sd, rep.reward,
                         info.handoffs, info.active_ues, *rewards.tolist()])
    return rows


def seed_means(rows) -> dict:
    """Mean of each metric over all evaluation steps (zeros when there are none)."""
    if not rows:
        return {m: 0.0 for m in METRICS}
    arr = np.asarray([r[2:6] for r in rows], dtype=float)
    return {m: float(v) for m, v in zip(METRICS, arr.mean(axis=0))}


def summarize_seeds(method: str, scenario, per_seed: list[dict]) -> dict:
    """Summary row: mean and population sd across seeds of each metric."""
    row = {"schema_id": SUMMARY_SCHEMA, "method": method, "scenario": scenario.scenario_id,
           "day": scenario.day, "seed_count": len(per_seed)}
    for m in METRICS:
        v = np.asarray([s[m] for s in per_seed], dtype=float)
        row[f"{m}_mean"] = float(v.mean()) if v.size else math.nan
        row[f"{m}_sd"] = float(v.std()) if v.size else math.nan
    return row


# -- entry points ------------------------------------------------------------

def _finish(cfg, scenario, per_seed: list[dict], paths: dict) -> dict:
    rdir = run_dir(cfg, scenario)
    seed_rows = [{"method": cfg.method, "scenario": scenario.scenario_id, "day": scenario.day,
                  "seed": s, **per_seed[i]} for i, s in enumerate(cfg.seeds)]
    paths["seeds"] = write_csv(rdir / "seeds.csv", SEEDS_SCHEMA, SEEDS_COLUMNS, seed_rows)
    summary = summarize_seeds(cfg.method, scenario, per_seed)
    paths["summary"] = write_csv(rdir / "summary.csv", SUMMARY_SCHEMA, SUMMARY_COLUMNS, [summary])
    paths["summary_row"] = summary
    return paths


def run_experiment(cfg: ExperimentConfig, plots: bool = True) -> dict:
    """Train (learning methods) then evaluate every seed; returns the written paths."""
    ensure_writable(cfg.out)
    scenario = load_scenario(cfg.scenario)
    env = make_env(cfg, scenario)
    paths = {"seed_dirs": [], "learning_logs": [], "checkpoints": [], "steps": []}
    per_seed = []
    for seed in cfg.seeds:
        sdir = seed_dir(cfg, scenario, seed)
        sdir.mkdir(parents=True, exist_ok=True)
        paths["seed_dirs"].append(sdir)
        t0 = time.perf_counter()
        if cfg.is_learning:
            ckpt = sdir / "checkpoint.lbck"
            learner, log_rows = train(env, cfg.train_config(), seed=seed, checkpoint_path=ckpt)
            paths["learning_logs"].append(
                write_csv(sdir / "learning_log.csv", LEARNING_SCHEMA, LEARNING_COLUMNS, log_rows))
            save_checkpoint(ckpt, learner.state_arrays(), checkpoint_meta(cfg, scenario, seed))
            paths["checkpoints"].append(ckpt)
            policy = learner
        else:
            policy = baseline_policy(cfg, env.n_agents)
        rows = evaluate_policy(env, policy, seed, cfg.eval_episodes)
        paths["steps"].append(write_csv(sdir / "steps.csv", STEPS_SCHEMA, steps_columns(env.n_agents), rows))
        per_seed.append(seed_means(rows))
        log.info("%s/%s seed %d: reward %.4f (%.1fs)", cfg.method, scenario.tag, seed,
                 per_seed[-1]["reward"], time.perf_counter() - t0)
    _finish(cfg, scenario, per_seed, paths)
    if plots:
        from .plots import emit_plots

        paths["figures"] = emit_plots(run_dir(cfg, scenario))
    return paths


def load_learner(cfg: ExperimentConfig, env: LoadBalancingEnv, path) -> MultiAgentLearner:
    arrays, meta = load_checkpoint(path)
    if meta.get("method") != cfg.method:
        raise ConfigurationError(f"checkpoint {path} was trained with {meta.get('method')!r}, "
                                 f"not {cfg.method!r}")
    learner = MultiAgentLearner(env.n_agents, env.obs_dim, env.act_dim,
                                cfg.train_config().learner_config(), seed=meta.get("seed", 0))
    learner.load_state_arrays(arrays)
    return learner


def evaluate_experiment(cfg: ExperimentConfig) -> dict:
    """Re-evaluate saved checkpoints (or a baseline) without training."""
    ensure_writable(cfg.out)
    scenario = load_scenario(cfg.scenario)
    env = make_env(cfg, scenario)
    paths = {"steps": []}
    per_seed = []
    for seed in cfg.seeds:
        sdir = seed_dir(cfg, scenario, seed)
        if cfg.is_learning:
            ckpt = sdir / "checkpoint.lbck"
            if not ckpt.is_file():
                raise ConfigurationError(f"no checkpoint at {ckpt}; run 'train' first")
            policy = load_learner(cfg, env, ckpt)
        else:
            policy = baseline_policy(cfg, env.n_agents)
        rows = evaluate_policy(env, policy, seed, cfg.eval_episodes)
        paths["steps"].append(write_csv(sdir / "steps.csv", STEPS_SCHEMA, steps_columns(env.n_agents), rows))
        per_seed.append(seed_means(rows))
    return _finish(cfg, scenario, per_seed, paths)
