"""Experiment configuration: YAML ingestion, profiles, defaults and validation."""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from ..agents.learner import LearnerConfig
from ..agents.train import LEARNING_METHODS, TrainConfig
from ..env import ACT_DIM
from ..errors import ConfigurationError
from ..sim.core import SimParams
from ..sim.scenario import load_scenario

METHODS = ("non-lb", "rule-based", "independent-ddpg", "maddpg", "ma3c", "robust-ma3c")
OUT_ENV_VAR = "LBMARL_OUT"
DEFAULT_OUT = "runs"

# Desk scale: 3 sites, 2000 training episodes. The narrower networks, larger
# actor step and sparser updates keep 15 learning runs inside half an hour on
# one CPU; every learning method gets the same settings.
PROFILES = {
    "desk": {
        "n_bs": 3,
        "episodes": 2000,
        "eval_episodes": 20,
        "seeds": [0, 1, 2, 3, 4],
        "batch_size": 64,
        "update_every": 20,
        "learner": {"hidden": 32, "actor_lr": 1e-3},
    },
    "full": {
        "n_bs": 7,
        "episodes": 30000,
        "eval_episodes": 20,
        "seeds": [0, 1, 2, 3, 4],
        "batch_size": 256,
        "update_every": 1,
        "learner": {},
    },
}


def default_out() -> str:
    return os.environ.get(OUT_ENV_VAR, DEFAULT_OUT)


@dataclass
class ExperimentConfig:
    method: str = "ma3c"
    scenario: str = "A"  # builtin tag or path to a scenario file
    seeds: list = field(default_factory=list)
    episodes: int = 2000
    eval_episodes: int = 20
    out: str = field(default_factory=default_out)
    profile: str = "desk"
    n_bs: int = 3
    inter_site_distance: float = 500.0
    batch_size: int = 64
    buffer_size: int = 100_000
    update_every: int = 20
    warmup: int | None = None
    noise_start: float = 0.3
    noise_end: float = 0.05
    learner: dict = field(default_factory=dict)
    sim: dict = field(default_factory=dict)
    rule_action: list | None = None  # raw action of the rule-based policy (12 values)

    @property
    def is_learning(self) -> bool:
        return self.method in LEARNING_METHODS

    def train_config(self, episodes: int | None = None) -> TrainConfig:
        return TrainConfig(method=self.method, episodes=self.episodes if episodes is None else episodes,
                           batch_size=self.batch_size, buffer_size=self.buffer_size,
                           update_every=self.update_every, warmup=self.warmup,
                           noise_start=self.noise_start, noise_end=self.noise_end,
                           learner=dict(self.learner))

    def sim_params(self) -> SimParams:
        return SimParams(**self.sim)

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}


def _defaults(profile: str) -> dict:
    base = {name: (f.default_factory() if f.default_factory is not dataclasses.MISSING else f.default)
            for name, f in _FIELDS.items()}
    base.update({k: v for k, v in PROFILES[profile].items() if k != "seeds"})
    base["learner"] = dict(PROFILES[profile]["learner"])
    base["profile"] = profile
    return base


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def collect_errors(data: dict) -> list[str]:
    """Every problem with an already-defaulted config mapping (empty when valid)."""
    errors = []
    unknown = sorted(set(data) - set(_FIELDS))
    if unknown:
        errors.append(f"unknown keys: {', '.join(unknown)}")
    if data.get("method") not in METHODS:
        errors.append(f"method: unknown method {data.get('method')!r}; "
                      f"valid methods are {', '.join(METHODS)}")
    if data.get("profile") not in PROFILES:
        errors.append(f"profile: must be one of {', '.join(PROFILES)}")
    seeds = data.get("seeds")
    if not isinstance(seeds, list) or not seeds:
        errors.append("seeds: non-empty list required")
    elif not all(_is_int(s) and s >= 0 for s in seeds):
        errors.append("seeds: every seed must be a non-negative integer")
    elif len(set(seeds)) != len(seeds):
        errors.append("seeds: duplicate seeds")
    for name in ("episodes", "eval_episodes"):
        if not _is_int(data.get(name)) or data[name] < 0:
            errors.append(f"{name}: must be an integer >= 0")
    for name in ("batch_size", "buffer_size", "update_every"):
        if not _is_int(data.get(name)) or data[name] < 1:
            errors.append(f"{name}: must be an integer >= 1")
    if data.get("warmup") is not None and (not _is_int(data["warmup"]) or data["warmup"] < 0):
        errors.append("warmup: must be null or an integer >= 0")
    if data.get("n_bs") not in (1, 3, 7):
        errors.append("n_bs: must be one of 1, 3, 7")
    if not _is_number(data.get("inter_site_distance")) or not data["inter_site_distance"] > 0:
        errors.append("inter_site_distance: must be a positive number")
    for name in ("noise_start", "noise_end"):
        if not _is_number(data.get(name)) or data[name] < 0:
            errors.append(f"{name}: must be a number >= 0")
    if not isinstance(data.get("out"), str) or not data["out"]:
        errors.append("out: output directory required")
    try:
        load_scenario(data.get("scenario"))
    except ConfigurationError as exc:
        errors.append(f"scenario: {exc}")

    learner = data.get("learner")
    if not isinstance(learner, dict):
        errors.append("learner: must be a mapping of learner settings")
    else:
        known = {f.name for f in dataclasses.fields(LearnerConfig)} - {"critic", "robust", "reward_mode"}
        bad = sorted(set(learner) - known)
        if bad:
            errors.append(f"learner: unknown settings {', '.join(bad)}")
    sim = data.get("sim")
    if not isinstance(sim, dict):
        errors.append("sim: must be a mapping of simulator settings")
    else:
        bad = sorted(set(sim) - {f.name for f in dataclasses.fields(SimParams)})
        if bad:
            errors.append(f"sim: unknown settings {', '.join(bad)}")
    rule = data.get("rule_action")
    if rule is not None:
        if (not isinstance(rule, list) or len(rule) != ACT_DIM
                or not all(_is_number(v) and -1.0 <= v <= 1.0 for v in rule)):
            errors.append(f"rule_action: must be a list of {ACT_DIM} numbers in [-1, 1]")
    return errors


def build_config(data: dict | None = None, profile: str | None = None) -> ExperimentConfig:
    """Apply profile defaults to ``data`` and validate, reporting every problem at once."""
    data = dict(data or {})
    profile = profile or data.get("profile") or "desk"
    if profile not in PROFILES:
        raise ConfigurationError(f"profile: must be one of {', '.join(PROFILES)}")
    merged = _defaults(profile)
    learner = data.pop("learner", None) or {}
    if isinstance(learner, dict):
        learner = {**merged["learner"], **learner}  # profile settings, then the file's
    merged.update(data)
    merged["learner"] = learner
    merged["profile"] = profile
    errors = collect_errors(merged)
    if errors:
        raise ConfigurationError("invalid experiment config:\n" + "\n".join(f"  - {e}" for e in errors))
    return ExperimentConfig(**merged)


def read_config_data(path) -> dict:
    """Raw mapping from a YAML config file (an empty file is an empty mapping)."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"config {path} is not valid YAML: {exc}") from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigurationError(f"config {path} must be a key-value mapping")
    return data


def validate_config(path) -> ExperimentConfig:
    """Parse a YAML config file; raises ConfigurationError listing every violation."""
    return build_config(read_config_data(path))


def profile_config(profile: str = "desk", **overrides) -> ExperimentConfig:
    """Config for a named profile, seeds included, plus keyword overrides."""
    if profile not in PROFILES:
        raise ConfigurationError(f"profile: must be one of {', '.join(PROFILES)}")
    data = {"seeds": list(PROFILES[profile]["seeds"])}
    data.update(overrides)
    return build_config(data, profile)
