"""Episode loop: act with exploration noise, store, and update every agent per round."""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigurationError, TrainingError
from ..nn import save_checkpoint
from .buffer import ReplayBuffer
from .learner import LearnerConfig, MultiAgentLearner

log = logging.getLogger(__name__)

LEARNING_METHODS = {
    "independent-ddpg": {"critic": "local", "robust": False, "reward_mode": "local"},
    "maddpg": {"critic": "joint", "robust": False, "reward_mode": "team"},
    "ma3c": {"critic": "attention", "robust": False, "reward_mode": "team"},
    "robust-ma3c": {"critic": "attention", "robust": True, "reward_mode": "team"},
}


@dataclass
class TrainConfig:
    method: str = "ma3c"
    episodes: int = 0
    batch_size: int = 256
    buffer_size: int = 100_000
    update_every: int = 1  # environment steps between learning rounds
    warmup: int | None = None  # transitions before the first update; defaults to batch_size
    noise_start: float = 0.3
    noise_end: float = 0.05
    learner: dict = field(default_factory=dict)  # LearnerConfig overrides

    def __post_init__(self):
        if self.method not in LEARNING_METHODS:
            raise ConfigurationError(
                f"unknown learning method {self.method!r}; expected one of {', '.join(LEARNING_METHODS)}")
        if self.episodes < 0:
            raise ConfigurationError("episodes must be >= 0")

    def learner_config(self) -> LearnerConfig:
        known = {f.name for f in dataclasses.fields(LearnerConfig)}
        unknown = sorted(set(self.learner) - known)
        if unknown:
            raise ConfigurationError(f"unknown learner settings: {', '.join(unknown)}")
        return LearnerConfig(**{**LEARNING_METHODS[self.method], **self.learner})

    def noise(self, episode: int) -> float:
        if self.episodes <= 1:
            return self.noise_start
        frac = min(episode / (self.episodes - 1), 1.0)
        return self.noise_start + frac * (self.noise_end - self.noise_start)


def episode_seed(seed: int, stream: int, episode: int) -> int:
    """Independent, reproducible environment seed for (run seed, stream, episode)."""
    return int(np.random.SeedSequence([int(seed), int(stream), int(episode)]).generate_state(1)[0])


TRAIN_STREAM, EVAL_STREAM = 0, 1


def train(env, config: TrainConfig, seed: int = 0, checkpoint_path=None):
    """Train one ensemble; returns ``(learner, log_rows)``.

    ``log_rows`` has one dict per (episode, agent): mean per-step reward of the
    agent's own BS, mean critic loss and actor objective over the episode's
    updates, and nature-output statistics (robust method only; NaN otherwise).
    """
    learner = MultiAgentLearner(env.n_agents, env.obs_dim, env.act_dim, config.learner_config(),
                                seed=seed)
    buffer = ReplayBuffer(config.buffer_size, env.n_agents, env.obs_dim, env.act_dim)
    warmup = max(config.warmup if config.warmup is not None else config.batch_size, config.batch_size)
    rows = []
    total_steps = 0
    for ep in range(config.episodes):
        obs = env.reset(episode_seed(seed, TRAIN_STREAM, ep))
        noise = config.noise(ep)
        rewards, stats = [], []
        done = False
        try:
            while not done:
                action = learner.act(obs, noise)
                next_obs, rew, done, _ = env.step(action)
                buffer.add(obs, action, rew, next_obs, done)
                rewards.append(rew)
                obs = next_obs
                total_steps += 1
                if len(buffer) >= warmup and total_steps % config.update_every == 0:
                    stats.append(learner.update(buffer, config.batch_size))
        except TrainingError as exc:
            exc.diagnostics.update(episode=ep, total_steps=total_steps, method=config.method, seed=seed)
            if checkpoint_path is not None:
                save_checkpoint(checkpoint_path, learner.state_arrays(),
                                {"method": config.method, "seed": seed, "episode": ep, "diverged": True})
                exc.diagnostics["checkpoint"] = str(checkpoint_path)
            log.error("training diverged: %s", exc.diagnostics)
            raise
        rewards = np.asarray(rewards)
        for i in range(env.n_agents):
            per = [s[i] for s in stats]
            rows.append({
                "episode": ep,
                "agent": i,
                "mean_reward": float(rewards[:, i].mean()),
                "critic_loss": _mean(p["critic_loss"] for p in per),
                "actor_objective": _mean(p["actor_objective"] for p in per),
                "nature_mean": _mean(p.get("nature_mean", np.nan) for p in per),
                "nature_std": _mean(p.get("nature_std", np.nan) for p in per),
            })
    return learner, rows


def _mean(values) -> float:
    v = list(values)
    return float(np.mean(v)) if v else float("nan")
