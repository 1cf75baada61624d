"""Replay buffer, actor-critic learners (independent DDPG, MADDPG, MA3C, Robust-MA3C) and baselines."""

from .attention import attend, attend_backward, attention_weights
from .baselines import NonLBPolicy, RuleBasedPolicy, non_lb_policy, rule_based_policy
from .buffer import Batch, ReplayBuffer
from .learner import LearnerConfig, MultiAgentLearner, NatureAgent
from .train import LEARNING_METHODS, TrainConfig, episode_seed, train

__all__ = [
    "Batch", "LEARNING_METHODS", "LearnerConfig", "MultiAgentLearner", "NatureAgent",
    "NonLBPolicy", "ReplayBuffer", "RuleBasedPolicy", "TrainConfig", "attend",
    "attend_backward", "attention_weights", "episode_seed", "non_lb_policy",
    "rule_based_policy", "train",
]
