"""Non-learning reference policies."""

from __future__ import annotations

import numpy as np

from ..env import ACT_DIM


class RuleBasedPolicy:
    """Fixed control parameters, ignoring the observation.

    The default all-zero raw action decodes to 0 dB on every knob.
    """

    def __init__(self, action=None, n_agents: int = 1):
        a = np.zeros(ACT_DIM) if action is None else np.asarray(action, dtype=float)
        self.action = np.clip(a, -1.0, 1.0)
        self.n_agents = n_agents

    def __call__(self, observation) -> np.ndarray:
        return self.action.copy()

    def act(self, obs, noise_scale: float = 0.0) -> np.ndarray:
        return np.tile(self.action, (len(obs), 1))


class NonLBPolicy(RuleBasedPolicy):
    """No load balancing: the environment runs with AULB disabled and IULB frozen at uniform.

    The action is still emitted (zeros) so the step interface is unchanged, but
    :meth:`directive` tells the harness to build the environment with
    ``lb_enabled=False``.
    """

    @staticmethod
    def directive() -> dict:
        return {"lb_enabled": False}


def non_lb_policy() -> dict:
    return NonLBPolicy.directive()


def rule_based_policy(observation, action=None) -> np.ndarray:
    return RuleBasedPolicy(action)(observation)
