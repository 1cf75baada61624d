"""Deterministic actor-critic learners sharing one implementation.

The critic of agent ``i`` sees

* ``local``:     its own (s_i, a_i)                      -> independent DDPG
* ``joint``:     every agent's (s_j, a_j) concatenated   -> MADDPG
* ``attention``: encoded messages e_j = g_j(s_j, a_j) weighted by
                 scaled dot-product attention            -> MA3C

``robust=True`` adds a nature agent whose output replaces the observed
reward in the critic target (Robust-MA3C).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ContractError, TrainingError
from ..nn import MLP, Adam, DiminishingSGD, check_finite, soft_update
from .attention import attend, attend_backward
from .buffer import Batch

CRITIC_MODES = ("local", "joint", "attention")


@dataclass
class LearnerConfig:
    critic: str = "attention"
    robust: bool = False
    reward_mode: str = "team"  # "team": sum of per-agent rewards, "local": own reward
    discount: float = 0.95
    tau: float = 0.01
    hidden: int = 64
    encoder_hidden: int = 32
    d_k: int = 16
    actor_lr: float = 1e-4
    critic_lr: float = 1e-3
    encoder_lr: float = 1e-3
    nature_hidden: int = 32
    nature_beta0: float = 1e-3
    nature_kappa: float = 1e-3
    nature_delta: float = 0.5
    actor_final_scale: float = 3e-3

    def __post_init__(self):
        if self.critic not in CRITIC_MODES:
            raise ContractError(f"critic must be one of {CRITIC_MODES}, got {self.critic!r}")
        if self.reward_mode not in ("team", "local"):
            raise ContractError(f"reward_mode must be 'team' or 'local', got {self.reward_mode!r}")
        if self.robust and self.critic != "attention":
            raise ContractError("the nature agent is only defined for the attention critic")
        if self.nature_delta < 0:
            raise ContractError("nature_delta must be non-negative")


class NatureAgent:
    """Adversarial reward model pi_omega(s_hat, a_hat) over the joint observation and action."""

    def __init__(self, in_dim: int, hidden: int, beta0: float, kappa: float, delta: float,
                 rng: np.random.Generator):
        self.net = MLP([in_dim, hidden, 1], rng=rng)
        self.opt = DiminishingSGD(beta0, kappa)
        self.delta = float(delta)

    @staticmethod
    def inputs(obs, act) -> np.ndarray:
        B = obs.shape[0]
        return np.concatenate([obs.reshape(B, -1), act.reshape(B, -1)], axis=1)

    def output(self, obs, act) -> np.ndarray:
        return self.net(self.inputs(obs, act))[:, 0]

    def bounded_reward(self, reward, obs, act) -> np.ndarray:
        """Nature output clamped to the uncertainty set [r - delta, r + delta]."""
        return np.clip(self.output(obs, act), reward - self.delta, reward + self.delta)

    def update(self, obs, act) -> np.ndarray:
        """One diminishing-rate descent step on the mean output over the batch."""
        x = self.inputs(obs, act)
        out, cache = self.net.forward_cache(x)
        grad, _ = self.net.backward(cache, np.full_like(out, 1.0 / len(x)))
        self.opt.step(self.net.params, grad, name="nature")
        return out[:, 0]


class MultiAgentLearner:
    def __init__(self, n_agents: int, obs_dim: int, act_dim: int, config: LearnerConfig | None = None,
                 seed=0):
        self.cfg = cfg = config or LearnerConfig()
        self.n_agents, self.obs_dim, self.act_dim = n_agents, obs_dim, act_dim
        ss = np.random.SeedSequence(seed)
        actor_ss, critic_ss, encoder_ss, nature_ss, self._sample_ss, self._noise_ss = ss.spawn(6)
        actor_rng = np.random.default_rng(actor_ss)
        critic_rng = np.random.default_rng(critic_ss)
        encoder_rng = np.random.default_rng(encoder_ss)
        h = cfg.hidden
        self.actors = [MLP([obs_dim, h, h, act_dim], output="tanh", rng=actor_rng,
                           final_scale=cfg.actor_final_scale) for _ in range(n_agents)]
        sa = obs_dim + act_dim
        if cfg.critic == "local":
            critic_in = sa
        elif cfg.critic == "joint":
            critic_in = n_agents * sa
        else:
            critic_in = (n_agents + 1) * cfg.d_k
        self.critics = [MLP([critic_in, h, h, 1], rng=critic_rng) for _ in range(n_agents)]
        self.encoders = []
        if cfg.critic == "attention":
            self.encoders = [MLP([sa, cfg.encoder_hidden, cfg.d_k], output="tanh", rng=encoder_rng)
                             for _ in range(n_agents)]
        self.target_actors = [a.copy() for a in self.actors]
        self.target_critics = [c.copy() for c in self.critics]
        self.target_encoders = [e.copy() for e in self.encoders]
        self.actor_opts = [Adam(a.n_params, cfg.actor_lr) for a in self.actors]
        self.critic_opts = [Adam(c.n_params, cfg.critic_lr) for c in self.critics]
        self.encoder_opts = [Adam(e.n_params, cfg.encoder_lr) for e in self.encoders]
        self.nature = None
        if cfg.robust:
            self.nature = NatureAgent(n_agents * sa, cfg.nature_hidden, cfg.nature_beta0,
                                      cfg.nature_kappa, cfg.nature_delta,
                                      np.random.default_rng(nature_ss))
        self.sample_rng = np.random.default_rng(self._sample_ss)
        self.noise_rng = np.random.default_rng(self._noise_ss)

    # -- acting ---------------------------------------------------------------
    def act(self, obs, noise_scale: float = 0.0) -> np.ndarray:
        """Decentralized execution: agent k maps its own observation to its action."""
        obs = np.asarray(obs, dtype=float)
        if obs.shape != (self.n_agents, self.obs_dim):
            raise ContractError(f"expected observations of shape {(self.n_agents, self.obs_dim)}, got {obs.shape}")
        a = np.vstack([actor(o[None, :]) for actor, o in zip(self.actors, obs)])
        if noise_scale > 0:
            a = np.clip(a + noise_scale * self.noise_rng.standard_normal(a.shape), -1.0, 1.0)
        return a

    # -- messages -------------------------------------------------------------
    def encode_message(self, j: int, obs, act, target: bool = False) -> np.ndarray:
        if not self.encoders:
            raise ContractError("this learner has no message encoders")
        g = (self.target_encoders if target else self.encoders)[j]
        return g(np.concatenate([np.atleast_2d(obs), np.atleast_2d(act)], axis=-1))

    # -- critic plumbing ------------------------------------------------------
    def _critic_input(self, i, obs, act, target=False, cache_for=None):
        """Critic-i input for a batch and whatever is needed to backprop into it.

        ``cache_for`` limits encoder caches to one agent (others run forward only).
        """
        B = obs.shape[0]
        if self.cfg.critic == "local":
            return np.concatenate([obs[:, i], act[:, i]], axis=1), None
        if self.cfg.critic == "joint":
            return np.concatenate([obs, act], axis=2).reshape(B, -1), None
        encoders = self.target_encoders if target else self.encoders
        sa = np.concatenate([obs, act], axis=2)
        outs, caches = [], []
        for j, g in enumerate(encoders):
            if target or (cache_for is not None and j != cache_for):
                outs.append(g.forward(sa[:, j]))
                caches.append(None)
            else:
                e, c = g.forward_cache(sa[:, j])
                outs.append(e)
                caches.append(c)
        E = np.stack(outs, axis=1)
        X, att = attend(E, i)
        return X, (caches, att)

    def _input_backward(self, i, aux, dX, obs, act):
        """Backprop from the critic input into encoder params and the (obs, act) inputs.

        Returns (encoder_grads, d_sa) where d_sa has shape (B, N, obs+act).
        """
        B = obs.shape[0]
        sa_dim = self.obs_dim + self.act_dim
        if self.cfg.critic == "local":
            d_sa = np.zeros((B, self.n_agents, sa_dim))
            d_sa[:, i] = dX
            return [], d_sa
        if self.cfg.critic == "joint":
            return [], dX.reshape(B, self.n_agents, sa_dim)
        caches, att = aux
        dE = attend_backward(att, dX)
        grads, d_sa = [], np.zeros((B, self.n_agents, sa_dim))
        for j, g in enumerate(self.encoders):
            if caches[j] is None:
                continue
            gp, gin = g.backward(caches[j], dE[:, j])
            grads.append(gp)
            d_sa[:, j] = gin
        return grads, d_sa

    def q_value(self, i, obs, act, target=False) -> np.ndarray:
        X, _ = self._critic_input(i, obs, act, target)
        critic = (self.target_critics if target else self.critics)[i]
        return critic(X)[:, 0]

    def agent_reward(self, i, rew) -> np.ndarray:
        return rew.sum(axis=1) if self.cfg.reward_mode == "team" else rew[:, i]

    def target_actions(self, next_obs) -> np.ndarray:
        return np.stack([mu(next_obs[:, j]) for j, mu in enumerate(self.target_actors)], axis=1)

    def critic_target(self, i, batch: Batch, use_nature: bool | None = None) -> np.ndarray:
        """Bootstrapped target y = r + discount * (1 - done) * Q'_i(s', mu'(s')).

        With the nature agent, ``r`` is replaced by its output clamped to
        [r - delta, r + delta].
        """
        r = self.agent_reward(i, batch.rew)
        if use_nature is None:
            use_nature = self.nature is not None
        if use_nature:
            r = self.nature.bounded_reward(r, batch.obs, batch.act)
        if self.cfg.discount == 0.0:
            return r.copy()
        q_next = self.q_value(i, batch.next_obs, self.target_actions(batch.next_obs), target=True)
        return r + self.cfg.discount * (1.0 - batch.done) * q_next

    def critic_loss(self, i, batch: Batch, y, grads=False):
        """Mean squared Bellman error of critic ``i``; optionally with gradients.

        Gradients are returned as ``(critic_grad, [encoder_grad_j, ...])``.
        """
        X, aux = self._critic_input(i, batch.obs, batch.act)
        q, cache = self.critics[i].forward_cache(X)
        err = y - q[:, 0]
        loss = float(np.mean(err ** 2))
        if not grads:
            return loss
        dq = (-2.0 / len(err) * err)[:, None]
        g_critic, dX = self.critics[i].backward(cache, dq)
        g_enc, _ = self._input_backward(i, aux, dX, batch.obs, batch.act)
        return loss, g_critic, g_enc

    def actor_objective(self, i, batch: Batch, grads=False):
        """Mean Q_i with agent i's batch action replaced by mu_i(s_i).

        The gradient returned is that of the loss ``-objective`` w.r.t. the
        actor parameters (deterministic policy gradient through the critic).
        """
        a_i, a_cache = self.actors[i].forward_cache(batch.obs[:, i])
        act = batch.act.copy()
        act[:, i] = a_i
        X, aux = self._critic_input(i, batch.obs, act, cache_for=i)
        q, c_cache = self.critics[i].forward_cache(X)
        objective = float(q.mean())
        if not grads:
            return objective
        dq = np.full_like(q, -1.0 / len(q))
        _, dX = self.critics[i].backward(c_cache, dq)
        _, d_sa = self._input_backward(i, aux, dX, batch.obs, act)
        g_actor, _ = self.actors[i].backward(a_cache, d_sa[:, i, self.obs_dim:])
        return objective, g_actor

    # -- updates --------------------------------------------------------------
    def update_agent(self, i, batch: Batch) -> dict:
        """Nature step (robust only), critic step, actor step for agent ``i`` on one minibatch."""
        stats = {}
        if self.nature is not None:
            out = self.nature.update(batch.obs, batch.act)
            stats["nature_mean"] = float(out.mean())
            stats["nature_std"] = float(out.std())
        y = self.critic_target(i, batch)
        loss, g_critic, g_enc = self.critic_loss(i, batch, y, grads=True)
        if not np.isfinite(loss):
            raise TrainingError("non-finite critic loss", {"agent": i, "loss": loss})
        self.critic_opts[i].step(self.critics[i].params, g_critic, name=f"critic{i}")
        for j, g in enumerate(g_enc):
            self.encoder_opts[j].step(self.encoders[j].params, g, name=f"encoder{j}")
        objective, g_actor = self.actor_objective(i, batch, grads=True)
        check_finite(g_actor, "actor gradient", agent=i)
        self.actor_opts[i].step(self.actors[i].params, g_actor, name=f"actor{i}")
        stats["critic_loss"] = loss
        stats["actor_objective"] = objective
        return stats

    def update(self, buffer, batch_size: int) -> list[dict]:
        """One learning round: every agent samples its own minibatch and updates, then targets move."""
        stats = []
        for i in range(self.n_agents):
            batch = buffer.sample(batch_size, self.sample_rng)
            stats.append(self.update_agent(i, batch))
        self.soft_update_targets()
        return stats

    def soft_update_targets(self) -> None:
        tau = self.cfg.tau
        for tgt, src in zip(self.target_actors + self.target_critics + self.target_encoders,
                            self.actors + self.critics + self.encoders):
            soft_update(tgt, src, tau)

    # -- persistence ----------------------------------------------------------
    def state_arrays(self) -> dict:
        out = {}
        groups = {"actor": self.actors, "critic": self.critics, "encoder": self.encoders,
                  "target_actor": self.target_actors, "target_critic": self.target_critics,
                  "target_encoder": self.target_encoders}
        for name, nets in groups.items():
            for j, net in enumerate(nets):
                out[f"{name}/{j}"] = net.params
        for name, opts in (("actor_opt", self.actor_opts), ("critic_opt", self.critic_opts),
                           ("encoder_opt", self.encoder_opts)):
            for j, opt in enumerate(opts):
                for k, v in opt.state_arrays().items():
                    out[f"{name}/{j}/{k}"] = v
        if self.nature is not None:
            out["nature/params"] = self.nature.net.params
            out["nature_opt/t"] = self.nature.opt.state_arrays()["t"]
        return out

    def load_state_arrays(self, arrays: dict) -> None:
        groups = {"actor": self.actors, "critic": self.critics, "encoder": self.encoders,
                  "target_actor": self.target_actors, "target_critic": self.target_critics,
                  "target_encoder": self.target_encoders}
        for name, nets in groups.items():
            for j, net in enumerate(nets):
                net.params[:] = arrays[f"{name}/{j}"]
        for name, opts in (("actor_opt", self.actor_opts), ("critic_opt", self.critic_opts),
                           ("encoder_opt", self.encoder_opts)):
            for j, opt in enumerate(opts):
                prefix = f"{name}/{j}/"
                opt.load_state({k[len(prefix):]: v for k, v in arrays.items() if k.startswith(prefix)})
        if self.nature is not None:
            self.nature.net.params[:] = arrays["nature/params"]
            self.nature.opt.load_state({"t": arrays["nature_opt/t"]})
