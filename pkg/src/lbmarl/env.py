"""The load-balancing Markov game: one agent per base station, reset/step interface."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, ContractError
from .metrics import MetricsReport, metrics_report
from .sim.core import (
    AULB_RANGE_DB,
    BITS_PER_BYTE,
    IULB_RANGE_DB,
    MBIT,
    LBParameters,
    NetworkState,
    SimParams,
    init_state,
    step_sim,
)
from .sim.scenario import TrafficScenario
from .sim.topology import CHANNELS_PER_SECTOR, build_topology

log = logging.getLogger(__name__)

OBS_DIM = 3
ACT_DIM = 3 * CHANNELS_PER_SECTOR


def decode_action(raw) -> LBParameters:
    """Map raw actions in [-1, 1] (shape (12,) or (n_bs, 12)) to dB offsets.

    Components 0-3 scale to alpha in [-2, 2] dB, 4-7 to beta and 8-11 to gamma
    in [-20, 20] dB. Out-of-range inputs are clamped with a warning.
    """
    a = np.array(raw, dtype=float, ndmin=2)
    if a.ndim != 2 or a.shape[1] != ACT_DIM:
        raise ContractError(f"raw action must have {ACT_DIM} components per BS, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ContractError("raw action contains non-finite values")
    if np.any(np.abs(a) > 1.0):
        log.warning("clamping %d raw action components into [-1, 1]", int(np.sum(np.abs(a) > 1.0)))
        a = np.clip(a, -1.0, 1.0)
    k = CHANNELS_PER_SECTOR
    return LBParameters(alpha=AULB_RANGE_DB * a[:, :k],
                        beta=IULB_RANGE_DB * a[:, k:2 * k],
                        gamma=IULB_RANGE_DB * a[:, 2 * k:])


def encode_action(params: LBParameters) -> np.ndarray:
    """Inverse of :func:`decode_action`."""
    return np.hstack([params.alpha / AULB_RANGE_DB, params.beta / IULB_RANGE_DB,
                      params.gamma / IULB_RANGE_DB])


@dataclass
class StepInfo:
    report: MetricsReport
    handoffs: int
    active_ues: int


class LoadBalancingEnv:
    """Markov game over a simulated network; agent ``k`` controls BS ``k``.

    Observations are ``(n_bs, 3)``: UE share, mean channel utilization and
    mean active-UE throughput over a reference rate. Rewards are the per-BS
    combination ``g_aver + g_min - g_sd`` over the BS's own active UEs.
    """

    obs_dim = OBS_DIM
    act_dim = ACT_DIM

    def __init__(self, scenario: TrafficScenario, n_bs: int = 3, inter_site_distance: float = 500.0,
                 sim_params: SimParams | None = None, lb_enabled: bool = True,
                 episode_length: int | None = None):
        if not isinstance(scenario, TrafficScenario):
            raise ConfigurationError("scenario must be a TrafficScenario")
        self.scenario = scenario
        self.topology = build_topology(n_bs, inter_site_distance)
        self.sim_params = sim_params or SimParams()
        self.lb_enabled = lb_enabled
        self.episode_length = int(episode_length or scenario.episode_length)
        self.dt = float(scenario.step_duration)
        carriers = self.topology.carriers
        self.reference_rate = float(max(
            self.sim_params.channel_capacity(self.sim_params.min_distance, c.bandwidth_mhz, c.frequency_ghz)
            for c in carriers))
        self.state: NetworkState | None = None
        self.rng: np.random.Generator | None = None
        self.t = 0

    @property
    def n_agents(self) -> int:
        return self.topology.n_bs

    def reset(self, seed=None) -> np.ndarray:
        self.rng = np.random.default_rng(seed)
        self.state = init_state(self.topology, self.scenario, self.rng, self.sim_params,
                                lb_enabled=self.lb_enabled)
        self.t = 0
        return self.observe()

    def observe(self) -> np.ndarray:
        st = self.state
        topo = self.topology
        n = self.n_agents
        ue_bs = topo.channel_bs[st.channel]
        s_ue = np.bincount(ue_bs, minlength=n) / max(st.n_ues, 1)
        s_band = np.bincount(topo.channel_bs, weights=st.utilization, minlength=n) / (
            topo.n_channels / n)
        tput = st.window * (BITS_PER_BYTE / MBIT) / (st.window_ms / 1000.0) if st.window_ms > 0 \
            else np.zeros(st.n_ues)
        act_bs = ue_bs[st.active]
        counts = np.bincount(act_bs, minlength=n)
        sums = np.bincount(act_bs, weights=tput[st.active], minlength=n)
        s_tput = np.divide(sums, counts, out=np.zeros(n), where=counts > 0) / self.reference_rate
        obs = np.column_stack([s_ue, s_band, np.minimum(s_tput, 1.0)])
        return obs

    def report(self) -> MetricsReport:
        st = self.state
        act = np.flatnonzero(st.active)
        ledgers = st.window[act] * (BITS_PER_BYTE / MBIT)
        return metrics_report(ledgers, st.window_ms / 1000.0 or 1.0,
                              self.topology.channel_bs[st.channel[act]], self.n_agents)

    def step(self, joint_action):
        if self.state is None:
            raise ContractError("call reset() before step()")
        a = np.asarray(joint_action, dtype=float)
        if a.ndim != 2 or a.shape[0] != self.n_agents:
            raise ContractError(
                f"joint action must hold one action per agent ({self.n_agents}), got shape {a.shape}")
        params = decode_action(a)
        step_sim(self.state, params, self.dt, self.rng)
        self.t += 1
        rep = self.report()
        done = self.t >= self.episode_length
        info = StepInfo(report=rep, handoffs=self.state.step_handoffs,
                        active_ues=int(self.state.active.sum()))
        return self.observe(), rep.bs_rewards, done, info

    def snapshot(self):
        """Full internal state (simulator + RNG stream) for exact replay."""
        return self.state.copy(), self.rng.bit_generator.state, self.t

    def restore(self, snap) -> None:
        state, rng_state, t = snap
        self.state = state.copy()
        self.rng = np.random.default_rng()
        self.rng.bit_generator.state = rng_state
        self.t = t


class QuadraticGame:
    """Two-agent cooperative one-shot game with reward -(a1)^2 - (a2)^2 - (a1 - a2)^2.

    Both agents receive the shared reward; the unique equilibrium is a = (0, 0).
    """

    n_agents = 2
    obs_dim = 1
    act_dim = 1
    episode_length = 1

    def __init__(self):
        self._obs = np.ones((2, 1))

    def reset(self, seed=None) -> np.ndarray:
        return self._obs.copy()

    def step(self, joint_action):
        a = np.asarray(joint_action, dtype=float).reshape(2)
        r = -(a[0] ** 2) - a[1] ** 2 - (a[0] - a[1]) ** 2
        return self._obs.copy(), np.array([r, r]), True, None
