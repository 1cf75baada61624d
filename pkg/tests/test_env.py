import logging

import numpy as np
import pytest

from conftest import make_scenario
from lbmarl.env import ACT_DIM, LoadBalancingEnv, QuadraticGame, decode_action, encode_action
from lbmarl.errors import ConfigurationError, ContractError
from lbmarl.metrics import summarize
from lbmarl.sim import LBParameters, load_scenario
from lbmarl.sim.core import BITS_PER_BYTE, MBIT


def test_decode_midpoint_and_endpoints():
    p = decode_action(np.zeros(ACT_DIM))
    assert np.all(p.alpha == 0) and np.all(p.beta == 0) and np.all(p.gamma == 0)
    raw = np.zeros(ACT_DIM)
    raw[0] = 1.0
    raw[4] = -1.0
    raw[8] = 1.0
    p = decode_action(raw)
    assert p.alpha[0, 0] == 2.0
    assert p.beta[0, 0] == -20.0
    assert p.gamma[0, 0] == 20.0


def test_decode_encode_round_trip_exact_at_endpoints():
    raw = np.array([[-1.0, 1.0, 0.0, 0.5] * 3, [1.0, -1.0, -0.25, 0.0] * 3])
    back = encode_action(decode_action(raw))
    np.testing.assert_allclose(back, raw, rtol=0, atol=1e-12)
    ends = encode_action(LBParameters(np.full((1, 4), 2.0), np.full((1, 4), -20.0), np.full((1, 4), 20.0)))
    assert ends.tolist() == [[1.0] * 4 + [-1.0] * 4 + [1.0] * 4]


def test_decode_clamps_with_warning(caplog):
    raw = np.full(ACT_DIM, 3.0)
    with caplog.at_level(logging.WARNING, logger="lbmarl.env"):
        p = decode_action(raw)
    assert np.all(p.alpha == 2.0) and np.all(p.beta == 20.0)
    assert "clamping" in caplog.text


def test_decode_rejects_wrong_width():
    with pytest.raises(ContractError):
        decode_action(np.zeros(ACT_DIM + 1))


def test_reset_places_scenario_ues():
    env = LoadBalancingEnv(load_scenario("A"), n_bs=7)
    obs = env.reset(0)
    assert obs.shape == (7, 3)
    assert env.state.n_ues == 40
    assert int(env.state.active.sum()) == 12 and int((~env.state.active).sum()) == 28


def test_reset_is_deterministic():
    env = LoadBalancingEnv(load_scenario("B"), n_bs=3)
    a = env.reset(5)
    b = env.reset(5)
    np.testing.assert_array_equal(a, b)


def test_env_rejects_bad_scenario():
    with pytest.raises(ConfigurationError):
        LoadBalancingEnv({"scenario_id": "A"}, n_bs=3)


def test_step_arity_checked():
    env = LoadBalancingEnv(load_scenario("A"), n_bs=3)
    env.reset(0)
    with pytest.raises(ContractError):
        env.step(np.zeros((2, ACT_DIM)))


def test_step_before_reset():
    with pytest.raises(ContractError):
        LoadBalancingEnv(load_scenario("A"), n_bs=3).step(np.zeros((3, ACT_DIM)))


def test_empty_network_rewards_zero():
    env = LoadBalancingEnv(make_scenario(total=0, active=0), n_bs=3)
    env.reset(0)
    rng = np.random.default_rng(0)
    for _ in range(5):
        _, rew, _, info = env.step(rng.uniform(-1, 1, (3, ACT_DIM)))
        assert rew.tolist() == [0.0, 0.0, 0.0]
        assert info.report.reward == 0.0


def test_same_seed_same_rewards():
    seqs = []
    for _ in range(2):
        env = LoadBalancingEnv(load_scenario("C-1"), n_bs=3)
        env.reset(3)
        rng = np.random.default_rng(4)
        seqs.append([env.step(rng.uniform(-1, 1, (3, ACT_DIM)))[1] for _ in range(40)])
    np.testing.assert_array_equal(np.array(seqs[0]), np.array(seqs[1]))


def test_episode_ends_after_horizon():
    env = LoadBalancingEnv(load_scenario("A"), n_bs=3)
    env.reset(0)
    dones = [env.step(np.zeros((3, ACT_DIM)))[2] for _ in range(40)]
    assert dones == [False] * 39 + [True]


def test_agent_rewards_match_ledger_partition():
    env = LoadBalancingEnv(load_scenario("C-2"), n_bs=3)
    env.reset(1)
    rng = np.random.default_rng(2)
    for _ in range(20):
        _, rew, _, _ = env.step(rng.uniform(-1, 1, (3, ACT_DIM)))
        st = env.state
        act = np.flatnonzero(st.active)
        mbit = st.window[act] * BITS_PER_BYTE / MBIT
        bs = env.topology.channel_bs[st.channel[act]]
        oracle = [summarize(mbit[bs == k], 1.0)[3] for k in range(3)]
        np.testing.assert_allclose(rew, oracle, rtol=1e-12, atol=1e-12)
        assert rew.sum() == pytest.approx(sum(oracle), rel=1e-12)


def test_observations_normalized():
    env = LoadBalancingEnv(load_scenario("C-3"), n_bs=3)
    rng = np.random.default_rng(0)
    for ep in range(25):
        obs = env.reset(ep)
        done = False
        while not done:
            assert np.all(np.isfinite(obs)) and np.all((obs >= 0) & (obs <= 1))
            obs, _, done, _ = env.step(rng.uniform(-1, 1, (3, ACT_DIM)))
    assert np.all((obs >= 0) & (obs <= 1))


def test_snapshot_restore_replays_exactly():
    env = LoadBalancingEnv(load_scenario("B"), n_bs=3)
    env.reset(7)
    rng = np.random.default_rng(8)
    for _ in range(10):
        env.step(rng.uniform(-1, 1, (3, ACT_DIM)))
    snap = env.snapshot()
    actions = rng.uniform(-1, 1, (15, 3, ACT_DIM))
    first = [env.step(a) for a in actions]
    env.restore(snap)
    second = [env.step(a) for a in actions]
    for (o1, r1, d1, _), (o2, r2, d2, _) in zip(first, second):
        np.testing.assert_array_equal(o1, o2)
        np.testing.assert_array_equal(r1, r2)
        assert d1 == d2


def test_non_lb_environment_never_hands_off():
    env = LoadBalancingEnv(load_scenario("C-2"), n_bs=3, lb_enabled=False)
    env.reset(0)
    rng = np.random.default_rng(1)
    total = 0
    for _ in range(40):
        _, _, _, info = env.step(rng.uniform(-1, 1, (3, ACT_DIM)))
        total += info.handoffs
        assert np.isfinite(info.report.reward)
    assert total == 0 and env.state.handoffs == 0


def test_quadratic_game_reward():
    g = QuadraticGame()
    obs = g.reset()
    assert obs.shape == (2, 1)
    _, r, done, _ = g.step(np.array([[0.5], [-0.5]]))
    assert done and r.tolist() == [-1.5, -1.5]
    assert g.step(np.zeros((2, 1)))[1].tolist() == [0.0, 0.0]
