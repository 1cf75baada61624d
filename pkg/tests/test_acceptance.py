"""Acceptance criteria 1-10.

Each test records a PASS/FAIL line through ``record`` (printed in the pytest
terminal summary) and then asserts, so a failing criterion fails the suite.
Criteria 7-10 train networks and are marked ``slow``.
"""

import time

import numpy as np
import pytest
from scipy.stats import mannwhitneyu

from conftest import make_scenario, make_state
from lbmarl.agents import Batch, LearnerConfig, MultiAgentLearner, TrainConfig, attention_weights, train
from lbmarl.env import ACT_DIM, LoadBalancingEnv, QuadraticGame
from lbmarl.harness.cli import main
from lbmarl.harness.config import profile_config
from lbmarl.harness.experiment import read_csv, run_experiment
from lbmarl.metrics import compute_g_aver, compute_g_min, compute_g_sd, compute_reward
from lbmarl.sim import load_scenario, move_ues
from lbmarl.sim.core import MBIT, generate_traffic, packet_sizes_bytes

RESULTS = []


def record(number, ok, detail):
    line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


def numeric_grad(f, x, h=1e-5):
    g = np.zeros_like(x)
    for k in range(x.size):
        old = x[k]
        x[k] = old + h
        up = f()
        x[k] = old - h
        down = f()
        x[k] = old
        g[k] = (up - down) / (2 * h)
    return g


def rel_err(a, b):
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(a)), np.max(np.abs(b)), 1e-12))


def random_batch(rng, B, N, obs_dim=3, act_dim=4):
    return Batch(obs=rng.uniform(0, 1, (B, N, obs_dim)), act=rng.uniform(-1, 1, (B, N, act_dim)),
                 rew=rng.normal(size=(B, N)), next_obs=rng.uniform(0, 1, (B, N, obs_dim)),
                 done=(rng.uniform(size=B) < 0.1).astype(float))


# ---------------------------------------------------------------- 1


def test_criterion_01_metric_oracle():
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    worst, exact = 0.0, True
    for _ in range(1000):
        n = int(rng.integers(1, 60))
        ledgers = rng.exponential(rng.uniform(0.1, 20), n) * (rng.uniform(size=n) > 0.1)
        T = float(rng.uniform(0.1, 5))
        # direct recomputation with plain Python arithmetic
        x = [v / T for v in ledgers.tolist()]
        mean = sum(x) / n
        oracle = (mean, min(x), (sum((v - mean) ** 2 for v in x) / n) ** 0.5)
        got = (compute_g_aver(ledgers, T), compute_g_min(ledgers, T), compute_g_sd(ledgers, T))
        for g, o in zip(got, oracle):
            worst = max(worst, abs(g - o) / max(abs(o), 1e-300) if o else abs(g))
        exact &= compute_reward(*got) == got[0] + got[1] - got[2]
    elapsed = time.perf_counter() - t0
    record(1, worst < 1e-9 and exact and elapsed < 5,
           f"max rel err {worst:.2e}, reward identity exact={exact}, {elapsed:.2f}s")


# ---------------------------------------------------------------- 2


def test_criterion_02_gradient_fidelity():
    t0 = time.perf_counter()
    worst, instances = 0.0, 0
    for seed in range(20):
        rng = np.random.default_rng(200 + seed)
        cfg = LearnerConfig(critic="attention", robust=bool(seed % 2), hidden=4, encoder_hidden=4, d_k=3,
                            nature_hidden=4, actor_final_scale=0.5)
        ln = MultiAgentLearner(3, 3, 4, cfg, seed=seed)
        b = random_batch(rng, 5, 3)
        i = seed % 3
        y = ln.critic_target(i, b)
        _, g_critic, g_enc = ln.critic_loss(i, b, y, grads=True)
        loss = lambda: ln.critic_loss(i, b, y)  # noqa: E731
        worst = max(worst, rel_err(g_critic, numeric_grad(loss, ln.critics[i].params)))
        for j, g in enumerate(g_enc):
            worst = max(worst, rel_err(g, numeric_grad(loss, ln.encoders[j].params)))
        _, g_actor = ln.actor_objective(i, b, grads=True)
        worst = max(worst, rel_err(g_actor, numeric_grad(lambda: -ln.actor_objective(i, b), ln.actors[i].params)))
        instances += 1
    elapsed = time.perf_counter() - t0
    record(2, worst < 1e-4 and instances >= 20 and elapsed < 30,
           f"{instances} instances, max rel err {worst:.2e}, {elapsed:.2f}s")


# ---------------------------------------------------------------- 3


def test_criterion_03_attention_invariants():
    t0 = time.perf_counter()
    rng = np.random.default_rng(300)
    ok = True
    for _ in range(500):
        n, d = int(rng.integers(1, 9)), int(rng.integers(1, 6))
        E = rng.normal(size=(n, d)) * 4
        e = rng.normal(size=d)
        w = attention_weights(e, E)
        perm = rng.permutation(n)
        ok &= bool(np.all(w >= 0)) and abs(w.sum() - 1) <= 1e-6
        ok &= bool(np.allclose(attention_weights(e, E[perm]), w[perm], rtol=1e-12, atol=1e-15))
    hand = attention_weights([1.0], [[0.0], [np.log(2.0)]])
    ok &= bool(np.allclose(hand, [1 / 3, 2 / 3], rtol=1e-12))
    elapsed = time.perf_counter() - t0
    record(3, ok and elapsed < 1, f"hand case {np.round(hand, 6).tolist()}, {elapsed:.3f}s")


# ---------------------------------------------------------------- 4


def test_criterion_04_robust_degeneracy():
    t0 = time.perf_counter()
    base = dict(critic="attention", reward_mode="team", discount=0.95)
    robust = MultiAgentLearner(3, 3, ACT_DIM, LearnerConfig(robust=True, nature_delta=0.0, **base), seed=7)
    plain = MultiAgentLearner(3, 3, ACT_DIM, LearnerConfig(robust=False, **base), seed=7)
    rng = np.random.default_rng(400)
    same, n = True, 0
    for _ in range(10):
        b = random_batch(rng, 100, 3, act_dim=ACT_DIM)
        for i in range(3):
            same &= robust.critic_target(i, b).tobytes() == plain.critic_target(i, b).tobytes()
        n += 100
    elapsed = time.perf_counter() - t0
    record(4, same and elapsed < 10, f"{n} transitions bitwise identical={same}, {elapsed:.2f}s")


# ---------------------------------------------------------------- 5


def test_criterion_05_simulator_statistics():
    t0 = time.perf_counter()
    st = make_state(scenario=make_scenario(total=1))
    horizon_ms = 3e7  # 1.5e5 expected arrivals
    generate_traffic(st, horizon_ms, np.random.default_rng(500))
    arrivals = int(st.arrivals[0])
    gap = horizon_ms / arrivals

    st = make_state(n_bs=7, scenario=make_scenario(total=2000, active=1000))
    rng = np.random.default_rng(501)
    speeds = []
    for _ in range(50):
        before = st.pos.copy()
        move_ues(st, 1000.0, rng)
        d = st.topology.displacement(before, st.pos)
        speeds.append(np.hypot(d[:, 0], d[:, 1]))
    speed = float(np.mean(speeds))

    size_err = {}
    for tag in ("A", "B", "C-1", "C-2", "C-3"):
        mean = load_scenario(tag).mean_packet_size
        sizes = packet_sizes_bytes(np.random.default_rng(502), 100_000, mean, 10.0) * 8 / MBIT
        size_err[tag] = abs(sizes.mean() / mean - 1)
    elapsed = time.perf_counter() - t0
    ok = (arrivals >= 1e5 and abs(gap / 200 - 1) < 0.02 and abs(speed / 3 - 1) < 0.05
          and max(size_err.values()) < 0.05 and elapsed < 30)
    record(5, ok, f"{arrivals} arrivals, gap {gap:.2f} ms, {len(speeds) * 2000} speeds mean {speed:.3f} m/s, "
                  f"packet size max rel err {max(size_err.values()):.4f}, {elapsed:.1f}s")


# ---------------------------------------------------------------- 6


def test_criterion_06_conservation_and_custody():
    t0 = time.perf_counter()
    env = LoadBalancingEnv(load_scenario("C-3"), n_bs=3)
    rng = np.random.default_rng(600)
    steps, conserved, custody = 0, True, True
    for ep in range(250):
        env.reset(ep)
        done = False
        while not done:
            _, _, done, _ = env.step(rng.uniform(-1, 1, (3, ACT_DIM)))
            st = env.state
            conserved &= bool(np.array_equal(st.delivered + st.pending, st.generated))
            custody &= st.channel.shape == (st.n_ues,) and bool(
                np.all((st.channel >= 0) & (st.channel < st.topology.n_channels)))
            custody &= int(st.channel_load().sum()) == st.n_ues
            steps += 1
    elapsed = time.perf_counter() - t0
    record(6, conserved and custody and steps >= 10_000 and elapsed < 60,
           f"{steps} steps, conservation exact={conserved}, single serving channel={custody}, {elapsed:.1f}s")


# ---------------------------------------------------------------- 7


@pytest.mark.slow
def test_criterion_07_toy_game_equilibrium():
    t0 = time.perf_counter()
    game = QuadraticGame()
    detail, ok = [], True
    for method in ("ma3c", "robust-ma3c"):
        dist = []
        for seed in range(5):
            cfg = TrainConfig(method=method, episodes=4000, batch_size=64, noise_start=0.5, noise_end=0.02,
                              learner=dict(hidden=16, actor_lr=5e-4, critic_lr=1e-3, discount=0.0,
                                           actor_final_scale=None))
            ln, _ = train(game, cfg, seed=seed)
            dist.append(float(np.abs(ln.act(game.reset())).max()))
        hits = sum(d <= 0.05 for d in dist)
        ok &= hits >= 4
        detail.append(f"{method} {hits}/5 within 0.05 (max|a| {np.round(dist, 3).tolist()})")
    elapsed = time.perf_counter() - t0
    record(7, ok and elapsed < 300, "; ".join(detail) + f", {elapsed:.0f}s")


# ---------------------------------------------------------------- 8, 9


DESK_SCENARIO = "B"
DESK_METHODS = ("non-lb", "independent-ddpg", "ma3c", "robust-ma3c")


@pytest.fixture(scope="module")
def desk_runs(tmp_path_factory):
    out = tmp_path_factory.mktemp("desk")
    t0 = time.perf_counter()
    summaries, per_seed, logs = {}, {}, {}
    for method in DESK_METHODS:
        cfg = profile_config("desk", method=method, scenario=DESK_SCENARIO, out=str(out))
        paths = run_experiment(cfg, plots=False)
        summaries[method] = read_csv(paths["summary"])[1][0]
        per_seed[method] = [float(r["reward"]) for r in read_csv(paths["seeds"])[1]]
        logs[method] = paths["learning_logs"]
    return {"summary": summaries, "seeds": per_seed, "logs": logs, "elapsed": time.perf_counter() - t0}


@pytest.mark.slow
def test_criterion_08_desk_ordering(desk_runs):
    s, r = desk_runs["summary"], desk_runs["seeds"]
    p_ddpg = mannwhitneyu(r["ma3c"], r["independent-ddpg"], alternative="greater").pvalue
    p_nonlb = mannwhitneyu(r["ma3c"], r["non-lb"], alternative="greater").pvalue
    gmin_robust, gmin_ma3c = float(s["robust-ma3c"]["g_min_mean"]), float(s["ma3c"]["g_min_mean"])
    means = {m: round(float(np.mean(v)), 4) for m, v in r.items()}
    ok = p_ddpg < 0.05 and p_nonlb < 0.05 and gmin_robust >= gmin_ma3c and desk_runs["elapsed"] < 1800
    record(8, ok, f"mean eval reward {means}; p(MA3C>IDDPG)={p_ddpg:.4f}, p(MA3C>Non-LB)={p_nonlb:.4f}; "
                  f"g_min robust {gmin_robust:.4f} vs MA3C {gmin_ma3c:.4f}; {desk_runs['elapsed']:.0f}s")


def reward_cov(rows):
    """Across-agent coefficient of variation of per-BS episode reward, one value per episode."""
    by_ep = {}
    for row in rows:
        by_ep.setdefault(int(row["episode"]), []).append(float(row["mean_reward"]))
    eps = sorted(by_ep)
    vals = np.array([by_ep[e] for e in eps])
    return vals.std(axis=1) / np.abs(vals.mean(axis=1))


@pytest.mark.slow
def test_criterion_09_convergence_band(desk_runs):
    detail, wins = [], 0
    for path in desk_runs["logs"]["robust-ma3c"]:
        cov = reward_cov(read_csv(path)[1])
        k = max(1, len(cov) // 10)
        first, last = float(np.mean(cov[:k])), float(np.mean(cov[-k:]))
        wins += last < first
        detail.append(f"{first:.3f}->{last:.3f}")
    record(9, wins >= 4, f"{wins}/5 seeds narrower at the end (CoV first->last 10%: {', '.join(detail)})")


# ---------------------------------------------------------------- 10


@pytest.mark.slow
def test_criterion_10_end_to_end_determinism(tmp_path, capsys):
    t0 = time.perf_counter()
    config = ("method: robust-ma3c\nscenario: C-2\nseeds: [0, 1]\nepisodes: 30\neval_episodes: 2\n"
              "batch_size: 32\nupdate_every: 5\n")
    trees = []
    for run in ("a", "b"):
        cfg_path = tmp_path / f"{run}.yaml"
        cfg_path.write_text(config + f"out: {tmp_path / run}\n")
        assert main(["train", "--config", str(cfg_path)]) == 0
        root = tmp_path / run
        trees.append({p.relative_to(root): p.read_bytes() for p in sorted(root.rglob("*"))
                      if p.suffix in (".csv", ".lbck")})
    capsys.readouterr()
    a, b = trees
    same = a.keys() == b.keys() and all(a[k] == b[k] for k in a)
    n_ckpt = sum(k.suffix == ".lbck" for k in a)
    elapsed = time.perf_counter() - t0
    record(10, same and n_ckpt == 2 and elapsed < 300,
           f"{len(a)} files ({n_ckpt} checkpoints) byte-identical={same}, {elapsed:.0f}s")
