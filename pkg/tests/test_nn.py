import numpy as np
import pytest

from lbmarl.errors import ContractError, TrainingError
from lbmarl.nn import (
    MLP,
    Adam,
    DiminishingSGD,
    check_finite,
    load_checkpoint,
    save_checkpoint,
    soft_update,
)


def numeric_grad(f, x, h=1e-5):
    g = np.zeros_like(x)
    for i in range(x.size):
        old = x[i]
        x[i] = old + h
        up = f()
        x[i] = old - h
        down = f()
        x[i] = old
        g[i] = (up - down) / (2 * h)
    return g


def rel_err(a, b):
    return np.max(np.abs(a - b) / np.maximum(1e-6, np.abs(a) + np.abs(b)))


def test_identity_linear_layer():
    net = MLP.from_layers([(np.eye(3), np.zeros(3), "linear")])
    x = np.array([0.5, -2.0, 3.0])
    np.testing.assert_array_equal(net(x), x)


def test_zero_weights_give_bias():
    b = np.array([1.5, -0.5])
    net = MLP.from_layers([(np.zeros((4, 2)), b, "linear")])
    np.testing.assert_array_equal(net(np.random.default_rng(0).normal(size=(6, 4))), np.tile(b, (6, 1)))


def test_hand_computed_two_layer_value():
    # h = tanh([1, -1] @ [[1, 2], [0, 1]] + [0, 0.5]) = tanh([1, 1.5]); y = h @ [2, -1] + 0.25
    net = MLP.from_layers([(np.array([[1.0, 2.0], [0.0, 1.0]]), np.array([0.0, 0.5]), "tanh"),
                           (np.array([[2.0], [-1.0]]), np.array([0.25]), "linear")])
    expected = 2 * np.tanh(1.0) - np.tanh(1.5) + 0.25
    assert net(np.array([1.0, -1.0]))[0] == pytest.approx(expected, rel=1e-15)
    assert expected == pytest.approx(0.868040, abs=1e-6)


def test_forward_deterministic():
    net = MLP([5, 16, 16, 3], rng=np.random.default_rng(1))
    x = np.random.default_rng(2).normal(size=(7, 5))
    assert net(x).tobytes() == net(x).tobytes()


def test_shape_mismatch_rejected():
    net = MLP([3, 4, 2], rng=np.random.default_rng(0))
    with pytest.raises(ContractError):
        net(np.zeros(4))
    _, cache = net.forward_cache(np.zeros((2, 3)))
    with pytest.raises(ContractError):
        net.backward(cache, np.zeros((2, 3)))


@pytest.mark.parametrize("seed", range(20))
def test_backward_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    sizes = [int(rng.integers(1, 9)) for _ in range(int(rng.integers(2, 5)))]
    acts = ["tanh", "relu", "linear"]
    net = MLP(sizes, hidden=acts[seed % 2], output=acts[seed % 3], rng=rng)
    x = rng.normal(size=(3, sizes[0]))
    up = rng.normal(size=(3, sizes[-1]))

    def objective():
        return float(np.sum(net(x) * up))

    _, cache = net.forward_cache(x)
    g_params, g_in = net.backward(cache, up)
    assert rel_err(g_params, numeric_grad(objective, net.params)) < 1e-4
    flat = x.ravel()
    x_view = flat.reshape(x.shape)

    def objective_in():
        return float(np.sum(net(x_view) * up))

    assert rel_err(g_in.ravel(), numeric_grad(objective_in, flat)) < 1e-4


def test_zero_upstream_gives_zero_gradients():
    net = MLP([4, 6, 2], rng=np.random.default_rng(3))
    _, cache = net.forward_cache(np.ones((2, 4)))
    gp, gi = net.backward(cache, np.zeros((2, 2)))
    assert not gp.any() and not gi.any()


def test_linear_layer_weight_gradient_is_outer_product():
    W = np.random.default_rng(4).normal(size=(3, 2))
    net = MLP.from_layers([(W, np.zeros(2), "linear")])
    x = np.array([1.0, -2.0, 0.5])
    up = np.array([0.3, -1.2])
    _, cache = net.forward_cache(x)
    gp, gi = net.backward(cache, up)
    np.testing.assert_allclose(gp[:6].reshape(3, 2), np.outer(x, up))
    np.testing.assert_allclose(gp[6:], up)
    np.testing.assert_allclose(gi, W @ up)


def test_diminishing_schedule():
    opt = DiminishingSGD(beta0=0.1, kappa=1e-3)
    p = np.array([1.0])
    opt.step(p, np.array([1.0]))
    assert p[0] == pytest.approx(0.9, abs=1e-15)
    assert DiminishingSGD(0.2, 1e-3).rate(10_000) == pytest.approx(0.2 / 11, rel=1e-15)
    rates = [opt.rate(t) for t in range(0, 10**6, 1000)]
    assert all(a >= b for a, b in zip(rates, rates[1:])) and rates[-1] < rates[0] / 900


def test_zero_gradient_fixed_points():
    p = np.random.default_rng(5).normal(size=10)
    before = p.copy()
    DiminishingSGD(0.5, 0.0).step(p, np.zeros(10))
    np.testing.assert_array_equal(p, before)
    Adam(10, 1e-2).step(p, np.zeros(10))
    np.testing.assert_array_equal(p, before)
    DiminishingSGD(0.0, 0.0).step(p, np.ones(10))
    np.testing.assert_array_equal(p, before)


def test_adam_moves_against_gradient():
    p = np.zeros(3)
    Adam(3, 0.01).step(p, np.array([1.0, -2.0, 0.0]))
    assert p[0] < 0 < p[1] and p[2] == 0


def test_non_finite_gradient_raises_with_diagnostics():
    with pytest.raises(TrainingError) as err:
        Adam(2).step(np.zeros(2), np.array([0.0, np.nan]), name="critic0")
    assert err.value.diagnostics["name"] == "critic0"
    assert err.value.diagnostics["first_bad_index"] == 1
    with pytest.raises(TrainingError):
        check_finite([np.inf], "loss")


def test_soft_update_cases():
    a = MLP([2, 3, 1], rng=np.random.default_rng(0))
    b = MLP([2, 3, 1], rng=np.random.default_rng(1))
    keep = a.params.copy()
    soft_update(a, b, 0.0)
    np.testing.assert_array_equal(a.params, keep)
    soft_update(a, b, 1.0)
    np.testing.assert_array_equal(a.params, b.params)
    a.params[:] = 0.0
    b.params[:] = 2.0
    soft_update(a, b, 0.5)
    np.testing.assert_array_equal(a.params, 1.0)
    with pytest.raises(ContractError):
        soft_update(a, MLP([2, 4, 1]), 0.5)
    with pytest.raises(ContractError):
        soft_update(a, b, 1.5)


def test_checkpoint_round_trip_is_bit_exact(tmp_path):
    rng = np.random.default_rng(6)
    arrays = {"w": rng.normal(size=(3, 4)), "b": rng.normal(size=4), "t": np.array([7.0])}
    save_checkpoint(tmp_path / "a.lbck", arrays, {"method": "ma3c", "seed": 1})
    save_checkpoint(tmp_path / "b.lbck", dict(reversed(list(arrays.items()))), {"seed": 1, "method": "ma3c"})
    assert (tmp_path / "a.lbck").read_bytes() == (tmp_path / "b.lbck").read_bytes()
    back, meta = load_checkpoint(tmp_path / "a.lbck")
    assert meta == {"method": "ma3c", "seed": 1}
    for k, v in arrays.items():
        assert back[k].tobytes() == v.tobytes() and back[k].shape == v.shape


def test_checkpoint_rejects_foreign_file(tmp_path):
    (tmp_path / "x").write_bytes(b"not a checkpoint at all")
    with pytest.raises(ContractError):
        load_checkpoint(tmp_path / "x")
