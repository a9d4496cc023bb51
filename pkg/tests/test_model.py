import json

import numpy as np
import pytest

from phasegrid import (ConfigError, Dataset, Network, Schedule, backward,
                       config_from_gammas, forward, init_network,
                       load_checkpoint, loss, predict, save_checkpoint,
                       synthetic_1d, train)
from phasegrid.scaling import HyperConfig, PowerLaw, UNIT_LAW


def small_config(m=5, d=2, d_out=1, beta=1.0):
    b = PowerLaw(beta, 0)
    return HyperConfig(UNIT_LAW, b, b, b, m=m, d=d, d_out=d_out)


def manual_net(W1, W2, A, alpha=1.0):
    return Network(np.asarray(W1, float), np.asarray(W2, float),
                   np.asarray(A, float), float(alpha))


class TestInit:
    def test_deterministic(self):
        cfg = small_config()
        a = init_network(cfg, np.random.default_rng(42))
        b = init_network(cfg, np.random.default_rng(42))
        assert np.array_equal(a.W1, b.W1)
        assert np.array_equal(a.W2, b.W2)
        assert np.array_equal(a.A, b.A)

    def test_shapes_include_bias_columns(self):
        net = init_network(small_config(m=7, d=3, d_out=2), np.random.default_rng(0))
        assert net.W1.shape == (7, 4)
        assert net.W2.shape == (7, 8)
        assert net.A.shape == (2, 7)

    def test_entry_variance_matches_scale(self):
        cfg = small_config(m=2000, d=1, beta=0.3)
        net = init_network(cfg, np.random.default_rng(5))
        assert np.var(net.W1) == pytest.approx(0.09, rel=0.1)
        assert np.var(net.W2) == pytest.approx(0.09, rel=0.05)

    def test_zero_scale_unrepresentable(self):
        with pytest.raises(ConfigError):
            PowerLaw(0.0, 0)


class TestForward:
    def test_zero_weights_zero_output(self):
        net = manual_net(np.zeros((3, 2)), np.zeros((3, 4)), np.zeros((1, 3)))
        X = np.array([[1.0], [-2.0]])
        assert np.all(predict(net, X) == 0.0)

    def test_single_path(self):
        net = manual_net([[1.0, 0.0]], [[1.0, 0.0]], [[1.0]])
        assert predict(net, np.array([[2.0]]))[0, 0] == 2.0
        assert predict(net, np.array([[-2.0]]))[0, 0] == 0.0

    def test_bias_only_path(self):
        # input is ignored; output comes through the appended bias units
        net = manual_net([[0.0, 1.0]], [[1.0, 0.0]], [[3.0]])
        assert predict(net, np.array([[123.0]]))[0, 0] == 3.0

    def test_output_scale_invariance(self):
        rng = np.random.default_rng(7)
        net = init_network(small_config(m=6), rng)
        doubled = Network(net.W1, net.W2, 2.0 * net.A, 2.0 * net.alpha)
        X = np.random.default_rng(8).standard_normal((4, 2))
        np.testing.assert_allclose(predict(doubled, X), predict(net, X), rtol=1e-14)

    def test_doubling_alpha_halves_output(self):
        net = init_network(small_config(m=6), np.random.default_rng(7))
        halved = Network(net.W1, net.W2, net.A, 2.0 * net.alpha)
        X = np.random.default_rng(8).standard_normal((4, 2))
        np.testing.assert_allclose(predict(halved, X), 0.5 * predict(net, X), rtol=1e-14)

    def test_cache_shapes(self):
        net = init_network(small_config(m=5, d=2), np.random.default_rng(0))
        F, cache = forward(net, np.zeros((3, 2)))
        assert F.shape == (3, 1)
        assert cache["Z1"].shape == (3, 5) and cache["H1b"].shape == (3, 6)
        assert cache["Z2"].shape == (3, 5) and cache["H2"].shape == (3, 5)


class TestLoss:
    def test_perfect_fit_zero(self):
        net = init_network(small_config(d=1), np.random.default_rng(1))
        X = np.linspace(-1, 1, 5).reshape(-1, 1)
        data = Dataset(X, predict(net, X))
        assert loss(net, data) == 0.0

    def test_known_value(self):
        net = manual_net([[0.0, 1.0]], [[1.0, 0.0]], [[3.0]])
        data = Dataset(np.array([[0.5]]), np.array([[1.0]]))
        assert loss(net, data) == pytest.approx(2.0, rel=1e-15)

    def test_zero_net_against_targets(self):
        net = manual_net(np.zeros((2, 2)), np.zeros((2, 3)), np.zeros((1, 2)))
        data = synthetic_1d()
        expected = 0.5 * np.mean(np.sum(data.Y ** 2, axis=1))
        assert loss(net, data) == pytest.approx(expected, rel=1e-15)


def finite_difference_grads(net, data, eps=1e-6):
    """Central-difference loss gradients, the independent oracle."""
    grads = []
    for name in ("W1", "W2", "A"):
        W = getattr(net, name)
        G = np.zeros_like(W)
        for idx in np.ndindex(W.shape):
            Wp, Wm = W.copy(), W.copy()
            Wp[idx] += eps
            Wm[idx] -= eps
            plus = loss(Network(**{**net_dict(net), name: Wp}), data)
            minus = loss(Network(**{**net_dict(net), name: Wm}), data)
            G[idx] = (plus - minus) / (2 * eps)
        grads.append(G)
    return grads


def net_dict(net):
    return {"W1": net.W1, "W2": net.W2, "A": net.A, "alpha": net.alpha,
            "h_const": net.h_const}


def rel_err(a, b):
    denom = max(np.linalg.norm(b), 1e-12)
    return np.linalg.norm(a - b) / denom


def draw_kink_free(cfg, data, seed):
    """Draw nets until every pre-activation is safely away from zero."""
    for s in range(seed, seed + 50):
        net = init_network(cfg, np.random.default_rng(s))
        _, cache = forward(net, data.X)
        if min(np.abs(cache["Z1"]).min(), np.abs(cache["Z2"]).min()) > 1e-3:
            return net
    raise AssertionError("could not find a kink-free draw")


class TestBackward:
    def test_matches_finite_differences(self):
        rng = np.random.default_rng(11)
        for trial in range(10):
            m = int(rng.integers(2, 11))
            d = int(rng.integers(1, 4))
            n = int(rng.integers(1, 6))
            cfg = small_config(m=m, d=d, beta=0.7)
            X = rng.standard_normal((n, d))
            Y = rng.standard_normal((n, 1))
            data = Dataset(X, Y)
            net = draw_kink_free(cfg, data, seed=100 * trial)
            grads = backward(net, data)
            fd = finite_difference_grads(net, data)
            for got, want in zip((grads.dW1, grads.dW2, grads.dA), fd):
                assert rel_err(got, want) < 1e-5

    def test_zero_residual_zero_grads(self):
        net = init_network(small_config(d=1), np.random.default_rng(3))
        X = np.linspace(-1, 1, 4).reshape(-1, 1)
        data = Dataset(X, predict(net, X))
        assert loss(net, data) == 0.0
        grads = backward(net, data)
        assert np.all(grads.dW1 == 0) and np.all(grads.dW2 == 0) and np.all(grads.dA == 0)

    def test_dead_first_layer_gets_no_gradient(self):
        # strongly negative first-layer weights: all hidden units off
        W1 = -10.0 * np.ones((3, 2))
        rng = np.random.default_rng(4)
        net = Network(W1, rng.standard_normal((3, 4)), rng.standard_normal((1, 3)), 1.0)
        data = Dataset(np.array([[0.5], [0.25]]), np.array([[1.0], [2.0]]))
        grads = backward(net, data)
        assert np.all(grads.dW1 == 0)


class TestTrain:
    def test_zero_steps_is_identity(self):
        net = init_network(small_config(d=1), np.random.default_rng(5))
        rec = train(net, synthetic_1d(), Schedule(lr=0.1, max_steps=0))
        assert rec.steps_taken == 0
        assert rec.stop_reason == "max_steps"
        assert np.array_equal(rec.final_snapshot.W1, rec.initial_snapshot.W1)

    def test_input_network_untouched(self):
        net = init_network(small_config(m=8, d=1), np.random.default_rng(6))
        before = net.W2.copy()
        train(net, synthetic_1d(), Schedule(lr=0.05, max_steps=20))
        assert np.array_equal(net.W2, before)

    def test_loss_monotone_at_small_lr(self):
        cfg = config_from_gammas(0, 0, m=50, d=1)
        net = init_network(cfg, np.random.default_rng(7))
        rec = train(net, synthetic_1d(), Schedule(lr=1e-3, max_steps=100,
                                                  rel_loss_target=1e-12))
        diffs = np.diff(rec.losses)
        assert np.all(diffs <= 1e-12)

    def test_divergence_detected(self):
        cfg = small_config(m=20, d=1)
        net = init_network(cfg, np.random.default_rng(8))
        rec = train(net, synthetic_1d(), Schedule(lr=1e6, max_steps=1000))
        assert rec.stop_reason == "diverged"
        assert rec.steps_taken < 1000

    def test_convergence_stop(self):
        cfg = config_from_gammas(0, 0, m=100, d=1)
        net = init_network(cfg, np.random.default_rng(9))
        rec = train(net, synthetic_1d(), Schedule(lr=3e-4, max_steps=50_000,
                                                  rel_loss_target=1e-3))
        assert rec.stop_reason == "converged"
        assert rec.losses[-1] <= 1e-3 * rec.losses[0]

    def test_neuron_permutation_leaves_loss_curve_invariant(self):
        cfg = small_config(m=20, d=1)
        net = init_network(cfg, np.random.default_rng(10))
        perm = np.random.default_rng(11).permutation(20)
        permuted = Network(net.W1[perm], net.W2[perm][:, list(perm) + [20]],
                           net.A[:, perm], net.alpha)
        sched = Schedule(lr=0.02, max_steps=25, rel_loss_target=1e-12)
        data = synthetic_1d()
        a = train(net, data, sched)
        b = train(permuted, data, sched)
        np.testing.assert_allclose(a.losses, b.losses, rtol=1e-12)


class TestSchedule:
    def test_rejects_bad_lr(self):
        with pytest.raises(ConfigError):
            Schedule(lr=0.0)

    def test_rejects_bad_target(self):
        with pytest.raises(ConfigError):
            Schedule(lr=0.1, rel_loss_target=0.0)


class TestCheckpoint:
    def test_round_trip(self, tmp_path):
        cfg = config_from_gammas(0.5, 1.5, m=9, d=2)
        net = init_network(cfg, np.random.default_rng(12))
        path = tmp_path / "ck.npz"
        save_checkpoint(path, net, seed=12, config_doc=cfg.to_dict())
        loaded, header = load_checkpoint(path)
        assert np.array_equal(loaded.W1, net.W1)
        assert np.array_equal(loaded.W2, net.W2)
        assert np.array_equal(loaded.A, net.A)
        assert loaded.alpha == net.alpha
        assert header["m"] == 9 and header["seed"] == 12
        assert isinstance(header["config_hash"], str) and len(header["config_hash"]) == 16

    def test_header_is_json(self, tmp_path):
        cfg = small_config()
        net = init_network(cfg, np.random.default_rng(0))
        path = tmp_path / "ck.npz"
        save_checkpoint(path, net, seed=0)
        with np.load(path) as z:
            raw = bytes(z["header"]).decode()
        json.loads(raw)
