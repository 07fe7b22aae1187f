import numpy as np
import pytest

from spanrl import rngstream
from spanrl.mlp import MlpConfig, MlpNetwork, mlp_param_count
from spanrl.optim import grad_check


class TestParamCount:
    def test_matched_budget_baseline_totals(self):
        # 4-dim observation, 2 logits, hidden (4, 3); critic hidden (4, 4)
        actor = MlpConfig(4, 4, 3, 2)
        critic = MlpConfig(4, 4, 4, 1)
        assert mlp_param_count(actor) == 43
        assert mlp_param_count(critic) == 45
        assert mlp_param_count(actor) + mlp_param_count(critic) == 88

    def test_minimal(self):
        assert mlp_param_count(MlpConfig(1, 1, 1, 1)) == 6

    def test_doubling_first_hidden_delta(self):
        cfg = MlpConfig(5, 8, 6, 2)
        grown = MlpConfig(5, 16, 6, 2)
        delta = mlp_param_count(grown) - mlp_param_count(cfg)
        d, h1, h2 = 5, 8, 6
        assert delta == d * h1 + h1 + h1 * h2


class TestForward:
    def test_zero_weights_constant_bias(self):
        net = MlpNetwork(MlpConfig(3, 4, 4, 2), rngstream.stream(0, rngstream.GRADCHECK))
        for name in ("w1", "w2", "w3"):
            net.store.value(name)[...] = 0.0
        net.b3[...] = np.array([0.25, -1.0])
        out = net.forward(np.random.default_rng(0).normal(size=(5, 3)))
        assert np.allclose(out, [0.25, -1.0])

    def test_hand_computed_single_unit(self):
        net = MlpNetwork(MlpConfig(1, 1, 1, 1, activation="tanh"),
                         rngstream.stream(0, rngstream.GRADCHECK))
        net.w1[...] = 2.0
        net.b1[...] = 0.0
        net.w2[...] = 1.0
        net.b2[...] = -0.5
        net.w3[...] = 3.0
        net.b3[...] = 0.1
        x = 0.4
        expected = 3.0 * np.tanh(np.tanh(2.0 * x) - 0.5) + 0.1
        assert np.allclose(net.forward(np.array([x])), expected)

    @pytest.mark.parametrize("activation", ["tanh", "relu"])
    def test_batch_matches_single(self, activation):
        net = MlpNetwork(MlpConfig(4, 6, 5, 3, activation=activation),
                         rngstream.stream(2, rngstream.GRADCHECK))
        xs = np.random.default_rng(1).normal(size=(7, 4))
        batch = net.forward(xs)
        for i, x in enumerate(xs):
            assert np.allclose(batch[i], net.forward(x))


class TestBackward:
    @pytest.mark.parametrize("activation", ["tanh", "relu"])
    @pytest.mark.parametrize("trial", range(4))
    def test_gradients_match_finite_differences(self, activation, trial):
        rng = rngstream.stream(100 * trial + (activation == "relu"), rngstream.GRADCHECK)
        cfg = MlpConfig(
            in_dim=int(rng.integers(1, 7)),
            hidden1=int(rng.integers(1, 10)),
            hidden2=int(rng.integers(1, 10)),
            out_dim=int(rng.integers(1, 4)),
            activation=activation,
        )
        net = MlpNetwork(cfg, rng)
        from conftest import smooth_fd_inputs

        x = smooth_fd_inputs(net, rng, batch=6)
        target = rng.normal(size=(6, cfg.out_dim))

        def loss():
            y, cache = net.forward(x, need_cache=True)
            r = y - target
            net.backward(cache, 2.0 * r / x.shape[0])
            return float(np.mean(np.sum(r * r, axis=1)))

        assert grad_check(loss, net.store, probes=12, rng=rng) < 1e-4

    def test_input_gradient_matches_finite_differences(self):
        net = MlpNetwork(MlpConfig(4, 8, 8, 1, activation="tanh"),
                         rngstream.stream(5, rngstream.GRADCHECK))
        x = np.random.default_rng(3).normal(size=4)
        _, cache = net.forward(x, need_cache=True)
        din = net.backward(cache, np.ones(1), input_grad=True)[0]
        h = 1e-6
        for j in range(4):
            e = np.zeros(4)
            e[j] = h
            fd = (net.forward(x + e)[0] - net.forward(x - e)[0]) / (2 * h)
            assert abs(fd - din[j]) < 1e-4

    def test_final_scale_shrinks_output_layer(self):
        rng1 = rngstream.stream(4, rngstream.GRADCHECK)
        rng2 = rngstream.stream(4, rngstream.GRADCHECK)
        full = MlpNetwork(MlpConfig(3, 4, 4, 2), rng1)
        small = MlpNetwork(MlpConfig(3, 4, 4, 2), rng2, final_scale=0.01)
        assert np.allclose(small.w3, 0.01 * full.w3)
        assert np.allclose(small.w1, full.w1)
