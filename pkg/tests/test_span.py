import numpy as np
import pytest

from spanrl import rngstream
from spanrl.bspline import SplineBasis
from spanrl.errors import InputError
from spanrl.optim import grad_check
from spanrl.span import SpanConfig, SpanNetwork, span_param_count


def make_net(d=4, o=2, m=1, n=2, k=1, seed=0):
    return SpanNetwork(SpanConfig(d, o, m, n, k), rngstream.stream(seed, rngstream.GRADCHECK))


class TestParamCount:
    def test_small_config(self):
        assert span_param_count(SpanConfig(4, 2, 1, 2, 1)) == 20 + 12 + 4

    def test_minimal_config(self):
        assert span_param_count(SpanConfig(1, 1, 1, 1, 1)) == 2 + 2 + 2

    def test_spline_block_linear_in_dimension(self):
        base = SpanConfig(3, 2, 5, 4, 2)
        doubled = SpanConfig(6, 2, 5, 4, 2)
        spline = lambda c: c.nmodes * c.in_dim * (c.nelems + c.degree)
        assert spline(doubled) == 2 * spline(base)

    def test_constructed_network_matches_formula(self):
        for cfg in (SpanConfig(4, 2, 1, 2, 1), SpanConfig(6, 3, 6, 2, 1),
                    SpanConfig(3, 2, 4, 4, 2)):
            net = SpanNetwork(cfg, rngstream.stream(1, rngstream.GRADCHECK))
            assert net.param_count == span_param_count(cfg)


class TestForward:
    def test_zero_preprocessing_gives_half(self):
        net = make_net(d=3, o=1, m=2, n=3, k=2)
        net.w_pre[...] = 0.0
        net.b_pre[...] = 0.0
        _, cache = net.forward(np.array([5.0, -3.0, 0.7]), need_cache=True)
        assert np.allclose(cache.z, 0.5)

    def test_constant_spline_weights_give_power_of_constant(self):
        # partition of unity turns every per-dimension sum into the constant
        net = make_net(d=4, o=1, m=3, n=3, k=2)
        c = 1.7
        net.w_spline[...] = c
        _, cache = net.forward(np.random.default_rng(0).normal(size=4), need_cache=True)
        assert np.allclose(cache.sums, c)
        assert np.allclose(cache.modes, c**4)

    def test_zero_head_outputs_bias(self):
        net = make_net(d=5, o=3, m=2, n=2, k=1)
        net.w_head[...] = 0.0
        net.b_head[...] = np.array([1.0, -2.0, 0.5])
        for x in np.random.default_rng(1).normal(size=(8, 5)):
            assert np.allclose(net.forward(x), [1.0, -2.0, 0.5])

    def test_outputs_finite_for_extreme_inputs(self):
        net = make_net(d=4, o=2, m=3, n=4, k=2)
        wild = np.array([
            [1e6, -1e6, 3e5, -2e4],
            [1e-12, -1e-12, 0.0, 1e8],
        ])
        assert np.all(np.isfinite(net.forward(wild)))

    def test_nonfinite_input_rejected(self):
        net = make_net()
        with pytest.raises(InputError):
            net.forward(np.array([np.nan, 0.0, 0.0, 0.0]))

    def test_batch_matches_single(self):
        net = make_net(d=3, o=2, m=4, n=3, k=2)
        xs = np.random.default_rng(3).normal(size=(6, 3))
        batch = net.forward(xs)
        for i, x in enumerate(xs):
            assert np.allclose(batch[i], net.forward(x))


def dense_grid_reference(net, x):
    """Rank-1 oracle: full tensor-grid contraction with separable coefficients.

    Builds the dense coefficient tensor w[0] (x) w[1] (x) ... and contracts it
    against the tensor product of per-dimension basis vectors — an O(nb^d)
    evaluation that never uses the factored code path.
    """
    d = net.cfg.in_dim
    z = 1.0 / (1.0 + np.exp(-(net.w_pre @ x + net.b_pre)))
    basis = SplineBasis(net.cfg.nelems, net.cfg.degree)
    per_dim = [basis.eval(z[p]) for p in range(d)]

    coeff = net.w_spline[0, 0]
    bval = per_dim[0]
    for p in range(1, d):
        coeff = np.multiply.outer(coeff, net.w_spline[p, 0])
        bval = np.multiply.outer(bval, per_dim[p])
    mode = float(np.sum(coeff * bval))
    return net.w_head[:, 0] * mode + net.b_head


class TestSeparability:
    @pytest.mark.parametrize("d", [2, 3])
    def test_rank1_equals_dense_tensor_grid(self, d):
        rng = np.random.default_rng(42 + d)
        for _ in range(25):
            net = SpanNetwork(
                SpanConfig(d, 2, 1, int(rng.integers(1, 5)), int(rng.integers(1, 4))),
                rngstream.stream(int(rng.integers(1 << 30)), rngstream.GRADCHECK),
            )
            net.w_spline[...] = rng.normal(size=net.w_spline.shape)
            x = rng.normal(size=d)
            assert np.allclose(net.forward(x), dense_grid_reference(net, x),
                               rtol=0, atol=1e-10)


class TestBackward:
    def test_zero_out_grad_leaves_grads_unchanged(self):
        net = make_net(d=4, o=2, m=3, n=2, k=2)
        x = np.random.default_rng(0).normal(size=(5, 4))
        _, cache = net.forward(x, need_cache=True)
        net.backward(cache, np.zeros((5, 2)))
        for _, _, g in net.store.items():
            assert np.array_equal(g, np.zeros_like(g))

    @pytest.mark.parametrize("trial", range(8))
    def test_gradients_match_finite_differences(self, trial):
        rng = rngstream.stream(trial, rngstream.GRADCHECK)
        cfg = SpanConfig(
            in_dim=int(rng.integers(1, 8)),
            out_dim=int(rng.integers(1, 4)),
            nmodes=int(rng.integers(1, 8)),
            nelems=int(rng.integers(1, 6)),
            degree=int(rng.integers(1, 4)),
        )
        net = SpanNetwork(cfg, rng)
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
        # the path a SAC critic uses to differentiate Q w.r.t. the action
        net = make_net(d=5, o=1, m=4, n=3, k=2, seed=9)
        rng = np.random.default_rng(7)
        x = rng.normal(size=5)
        _, cache = net.forward(x, need_cache=True)
        din = net.backward(cache, np.ones(1), input_grad=True)[0]
        h = 1e-6
        for j in range(5):
            e = np.zeros(5)
            e[j] = h
            fd = (net.forward(x + e)[0] - net.forward(x - e)[0]) / (2 * h)
            assert abs(fd - din[j]) < 1e-4

    def test_param_grads_flag_skips_parameter_accumulation(self):
        net = make_net(d=3, o=1, m=2, n=2, k=2)
        x = np.random.default_rng(2).normal(size=(4, 3))
        _, cache = net.forward(x, need_cache=True)
        din = net.backward(cache, np.ones((4, 1)), input_grad=True, param_grads=False)
        assert din.shape == (4, 3)
        for _, _, g in net.store.items():
            assert np.array_equal(g, np.zeros_like(g))


class TestSmoothness:
    def test_second_difference_continuous_for_quadratic_splines(self):
        """FD second differences along a coordinate drift smoothly for k >= 2.

        With unit-scale parameters the sampled second-difference curve must
        not jump between neighboring sample points, even where the input
        sweep crosses interior knot images.
        """
        for degree, tol in ((2, 1e-3), (3, 1e-3)):
            net = make_net(d=2, o=1, m=2, n=4, k=degree, seed=5)
            sweep = np.linspace(-3.0, 3.0, 2001)
            points = np.stack([sweep, np.full_like(sweep, 0.3)], axis=1)
            h = 1e-2
            hvec = np.array([h, 0.0])
            f = net.forward(points)[:, 0]
            fp = net.forward(points + hvec)[:, 0]
            fm = net.forward(points - hvec)[:, 0]
            second = (fp - 2 * f + fm) / h**2
            assert np.all(np.isfinite(second))
            assert np.max(np.abs(np.diff(second))) < tol
