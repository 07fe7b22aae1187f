import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spanrl.errors import DimensionError, TrainingFault
from spanrl.optim import (AdamConfig, ParamStore, adam_step, grad_check, matvec,
                          soft_update)


def make_store(**arrays):
    store = ParamStore()
    for name, arr in arrays.items():
        store.add(name, arr)
    return store


class TestMatvec:
    def test_identity(self):
        assert np.allclose(matvec(np.eye(3), np.array([1.0, 2.0, 3.0])), [1, 2, 3])

    def test_zero_matrix(self):
        assert np.allclose(matvec(np.zeros((2, 3)), np.full(3, 5.0)), [0, 0])

    def test_hand_case(self):
        w = np.array([[1.0, 2.0], [3.0, 4.0]])
        assert np.allclose(matvec(w, np.array([1.0, 1.0])), [3.0, 7.0])

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            matvec(np.zeros((2, 3)), np.zeros(4))
        with pytest.raises(DimensionError):
            matvec(np.zeros(3), np.zeros(3))


class TestAdam:
    def test_first_step_is_signed_lr(self):
        store = make_store(w=np.array([1.0, -2.0, 3.0]))
        store.grad("w")[...] = np.array([0.5, -0.25, 4.0])
        before = store.value("w").copy()
        adam_step(store, AdamConfig(lr=1e-3))
        delta = store.value("w") - before
        # bias correction makes m_hat = g and v_hat = g^2 on step one
        assert np.allclose(delta, -1e-3 * np.sign([0.5, -0.25, 4.0]), atol=1e-6)

    def test_zero_gradient_is_identity(self):
        store = make_store(w=np.arange(6.0).reshape(2, 3), b=np.ones(2))
        before = {n: v.copy() for n, v, _ in store.items()}
        adam_step(store, AdamConfig())
        for name, value, _ in store.items():
            assert np.array_equal(value, before[name])

    def test_grad_clip_matches_prescaled_gradient(self):
        # global norm 10 with threshold 0.5 must behave exactly like feeding
        # the gradient scaled by 0.05 into an unclipped update
        g = np.array([6.0, 8.0])  # norm 10
        clipped = make_store(w=np.zeros(2))
        clipped.grad("w")[...] = g
        adam_step(clipped, AdamConfig(lr=1e-2, max_grad_norm=0.5))

        manual = make_store(w=np.zeros(2))
        manual.grad("w")[...] = g * 0.05
        adam_step(manual, AdamConfig(lr=1e-2))
        assert np.allclose(clipped.value("w"), manual.value("w"), rtol=0, atol=0)

    def test_grads_zeroed_and_step_counted(self):
        store = make_store(w=np.ones(3))
        store.grad("w")[...] = 1.0
        adam_step(store, AdamConfig())
        assert store.t == 1
        assert np.array_equal(store.grad("w"), np.zeros(3))

    def test_nonfinite_gradient_faults_with_entry_name(self):
        store = make_store(good=np.ones(2), bad=np.ones(2))
        store.grad("bad")[0] = np.nan
        with pytest.raises(TrainingFault) as exc:
            adam_step(store, AdamConfig())
        assert exc.value.entry == "bad"

    @given(st.lists(st.floats(-100, 100), min_size=2, max_size=8),
           st.floats(0.01, 5.0))
    @settings(max_examples=50, deadline=None)
    def test_clip_preserves_direction(self, grads, threshold):
        g = np.asarray(grads)
        norm = np.linalg.norm(g)
        cfg = AdamConfig(max_grad_norm=threshold)
        if norm > threshold:
            expected = g * (threshold / norm)
        else:
            expected = g.copy()
        # replicate just the clipping stage
        if cfg.max_grad_norm is not None and norm > cfg.max_grad_norm:
            scale = cfg.max_grad_norm / norm
        else:
            scale = 1.0
        clipped = g * scale
        assert np.allclose(clipped, expected)
        if norm > 0:
            assert scale > 0  # positive multiple: direction preserved


class TestSoftUpdate:
    @pytest.mark.parametrize("tau,expected", [(1.0, 2.0), (0.0, 0.0), (0.5, 1.0)])
    def test_endpoint_cases(self, tau, expected):
        target = make_store(w=np.zeros(3))
        online = make_store(w=np.full(3, 2.0))
        soft_update(target, online, tau)
        assert np.allclose(target.value("w"), expected)

    @given(st.floats(0.01, 0.99))
    @settings(max_examples=30, deadline=None)
    def test_contraction_toward_online(self, tau):
        target = make_store(w=np.array([0.0, 4.0]))
        online = make_store(w=np.array([2.0, -2.0]))
        before = np.linalg.norm(target.value("w") - online.value("w"))
        soft_update(target, online, tau)
        after = np.linalg.norm(target.value("w") - online.value("w"))
        assert after < before


class TestGradCheck:
    def test_quadratic_has_exact_gradient(self):
        store = make_store(theta=np.array([0.3, -1.2, 2.0, 0.0]))

        def loss():
            theta = store.value("theta")
            store.grad("theta")[...] += 2.0 * theta
            return float(np.sum(theta * theta))

        err = grad_check(loss, store, probes=8, rng=np.random.default_rng(0))
        assert err < 1e-8

    def test_detects_wrong_gradient(self):
        store = make_store(theta=np.array([1.0, 2.0]))

        def loss():
            theta = store.value("theta")
            store.grad("theta")[...] += 3.0 * theta  # wrong: should be 2 theta
            return float(np.sum(theta * theta))

        err = grad_check(loss, store, probes=4, rng=np.random.default_rng(0))
        assert err > 0.2
