import numpy as np
import pytest

from spanrl import envs
from spanrl.envs import Acrobot, CartPole, Pendulum, make_env, rollout_episode
from spanrl.errors import ActionError, ProtocolError


class TestReset:
    def test_cartpole_initial_range(self):
        env = make_env("cartpole", seed=0)
        for _ in range(50):
            state = env.reset()
            assert np.all(np.abs(state) < 0.05)

    def test_same_seed_same_state(self):
        a = make_env("cartpole", seed=7).reset()
        b = make_env("cartpole", seed=7).reset()
        assert np.array_equal(a, b)

    def test_reset_index_determinism_independent_of_steps(self):
        # (seed, reset index) pins the state even if step counts differ
        e1 = make_env("cartpole", seed=3)
        e1.reset()
        for _ in range(17):
            if e1.step(1).done:
                break
        second_a = e1.reset()

        e2 = make_env("cartpole", seed=3)
        e2.reset()
        e2.step(0)
        second_b = e2.reset()
        assert np.array_equal(second_a, second_b)

    def test_different_seeds_differ(self):
        states = [make_env("cartpole", seed=s).reset() for s in range(8)]
        assert len({tuple(s) for s in states}) == 8


class TestCartPoleDynamics:
    def test_first_step_matches_hand_integration(self):
        env = make_env("cartpole", seed=0)
        env.reset()
        env._state = np.zeros(4)  # exact-zero start for the hand calculation
        env._obs = env._state.copy()
        tr = env.step(1)

        # one explicit Euler step of the published cart-pole equations,
        # force +10, from the origin (sin=0, cos=1)
        force, g = 10.0, 9.8
        mc, mp, lp = 1.0, 0.1, 0.5
        tau = 0.02
        temp = force / (mc + mp)
        theta_acc = (g * 0.0 - 1.0 * temp) / (lp * (4.0 / 3.0 - mp / (mc + mp)))
        x_acc = temp - mp * lp * theta_acc * 1.0 / (mc + mp)
        expected = np.array([0.0, tau * x_acc, 0.0, tau * theta_acc])
        assert np.max(np.abs(tr.next_state - expected)) < 1e-12
        assert tr.reward == 1.0

    def test_always_right_fails_before_horizon(self):
        env = make_env("cartpole", seed=1)
        transitions, total = rollout_episode(env, lambda obs: 1)
        assert len(transitions) < 500
        assert transitions[-1].terminated

    def test_return_bounds(self):
        rng = np.random.default_rng(0)
        for seed in range(5):
            env = make_env("cartpole", seed=seed)
            _, total = rollout_episode(env, lambda obs: int(rng.integers(2)))
            assert 1.0 <= total <= 500.0


class TestAcrobot:
    def test_reward_minus_one_until_terminal(self):
        env = make_env("acrobot", seed=0)
        env.reset()
        for _ in range(30):
            tr = env.step(1)
            assert tr.reward == (0.0 if tr.terminated else -1.0)
            if tr.done:
                break

    def test_unsolved_episode_return_is_minus_length(self):
        env = make_env("acrobot", seed=2)
        transitions, total = rollout_episode(env, lambda obs: 1)  # zero torque
        assert total == -len(transitions)
        assert transitions[-1].truncated and len(transitions) == 500

    def test_observation_is_trig_embedded(self):
        env = make_env("acrobot", seed=3)
        obs = env.reset()
        assert obs.shape == (6,)
        assert abs(obs[0] ** 2 + obs[1] ** 2 - 1.0) < 1e-12
        assert abs(obs[2] ** 2 + obs[3] ** 2 - 1.0) < 1e-12


class TestPendulum:
    def test_zero_cost_at_goal(self):
        env = make_env("pendulum", seed=0)
        env.reset()
        env._state = np.zeros(2)
        tr = env.step(np.array([0.0]))
        assert tr.reward == 0.0

    def test_truncates_at_horizon(self):
        env = make_env("pendulum", seed=1)
        transitions, _ = rollout_episode(env, lambda obs: np.array([0.0]))
        assert len(transitions) == 200
        assert transitions[-1].truncated and not transitions[-1].terminated

    def test_zero_torque_energy_has_no_secular_drift(self):
        """Mechanical energy under zero torque must not drift.

        The symplectic update lets energy oscillate within a step-size band,
        so the check is on the net change across the episode per step —
        explicit Euler would fail it by steadily pumping energy in.
        """
        scale = Pendulum.M * Pendulum.G * Pendulum.L / 2.0
        for seed in range(4):
            env = make_env("pendulum", seed=seed)
            env.reset()
            e0 = env.mechanical_energy()
            n = 200
            for _ in range(n):
                env.step(np.array([0.0]))
            drift_per_step = abs(env.mechanical_energy() - e0) / n
            assert drift_per_step / scale < 1e-3

    def test_explicit_euler_would_fail_the_drift_check(self):
        # independent re-integration with the non-symplectic update order
        theta, theta_dot = 2.0, 0.5
        energy = lambda t, td: 0.5 * (1.0 / 3.0) * td**2 + 5.0 * np.cos(t)
        e0 = energy(theta, theta_dot)
        for _ in range(200):
            new_theta = theta + theta_dot * 0.05  # position first: explicit Euler
            theta_dot = theta_dot + 15.0 * np.sin(theta) * 0.05
            theta = new_theta
        assert abs(energy(theta, theta_dot) - e0) / 200 / 5.0 > 1e-3


class TestProtocol:
    def test_step_after_done_raises(self):
        env = make_env("pendulum", seed=0)
        env.reset()
        for _ in range(200):
            env.step(np.array([0.0]))
        with pytest.raises(ProtocolError):
            env.step(np.array([0.0]))

    def test_invalid_actions(self):
        env = make_env("cartpole", seed=0)
        env.reset()
        with pytest.raises(ActionError):
            env.step(5)
        with pytest.raises(ActionError):
            env.step(0.5)
        pend = make_env("pendulum", seed=0)
        pend.reset()
        with pytest.raises(ActionError):
            pend.step(np.array([np.nan]))
        with pytest.raises(ActionError):
            pend.step(np.array([0.0, 1.0]))

    def test_interaction_counter_moves_with_steps(self):
        env = make_env("cartpole", seed=0)
        env.reset()
        before = envs.interaction_count()
        for _ in range(5):
            env.step(0)
        assert envs.interaction_count() - before == 5


class TestReplayDeterminism:
    def test_bit_exact_trajectories(self):
        def run():
            env = make_env("acrobot", seed=11)
            rng = np.random.default_rng(99)
            obs = env.reset()
            trace = []
            for _ in range(200):
                tr = env.step(int(rng.integers(3)))
                trace.append(tr.next_state.copy())
                obs = tr.next_state
                if tr.done:
                    obs = env.reset()
            return np.array(trace)

        assert np.array_equal(run(), run())


def test_env_specs_expose_targets():
    assert CartPole.spec.target_return == 500.0
    assert Acrobot.spec.target_return == -100.0
    assert Acrobot.spec.floor_return == -500.0
    assert Pendulum.spec.target_return == -200.0
    assert make_env("cartpole", seed=0).spec.horizon == 500
