import numpy as np
import pytest

from metastep.envs import (
    FAMILIES,
    cartpole_step,
    family_config,
    make_env,
    minigolf_step,
    nav2d_step,
    sample_context,
    swingup_step,
)
from metastep.rl import RngStream


def test_unknown_family_rejected():
    with pytest.raises(ValueError):
        family_config("pendulum")
    with pytest.raises(ValueError):
        make_env("pendulum", np.zeros(1))


def test_context_sampling_stays_in_box():
    rng = RngStream(0, ())
    for family, cfg in FAMILIES.items():
        for i in range(50):
            ctx = sample_context(family, rng.split(i))
            assert np.all(ctx >= np.array(cfg.context_low))
            assert np.all(ctx <= np.array(cfg.context_high))


def test_context_shape_validated():
    with pytest.raises(ValueError):
        make_env("nav2d", np.zeros(3))


class TestNav2d:
    def test_reward_is_negative_postmove_distance(self):
        goal = np.array([0.3, 0.0])
        s, r, done = nav2d_step(np.zeros(2), np.array([0.05, 0.0]), goal)
        assert np.allclose(s, [0.05, 0.0])
        assert r == pytest.approx(-0.25)
        assert not done

    def test_velocity_clipped(self):
        s, _, _ = nav2d_step(np.zeros(2), np.array([5.0, -5.0]), np.zeros(2))
        assert np.allclose(s, [0.1, -0.1])

    def test_goal_threshold_terminates(self):
        _, _, done = nav2d_step(np.array([0.295, 0.0]), np.array([0.0, 0.0]),
                                np.array([0.3, 0.0]))
        assert done

    def test_batch_matches_scalar(self):
        gen = np.random.default_rng(1)
        goal = np.array([0.2, -0.4])
        env = make_env("nav2d", goal)
        states = gen.standard_normal((10, 2)) * 0.1
        actions = gen.standard_normal((10, 2)) * 0.2
        ns, rw, done = env.step_batch(states, actions, gen)
        for i in range(10):
            s_i, r_i, d_i = nav2d_step(states[i], actions[i], goal)
            assert np.allclose(ns[i], s_i)
            assert rw[i] == pytest.approx(r_i)
            assert done[i] == d_i


class TestMinigolf:
    CTX = np.array([0.9, 0.131])

    def test_overshoot_penalty(self):
        gen = np.random.default_rng(0)
        # huge force from close range: velocity far above v_max
        _, r, done = minigolf_step(0.5, 10.0, self.CTX, gen)
        assert r == -100.0 and done

    def test_hole_reward_zero(self):
        length, friction = self.CTX
        decel = (5.0 / 7.0) * friction * 9.81
        x = 2.0
        v_min = np.sqrt(2 * decel * x)

        class _NoNoise:
            def standard_normal(self, *a, **k):
                return 0.0

        a = (v_min * 1.01) / length**2
        _, r, done = minigolf_step(x, a, self.CTX, _NoNoise())
        assert r == 0.0 and done

    def test_undershoot_advances_ball(self):
        class _NoNoise:
            def standard_normal(self, *a, **k):
                return 0.0

        x_new, r, done = minigolf_step(5.0, 0.5, self.CTX, _NoNoise())
        assert r == -1.0 and not done
        assert 0.0 <= x_new < 5.0

    def test_distance_never_negative(self):
        gen = np.random.default_rng(2)
        env = make_env("minigolf", self.CTX)
        states = np.full((100, 1), 0.05)
        actions = np.full((100, 1), 0.3)
        ns, _, _ = env.step_batch(states, actions, gen)
        assert np.all(ns >= 0.0)

    def test_action_clipped_to_positive_range(self):
        gen = np.random.default_rng(3)
        # negative force is clipped to a tiny positive putt, not an error
        x_new, r, done = minigolf_step(5.0, -3.0, self.CTX, gen)
        assert np.isfinite(x_new) and r == -1.0 and not done


class TestPoleFamilies:
    def test_cartpole_bangbang_force(self):
        ctx = np.array([0.5, 1.0])
        s_pos, _, _ = cartpole_step(np.zeros(4), np.array([2.0]), ctx)
        s_neg, _, _ = cartpole_step(np.zeros(4), np.array([-2.0]), ctx)
        assert s_pos[1] > 0 > s_neg[1]  # velocity follows the force sign

    def test_cartpole_angle_termination(self):
        ctx = np.array([0.5, 1.0])
        state = np.array([0.0, 0.0, 0.2, 2.0])  # phi heading past 12 degrees
        _, r, done = cartpole_step(state, np.array([1.0]), ctx)
        assert done and r == 1.0

    def test_swingup_reward_is_cosine(self):
        ctx = np.array([0.5])
        next_state, r, done = swingup_step(
            np.array([0.0, 0.0, np.pi, 0.0]), np.array([1.0]), ctx
        )
        assert not done
        assert r == pytest.approx(np.cos(next_state[2]))

    def test_swingup_boundary_penalty(self):
        ctx = np.array([0.5])
        state = np.array([2.99, 10.0, np.pi, 0.0])
        _, r, done = swingup_step(state, np.array([1.0]), ctx)
        assert done and r == -100.0

    def test_batch_matches_scalar(self):
        gen = np.random.default_rng(4)
        for family, ctx, step in (
            ("cartpole", np.array([0.7, 1.2]), cartpole_step),
            ("swingup", np.array([0.7]), swingup_step),
        ):
            env = make_env(family, ctx)
            states = gen.standard_normal((8, 4)) * 0.1
            if family == "swingup":
                states[:, 2] += np.pi
            actions = gen.standard_normal((8, 1))
            ns, rw, done = env.step_batch(states, actions, gen)
            for i in range(8):
                s_i, r_i, d_i = step(states[i], actions[i], ctx)
                assert np.allclose(ns[i], s_i)
                assert rw[i] == pytest.approx(r_i)
                assert done[i] == d_i


def test_initial_state_laws():
    gen = np.random.default_rng(5)
    assert np.all(make_env("nav2d", np.zeros(2)).initial_states(5, gen) == 0.0)
    golf = make_env("minigolf", np.array([0.9, 0.1])).initial_states(200, gen)
    assert np.all((golf >= 0.0) & (golf <= 20.0))
    cart = make_env("cartpole", np.array([0.5, 1.0])).initial_states(200, gen)
    assert np.all(np.abs(cart) <= 0.05)
    swing = make_env("swingup", np.array([0.5])).initial_states(200, gen)
    assert np.all(np.abs(swing[:, 2] - np.pi) <= 0.05)
