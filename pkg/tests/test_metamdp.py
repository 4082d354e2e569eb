import numpy as np
import pytest

from metastep.envs import family_config
from metastep.metamdp import (
    MetaState,
    generate_dataset_generative,
    generate_dataset_trajectory,
    initial_policy,
    meta_reward,
    read_transitions_csv,
    transitions_to_arrays,
    write_transitions_csv,
)
from metastep.rl import RngStream


def test_meta_reward_is_return_gain():
    assert meta_reward(-5.0, -2.0) == 3.0
    assert meta_reward(1.0, 1.0) == 0.0
    with pytest.raises(ValueError):
        meta_reward(np.nan, 0.0)


def test_meta_state_feature_layout():
    x = MetaState(
        theta=np.array([1.0, 2.0]), nat_grad=np.array([3.0, 4.0]),
        context=np.array([5.0]),
    )
    assert np.array_equal(x.features(True), [1, 2, 3, 4, 5])
    assert np.array_equal(x.features(False), [1, 2, 3, 4])
    no_ctx = MetaState(theta=np.array([1.0]), nat_grad=np.array([2.0]), context=None)
    assert np.array_equal(no_ctx.features(True), [1, 2])


class TestInitialPolicy:
    def test_dimensions_match_family(self):
        rng = RngStream(0, ())
        for family in ("nav2d", "minigolf", "cartpole", "swingup"):
            cfg = family_config(family)
            p = initial_policy(family, rng.split(hash(family) % 100))
            assert p.theta.shape == (cfg.action_dim * (cfg.state_dim + 1),)
            assert p.sigma == cfg.sigma

    def test_minigolf_init_box(self):
        rng = RngStream(3, ())
        for i in range(200):
            p = initial_policy("minigolf", rng.split(i))
            b, w = p.theta
            assert -2.0 <= b <= 3.5
            assert -1.0 <= w <= 2.0

    def test_gaussian_init_scale(self):
        rng = RngStream(4, ())
        thetas = np.stack([initial_policy("nav2d", rng.split(i)).theta for i in range(500)])
        # variance 0.1 per coordinate
        assert thetas.std() == pytest.approx(np.sqrt(0.1), rel=0.15)


class TestDatasetGeneration:
    def test_trajectory_mode_chains_states(self):
        rng = RngStream(5, (0,))
        K, T = 3, 4
        transitions = generate_dataset_trajectory("nav2d", K, T, 10, rng)
        assert len(transitions) == K * T
        for k in range(K):
            episode = [t for t in transitions if t.episode_id == k]
            assert [t.step_id for t in episode] == list(range(T))
            for a, b in zip(episode, episode[1:]):
                assert np.array_equal(a.x_next.theta, b.x.theta)
                assert np.array_equal(a.x_next.nat_grad, b.x.nat_grad)
                assert np.array_equal(a.x.context, b.x.context)

    def test_meta_reward_consistency(self):
        rng = RngStream(6, (0,))
        transitions = generate_dataset_trajectory("nav2d", 2, 3, 10, rng)
        for t in transitions:
            assert t.l == pytest.approx(t.j_after - t.j_before, abs=1e-12)

    def test_step_sizes_inside_family_range(self):
        rng = RngStream(7, (0,))
        lo, hi = family_config("nav2d").h_range
        for t in generate_dataset_trajectory("nav2d", 3, 5, 10, rng):
            assert lo <= t.h <= hi

    def test_generative_mode_is_unchained(self):
        rng = RngStream(8, (0,))
        transitions = generate_dataset_generative("minigolf", 5, 10, rng)
        assert len(transitions) == 5
        assert all(t.step_id == 0 for t in transitions)
        contexts = {tuple(t.x.context) for t in transitions}
        assert len(contexts) == 5

    def test_fixed_context_pins_omega(self):
        rng = RngStream(9, (0,))
        ctx = np.array([0.25, -0.25])
        transitions = generate_dataset_trajectory(
            "nav2d", 2, 2, 10, rng, fixed_context=ctx
        )
        for t in transitions:
            assert np.array_equal(t.x.context, ctx)

    def test_reproducible(self):
        a = generate_dataset_trajectory("nav2d", 2, 2, 10, RngStream(10, (0,)))
        b = generate_dataset_trajectory("nav2d", 2, 2, 10, RngStream(10, (0,)))
        for x, y in zip(a, b):
            assert x.h == y.h and x.l == y.l
            assert np.array_equal(x.x.features(), y.x.features())

    def test_invalid_sizes_rejected(self):
        with pytest.raises(ValueError):
            generate_dataset_trajectory("nav2d", 0, 1, 1, RngStream(0, ()))


class TestCsvRoundTrip:
    def test_exact_round_trip(self, tmp_path):
        rng = RngStream(11, (0,))
        transitions = generate_dataset_trajectory("nav2d", 3, 3, 8, rng)
        path = tmp_path / "transitions.csv"
        write_transitions_csv(path, transitions)
        loaded = read_transitions_csv(path)
        assert len(loaded) == len(transitions)
        for a, b in zip(transitions, loaded):
            assert a.episode_id == b.episode_id and a.step_id == b.step_id
            assert a.h == b.h and a.l == b.l  # bitwise via 17 significant digits
            assert np.array_equal(a.x.features(), b.x.features())
            assert np.array_equal(a.x_next.features(), b.x_next.features())
            assert a.j_before == b.j_before and a.j_after == b.j_after

    def test_header_names(self, tmp_path):
        rng = RngStream(12, (0,))
        transitions = generate_dataset_trajectory("minigolf", 1, 1, 5, rng)
        path = tmp_path / "transitions.csv"
        write_transitions_csv(path, transitions)
        header = path.read_text().splitlines()[0].split(",")
        assert header[:2] == ["episode_id", "step_id"]
        assert "h" in header and "l" in header
        assert "omega_0" in header and "next_theta_0" in header


def test_transitions_to_arrays_shapes():
    rng = RngStream(13, (0,))
    transitions = generate_dataset_trajectory("nav2d", 2, 3, 8, rng)
    X, h, l, X_next = transitions_to_arrays(transitions)
    assert X.shape == (6, 6 + 6 + 2)  # theta + grad + context
    assert X_next.shape == X.shape
    assert h.shape == l.shape == (6,)
    X_nc, _, _, _ = transitions_to_arrays(transitions, include_context=False)
    assert X_nc.shape == (6, 12)
