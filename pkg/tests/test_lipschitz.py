import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from metastep.lipschitz import (
    ContractionError,
    LipschitzConstants,
    l_delta,
    l_eta,
    l_grad_j,
    l_q_context,
    l_q_state_action,
    l_v_pi,
    nav2d_constants,
    verify_return_bound,
)
from metastep.metamdp import initial_policy
from metastep.rl import PolicyParams, RngStream


def _c(**kw):
    base = dict(l_p=0.0, l_r=1.0, l_pi=0.0, l_wp=0.0, l_wr=1.0, gamma=0.5)
    base.update(kw)
    return LipschitzConstants(**base)


class TestFormulas:
    def test_value_modulus(self):
        assert l_v_pi(_c(l_p=0.0)) == pytest.approx(1.0, abs=1e-12)
        assert l_v_pi(_c(gamma=0.0, l_p=5.0)) == pytest.approx(1.0, abs=1e-12)
        c = _c(l_r=1.0, l_pi=0.0, l_p=0.5, gamma=0.9)
        assert l_v_pi(c) == pytest.approx(1.0 / (1.0 - 0.45), abs=1e-12)

    def test_q_state_action_modulus(self):
        assert l_q_state_action(_c(l_p=0.0, l_r=3.0)) == pytest.approx(3.0, abs=1e-12)
        c = _c(l_r=2.0, l_p=0.5, l_pi=1.0, gamma=0.5)
        assert l_q_state_action(c) == pytest.approx(4.0, abs=1e-12)

    def test_q_context_modulus(self):
        assert l_q_context(_c(l_wp=0.0, l_wr=1.0, gamma=0.5)) == pytest.approx(2.0, abs=1e-12)
        assert l_q_context(_c(gamma=0.0, l_wr=7.0)) == pytest.approx(7.0, abs=1e-12)
        assert l_q_context(nav2d_constants(0.99)) == pytest.approx(100.0, abs=1e-10)

    def test_occupancy_modulus(self):
        assert l_delta(_c(l_wp=0.0)) == 0.0
        assert l_delta(_c(gamma=0.0, l_wp=3.0)) == 0.0
        c = _c(gamma=0.5, l_wp=2.0, l_p=0.5, l_pi=0.0)
        assert l_delta(c) == pytest.approx(1.0 / 0.75, abs=1e-12)

    def test_score_value_modulus(self):
        assert l_eta(_c(m_theta=0.0, l_grad_logpi=0.0), r_max=5.0) == 0.0
        assert l_eta(_c(), r_max=0.0, l_q=0.0) == 0.0
        c = _c(gamma=0.5, l_grad_logpi=1.0, m_theta=2.0)
        assert l_eta(c, r_max=1.0, l_q=3.0) == pytest.approx(8.0, abs=1e-12)
        with pytest.raises(ValueError):
            l_eta(_c(), r_max=-1.0)

    def test_gradient_context_modulus(self):
        assert l_grad_j(_c(), 0.0, 0.0, 0.0) == 0.0
        c = _c(m_theta=2.0)
        assert l_grad_j(c, 1.0, 0.0, 3.0) == pytest.approx(6.0, abs=1e-12)
        c = _c(l_pi=1.0, m_theta=1.0)
        assert l_grad_j(c, 2.0, 0.5, 3.0) == pytest.approx(5.0, abs=1e-12)

    def test_contraction_violation_raises(self):
        with pytest.raises(ContractionError):
            l_v_pi(_c(l_p=3.0, gamma=0.9))
        with pytest.raises(ContractionError):
            l_delta(_c(l_p=1.0, l_pi=1.0, gamma=0.6))

    def test_negative_constants_rejected(self):
        with pytest.raises(ValueError):
            _c(l_r=-1.0)
        with pytest.raises(ValueError):
            _c(gamma=1.0)

    @given(
        st.floats(0.0, 2.0), st.floats(0.0, 2.0), st.floats(0.0, 1.0),
        st.floats(0.0, 0.9), st.floats(0.001, 0.5),
    )
    @settings(max_examples=60, deadline=None)
    def test_monotone_in_numerator_constants(self, l_r, l_wr, l_wp, l_p, gamma):
        if gamma * l_p * 1.0 >= 0.95:
            return
        c = _c(l_r=l_r, l_wr=l_wr, l_wp=l_wp, l_p=l_p, gamma=gamma)
        bumped = _c(l_r=l_r + 0.1, l_wr=l_wr + 0.1, l_wp=l_wp + 0.1, l_p=l_p, gamma=gamma)
        assert l_v_pi(bumped) >= l_v_pi(c)
        assert l_q_state_action(bumped) >= l_q_state_action(c)
        assert l_q_context(bumped) >= l_q_context(c)
        assert l_delta(bumped) >= l_delta(c)

    def test_monotone_in_gamma_within_contraction_region(self):
        c_lo = _c(l_p=0.5, gamma=0.3)
        c_hi = _c(l_p=0.5, gamma=0.6)
        assert l_v_pi(c_hi) > l_v_pi(c_lo)
        assert l_q_context(c_hi) > l_q_context(c_lo)


class TestReturnBound:
    def test_identical_contexts_trivially_pass(self):
        rng = RngStream(0, (0,))
        policy = initial_policy("nav2d", rng.split(0))

        # duplicate-context pairs: distance 0, |delta j| = 0 under shared seeds
        report = verify_return_bound(policy, 5, 10, rng.split(1))
        zero_mask = report.distance < 1e-12
        assert np.all(report.delta_j[zero_mask] <= report.bound[zero_mask])

    def test_deterministic_policy_zero_violations(self):
        rng = RngStream(1, (0,))
        base = initial_policy("nav2d", rng.split(0))
        det = PolicyParams(base.theta, 0.0, 2, 2)
        report = verify_return_bound(det, 200, 5, rng.split(1))
        assert report.violations == 0
        # sigma = 0: statistical slack vanishes up to mean-rounding ulps
        assert np.all(report.slack <= 1e-12)

    def test_stochastic_policy_low_violation_rate(self):
        rng = RngStream(2, (0,))
        policy = initial_policy("nav2d", rng.split(0))
        report = verify_return_bound(policy, 200, 30, rng.split(1))
        assert report.violations / 200 <= 0.05

    def test_report_fields_consistent(self):
        rng = RngStream(3, (0,))
        policy = initial_policy("nav2d", rng.split(0))
        report = verify_return_bound(policy, 10, 5, rng.split(1))
        assert report.pair_id.shape == (10,)
        assert np.all(report.bound >= report.slack)
        assert np.array_equal(report.passed, report.delta_j <= report.bound)

    def test_other_families_rejected(self):
        rng = RngStream(4, (0,))
        policy = initial_policy("minigolf", rng.split(0))
        with pytest.raises(ValueError):
            verify_return_bound(policy, 2, 2, rng.split(1), family="minigolf")
