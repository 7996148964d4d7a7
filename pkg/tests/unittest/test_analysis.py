import numpy as np
import pytest

from nhmdp.algo.analysis import (composed_policy_iterate, finite_horizon_average, finite_horizon_optimal,
                                 finite_horizon_risk, gain_curve, hoeffding_gap, stability_trace)
from nhmdp.algo.errors import AssumptionError, UsageError
from nhmdp.algo.operators import span
from nhmdp.algo.policy import constant_policy, make_policy
from nhmdp.algo.solver import solve_average, solve_risk


def interval_policy(model, parameter):
    return make_policy(model, [np.full(model.num_states, parameter)] * model.num_stages)


class TestFiniteHorizon:
    def test_alternating_average(self, alternating_model):
        policy = constant_policy(alternating_model, 0)
        assert finite_horizon_average(alternating_model, policy, 4) == pytest.approx(2.0)
        assert finite_horizon_average(alternating_model, policy, 1) == pytest.approx(1.0)
        assert finite_horizon_average(alternating_model, policy, 1, start=1) == pytest.approx(3.0)

    def test_iid_average(self, iid2_model):
        policy = constant_policy(iid2_model, 0)
        assert finite_horizon_average(iid2_model, policy, 10_000, "x0") == pytest.approx(0.5, abs=1e-4)
        assert finite_horizon_average(iid2_model, policy, 1, "x1") == 1.0

    def test_iid_risk(self, iid2_model):
        policy = constant_policy(iid2_model, 0)
        value = finite_horizon_risk(iid2_model, policy, 10_000, "x0", 1.0)
        assert value == pytest.approx(np.log((1.0 + np.e) / 2.0), abs=2e-4)

    def test_point_masses_risk_equals_average(self, absorbing_model, swap_model):
        for model in (absorbing_model, swap_model):
            policy = constant_policy(model, model.num_actions - 1)
            for x in (0, 1):
                expected = finite_horizon_average(model, policy, 7, x)
                assert finite_horizon_risk(model, policy, 7, x, 2.5) == pytest.approx(expected)

    def test_small_gamma_limit(self, make_random_model):
        model = make_random_model(9)
        policy = constant_policy(model, 0)
        N = 20
        average = finite_horizon_average(model, policy, N)
        spans = max(stage.reward_span for stage in model.stages)
        assert abs(finite_horizon_risk(model, policy, N, 0, 1e-6) - average) <= 1e-6 * (N * spans) ** 2 / 8 + 1e-12

    def test_invalid_arguments(self, iid2_model):
        policy = constant_policy(iid2_model, 0)
        with pytest.raises(ValueError):
            finite_horizon_average(iid2_model, policy, 0)
        with pytest.raises(ValueError):
            finite_horizon_risk(iid2_model, policy, 5, 0, 0.0)
        with pytest.raises(UsageError):
            finite_horizon_average(iid2_model, policy, 5, "x7")

    def test_optimal_dominates_policies(self, losing_model):
        best = finite_horizon_optimal(losing_model, 50)
        assert best == pytest.approx(finite_horizon_average(losing_model, constant_policy(losing_model, 0), 50))
        assert best >= finite_horizon_average(losing_model, constant_policy(losing_model, 1), 50) + 1.0 - 1e-12

    def test_oracle_agreement(self, make_random_model):
        for seed in range(3):
            model = make_random_model(seed, p=2)
            solution = solve_average(model)
            constant = 2 * solution.max_bias_span + max(stage.reward_span for stage in model.stages)
            for N in (1_000, 10_000):
                value = finite_horizon_average(model, solution.policy, N)
                assert abs(value - solution.long_run_gain) <= constant / N

    def test_risk_oracle_agreement(self, make_random_model):
        model = make_random_model(5, p=2)
        solution = solve_risk(model, 0.5)
        constant = 2 * solution.max_bias_span + max(stage.reward_span for stage in model.stages)
        value = finite_horizon_risk(model, solution.policy, 1_000, 0, 0.5)
        assert abs(value - solution.long_run_gain) <= constant / 1_000


class TestComposedIterate:
    def test_matches_total_reward(self, make_random_model):
        model = make_random_model(13, q=1)
        policy = constant_policy(model, 0)
        values = composed_policy_iterate(model, policy, 0, 6)
        assert values[0] == pytest.approx(6 * finite_horizon_average(model, policy, 6, 0))

    def test_risk_matches_log_moment(self, iid2_model):
        policy = constant_policy(iid2_model, 0)
        values = composed_policy_iterate(iid2_model, policy, 0, 8, gamma=-1.0)
        assert values[0] == pytest.approx(8 * finite_horizon_risk(iid2_model, policy, 8, 0, -1.0))


class TestHoeffding:
    def test_deterministic_rewards(self, alternating_model):
        check = hoeffding_gap(alternating_model, constant_policy(alternating_model, 0), 0, 10, 0.5)
        assert check.gap == pytest.approx(0.0, abs=1e-12)
        assert check.bound == 0.0
        assert check.holds()

    def test_iid_window(self, iid2_model):
        check = hoeffding_gap(iid2_model, constant_policy(iid2_model, 0), 0, 10, 0.5)
        assert 0.0 < check.gap < check.bound
        assert check.bound == pytest.approx(10 ** 2 * 0.25 / 8)

    def test_random_windows(self, make_random_model):
        rng = np.random.default_rng(12)
        for seed in range(5):
            model = make_random_model(seed, q=1)
            policy = constant_policy(model, 0)
            for gamma in (2.0, -0.5):
                check = hoeffding_gap(model, policy, int(rng.integers(0, 4)), int(rng.integers(1, 30)), gamma,
                                      int(rng.integers(0, model.num_states)))
                assert check.holds()


class TestGainCurve:
    def test_one_state_curve_is_constant(self, alternating_model):
        curve = gain_curve(alternating_model, [-1.0, 0.0, 2.0])
        assert np.allclose(curve.gains, 2.0)
        assert list(curve.gammas) == [-1.0, 0.0, 2.0]

    def test_grid_is_sorted_and_zero_is_average(self, iid2_model):
        curve = gain_curve(iid2_model, [1.0, 0.0, -1.0, 1.0])
        assert list(curve.gammas) == [-1.0, 0.0, 1.0]
        assert curve.points[1].gain == pytest.approx(0.5)
        assert curve.points[1].max_span_gap == 0.0
        assert curve.points[2].gain == pytest.approx(np.log((1.0 + np.e) / 2.0))

    def test_non_decreasing(self, make_random_model):
        for seed in range(5):
            curve = gain_curve(make_random_model(seed), [-2.0, -0.5, 0.0, 0.5, 2.0])
            assert np.all(np.diff(curve.gains) >= -1e-9)

    def test_continuity_at_zero(self, iid2_model):
        gammas = [1e-1, 1e-2, 1e-3]
        curve = gain_curve(iid2_model, [0.0] + gammas)
        average = curve.points[0].gain
        for point in curve.points[1:]:
            # one period of span 1: γ·p·(Σ spans)²/8
            assert abs(point.gain - average) <= point.gamma / 8 + 1e-12
        assert curve.smallest_gamma_span_gap <= 1e-2

    def test_errors_name_gamma(self, half_model):
        with pytest.raises(AssumptionError, match="gamma=0.5"):
            gain_curve(half_model, [0.0, 0.5])

    def test_empty_grid(self, iid2_model):
        with pytest.raises(ValueError):
            gain_curve(iid2_model, [])


class TestStabilityTrace:
    def test_constant_sequence(self, losing_model):
        policy = constant_policy(losing_model, 1)
        trace = stability_trace(losing_model, [policy] * 3, policy)
        assert np.array_equal(trace.deviations, np.zeros(3))
        assert trace.indices == (1, 2, 3)
        assert trace.converged(1e-12)

    def test_eventually_equal(self, losing_model):
        limit = constant_policy(losing_model, 0)
        sequence = [constant_policy(losing_model, 1)] * 2 + [limit] * 3
        trace = stability_trace(losing_model, sequence, limit)
        assert np.all(trace.deviations[:2] > 0.5)
        assert np.array_equal(trace.deviations[2:], np.zeros(3))
        assert np.allclose(trace.gain_deviations[:2], 1.0)

    def test_risk_sequence(self, iid2_model):
        policy = constant_policy(iid2_model, 0)
        trace = stability_trace(iid2_model, [policy], policy, gamma=0.5)
        assert trace.gamma == 0.5
        assert trace.limit_gains[0] == pytest.approx(2.0 * np.log((1.0 + np.exp(0.5)) / 2.0))

    def test_interval_parameters_converge(self, interval_model):
        indices = [1, 2, 4, 8, 16, 100, 10_000]
        limit = interval_policy(interval_model, 0.0)
        sequence = [interval_policy(interval_model, 1.0 / m) for m in indices]
        trace = stability_trace(interval_model, sequence, limit, indices=indices)
        assert np.all(np.diff(trace.deviations[2:]) <= 0.0)
        assert trace.deviations[-1] < 1e-6
        # the gain is affine in the parameter: 0.5 + 0.001·a
        assert np.allclose(trace.gain_deviations, [1e-3 / m for m in indices], atol=1e-9)

    def test_unconverged_sequence_is_logged(self, interval_model, losing_model, log_messages):
        limit = interval_policy(interval_model, 0.0)
        stability_trace(interval_model, [interval_policy(interval_model, 1.0)], limit)
        assert any("has not converged" in message and "m=1" in message for message in log_messages)

        log_messages.clear()
        policy = constant_policy(losing_model, 1)
        stability_trace(losing_model, [policy] * 2, policy)
        assert not any("has not converged" in message for message in log_messages)

    def test_index_count_mismatch(self, iid2_model):
        policy = constant_policy(iid2_model, 0)
        with pytest.raises(ValueError):
            stability_trace(iid2_model, [policy], policy, indices=[1, 2])


class TestSpanConvergence:
    def test_risk_biases_approach_average_biases(self, make_random_model):
        model = make_random_model(17)
        average = solve_average(model)
        risk = solve_risk(model, 1e-3)
        gap = max(span(a.values - b.values) for a, b in zip(risk.w, average.w))
        assert gap <= 1e-2 * max(average.max_bias_span, 1e-12)
