import itertools

import numpy as np
import pytest

from nhmdp.algo import BOUNDED_RATIO, ERGODIC_WINDOW
from nhmdp.algo.coefficients import (compute_coefficients, contraction_window, dobrushin_delta, ratio_bound,
                                     remainder_R, remainder_series, risk_contraction_bound, sup_remainder,
                                     tilted_delta, tilted_kernel)
from nhmdp.algo.errors import AssumptionError
from nhmdp.algo.model import build_model
from nhmdp.algo.solver import apriori_error


def one_stage(rows, rewards=None):
    rows = np.array(rows, dtype=float)
    num_states = rows.shape[0]
    rewards = np.array([rewards if rewards is not None else np.arange(num_states, dtype=float)])
    states = [f"x{i}" for i in range(num_states)]
    return build_model(states, ["a"], states[0], [], [(rows[None], rewards)])


class TestDobrushin:
    def test_identical_rows(self, iid2_model):
        assert dobrushin_delta(iid2_model, 0) == 0.0

    def test_disjoint_rows(self, swap_model):
        assert dobrushin_delta(swap_model, 0) == 1.0

    def test_two_rows(self):
        assert dobrushin_delta(one_stage([[0.9, 0.1], [0.2, 0.8]]), 0) == pytest.approx(0.7)

    def test_one_state(self, alternating_model):
        assert dobrushin_delta(alternating_model, 0) == 0.0
        assert tilted_delta(alternating_model, 1, np.array([3.0])) == 0.0


class TestRatioBound:
    def test_identical_rows(self, iid2_model):
        assert ratio_bound(iid2_model, 0) == 1.0

    def test_two_rows(self):
        assert ratio_bound(one_stage([[0.5, 0.5], [0.25, 0.75]]), 0) == pytest.approx(2.0)

    def test_support_mismatch(self, swap_model, half_model):
        assert ratio_bound(swap_model, 0) == np.inf
        assert ratio_bound(half_model, 0) == np.inf

    def test_singletons_attain_subset_supremum(self, make_random_model):
        for seed in range(5):
            model = make_random_model(seed)
            kernels = model.stage_at(0).kernels
            states = range(model.num_states)
            best = 1.0
            for size in range(1, model.num_states + 1):
                for subset in itertools.combinations(states, size):
                    mass = kernels[:, :, list(subset)].sum(axis=-1)
                    best = max(best, float((mass[:, :, None] / mass[:, None, :]).max()))
            assert ratio_bound(model, 0) == pytest.approx(best, rel=1e-12)


class TestRemainder:
    def test_constant_data_closed_form(self, half_model):
        assert remainder_R(half_model, 0) == pytest.approx(2.0, abs=1e-10)
        assert sup_remainder(half_model) == pytest.approx(2.0, abs=1e-10)

    def test_zero_delta(self, iid2_model):
        assert remainder_R(iid2_model, 0) == pytest.approx(1.0)

    def test_alternating_factors(self):
        deltas, spans = np.array([0.5, 0.0]), np.array([1.0, 1.0])
        assert remainder_series(0, 2, deltas, spans, 0, 1e-13) == pytest.approx(1.5)
        assert remainder_series(0, 2, deltas, spans, 1, 1e-13) == pytest.approx(1.0)

    def test_matches_partial_sum(self):
        deltas, spans = np.array([0.5, 1.0]), np.array([1.0, 1.0])
        partial, product = spans[0], 1.0
        for i in range(500):
            product *= deltas[i % 2]
            partial += product * spans[(i + 1) % 2]
        assert remainder_series(0, 2, deltas, spans, 0, 1e-13) == pytest.approx(partial, abs=1e-10)

    def test_divergence(self):
        with pytest.raises(AssumptionError) as e:
            remainder_series(0, 2, np.array([1.0, 1.0]), np.array([1.0, 1.0]), 0, 1e-13)
        assert e.value.condition == ERGODIC_WINDOW

    def test_apriori_error(self, half_model):
        assert apriori_error(half_model, 0, 3) == pytest.approx(0.25)
        assert apriori_error(one_stage([[0.5, 0.5], [0.5, 0.5]]), 0, 5) == 0.0


class TestContractionWindow:
    def test_window_lengths(self):
        assert contraction_window(0, 2, np.array([1.0, 0.5])) == 2
        assert contraction_window(0, 1, np.array([0.3])) == 1
        assert contraction_window(1, 2, np.array([1.0, 0.5, 0.5])) == 1

    def test_no_window(self):
        assert contraction_window(0, 3, np.ones(3)) is None


class TestTilting:
    def test_tilted_kernel(self, iid2_model):
        assert np.allclose(tilted_kernel(iid2_model, 0, 0, 0, np.zeros(2)), [0.5, 0.5])
        assert np.allclose(tilted_kernel(iid2_model, 0, 0, 0, np.array([0.0, np.log(3.0)])), [0.25, 0.75])

    def test_point_mass_is_invariant(self, half_model):
        assert np.array_equal(tilted_kernel(half_model, 0, 0, 0, np.array([5.0, -2.0])), [1.0, 0.0])

    def test_constant_tilt_is_exact(self, make_random_model):
        model = make_random_model(11)
        for n in range(model.num_stages):
            assert tilted_delta(model, n, np.full(model.num_states, 4.2)) == dobrushin_delta(model, n)

    def test_tilted_delta_in_unit_interval(self):
        value = tilted_delta(one_stage([[0.9, 0.1], [0.2, 0.8]]), 0, np.array([0.0, 1.0]))
        assert 0.0 <= value <= 1.0

    def test_coupling_bound_dominates_tilts(self, make_random_model):
        rng = np.random.default_rng(7)
        for seed in range(5):
            model = make_random_model(seed)
            for gamma in (1.0, -0.5):
                for n in range(model.num_stages):
                    bound = risk_contraction_bound(model, n, gamma)
                    s = abs(gamma) * model.stage_at(n).reward_span + np.log(ratio_bound(model, n))
                    for _ in range(200):
                        g = rng.uniform(0.0, s, size=model.num_states)
                        assert tilted_delta(model, n, g) <= bound + 1e-10


class TestRiskContractionBound:
    def test_coupling_formula(self):
        model = one_stage([[0.75, 0.25], [0.25, 0.75]], [0.0, 1.0])
        expected = 1.0 - np.exp(-(1.0 + np.log(3.0))) * 0.5
        assert risk_contraction_bound(model, 0, 1.0) == pytest.approx(expected)

    def test_zero_span(self):
        model = one_stage([[0.5, 0.5], [0.5, 0.5]], [1.0, 1.0])
        assert risk_contraction_bound(model, 0, 3.0) == 0.0

    def test_small_gamma_limit(self):
        model = one_stage([[0.5, 0.5], [0.5, 0.5]], [0.0, 1.0])
        assert risk_contraction_bound(model, 0, 1e-9) == pytest.approx(dobrushin_delta(model, 0), abs=1e-8)

    def test_infinite_ratio(self, half_model):
        with pytest.raises(AssumptionError) as e:
            risk_contraction_bound(half_model, 0, 1.0)
        assert e.value.condition == BOUNDED_RATIO
        assert "stage 0" in str(e.value)

    def test_risk_sup_remainder_is_capped(self, iid2_model):
        # series gives e^{|γ|}, the span estimate gives span(c) + ln K / |γ| = 1
        assert sup_remainder(iid2_model, gamma=2.0) == pytest.approx(1.0)


class TestCoefficientTable:
    def test_table(self, iid2_model):
        coefficients = compute_coefficients(iid2_model, gamma=1.0)
        assert np.array_equal(coefficients.delta, [0.0])
        assert np.array_equal(coefficients.ratio_K, [1.0])
        assert np.array_equal(coefficients.reward_span, [1.0])
        assert coefficients.remainder_R[0] == pytest.approx(1.0)
        assert coefficients.risk_delta[1.0][0] == pytest.approx(1.0 - np.exp(-1.0))

    def test_divergent_and_undefined_entries(self, swap_model, log_messages):
        coefficients = compute_coefficients(swap_model, gamma=1.0)
        assert np.isinf(coefficients.remainder_R).all()
        assert np.isnan(coefficients.risk_delta[1.0]).all()
        assert any("Remainder series diverges" in message for message in log_messages)
