import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import decimal_lower_bound

from robustgen.bounds import (
    BoundInputs,
    FiniteProblem,
    MissingLipschitzError,
    a_rho,
    check_gap_bound,
    expected_robust_rad,
    gap_bound,
    gen_bound_rhs,
    generalization_event_frequency,
    is_vacuous,
    overfit_gap,
    rad_lower_bound,
    rad_lower_bound_overfit,
    sample_from_pairs,
    summarize_bounds,
    theoretical_L,
)
from robustgen.pwl import PiecewiseLinear1D
from robustgen.rademacher import VectorSet, rad_exact
from robustgen.rng import Stream
from robustgen.robust_loss import Predictor, RobustnessConfig, SampleSet


class TestClosedForms:
    @pytest.mark.parametrize("L,rho,risk,expected", [(1, 0, 0.3, 0), (0, 1, 0.3, 0), (1, 1, 0, 1)])
    def test_gap_bound(self, L, rho, risk, expected):
        assert gap_bound(L, rho, risk) == expected

    @pytest.mark.parametrize("L,rho,expected", [(0, 5, 4), (5, 0, 4), (1, 1, 9), (2, 0.5, 9)])
    def test_a_rho(self, L, rho, expected):
        assert a_rho(L, rho) == expected

    def test_gen_bound_example(self):
        assert gen_bound_rhs(0, 0, 0, 8, 0.5) == pytest.approx(4 * math.sqrt(2 * math.log(4) / 8), rel=1e-15)
        assert gen_bound_rhs(0, 0, 0, 8, 0.5) == pytest.approx(2.3548, abs=1e-4)

    def test_gen_bound_linear_in_rad(self):
        base = gen_bound_rhs(0.1, 1, 0.2, 50, 0.1)
        assert gen_bound_rhs(0.2, 1, 0.2, 50, 0.1) - base == pytest.approx(0.2, rel=1e-12)

    def test_gen_bound_sqrt_n(self):
        t1 = gen_bound_rhs(0, 1, 0.2, 25, 0.1)
        t4 = gen_bound_rhs(0, 1, 0.2, 100, 0.1)
        assert t4 == pytest.approx(t1 / 2, rel=1e-14)

    @pytest.mark.parametrize("delta", [0.0, 1.0, 2.0, -0.1])
    def test_invalid_delta(self, delta):
        with pytest.raises(ValueError):
            gen_bound_rhs(0, 0, 0, 8, delta)

    def test_rad_lower_cancellation(self):
        gamma = a_rho(1, 0.3) * math.sqrt(2 * math.log(2 / 0.1) / 40)
        assert rad_lower_bound(gamma, 1, 0.3, 40, 0.1) == pytest.approx(0.0, abs=1e-15)

    def test_rad_lower_zero_gap_is_vacuous(self):
        v = rad_lower_bound(0.0, 1, 0.1, 10, 0.1)
        assert v < 0 and is_vacuous(v)

    def test_rad_lower_example(self):
        assert rad_lower_bound(1, 0, 0, 32, 0.5) == pytest.approx(-0.0887, abs=1e-4)

    def test_overfit_example(self):
        assert overfit_gap(1, 1, 0.1, 0.5) == pytest.approx(0.89, abs=1e-15)
        assert a_rho(1, 0.1) == pytest.approx(4.41, abs=1e-15)
        v = rad_lower_bound_overfit(1, 1, 0.1, 0.5, 10_000, 0.05)
        assert v == pytest.approx(0.3851, abs=1e-4)
        assert v == pytest.approx(decimal_lower_bound(1, 1, 0.1, 0.5, 10_000, 0.05), abs=1e-12)

    def test_overfit_zero_gap(self):
        L, rho, sigma = 1.5, 0.2, 0.3
        eps = 2 * L * rho * sigma + (L * rho) ** 2
        assert overfit_gap(eps, L, rho, sigma) == pytest.approx(0.0, abs=1e-15)

    def test_overfit_zero_radius(self):
        expected = 0.4 / 2 - 2 * math.sqrt(2 * math.log(2 / 0.1) / 100)
        assert rad_lower_bound_overfit(0.4, 3, 0, 0.5, 100, 0.1) == pytest.approx(expected, rel=1e-14)

    def test_against_independent_calculator(self):
        stream = Stream(303)
        for _ in range(100):
            eps, L, rho, sigma = stream.uniform(4, 0, 2)
            n = 1 + stream.below(100_000)
            delta = float(stream.uniform(1, 0.001, 0.999)[0])
            ours = rad_lower_bound_overfit(eps, L, rho, sigma, n, delta)
            assert abs(ours - decimal_lower_bound(eps, L, rho, sigma, n, delta)) <= 1e-10

    @settings(max_examples=100, deadline=None)
    @given(st.floats(0, 2), st.floats(0, 3), st.floats(0, 1), st.floats(0, 1),
           st.integers(1, 10**6), st.floats(0.001, 0.999))
    def test_monotonicity(self, eps, L, rho, sigma, n, delta):
        base = rad_lower_bound_overfit(eps, L, rho, sigma, n, delta)
        assert rad_lower_bound_overfit(eps + 0.1, L, rho, sigma, n, delta) >= base
        assert rad_lower_bound_overfit(eps, L, rho, sigma + 0.1, n, delta) <= base + 1e-15
        assert rad_lower_bound_overfit(eps, L, rho, sigma, 4 * n, delta) >= base - 1e-15

    def test_theory_exponents(self):
        assert theoretical_L("bubeck", 1000, 100, 10)[1] == (0.5, -0.5)
        assert theoretical_L("wu", 1000, 100, 10)[1] == pytest.approx((0.1, 0.0))
        assert theoretical_L("bubeck", 50, 50, 1)[0] == 1.0

    def test_unknown_law(self):
        with pytest.raises(ValueError):
            theoretical_L("other", 1, 1, 1)

    def test_inputs_validation(self):
        with pytest.raises(ValueError):
            BoundInputs(1, 0.1, delta_conf=1.0)
        with pytest.raises(ValueError):
            BoundInputs(-1, 0.1)


class TestGapCheck:
    @pytest.mark.parametrize("rho", [0.0, 0.1, 0.5, 2.0])
    def test_tightness_witness(self, rho):
        chk = check_gap_bound(Predictor.linear([1.0]), SampleSet(np.array([[0.0]]), np.array([0.0])), RobustnessConfig(rho))
        assert chk.gap == rho**2 and chk.bound == rho**2

    def test_constant_predictor(self):
        S = sample_from_pairs([(0.0, 0.5), (1.0, -0.5), (2.0, 0.0)])
        chk = check_gap_bound(Predictor.constant(0.1), S, RobustnessConfig(0.4))
        assert chk.gap == 0.0 and chk.passed

    def test_missing_lipschitz(self):
        f = Predictor(lambda X: X[:, 0], 1)
        with pytest.raises(MissingLipschitzError):
            check_gap_bound(f, sample_from_pairs([(0.0, 0.0)]), RobustnessConfig(0.1))

    def test_randomised(self):
        stream = Stream(42)
        for _ in range(500):
            f = PiecewiseLinear1D.random(stream, float(stream.uniform(1, 0, 5)[0]))
            n = 1 + stream.below(8)
            S = SampleSet(stream.uniform(n, -2, 2), stream.uniform(n, -1, 1))
            assert check_gap_bound(Predictor.from_pwl(f), S, RobustnessConfig(float(stream.uniform(1, 0, 0.5)[0]))).passed


class TestFiniteClass:
    def test_expected_rad_single_point(self):
        # one atom: every sample repeats it, so E[rad] is rad of the repeated column
        problem = FiniteProblem(np.array([0.2]), np.array([0.1]), np.array([1.0]),
                                (PiecewiseLinear1D.constant(0.5), PiecewiseLinear1D.constant(-0.5)), 0.1)
        table = problem.loss_table()
        expected = rad_exact(VectorSet(table[:, [0, 0, 0]])).value
        assert expected_robust_rad(problem, 3) == pytest.approx(expected, abs=1e-15)

    def test_expected_rad_against_sequence_enumeration(self):
        problem = FiniteProblem.random(Stream(5), K=3, n_predictors=3)
        table = problem.loss_table()
        n = 4
        total = 0.0
        for seq in np.ndindex(*(3,) * n):
            w = float(np.prod(problem.probs[list(seq)]))
            total += w * rad_exact(VectorSet(table[:, list(seq)])).value
        assert expected_robust_rad(problem, n) == pytest.approx(total, abs=1e-13)

    def test_event_frequency(self):
        problem = FiniteProblem.random(Stream(17))
        res = generalization_event_frequency(problem, 6, 0.1, trials=200)
        assert res.passed and res.trials == 200


def test_summary_zero_radius():
    out = summarize_bounds(BoundInputs(2.0, 0.0, delta_conf=0.1, n=10), clean_risk=0.3)
    assert out["gap_bound"] == 0.0 and out["a_rho"] == 4.0
    assert out["theoretical_L"]["wu"]["alpha"] == pytest.approx(0.1)
