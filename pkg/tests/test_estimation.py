import numpy as np
import pytest

from scorelab import (
    NumericFailure,
    ValidationError,
    fit_conditional_min_score,
    fit_min_score,
    make_rng,
    nelder_mead,
)

from conftest import normal_mle, ols_line


class TestNelderMead:
    def test_quadratic_bowl(self):
        target = np.array([1.5, -2.0, 0.5])
        res = nelder_mead(lambda x: float(np.sum((x - target) ** 2)), np.zeros(3), tol=1e-10)
        assert res.converged
        assert np.allclose(res.params, target, atol=1e-8)

    def test_rosenbrock_with_restarts(self):
        def rosenbrock(x):
            return float(100.0 * (x[1] - x[0] ** 2) ** 2 + (1.0 - x[0]) ** 2)

        res = nelder_mead(rosenbrock, np.array([-1.2, 1.0]), tol=1e-12,
                          max_iter=5000, restarts=3, seed=0)
        assert np.allclose(res.params, [1.0, 1.0], atol=1e-4)

    def test_max_iter_zero_returns_start(self):
        res = nelder_mead(lambda x: float(x[0] ** 2), np.array([3.0]), max_iter=0)
        assert res.params[0] == 3.0
        assert res.iterations == 0
        assert not res.converged

    def test_nonfinite_start_rejected(self):
        with pytest.raises(ValidationError):
            nelder_mead(lambda x: float("inf"), np.zeros(2))


class TestUnconditionalFit:
    def test_log_rule_matches_mle(self):
        data = 2.0 + 3.0 * make_rng(42).standard_normal(10_000)
        res = fit_min_score(data, rule="log")
        mu_hat, sigma_hat = normal_mle(data)
        assert abs(res.params[0] - mu_hat) <= 1e-6
        assert abs(res.params[1] - sigma_hat) <= 1e-6
        assert res.converged

    def test_crps_rule_recovers_generator(self):
        data = 2.0 + 3.0 * make_rng(42).standard_normal(10_000)
        res = fit_min_score(data, rule="crps")
        assert abs(res.params[0] - 2.0) <= 0.1
        assert abs(res.params[1] - 3.0) <= 0.1

    def test_minimizer_dominates_truth(self):
        data = 2.0 + 3.0 * make_rng(7).standard_normal(2000)
        for rule in ("log", "crps"):
            res = fit_min_score(data, rule=rule)
            from scorelab.estimation import _normal_objective

            truth = _normal_objective(rule, data)(np.array([2.0, np.log(3.0)]))
            assert res.objective <= truth + 1e-9

    def test_degenerate_data(self):
        with pytest.raises(NumericFailure):
            fit_min_score(np.full(10, 1.23), rule="log")

    def test_crps_error_decreases_with_n(self):
        errors = []
        for n in (100, 1000, 10_000):
            errs = []
            for seed in (1, 2, 3):
                data = 2.0 + 3.0 * make_rng(seed).standard_normal(n)
                res = fit_min_score(data, rule="crps", seed=seed)
                errs.append(float(np.hypot(res.params[0] - 2.0, res.params[1] - 3.0)))
            errors.append(float(np.mean(errs)))
        assert errors[0] > errors[1] > errors[2]


class TestConditionalFit:
    def make_pairs(self, n, seed=5):
        rng = make_rng(seed)
        x = rng.uniform(-2.0, 2.0, size=n)
        y = 1.0 + 2.0 * x + rng.standard_normal(n)
        return x, y

    def test_log_rule_equals_ols(self):
        x, y = self.make_pairs(5000)
        res = fit_conditional_min_score(x, y, rule="log")
        a_hat, b_hat = ols_line(x, y)
        assert abs(res.params[0] - a_hat) <= 1e-6
        assert abs(res.params[1] - b_hat) <= 1e-6

    def test_both_rules_recover_line(self):
        x, y = self.make_pairs(10_000)
        for rule in ("log", "crps"):
            res = fit_conditional_min_score(x, y, rule=rule)
            assert abs(res.params[0] - 1.0) <= 0.05, rule
            assert abs(res.params[1] - 2.0) <= 0.05, rule

    def test_noiseless_line_hits_sigma_floor(self):
        x = np.linspace(-1, 1, 50)
        res = fit_conditional_min_score(x, x.copy(), rule="log")
        assert abs(res.params[0]) <= 1e-6
        assert abs(res.params[1] - 1.0) <= 1e-6
        assert res.params[2] == pytest.approx(1e-8)

    def test_single_distinct_x_rejected(self):
        with pytest.raises(ValidationError):
            fit_conditional_min_score(np.ones(10), np.arange(10.0), rule="log")

    def test_unknown_rule(self):
        with pytest.raises(ValidationError):
            fit_conditional_min_score(np.arange(5.0), np.arange(5.0), rule="brier")
