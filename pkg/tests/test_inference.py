import dataclasses

import numpy as np
import pytest

from hyvascore.experiments import cell_seed, gen_contaminated, gen_regression
from hyvascore.inference import (
    CalibrationError,
    FitResult,
    InfeasibleStart,
    PenalisedObjective,
    SandwichMatrices,
    asymptotic_mse,
    calibrate_posterior,
    calibration_matrix,
    default_inits,
    fd_hessian,
    fit_general_bayes,
    fit_hposterior,
    is_positive_definite,
    pin,
    sample_posterior,
    sandwich,
)
from hyvascore.models import DataSet, GaussianRegression, TukeyRegression
from hyvascore.priors import gaussian_prior, tukey_prior


def _quadratic_fit(mode, precision):
    d = len(mode)
    return FitResult(mode=np.asarray(mode, float), params={}, objective=0.0, hessian=np.asarray(precision, float),
                     converged=True, n_restarts_used=1, gradient_norm=0.0, names=[f"x{i}" for i in range(d)],
                     sum_score=0.0, log_prior=0.0, hessian_pd=True, hessian_asymmetry=0.0)


class TestFitHposterior:
    def test_gaussian_recovers_mean_and_variance(self, rng):
        y = rng.normal(size=10 ** 4)
        fit = fit_hposterior(GaussianRegression(), gaussian_prior(g=1e6), DataSet(y))
        assert fit.converged
        assert abs(fit.params["beta"][0] - y.mean()) < 0.05
        assert abs(fit.params["sigma2"] - y.var()) < 0.05

    def test_unpenalised_gaussian_minimiser_is_closed_form(self, regression_data):
        fit = fit_hposterior(GaussianRegression(), gaussian_prior(), regression_data, penalise=False)
        beta_ols, *_ = np.linalg.lstsq(regression_data.X, regression_data.y, rcond=None)
        resid = regression_data.y - regression_data.X @ beta_ols
        np.testing.assert_allclose(fit.params["beta"], beta_ols, atol=1e-6)
        assert fit.params["sigma2"] == pytest.approx(np.mean(resid ** 2), rel=1e-6)

    def test_mode_not_worse_than_any_start(self, regression_data):
        obj = PenalisedObjective(TukeyRegression(), tukey_prior("lp"), regression_data)
        fit = fit_hposterior(TukeyRegression(), tukey_prior("lp"), regression_data, restarts=3, seed=4)
        for start in fit.starts:
            assert start.objective <= start.init_objective
        assert fit.objective <= min(obj.value(x) for x in default_inits(obj, 3, 4)) + 1e-12

    def test_converged_gradient_criterion_and_symmetric_hessian(self, regression_data):
        fit = fit_hposterior(GaussianRegression(), gaussian_prior(), regression_data)
        assert fit.converged and fit.gradient_norm < 1e-5 * (1 + abs(fit.objective))
        assert fit.hessian_asymmetry < 1e-6 * np.max(np.abs(fit.hessian))
        assert np.array_equal(fit.hessian, fit.hessian.T) and fit.hessian_pd

    def test_tukey_fixed_cutoff_on_contaminated_data(self):
        data = gen_contaminated(500, 0.1, seed=1)
        fit = fit_hposterior(TukeyRegression(), tukey_prior(1 / 25.0), data)
        assert fit.names == ["beta[0]", "sigma2"]
        assert abs(fit.params["beta"][0]) < 0.15

    def test_nonlocal_start_is_strictly_positive(self, regression_data):
        fit = fit_hposterior(TukeyRegression(), tukey_prior("nlp"), regression_data)
        assert fit.params["nu2"] > 0

    def test_overflowing_trial_gradient_is_walled_off(self):
        # a line-search trial at huge sigma2 used to overflow in the Tukey gradient
        data = gen_regression(1000, seed=cell_seed(0, 1000, 47))
        fit = fit_hposterior(TukeyRegression(), tukey_prior("lp"), data, restarts=1, seed=47)
        assert fit.converged and np.isfinite(fit.objective)

    def test_all_starts_infeasible(self):
        data = DataSet(np.arange(10.0))
        with pytest.raises(InfeasibleStart):
            fit_hposterior(GaussianRegression(), gaussian_prior(), data,
                           inits=[{"beta": np.zeros(1), "sigma2": -1.0}])

    def test_deterministic(self, regression_data):
        a = fit_hposterior(TukeyRegression(), tukey_prior("lp"), regression_data, seed=9)
        b = fit_hposterior(TukeyRegression(), tukey_prior("lp"), regression_data, seed=9)
        assert np.array_equal(a.mode, b.mode) and np.array_equal(a.hessian, b.hessian)

    def test_to_dict_is_plain(self, regression_data):
        d = fit_hposterior(GaussianRegression(), gaussian_prior(), regression_data).to_dict()
        assert d["names"][-1] == "sigma2" and len(d["hessian_eigenvalues"]) == 4


class TestGeneralBayes:
    def test_gaussian_loss_gives_ols(self, rng):
        n = 100
        X = np.column_stack([np.ones(n), rng.normal(size=(n, 2))])
        y = X @ [1.0, -2.0, 0.5] + rng.normal(size=n)
        fit = fit_general_bayes(GaussianRegression(), gaussian_prior(g=1e10), DataSet(y, X))
        beta_ols = np.linalg.solve(X.T @ X, X.T @ y)
        np.testing.assert_allclose(fit.params["beta"], beta_ols, atol=1e-6)

    def test_tukey_large_cutoff_matches_gaussian(self, regression_data):
        g = fit_general_bayes(GaussianRegression(), gaussian_prior(), regression_data)
        t = fit_general_bayes(TukeyRegression(), tukey_prior("lp", truncate=False), regression_data,
                              kappa_fixed={"nu2": 1e-12})
        np.testing.assert_allclose(t.params["beta"], g.params["beta"], atol=1e-4)
        assert t.params["sigma2"] == pytest.approx(g.params["sigma2"], abs=1e-4)

    def test_tukey_is_more_robust(self):
        data = gen_contaminated(500, 0.1, seed=2)
        g = fit_general_bayes(GaussianRegression(), gaussian_prior(), data)
        t = fit_general_bayes(TukeyRegression(), tukey_prior("lp"), data, kappa_fixed={"nu2": 1 / 25.0})
        assert abs(t.params["beta"][0]) < abs(g.params["beta"][0])

    def test_pin_replaces_component(self):
        assert pin(tukey_prior("nlp"), {"nu2": 0.1}).fixed_values() == {"nu2": 0.1}


class TestHessian:
    def test_quadratic_exact(self):
        A = np.array([[3.0, 1.0], [1.0, 2.0]])
        H, asym, _ = fd_hessian(lambda x: 0.5 * x @ A @ x, np.array([0.3, -0.2]))
        np.testing.assert_allclose(H, A, atol=1e-6)
        assert asym < 1e-6

    def test_stencil_respects_lower_bound(self):
        calls = []

        def f(x):
            calls.append(x.copy())
            return float((x[0] - 1.0) ** 2 + x[0] ** 3) if x[0] >= 0 else np.inf

        H, _, centre = fd_hessian(f, np.array([0.0]), lower=np.array([0.0]))
        assert np.all(np.array(calls)[:, 0] >= 0)
        assert H[0, 0] == pytest.approx(2.0 + 6.0 * centre[0], rel=1e-3)

    def test_positive_definite(self):
        assert is_positive_definite(np.eye(2))
        assert not is_positive_definite(np.diag([1.0, -1.0]))


class TestSampler:
    def setup_method(self):
        self.mean = np.array([1.0, -2.0])
        self.cov = np.array([[1.0, 0.6], [0.6, 2.0]])
        self.prec = np.linalg.inv(self.cov)
        self.objective = lambda x: 0.5 * (x - self.mean) @ self.prec @ (x - self.mean)

    def test_moments_of_gaussian_target(self):
        res = sample_posterior(self.objective, _quadratic_fit(self.mean, self.prec), 10 ** 5, seed=3)
        draws = res.draws
        assert res.healthy and 0.134 <= res.acceptance_rate <= 0.334
        # batch-means standard error accounts for autocorrelation
        batches = draws.reshape(100, -1, 2).mean(axis=1)
        se = batches.std(axis=0, ddof=1) / np.sqrt(100)
        assert np.all(np.abs(draws.mean(axis=0) - self.mean) < 3 * se)
        err = np.linalg.norm(np.cov(draws.T) - self.cov) / np.linalg.norm(self.cov)
        assert err < 0.15

    def test_deterministic_given_seed(self):
        a = sample_posterior(self.objective, _quadratic_fit(self.mean, self.prec), 500, seed=5).draws
        b = sample_posterior(self.objective, _quadratic_fit(self.mean, self.prec), 500, seed=5).draws
        assert np.array_equal(a, b)

    def test_needs_converged_fit(self):
        fit = dataclasses.replace(_quadratic_fit(self.mean, self.prec), converged=False)
        with pytest.raises(ValueError):
            sample_posterior(self.objective, fit, 10)


class TestSandwich:
    def test_information_equality_well_specified(self, rng):
        y = rng.normal(1.0, 1.5, size=10 ** 4)
        s = sandwich(GaussianRegression(), {"beta": np.array([y.mean()]), "sigma2": y.var()}, DataSet(y))
        Jinv = np.linalg.inv(s.J)
        assert np.linalg.norm(s.sandwich_covariance() - Jinv) / np.linalg.norm(Jinv) < 0.2
        assert np.linalg.eigvalsh(s.K).min() >= -1e-10

    def test_misspecification_inflates(self):
        data = gen_contaminated(2000, 0.1, seed=3)
        y = data.y
        s = sandwich(GaussianRegression(), {"beta": np.array([y.mean()]), "sigma2": y.var()}, data)
        assert np.trace(s.sandwich_covariance()) > np.trace(np.linalg.inv(s.J))

    def test_pinned_hyperparameters_excluded(self, regression_data):
        params = {"beta": np.array([0.5, 1.0, -0.5]), "sigma2": 0.6, "nu2": 0.05}
        s = sandwich(TukeyRegression(), params, regression_data, prior=tukey_prior(0.05))
        assert s.J.shape == (4, 4)


class TestCalibration:
    def test_identity_when_j_equals_k(self, rng):
        M = np.array([[2.0, 0.3], [0.3, 1.0]])
        s = SandwichMatrices(M, M, False)
        np.testing.assert_allclose(calibration_matrix(s), np.eye(2), atol=1e-12)
        draws = rng.normal(size=(50, 2))
        np.testing.assert_allclose(calibrate_posterior(draws, np.zeros(2), s), draws, atol=1e-12)

    def test_scalar_case(self):
        s = SandwichMatrices(np.array([[4.0]]), np.array([[1.0]]), False)
        assert calibration_matrix(s)[0, 0] == pytest.approx(2.0)
        mode = np.array([1.0])
        out = calibrate_posterior(np.array([[3.0], [1.0]]), mode, s)
        assert out[1, 0] == pytest.approx(1.0)  # the mode is a fixed point
        assert out[0, 0] - 1.0 == pytest.approx(2.0 / 2.0)

    def test_defining_identity(self, rng):
        A = rng.normal(size=(3, 3))
        J = A @ A.T + 3 * np.eye(3)
        B = rng.normal(size=(3, 3))
        K = B @ B.T + np.eye(3)
        C = calibration_matrix(SandwichMatrices(J, K, False))
        np.testing.assert_allclose(C.T @ J @ C, J @ np.linalg.inv(K) @ J, rtol=1e-10)

    def test_calibrated_covariance_matches_sandwich(self, rng):
        n = 10 ** 4
        J = np.array([[2.0, 0.4], [0.4, 1.0]])
        K = np.array([[5.0, 1.0], [1.0, 1.5]])
        s = SandwichMatrices(J, K, False)
        draws = rng.multivariate_normal(np.zeros(2), np.linalg.inv(n * J), size=n)
        cal = calibrate_posterior(draws, np.zeros(2), s)
        target = s.sandwich_covariance() / n
        assert np.linalg.norm(np.cov(cal.T) - target) / np.linalg.norm(target) < 0.2

    def test_calibrated_spread_matches_sampling_distribution(self):
        # replicate datasets: spread of the mode vs calibrated spread from one dataset
        n, modes, sand = 1000, [], []
        for rep in range(200):
            y = gen_contaminated(n, 0.1, seed=100 + rep).y
            modes.append(y.mean())
            s = sandwich(GaussianRegression(), {"beta": np.array([y.mean()]), "sigma2": y.var()}, DataSet(y))
            sand.append(s.sandwich_covariance()[0, 0] / n)
        # population value: mixture variance / n
        assert np.mean(sand) == pytest.approx(4.05 / n, rel=0.05)
        assert np.mean(sand) == pytest.approx(np.var(modes, ddof=1), rel=0.2)

    def test_singular_k_raises(self):
        with pytest.raises(CalibrationError):
            calibration_matrix(SandwichMatrices(np.eye(2), np.zeros((2, 2)), False))


class TestAsymptoticMSE:
    def test_symmetric_data_no_bias(self):
        for k in (2.0, 5.0):
            assert asymptotic_mse(k, eps=0.0).bias2 < 1e-12

    def test_gaussian_limit_pulled_to_grand_mean(self):
        res = asymptotic_mse(np.inf)
        assert res.location == pytest.approx(0.5, rel=0.05)

    def test_variance_scales_with_n(self):
        a, b = asymptotic_mse(4.0, n=500), asymptotic_mse(4.0, n=1000)
        assert a.variance == pytest.approx(2 * b.variance, rel=1e-10)
        assert a.bias2 == pytest.approx(b.bias2)
