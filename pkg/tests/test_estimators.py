import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from hyvascore.bandwidth import silverman_bandwidth
from hyvascore.estimators import HScoreKDE, HScoreModelSelector, HScoreRegressor
from hyvascore.experiments import gen_contaminated
from hyvascore.inference import fit_hposterior
from hyvascore.models import DataSet, GaussianRegression
from hyvascore.priors import gaussian_prior


@pytest.fixture
def xy(rng):
    X = rng.normal(size=(200, 2))
    y = 1.0 + X @ [2.0, -1.0] + rng.normal(size=200)
    return X, y


class TestRegressor:
    def test_params_roundtrip_and_clone(self):
        est = HScoreRegressor(family="tukey", nu2_prior="lp", g=3.0)
        assert clone(est).get_params() == est.get_params()
        assert est.set_params(restarts=1).restarts == 1

    def test_gaussian_matches_library(self, xy):
        X, y = xy
        est = HScoreRegressor(restarts=1).fit(X, y)
        fit = fit_hposterior(GaussianRegression(), gaussian_prior(), DataSet(y, np.column_stack([np.ones(200), X])),
                             restarts=1, seed=0)
        assert est.intercept_ == fit.params["beta"][0]
        np.testing.assert_array_equal(est.coef_, fit.params["beta"][1:])
        np.testing.assert_allclose(est.predict(X[:3]), X[:3] @ est.coef_ + est.intercept_)
        assert est.converged_ and np.isfinite(est.log_evidence_)
        assert est.score(X, y) > 0.8

    def test_tukey_robust_location(self):
        y = gen_contaminated(400, 0.1, seed=8).y
        X = np.zeros((400, 0))
        est = HScoreRegressor(family="tukey", restarts=1, fit_intercept=True).fit(X, y)
        assert abs(est.intercept_) < 0.2 and est.nu2_ > 0

    def test_not_fitted(self, xy):
        with pytest.raises(NotFittedError):
            HScoreRegressor().predict(xy[0])

    def test_feature_mismatch(self, xy):
        est = HScoreRegressor(restarts=0).fit(*xy)
        with pytest.raises(ValueError):
            est.predict(np.zeros((2, 5)))

    def test_bad_family(self, xy):
        with pytest.raises(ValueError):
            HScoreRegressor(family="cauchy").fit(*xy)


class TestSelector:
    def test_selects_and_sums_to_one(self):
        y = gen_contaminated(300, 0.1, seed=9).y
        sel = HScoreModelSelector(restarts=1).fit(np.zeros((300, 0)), y)
        assert sum(sel.probabilities_.values()) == pytest.approx(1.0)
        assert sel.selected_ == "tukey"

    def test_needs_two(self, xy):
        with pytest.raises(ValueError):
            HScoreModelSelector(candidates=("gaussian",)).fit(*xy)


class TestKDE:
    def test_fit_and_density(self, rng):
        y = rng.normal(size=300)
        kde = HScoreKDE(learn_w=False, restarts=1).fit(y)
        assert kde.tempering_ == 1.0
        assert 0.5 * silverman_bandwidth(y) < kde.bandwidth_ < 2 * silverman_bandwidth(y)
        x = np.linspace(-10, 10, 4001)
        assert np.trapezoid(kde.density(x), x) == pytest.approx(1.0, abs=1e-3)
        assert np.isfinite(kde.score(y[:10, None]))

    def test_rejects_multivariate(self, rng):
        with pytest.raises(ValueError):
            HScoreKDE().fit(rng.normal(size=(10, 2)))

    def test_clone(self):
        est = HScoreKDE(b0=0.1)
        assert clone(est).get_params()["b0"] == 0.1
