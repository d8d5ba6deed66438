"""scikit-learn style estimators wrapping the H-posterior fitting routines.

The estimators follow the usual conventions: hyperparameters are set in
``__init__`` and stored verbatim, ``fit`` returns ``self``, and learned
quantities carry a trailing underscore.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, DensityMixin, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .inference import fit_hposterior
from .models import DataSet, GaussianRegression, TemperedKDE, TukeyRegression, kde_predictive_density
from .priors import NlpSpec, gaussian_prior, kde_prior, nlp_penalty, tukey_prior
from .score import QuadratureGrid
from .selection import Candidate, compare_models, laplace_log_evidence

_FAMILIES = ("gaussian", "tukey")


def _check_xy(X, y, fit_intercept: bool):
    # zero columns are fine for intercept-only (location/scale) fits
    X, y = check_X_y(X, y, dtype=float, y_numeric=True, ensure_min_features=0 if fit_intercept else 1)
    return X, y


def _design(X, fit_intercept: bool):
    return np.column_stack([np.ones(X.shape[0]), X]) if fit_intercept else X


def _candidate(family: str, nu2_prior, nlp: NlpSpec, g: float) -> Candidate:
    if family == "gaussian":
        return Candidate("gaussian", GaussianRegression(), gaussian_prior(g))
    if family == "tukey":
        return Candidate("tukey", TukeyRegression(), tukey_prior(nu2_prior, nlp, g))
    raise ValueError(f"family must be one of {_FAMILIES}, got {family!r}")


class HScoreRegressor(RegressorMixin, BaseEstimator):
    """Linear regression fitted at the H-posterior mode.

    Parameters
    ----------
    family : {"gaussian", "tukey"}
        Working model. ``"tukey"`` uses the (improper) Tukey biweight loss
        and learns its cutoff through ``nu2 = 1 / kappa^2``.
    nu2_prior : {"nlp", "lp"} or float
        Prior on ``nu2`` for the Tukey family: non-local inverse gamma,
        local half-normal, or a fixed value. Ignored for ``"gaussian"``.
        Under ``"nlp"`` the mode is located under the paired local prior
        and the non-local prior enters only through the evidence.
    fit_intercept : bool
        Prepend a column of ones to ``X``.
    g : float
        Prior variance multiplier of the coefficient block.
    restarts : int
        Number of perturbed starts in addition to the moment-based one.
    random_state : int
        Seed of the start perturbations.

    Attributes
    ----------
    coef_, intercept_ : ndarray, float
    sigma2_ : float
    nu2_ : float
        Only for the Tukey family.
    log_evidence_ : float
        Laplace-approximated integrated H-score (log scale).
    fit_result_ : FitResult
    """

    def __init__(self, family: str = "gaussian", nu2_prior="nlp", fit_intercept: bool = True, g: float = 5.0,
                 restarts: int = 3, random_state: int = 0):
        self.family = family
        self.nu2_prior = nu2_prior
        self.fit_intercept = fit_intercept
        self.g = g
        self.restarts = restarts
        self.random_state = random_state

    def fit(self, X, y):
        X, y = _check_xy(X, y, self.fit_intercept)
        nlp = NlpSpec()
        using_nlp = self.family == "tukey" and self.nu2_prior == "nlp"
        cand = _candidate(self.family, "lp" if using_nlp else self.nu2_prior, nlp, self.g)
        data = DataSet(y, _design(X, self.fit_intercept))
        fit = fit_hposterior(cand.model, cand.prior, data, restarts=self.restarts, seed=self.random_state)
        log_ev = laplace_log_evidence(fit)
        if using_nlp:
            log_ev += nlp_penalty(nlp, fit.params["nu2"])
        beta = np.asarray(fit.params["beta"], dtype=float)
        self.intercept_ = float(beta[0]) if self.fit_intercept else 0.0
        self.coef_ = beta[1:] if self.fit_intercept else beta
        self.sigma2_ = float(fit.params["sigma2"])
        if self.family == "tukey":
            self.nu2_ = float(fit.params["nu2"])
        self.log_evidence_ = float(log_ev)
        self.converged_ = bool(fit.converged)
        self.fit_result_ = fit
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X, dtype=float, ensure_min_features=0)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return X @ self.coef_ + self.intercept_


class HScoreModelSelector(BaseEstimator):
    """Choose between Gaussian and Tukey regression by integrated H-score.

    Parameters
    ----------
    candidates : sequence of str
        Families to compare.
    nu2_prior : {"nlp", "lp"}
        Prior on the Tukey ``nu2``; ``"nlp"`` gives the non-local adjusted
        comparison.
    prior_weights : sequence of float, optional
        Prior model probabilities (uniform by default).
    with_smic : bool
        Also report SMIC for each candidate.

    Attributes
    ----------
    selected_ : str
    probabilities_ : dict
    report_ : ComparisonReport
    """

    def __init__(self, candidates=("gaussian", "tukey"), nu2_prior="nlp", prior_weights=None,
                 fit_intercept: bool = True, g: float = 5.0, with_smic: bool = False, restarts: int = 3,
                 random_state: int = 0):
        self.candidates = candidates
        self.nu2_prior = nu2_prior
        self.prior_weights = prior_weights
        self.fit_intercept = fit_intercept
        self.g = g
        self.with_smic = with_smic
        self.restarts = restarts
        self.random_state = random_state

    def fit(self, X, y):
        X, y = _check_xy(X, y, self.fit_intercept)
        if len(self.candidates) < 2:
            raise ValueError("model selection needs at least two candidates")
        nlp = NlpSpec()
        cands = [_candidate(f, self.nu2_prior, nlp, self.g) for f in self.candidates]
        data = DataSet(y, _design(X, self.fit_intercept))
        report = compare_models(cands, data, self.prior_weights, self.with_smic, nlp,
                                seed=self.random_state, restarts=self.restarts)
        self.report_ = report
        self.selected_ = report.selected
        self.probabilities_ = {e.name: float(p) for e, p in zip(report.entries, report.probabilities)}
        self.n_features_in_ = X.shape[1]
        return self


class HScoreKDE(DensityMixin, BaseEstimator):
    """Gaussian KDE whose bandwidth (and tempering) are learned by H-posterior.

    Parameters
    ----------
    learn_w : bool
        Learn the tempering exponent ``w``; otherwise ``w = 1``.
    b0, lambda0 : float, optional
        Prior hyperparameters (``h^2 ~ IG(2, b0)``, ``w ~ Exp(lambda0)``);
        the elicited defaults are used when omitted.
    restarts, random_state : int

    Attributes
    ----------
    bandwidth_, tempering_ : float
    data_ : ndarray
    fit_result_ : FitResult
    """

    def __init__(self, learn_w: bool = True, b0=None, lambda0=None, restarts: int = 3, random_state: int = 0):
        self.learn_w = learn_w
        self.b0 = b0
        self.lambda0 = lambda0
        self.restarts = restarts
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_array(X, dtype=float, ensure_2d=False)
        if X.ndim == 2:
            if X.shape[1] != 1:
                raise ValueError("HScoreKDE is univariate: X must have a single column")
            X = X[:, 0]
        if X.size < 2:
            raise ValueError("need at least two observations")
        prior = kde_prior(self.learn_w, self.b0, self.lambda0)
        fit = fit_hposterior(TemperedKDE(), prior, DataSet(X), restarts=self.restarts, seed=self.random_state)
        self.data_ = X.copy()
        self.bandwidth_ = float(fit.params["h"])
        self.tempering_ = float(fit.params["w"])
        self.converged_ = bool(fit.converged)
        self.fit_result_ = fit
        self.n_features_in_ = 1
        return self

    def density(self, x, grid: QuadratureGrid | None = None):
        """Normalised tempered predictive density at the points ``x``."""
        check_is_fitted(self, "bandwidth_")
        x = np.asarray(x, dtype=float).ravel()
        return kde_predictive_density(x, self.data_, {"h": self.bandwidth_, "w": self.tempering_}, grid)

    def score_samples(self, X):
        """Log predictive density of each sample."""
        X = check_array(X, dtype=float, ensure_2d=False)
        with np.errstate(divide="ignore"):
            return np.log(self.density(X))

    def score(self, X, y=None):
        return float(np.sum(self.score_samples(X)))
