"""Laplace-approximated integrated H-scores, H-Bayes factors and comparators."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import erfcx, logsumexp

from .inference import FitResult, PenalisedObjective, fit_hposterior, is_positive_definite
from .models import DataSet
from .priors import HalfNormal, InverseGamma, NlpSpec, PriorSpec, nlp_penalty

LOG_2PI = float(np.log(2.0 * np.pi))


class EvidenceUndefined(RuntimeError):
    """The Laplace approximation cannot be formed (Hessian not positive definite)."""


class RegularisedHessianWarning(UserWarning):
    pass


def log_det_pd(A) -> tuple[float, bool]:
    """``log|A|`` by Cholesky; regularises with ``1e-8 * trace/d`` when needed.

    Returns ``(logdet, regularised)``.
    """
    A = 0.5 * (np.asarray(A, dtype=float) + np.asarray(A, dtype=float).T)
    if not np.all(np.isfinite(A)):
        raise EvidenceUndefined("Hessian has non-finite entries")
    regularised = False
    if not is_positive_definite(A):
        d = A.shape[0]
        lam = 1e-8 * abs(np.trace(A)) / d
        A = A + lam * np.eye(d)
        regularised = True
        if not is_positive_definite(A):
            raise EvidenceUndefined("Hessian is not positive definite even after regularisation")
        warnings.warn("Hessian regularised before the Laplace determinant", RegularisedHessianWarning)
    L = np.linalg.cholesky(A)
    return float(2.0 * np.sum(np.log(np.diag(L)))), regularised


def _log_half_line_integral(g: float, s: float) -> float:
    """``log int_0^inf exp(-g t - s t^2 / 2) dt``."""
    if s > 0:
        return float(0.5 * np.log(np.pi / (2.0 * s)) + np.log(erfcx(g / np.sqrt(2.0 * s))))
    if g > 0:
        return float(-np.log(g))
    raise EvidenceUndefined("no decay away from the boundary mode")


def laplace_log_evidence(fit: FitResult, d: int | None = None) -> float:
    """``(d/2) log 2pi + log pi(mode) - sum H(mode) - 0.5 log|A(mode)|``.

    ``d`` counts learned coordinates only and defaults to the fit's dimension.
    When the mode sits on the lower bound of one coordinate (``nu2 = 0``
    under a local prior) the Gaussian integral over that coordinate is
    replaced by the exact half-line integral of the local quadratic
    expansion, whose slope is the objective gradient there; the remaining
    coordinates are integrated with the usual Laplace formula.
    """
    d = fit.d if d is None else d
    if d == 0:
        return float(fit.log_prior - fit.sum_score)
    at_bound = list(getattr(fit, "at_bound", []) or [])
    if len(at_bound) == 1 and fit.gradient is not None and d == fit.d:
        A = 0.5 * (fit.hessian + fit.hessian.T)
        b = at_bound[0]
        inner = [i for i in range(d) if i != b]
        A_ii = A[np.ix_(inner, inner)]
        logdet, _ = log_det_pd(A_ii) if inner else (0.0, False)
        a_ib = A[inner, b]
        schur = float(A[b, b] - (a_ib @ np.linalg.solve(A_ii, a_ib) if inner else 0.0))
        log_edge = _log_half_line_integral(float(fit.gradient[b]), schur)
        return float(0.5 * (d - 1) * LOG_2PI + fit.log_prior - fit.sum_score - 0.5 * logdet + log_edge)
    logdet, _ = log_det_pd(fit.hessian)
    return float(0.5 * d * LOG_2PI + fit.log_prior - fit.sum_score - 0.5 * logdet)


def hbayes_factor(log_evidence_k: float, log_evidence_l: float) -> float:
    """Log H-Bayes factor of model k over model l."""
    return float(log_evidence_k - log_evidence_l)


def posterior_model_probs(log_evidences, prior_weights=None) -> np.ndarray:
    """Posterior model probabilities by log-sum-exp; uniform prior weights by default."""
    le = np.asarray(log_evidences, dtype=float)
    if prior_weights is None:
        lw = np.full(le.size, -np.log(le.size))
    else:
        w = np.asarray(prior_weights, dtype=float)
        if w.shape != le.shape or np.any(w < 0) or not w.sum() > 0:
            raise ValueError("prior weights must be non-negative and match the number of models")
        with np.errstate(divide="ignore"):
            lw = np.log(w / w.sum())
    if not np.any(np.isfinite(le + lw)):
        raise ValueError("at least one model needs a finite log evidence")
    logpost = le + lw
    return np.exp(logpost - logsumexp(logpost))


def nlp_adjusted_log_bf(fit_k: FitResult, fit_l_local: FitResult, nlp: NlpSpec = NlpSpec(),
                        nu2_name: str = "nu2") -> float:
    """Non-local-prior adjusted log H-Bayes factor of the smaller model k over l.

    ``fit_l_local`` is the larger model fitted under the paired local prior;
    the adjustment ``-log d(nu2)`` is ``+inf`` when its mode sits at ``nu2 = 0``.
    """
    nu2 = fit_l_local.params[nu2_name]
    penalty = nlp_penalty(nlp, nu2)
    if not np.isfinite(penalty):
        return np.inf
    return laplace_log_evidence(fit_k) - laplace_log_evidence(fit_l_local) - penalty


def bic_type_score(fit: FitResult, n: int | None = None, d: int | None = None) -> float:
    """``-sum H - (d/2) log n + log pi``; larger is better."""
    n = fit.n if n is None else n
    d = fit.d if d is None else d
    return float(-fit.sum_score - 0.5 * d * np.log(n) + fit.log_prior)


def smic(model, data: DataSet, fit_unpenalised: FitResult, prior: PriorSpec) -> float:
    """``sum H + tr(I A^{-1})`` at the unpenalised minimiser; smaller is better.

    ``I`` is the sum of outer products of per-observation score gradients and
    ``A`` the Hessian of the summed score (``fit_unpenalised.hessian``).
    """
    if fit_unpenalised.penalised:
        raise ValueError("SMIC needs the unpenalised H-score minimiser")
    obj = PenalisedObjective(model, prior, data, "hscore", penalise=False)
    G = obj.per_observation_grads(fit_unpenalised.mode)
    info = G.T @ G
    A = fit_unpenalised.hessian
    try:
        cond = np.linalg.cond(A)
    except np.linalg.LinAlgError:
        cond = np.inf
    if not np.isfinite(cond) or cond > 1e14:
        raise EvidenceUndefined("singular H-score Hessian: SMIC undefined")
    return float(fit_unpenalised.sum_score + np.trace(np.linalg.solve(A, info)))


# ---------------------------------------------------------------------------
# Multi-model comparison
# ---------------------------------------------------------------------------

@dataclass
class Candidate:
    name: str
    model: object
    prior: PriorSpec


@dataclass
class ModelEntry:
    name: str
    d: int
    log_evidence: float
    mode: dict
    converged: bool
    nlp_adjusted: bool = False
    bic_type: float | None = None
    smic: float | None = None
    error: str | None = None


@dataclass
class ComparisonReport:
    entries: list
    probabilities: np.ndarray
    selected: str
    log_bayes_factors: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        def num(x):
            return None if x is None else (float(x) if np.isfinite(x) else ("inf" if x > 0 else "-inf"))

        return {
            "selected": self.selected,
            "models": [
                {
                    "name": e.name, "d": e.d, "log_evidence": num(e.log_evidence),
                    "posterior_probability": float(p), "converged": e.converged,
                    "nlp_adjusted": e.nlp_adjusted, "bic_type": num(e.bic_type), "smic": num(e.smic),
                    "mode": {k: np.asarray(v).tolist() for k, v in e.mode.items()}, "error": e.error,
                }
                for e, p in zip(self.entries, self.probabilities)
            ],
            "log_bayes_factors": {k: num(v) for k, v in self.log_bayes_factors.items()},
        }


def _local_counterpart(prior: PriorSpec, nlp: NlpSpec):
    """Swap a non-local inverse-gamma on ``nu2`` for the paired half-normal."""
    comp = prior.components.get("nu2")
    if isinstance(comp, InverseGamma):
        spec = NlpSpec(comp.a, comp.b, nlp.lp_scale)
        comps = dict(prior.components)
        comps["nu2"] = HalfNormal(spec.lp_scale)
        return replace(prior, components=comps), spec
    return None, None


def select_best(names, ds, probs) -> str:
    order = sorted(range(len(names)), key=lambda i: (-probs[i], ds[i]))
    best = order[0]
    # ties (to rounding) go to the smaller model
    tied = [i for i in order if abs(probs[i] - probs[best]) <= 1e-12]
    return names[min(tied, key=lambda i: ds[i])]


def compare_models(candidates, data: DataSet, prior_weights=None, with_smic: bool = False,
                   nlp: NlpSpec = NlpSpec(), seed=0, restarts: int = 3) -> ComparisonReport:
    """Fit every candidate and assemble a :class:`ComparisonReport`.

    A candidate whose prior on ``nu2`` is a non-local inverse gamma is fitted
    under the paired local prior, and its log evidence is the local-prior
    Laplace value plus ``log d(nu2)`` at that mode, which reproduces the
    non-local adjusted H-Bayes factor against any other candidate.
    """
    entries = []
    for c in candidates:
        local, spec = _local_counterpart(c.prior, nlp)
        prior = local if local is not None else c.prior
        try:
            fit = fit_hposterior(c.model, prior, data, restarts=restarts, seed=seed)
            le = laplace_log_evidence(fit)
            if local is not None:
                le = le + nlp_penalty(spec, fit.params["nu2"])
            entry = ModelEntry(c.name, fit.d, le, fit.params, fit.converged, local is not None, bic_type_score(fit))
            if with_smic:
                raw = fit_hposterior(c.model, prior, data, restarts=restarts, seed=seed, penalise=False)
                entry.smic = smic(c.model, data, raw, prior)
        except Exception as exc:  # reported, not fatal
            entry = ModelEntry(c.name, 0, float("nan"), {}, False, local is not None, error=f"{type(exc).__name__}: {exc}")
        entries.append(entry)
    le = np.array([e.log_evidence if np.isfinite(e.log_evidence) or e.log_evidence == -np.inf else -np.inf
                   for e in entries])
    if np.isnan(le).any():
        le = np.where(np.isnan(le), -np.inf, le)
    probs = posterior_model_probs(le, prior_weights)
    names = [e.name for e in entries]
    selected = select_best(names, [e.d for e in entries], probs)
    bfs = {}
    for i, ei in enumerate(entries):
        for j, ej in enumerate(entries):
            if i < j:
                with np.errstate(invalid="ignore"):
                    bfs[f"{ei.name}/{ej.name}"] = float(le[i] - le[j]) if np.isfinite(le[i] - le[j]) else (
                        np.inf if le[j] == -np.inf and np.isfinite(le[i]) else
                        (-np.inf if le[i] == -np.inf and np.isfinite(le[j]) else float("nan")))
    return ComparisonReport(entries, probs, selected, bfs)
