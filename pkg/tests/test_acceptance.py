"""Acceptance criteria, one test per criterion with the contract's tolerances.

Each test records a ``[PASS]``/``[FAIL]`` line (printed in the terminal
summary) before asserting, so a failing criterion is still reported with the
measured values.
"""

import time

import numpy as np
import pytest
from scipy import integrate, stats

from conftest import ACCEPTANCE_LINES
from hyvascore.experiments import (
    consistency_summary,
    kde_summary,
    log_log_slope,
    marginal_grid_summary,
    run_bimodal2,
    run_consistency_study,
    run_kde_benchmark,
    run_marginal_grid,
    run_mode_rate_study,
)
from hyvascore.inference import fit_hposterior
from hyvascore.models import (
    DataSet,
    GaussianRegression,
    TsallisGaussianRegression,
    TukeyRegression,
    kde_base_derivatives,
    kde_hscore,
    kde_log_improper,
)
from hyvascore.priors import elicit_kde_prior, gaussian_prior, kappa_interval_probability, log_prior, tukey_prior
from hyvascore.score import fd_hscore
from hyvascore.selection import laplace_log_evidence


def report(number: int, ok: bool, detail: str, elapsed: float, budget: float) -> None:
    within = elapsed <= budget
    status = "PASS" if ok and within else "FAIL"
    line = f"[{status}] criterion {number}: {detail} ({elapsed:.1f} s, budget {budget:g} s)"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line
    assert within, line


def _rel(a, b):
    return np.abs(a - b) / np.maximum(np.abs(b), 1e-300)


# ---------------------------------------------------------------------------
# Property-based
# ---------------------------------------------------------------------------

def test_criterion_01_score_oracle():
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    worst = {}
    tol = {"gaussian": 1e-5, "tsallis": 1e-5, "tukey": 1e-4, "tukey_smoothed": 1e-4, "kde": 1e-4}
    regression = {
        "gaussian": (GaussianRegression(), lambda: {}),
        "tsallis": (TsallisGaussianRegression(), lambda: {"beta_ts": rng.uniform(0.1, 1.0)}),
        "tukey": (TukeyRegression(smoothing=None), lambda: {"nu2": rng.uniform(0.02, 0.2)}),
        "tukey_smoothed": (TukeyRegression(), lambda: {"nu2": rng.uniform(0.02, 0.2)}),
    }
    # the logistic indicator is within 1e-4 of exact this far from the cutoff
    margin = {"tukey": 1e-3, "tukey_smoothed": 0.15}
    for name, (model, extra) in regression.items():
        errs = []
        while len(errs) < 100:
            X = np.column_stack([np.ones(5), rng.normal(size=(5, 2))])
            params = {"beta": rng.normal(size=3), "sigma2": rng.uniform(0.3, 3.0), **extra()}
            y = X @ params["beta"] + rng.normal(size=5) * np.sqrt(params["sigma2"]) * 1.5
            data = DataSet(y, X)
            if name in margin:  # keep the finite-difference stencil off the cutoff
                r = np.abs(y - X @ params["beta"])
                if np.any(np.abs(r - np.sqrt(params["sigma2"] / params["nu2"])) < margin[name]):
                    continue
            an = model.hscore(params, data)
            for i in range(5):
                fd = fd_hscore(lambda t: model.log_density_obs(params, data, i, t), y[i])
                if name in margin and abs(an[i]) < 1e-4:
                    errs.append(abs(fd))  # flat region outside the cutoff
                else:
                    errs.append(_rel(an[i], fd))
        worst[name] = max(errs[:100])
    errs = []
    while len(errs) < 100:
        y = rng.normal(size=20)
        p = {"h": rng.uniform(0.2, 1.0), "w": rng.uniform(0.3, 2.0)}
        an = kde_hscore(y, p)
        for i in range(5):
            errs.append(_rel(an[i], fd_hscore(lambda t: kde_log_improper(t, i, y, p), y[i])))
    worst["kde"] = max(errs[:100])
    ok = all(worst[k] <= tol[k] for k in tol)
    detail = "max rel err " + ", ".join(f"{k} {worst[k]:.1e} (tol {tol[k]:g})" for k in tol)
    report(1, ok, detail, time.perf_counter() - t0, 10)


def test_criterion_02_nesting():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    n = 200
    X = np.column_stack([np.ones(n), rng.normal(size=n)])
    y = X @ [0.5, -1.0] + rng.standard_t(4, size=n)
    data = DataSet(y, X)
    p = {"beta": np.array([0.4, -0.9]), "sigma2": 1.3}
    tk, gs = TukeyRegression(), GaussianRegression()
    d_loss = np.max(np.abs(tk.loss({**p, "nu2": 0.0}, data) - gs.loss(p, data)))
    d_h = np.max(np.abs(tk.hscore({**p, "nu2": 0.0}, data) - gs.hscore(p, data)))
    ft = fit_hposterior(tk, tukey_prior(0.0), data, seed=3)
    fg = fit_hposterior(gs, gaussian_prior(), data, seed=3)
    d_mode = np.max(np.abs(ft.mode - fg.mode))
    d_ev = abs(laplace_log_evidence(ft) - laplace_log_evidence(fg))
    diffs = {"loss": d_loss, "hscore": d_h, "mode": d_mode, "evidence": d_ev}
    ok = all(v <= 1e-8 for v in diffs.values())
    report(2, ok, "max |diff| " + ", ".join(f"{k} {v:.1e}" for k, v in diffs.items()) + " (tol 1e-8)",
           time.perf_counter() - t0, 30)


def _quadrature_log_evidence(fit, data, prior, n_nodes=400, width=10.0):
    se = np.sqrt(np.diag(np.linalg.inv(fit.hessian)))
    beta0, s2 = fit.mode
    b = np.linspace(beta0 - width * se[0], beta0 + width * se[0], n_nodes)
    s = np.linspace(max(s2 - width * se[1], 1e-3 * s2), s2 + width * se[1], n_nodes)
    B, S = np.meshgrid(b, s, indexing="ij")
    y = data.y
    # Gaussian H-score summed over observations: sum(r^2)/s^4 - 2n/s
    ssq = (np.sum(y * y) - 2 * B * y.sum() + y.size * B * B)
    sum_h = ssq / S ** 2 - 2.0 * y.size / S
    lp = np.vectorize(lambda bb, ss: log_prior(prior, {"beta": np.array([bb]), "sigma2": ss}))(B, S)
    logf = lp - sum_h
    m = logf.max()
    inner = integrate.simpson(np.exp(logf - m), x=s, axis=1)
    return m + np.log(integrate.simpson(inner, x=b))


def test_criterion_03_laplace_vs_quadrature():
    t0 = time.perf_counter()
    rng = np.random.default_rng(0)
    data = DataSet(rng.normal(1.0, 1.5, size=50))
    prior = gaussian_prior()
    fit = fit_hposterior(GaussianRegression(), prior, data)
    lap = laplace_log_evidence(fit)
    quad = _quadrature_log_evidence(fit, data, prior)
    rel = abs(lap - quad) / abs(quad)
    report(3, rel <= 0.05, f"Laplace {lap:.4f} vs 400x400 quadrature {quad:.4f}, rel err {rel:.2%} (tol 5%)",
           time.perf_counter() - t0, 60)


def test_criterion_04_tempering_identity():
    t0 = time.perf_counter()
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(50):
        y = rng.normal(size=30)
        h, w = rng.uniform(0.1, 1.5), rng.uniform(0.05, 5.0)
        D = kde_base_derivatives(y, h)
        worst = max(worst, np.max(np.abs(kde_hscore(y, {"h": h, "w": w}) - (2 * w * D.d2 + w * w * D.d1 ** 2))))
    report(4, worst <= 1e-10, f"max |H(w) - (2w D2 + w^2 D1^2)| = {worst:.1e} over 50 datasets (tol 1e-10)",
           time.perf_counter() - t0, 10)


def test_criterion_05_mode_rate():
    t0 = time.perf_counter()
    rows = run_mode_rate_study(n_grid=(250, 500, 1000, 2000, 4000), seeds=30, seed=0)
    slope = log_log_slope(rows, "mode_error", np.log)
    report(5, -0.65 <= slope <= -0.35, f"log-log slope of median mode error {slope:.3f} (target [-0.65, -0.35])",
           time.perf_counter() - t0, 300)


def test_criterion_06_local_prior_rate():
    t0 = time.perf_counter()
    rows = run_consistency_study(n_grid=(250, 500, 1000, 2000, 4000, 8000), seeds=100, seed=0, with_smic=False)
    slope = log_log_slope(rows, "log_hbf_lp")
    target = (7 - 6) / 2  # Tukey adds one parameter (nu2) to the Gaussian model
    ok = abs(slope - target) <= 0.5 * target
    report(6, ok, f"slope of median local-prior log BF on log n {slope:.3f} (target {target} +/- 50%)",
           time.perf_counter() - t0, 900)


# ---------------------------------------------------------------------------
# Desk-scale reproductions
# ---------------------------------------------------------------------------

def test_criterion_07_marginal_grid():
    t0 = time.perf_counter()
    summary = marginal_grid_summary(run_marginal_grid(n=500, seed=0))
    k_h, k_r = summary["kappa_argmax_hscore"], summary["kappa_argmin_rmse"]
    ok = 4 <= k_h <= 6.5 and 3.5 <= k_r <= 7
    report(7, ok, f"argmax marginal H-score kappa2 {k_h:g} (target [4, 6.5]); argmin RMSE {k_r:g} (target [3.5, 7])",
           time.perf_counter() - t0, 300)


def test_criterion_08_consistency():
    t0 = time.perf_counter()
    s = consistency_summary(run_consistency_study(n_grid=(100, 1000, 10000), seeds=100, seed=0))
    nlp, lp, smic = s[1000]["nlp_correct"], s[1000]["lp_correct"], s[10000]["smic_wrong"]
    ok = nlp >= 0.95 and lp < nlp and smic > 0.05
    fails = sum(v for n in s for k, v in s[n].items() if k.startswith("failed_"))
    report(8, ok, f"n=1000 NLP correct {nlp:.2f} (>= 0.95), LP correct {lp:.2f} (< NLP); "
                  f"n=10000 SMIC wrong {smic:.2f} (> 0.05); failed replicate statistics {fails}",
           time.perf_counter() - t0, 7200)


def test_criterion_09_nlp_prior_mass():
    t0 = time.perf_counter()
    ig = stats.invgamma(4.35, scale=1.56)
    # kappa = nu2^{-1/2}: density of kappa is ig.pdf(k^-2) * 2 k^-3
    quad, _ = integrate.quad(lambda k: ig.pdf(k ** -2.0) * 2.0 * k ** -3.0, 1.0, 3.0, epsabs=1e-12)
    closed = kappa_interval_probability(4.35, 1.56, 1.0, 3.0)
    ok = abs(quad - 0.95) <= 0.005 and abs(quad - closed) < 1e-8
    report(9, ok, f"P(kappa in (1, 3)) = {quad:.5f} by quadrature (target 0.95 +/- 0.005)",
           time.perf_counter() - t0, 1)


PAPER_TABLE = {
    "bimodal": {"kde_silverman": 1.03, "kde_ucv": 0.37, "hkde_w1": 0.26, "hkde_w": 0.09},
    "claw": {"kde_silverman": 13.77, "kde_ucv": 6.09, "hkde_w1": 3.37, "hkde_w": 2.51},
}


@pytest.mark.slow
def test_criterion_10_kde_benchmark():
    t0 = time.perf_counter()
    rows = run_kde_benchmark(presets=("bimodal", "claw"), n=1000, seeds=5, seed=0)
    med = kde_summary(rows)

    def per_seed(model):
        return {r["seed"]: r["value"] for r in rows if r["model"] == model and r["statistic"] == "fisher_divergence"}

    w, sil = per_seed("bimodal:hkde_w"), per_seed("bimodal:kde_silverman")
    wins = sum(w[k] < sil[k] for k in w)
    checks = {
        "bimodal wins >= 4/5": wins >= 4,
        "bimodal w <= 1.2 w1": med["bimodal:hkde_w"] <= 1.2 * med["bimodal:hkde_w1"],
        "claw w < silverman": med["claw:hkde_w"] < med["claw:kde_silverman"],
    }
    off = [f"{p}:{m} {med[f'{p}:{m}']:.3g} vs {v}" for p, t in PAPER_TABLE.items() for m, v in t.items()
           if not v / 3 <= med[f"{p}:{m}"] <= 3 * v]
    checks["magnitudes within x3"] = not off
    detail = (f"bimodal medians silverman {med['bimodal:kde_silverman']:.3g}, w1 {med['bimodal:hkde_w1']:.3g}, "
              f"w {med['bimodal:hkde_w']:.3g}, wins {wins}/5; claw silverman {med['claw:kde_silverman']:.3g}, "
              f"w {med['claw:hkde_w']:.3g}; failed: {[k for k, v in checks.items() if not v] or 'none'}"
              + (f"; outside x3: {off}" if off else ""))
    report(10, all(checks.values()), detail, time.perf_counter() - t0, 1800)


@pytest.mark.slow
def test_criterion_11_bimodal2():
    t0 = time.perf_counter()
    med = kde_summary(run_bimodal2(n=1000, seeds=5, seed=0))
    w, w1 = med["bimodal2:hkde_w"], med["bimodal2:hkde_w1"]
    report(11, w < 1.0 and w < w1, f"median Fisher divergence w learned {w:.3g} (< 1.0), w=1 {w1:.3g}",
           time.perf_counter() - t0, 600)


@pytest.mark.slow
def test_criterion_12_kde_prior_elicitation():
    t0 = time.perf_counter()
    b0 = elicit_kde_prior(learn_w=False).b0
    report(12, 0.03 <= b0 <= 0.12, f"elicited b0 = {b0:.4f} (target [0.03, 0.12])", time.perf_counter() - t0, 1800)
