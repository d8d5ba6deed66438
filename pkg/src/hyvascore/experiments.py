"""Simulation generators, Fisher-divergence scoring and scenario runners.

Runners return long-format rows ``(scenario, seed, n, model, statistic,
value)``; :func:`run_scenario` writes them to CSV with a JSON manifest.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import os
import platform
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import logsumexp

from . import __version__
from ._validation import check_random_state
from .bandwidth import silverman_bandwidth, ucv_bandwidth
from .inference import asymptotic_mse, fit_hposterior, fit_general_bayes
from .models import DataSet, GaussianRegression, TemperedKDE, TukeyRegression, kde_grad_log_density
from .priors import gaussian_prior, kde_prior, tukey_prior
from .score import QuadratureGrid, fisher_divergence
from .selection import laplace_log_evidence, nlp_adjusted_log_bf, smic

logger = logging.getLogger(__name__)

CSV_HEADER = ("scenario", "seed", "n", "model", "statistic", "value")


# ---------------------------------------------------------------------------
# Mixtures
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MixtureSpec:
    """Finite Gaussian mixture with weights, means and standard deviations."""

    name: str
    weights: tuple
    means: tuple
    sds: tuple

    def __post_init__(self):
        w, m, s = (np.asarray(v, dtype=float) for v in (self.weights, self.means, self.sds))
        if not (w.shape == m.shape == s.shape) or w.ndim != 1 or w.size == 0:
            raise ValueError("weights, means and sds must be equal-length vectors")
        if np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be positive and sum to 1")
        if np.any(s <= 0):
            raise ValueError("sds must be positive")

    def _arrays(self):
        return (np.asarray(self.weights, float), np.asarray(self.means, float), np.asarray(self.sds, float))

    def _log_components(self, x):
        w, m, s = self._arrays()
        x = np.atleast_1d(np.asarray(x, dtype=float))[:, None]
        return np.log(w) - 0.5 * np.log(2 * np.pi) - np.log(s) - np.square(x - m) / (2 * s * s), x

    def logpdf(self, x):
        lc, _ = self._log_components(x)
        return logsumexp(lc, axis=1)

    def pdf(self, x):
        return np.exp(self.logpdf(x))

    def grad_log_pdf(self, x):
        lc, xx = self._log_components(x)
        _, m, s = self._arrays()
        resp = np.exp(lc - logsumexp(lc, axis=1, keepdims=True))
        return (resp * (-(xx - m) / (s * s))).sum(axis=1)

    def mean(self) -> float:
        w, m, _ = self._arrays()
        return float(w @ m)

    def sample(self, n: int, rng) -> np.ndarray:
        w, m, s = self._arrays()
        rng = check_random_state(rng)
        k = rng.choice(w.size, size=n, p=w)
        return rng.normal(m[k], s[k])

    def affine(self, loc: float, scale: float) -> "MixtureSpec":
        """Law of ``(Y - loc) / scale``: density ``scale * g(loc + scale z)``."""
        _, m, s = self._arrays()
        return MixtureSpec(self.name, self.weights, tuple((m - loc) / scale), tuple(s / scale))


PRESETS = {
    "bimodal": MixtureSpec("bimodal", (0.5, 0.5), (-1.5, 1.5), (0.5, 0.5)),
    "trimodal": MixtureSpec("trimodal", (0.45, 0.1, 0.45), (-1.2, 0.0, 1.2), (0.6, 0.25, 0.6)),
    "claw": MixtureSpec("claw", (0.5,) + (0.1,) * 5, (0.0,) + tuple(-2 + j / 2 for j in range(2, 7)),
                        (1.0,) + (0.1,) * 5),
    "skewed": MixtureSpec("skewed", (1 / 8,) * 8, tuple(3 * ((2 / 3) ** j - 1) for j in range(8)),
                          tuple((2 / 3) ** j for j in range(8))),
    "asymmetric": MixtureSpec("asymmetric", (0.75, 0.25), (0.0, 1.5), (1.0, 1 / 3)),
    "kurtotic": MixtureSpec("kurtotic", (2 / 3, 1 / 3), (0.0, 0.0), (1.0, 0.1)),
    "bimodal2": MixtureSpec("bimodal2", (0.5, 0.5), (-2.0, 2.0), (1 / np.sqrt(6),) * 2),
}


# ---------------------------------------------------------------------------
# Generators
# ---------------------------------------------------------------------------

def gen_contaminated(n: int, eps: float = 0.1, clean=(0.0, 1.0), outlier=(5.0, 3.0), seed=0) -> DataSet:
    """``(1-eps) N(clean) + eps N(outlier)`` draws; components given as ``(mean, sd)``."""
    if not 0 <= eps <= 1:
        raise ValueError("eps must lie in [0, 1]")
    rng = check_random_state(seed)
    is_out = rng.uniform(size=n) < eps
    y = np.where(is_out, rng.normal(outlier[0], outlier[1], n), rng.normal(clean[0], clean[1], n))
    return DataSet(y)


def gen_regression(n: int, beta=(0.0, 0.5, 1.0, 1.5, 0.0, 0.0), rho: float = 0.5, sigma2: float = 1.0,
                   seed=0) -> DataSet:
    """Intercept plus equicorrelated unit-variance Gaussian covariates; Gaussian errors."""
    beta = np.asarray(beta, dtype=float)
    q = beta.size - 1
    if q > 1 and not (-1.0 / (q - 1) < rho < 1):
        raise ValueError(f"rho must lie in (-1/{q - 1}, 1)")
    rng = check_random_state(seed)
    if q:
        corr = np.full((q, q), rho) + (1 - rho) * np.eye(q)
        Z = rng.standard_normal((n, q)) @ np.linalg.cholesky(corr).T
        X = np.column_stack([np.ones(n), Z])
    else:
        X = np.ones((n, 1))
    y = X @ beta + np.sqrt(sigma2) * rng.standard_normal(n)
    return DataSet(y, X)


@dataclass(frozen=True)
class MixtureSample:
    data: DataSet
    truth: MixtureSpec
    loc: float
    scale: float


def gen_mixture(spec: MixtureSpec, n: int, seed=0, standardize: bool = True) -> MixtureSample:
    """Mixture draws, optionally standardised, with the truth transported alongside."""
    y = spec.sample(n, check_random_state(seed))
    loc, scale = (float(y.mean()), float(y.std())) if standardize else (0.0, 1.0)
    z = (y - loc) / scale
    return MixtureSample(DataSet(z), spec.affine(loc, scale), loc, scale)


# ---------------------------------------------------------------------------
# Scoring against the truth
# ---------------------------------------------------------------------------

def fisher_divergence_to_truth(grad_log_estimate, truth: MixtureSpec, grid: QuadratureGrid | None = None) -> float:
    """``0.5 * int (grad log g - grad log f_hat)^2 g`` with ``g`` the mixture truth."""
    return fisher_divergence(truth.grad_log_pdf, grad_log_estimate, truth.pdf, grid)


def kde_gradient(data_y, h: float, w: float = 1.0):
    """``d/dx log`` of the (tempered, normalised) KDE; the normaliser drops out."""
    return lambda x: w * kde_grad_log_density(x, data_y, h)


# ---------------------------------------------------------------------------
# Scenario plumbing
# ---------------------------------------------------------------------------

def thread_count() -> int:
    raw = os.environ.get("HYVASCORE_THREADS", "")
    try:
        value = int(raw)
    except ValueError:
        value = 1
    return max(1, value)


def _parallel(fn, tasks):
    n_jobs = min(thread_count(), max(1, len(tasks)))
    if n_jobs == 1:
        return [fn(*t) for t in tasks]
    from joblib import Parallel, delayed

    return Parallel(n_jobs=n_jobs)(delayed(fn)(*t) for t in tasks)


def cell_seed(root: int, *keys) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(root), *map(int, keys)]))


def _row(scenario, seed, n, model, statistic, value):
    return {"scenario": scenario, "seed": int(seed), "n": int(n), "model": model, "statistic": statistic,
            "value": float(value)}


def run_marginal_grid(n: int = 500, seed: int = 0, eps: float = 0.1, kappa_grid=None, outlier=(5.0, 3.0),
                      restarts: int = 3, include_mse: bool = True, scenario: str = "marginal_grid") -> list:
    """Laplace log marginal H-score over ``(beta, sigma2)`` with the Tukey cutoff pinned.

    One row per cutoff (``model = tukey[kappa2=k]``), an ``inf`` cutoff cell
    (``nu2 = 0``), the Gaussian model, and the asymptotic RMSE curve.
    """
    kappa_grid = np.arange(1.0, 10.01, 0.5) if kappa_grid is None else np.asarray(kappa_grid, dtype=float)
    data = gen_contaminated(n, eps, outlier=outlier, seed=cell_seed(seed, 0))
    rows = []
    for k in list(kappa_grid) + [np.inf]:
        nu2 = 0.0 if not np.isfinite(k) else 1.0 / k ** 2
        label = f"tukey[kappa2={k:g}]"
        try:
            fit = fit_hposterior(TukeyRegression(), tukey_prior(nu2), data, restarts=restarts, seed=seed)
            rows.append(_row(scenario, seed, n, label, "log_marginal_hscore", laplace_log_evidence(fit)))
            rows.append(_row(scenario, seed, n, label, "beta0", fit.params["beta"][0]))
        except Exception:  # recorded, not fatal
            rows.append(_row(scenario, seed, n, label, "log_marginal_hscore", np.nan))
        if include_mse:
            rows.append(_row(scenario, seed, n, label, "asymptotic_rmse",
                             asymptotic_mse(k, eps, n, outlier=outlier).rmse))
    fit = fit_hposterior(GaussianRegression(), gaussian_prior(), data, restarts=restarts, seed=seed)
    rows.append(_row(scenario, seed, n, "gaussian", "log_marginal_hscore", laplace_log_evidence(fit)))
    return rows


def marginal_grid_summary(rows) -> dict:
    """Argmax cutoff of the marginal H-score and argmin of the asymptotic RMSE."""
    def pick(stat, fn):
        cells = [(float(r["model"].split("=")[1].rstrip("]")), r["value"]) for r in rows
                 if r["statistic"] == stat and r["model"].startswith("tukey")]
        cells = [(k, v) for k, v in cells if np.isfinite(k) and np.isfinite(v)]
        return fn(cells, key=lambda c: c[1])[0] if cells else np.nan

    return {"kappa_argmax_hscore": pick("log_marginal_hscore", max), "kappa_argmin_rmse": pick("asymptotic_rmse", min)}


def _consistency_cell(root, n, rep, beta, rho, restarts, with_smic=True):
    data = gen_regression(n, beta, rho, 1.0, seed=cell_seed(root, n, rep))
    gprior, tprior = gaussian_prior(), tukey_prior("lp")
    out = {"log_hbf_lp": np.nan, "log_hbf_nlp": np.nan, "smic_diff": np.nan}
    try:
        fg = fit_hposterior(GaussianRegression(), gprior, data, restarts=restarts, seed=rep)
        ft = fit_hposterior(TukeyRegression(), tprior, data, restarts=restarts, seed=rep)
        out["log_hbf_lp"] = laplace_log_evidence(fg) - laplace_log_evidence(ft)
        out["log_hbf_nlp"] = nlp_adjusted_log_bf(fg, ft)
    except Exception as exc:  # a replicate failure is recorded, not fatal
        logger.warning("consistency n=%d seed=%d: H-Bayes factor failed (%s)", n, rep, exc)
    if not with_smic:
        out.pop("smic_diff")
        return [_row("consistency", rep, n, "gaussian_vs_tukey", s, v) for s, v in out.items()]
    try:
        ug = fit_hposterior(GaussianRegression(), gprior, data, restarts=restarts, seed=rep, penalise=False)
        ut = fit_hposterior(TukeyRegression(), tprior, data, restarts=restarts, seed=rep, penalise=False)
        out["smic_diff"] = smic(TukeyRegression(), data, ut, tprior) - smic(GaussianRegression(), data, ug, gprior)
    except Exception as exc:
        logger.warning("consistency n=%d seed=%d: SMIC failed (%s)", n, rep, exc)
    return [_row("consistency", rep, n, "gaussian_vs_tukey", s, v) for s, v in out.items()]


def run_consistency_study(n_grid=(100, 1000, 10000), seeds=100, seed: int = 0,
                          beta=(0.0, 0.5, 1.0, 1.5, 0.0, 0.0), rho: float = 0.5, restarts: int = 1,
                          with_smic: bool = True) -> list:
    """Gaussian-vs-Tukey selection on truly Gaussian regression data.

    Per ``(n, replicate)``: local-prior and non-local-adjusted log H-Bayes
    factors and the SMIC difference (Tukey minus Gaussian); all three are
    oriented so that positive values favour the Gaussian model.
    """
    reps = range(seeds) if isinstance(seeds, int) else seeds
    tasks = [(seed, n, rep, beta, rho, restarts, with_smic) for n in n_grid for rep in reps]
    return [row for rows in _parallel(_consistency_cell, tasks) for row in rows]


def _mode_rate_cell(root, n, rep, beta, rho, restarts):
    data = gen_regression(n, beta, rho, 1.0, seed=cell_seed(root, 7, n, rep))
    fit = fit_hposterior(GaussianRegression(), gaussian_prior(), data, restarts=restarts, seed=rep)
    truth = np.concatenate([np.asarray(beta, dtype=float), [1.0]])
    err = float(np.linalg.norm(fit.mode - truth))
    return [_row("mode_rate", rep, n, "gaussian", "mode_error", err)]


def run_mode_rate_study(n_grid=(250, 500, 1000, 2000, 4000), seeds=30, seed: int = 0,
                        beta=(0.0, 0.5, 1.0, 1.5, 0.0, 0.0), rho: float = 0.5, restarts: int = 1) -> list:
    """Distance of the Gaussian H-posterior mode to the truth ``(beta, sigma2 = 1)``."""
    reps = range(seeds) if isinstance(seeds, int) else seeds
    tasks = [(seed, n, rep, beta, rho, restarts) for n in n_grid for rep in reps]
    return [row for rows in _parallel(_mode_rate_cell, tasks) for row in rows]


def log_log_slope(rows, statistic: str, transform=None) -> float:
    """Least-squares slope of the per-``n`` median of ``statistic`` against ``log n``.

    ``transform`` (e.g. ``np.log``) is applied to the medians before the fit.
    """
    ns = sorted({r["n"] for r in rows if r["statistic"] == statistic})
    med = np.array([np.nanmedian([r["value"] for r in rows if r["n"] == n and r["statistic"] == statistic])
                    for n in ns])
    yv = med if transform is None else transform(med)
    return float(np.polyfit(np.log(ns), yv, 1)[0])


def consistency_summary(rows) -> dict:
    """Selection rates per ``n`` (``correct`` = Gaussian chosen).

    Rates are over the replicates where the statistic could be computed;
    ``failed_*`` counts the others.
    """
    out = {}
    for n in sorted({r["n"] for r in rows}):
        sub = [r for r in rows if r["n"] == n]
        res = {}
        for stat, key, wrong in (("log_hbf_lp", "lp_correct", False), ("log_hbf_nlp", "nlp_correct", False),
                                 ("smic_diff", "smic_wrong", True)):
            v = np.array([r["value"] for r in sub if r["statistic"] == stat])
            ok = v[~np.isnan(v)]
            rate = np.mean(ok < 0) if wrong else np.mean(ok > 0)
            res[key] = float(rate) if ok.size else float("nan")
            res[f"median_{stat}"] = float(np.median(ok)) if ok.size else float("nan")
            res[f"failed_{stat}"] = int(v.size - ok.size)
        out[n] = res
    return out


def _kde_cell(scenario, preset, n, rep, root, restarts, grid):
    sample = gen_mixture(PRESETS[preset], n, seed=cell_seed(root, rep, sum(map(ord, preset))))
    z, truth = sample.data.y, sample.truth
    rows = []

    def score(model, h, w=1.0):
        rows.append(_row(scenario, rep, n, f"{preset}:{model}", "fisher_divergence",
                         fisher_divergence_to_truth(kde_gradient(z, h, w), truth, grid)))
        rows.append(_row(scenario, rep, n, f"{preset}:{model}", "bandwidth", h))
        rows.append(_row(scenario, rep, n, f"{preset}:{model}", "tempering", w))

    score("kde_silverman", silverman_bandwidth(z))
    score("kde_ucv", ucv_bandwidth(z).h)
    for learn_w, label in ((False, "hkde_w1"), (True, "hkde_w")):
        fit = fit_hposterior(TemperedKDE(), kde_prior(learn_w), sample.data, restarts=restarts, seed=rep)
        score(label, fit.params["h"], fit.params["w"])
    return rows


def run_kde_benchmark(presets=("bimodal", "claw", "trimodal", "skewed"), n: int = 1000, seeds=5, seed: int = 0,
                      restarts: int = 3, scenario: str = "kde_benchmark", grid: QuadratureGrid | None = None) -> list:
    """Fisher divergence of Silverman, UCV and H-posterior KDEs to each mixture truth."""
    reps = range(seeds) if isinstance(seeds, int) else seeds
    tasks = [(scenario, p, n, rep, seed, restarts, grid) for p in presets for rep in reps]
    return [row for rows in _parallel(_kde_cell, tasks) for row in rows]


def kde_summary(rows) -> dict:
    """Median Fisher divergence per ``preset:method``."""
    out = {}
    for model in sorted({r["model"] for r in rows}):
        vals = [r["value"] for r in rows if r["model"] == model and r["statistic"] == "fisher_divergence"]
        out[model] = float(np.median(vals))
    return out


def run_bimodal2(n: int = 1000, seeds=5, seed: int = 0, restarts: int = 3) -> list:
    return run_kde_benchmark(("bimodal2",), n, seeds, seed, restarts, scenario="bimodal2")


def run_contamination_demo(n: int = 500, seed: int = 0, eps: float = 0.1, kappa2: float = 5.0,
                           restarts: int = 3) -> list:
    """Gaussian versus Tukey fits on contaminated data (location, scale and cutoff)."""
    data = gen_contaminated(n, eps, seed=cell_seed(seed, 0))
    rows = []
    fits = {
        "gaussian_hposterior": fit_hposterior(GaussianRegression(), gaussian_prior(), data, restarts=restarts),
        "gaussian_general_bayes": fit_general_bayes(GaussianRegression(), gaussian_prior(), data,
                                                    restarts=restarts),
        f"tukey_hposterior[kappa2={kappa2:g}]": fit_hposterior(TukeyRegression(), tukey_prior(kappa2 ** -2),
                                                               data, restarts=restarts),
        f"tukey_general_bayes[kappa2={kappa2:g}]": fit_general_bayes(
            TukeyRegression(), tukey_prior("nlp"), data, {"nu2": kappa2 ** -2}, restarts=restarts),
        "tukey_hposterior[nlp]": fit_hposterior(TukeyRegression(), tukey_prior("nlp"), data, restarts=restarts),
    }
    for label, fit in fits.items():
        rows.append(_row("contamination_demo", seed, n, label, "beta0", fit.params["beta"][0]))
        rows.append(_row("contamination_demo", seed, n, label, "sigma2", fit.params["sigma2"]))
        if fit.params.get("nu2", 0) > 0:
            rows.append(_row("contamination_demo", seed, n, label, "kappa2", fit.params["nu2"] ** -0.5))
        rows.append(_row("contamination_demo", seed, n, label, "objective", fit.objective))
    return rows


SCENARIOS = {
    "marginal_grid": run_marginal_grid,
    "consistency": run_consistency_study,
    "kde_benchmark": run_kde_benchmark,
    "contamination_demo": run_contamination_demo,
    "bimodal2": run_bimodal2,
    "mode_rate": run_mode_rate_study,
}

SUMMARIES = {
    "marginal_grid": marginal_grid_summary,
    "consistency": consistency_summary,
    "kde_benchmark": kde_summary,
    "bimodal2": kde_summary,
}


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------

def atomic_write_text(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_HEADER, lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow({**r, "value": repr(float(r["value"]))})
    return buf.getvalue()


def config_hash(config: dict) -> str:
    return hashlib.sha256(json.dumps(config, sort_keys=True, default=str).encode()).hexdigest()


def _versions() -> dict:
    import scipy

    return {"hyvascore": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def _json_safe(obj):
    if isinstance(obj, dict):
        return {str(k): _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        return float(obj) if np.isfinite(obj) else str(float(obj))
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def run_scenario(name: str, params: dict | None, out_dir, seed: int = 0) -> dict:
    """Run a named scenario and write ``<name>.csv`` plus ``<name>_manifest.json``.

    The manifest carries no timestamps so re-runs are byte-identical; the
    wall-clock time is returned to the caller instead.
    """
    if name not in SCENARIOS:
        raise KeyError(f"unknown scenario {name!r}; available: {', '.join(sorted(SCENARIOS))}")
    params = dict(params or {})
    t0 = time.perf_counter()
    rows = SCENARIOS[name](seed=seed, **params)
    out_dir = Path(out_dir)
    atomic_write_text(out_dir / f"{name}.csv", rows_to_csv(rows))
    summary = SUMMARIES[name](rows) if name in SUMMARIES else {}
    config = {"scenario": name, "seed": seed, "params": params}
    manifest = {
        "scenario": name,
        "config": _json_safe(config),
        "config_hash": config_hash(config),
        "seed": seed,
        "n_rows": len(rows),
        "versions": _versions(),
        "summary": _json_safe(summary),
        "outputs": [f"{name}.csv"],
    }
    atomic_write_text(out_dir / f"{name}_manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return {"rows": rows, "manifest": manifest, "elapsed": time.perf_counter() - t0}
