"""Prior families, the non-local-prior penalty and the two elicitation procedures.

A :class:`PriorSpec` assigns one component to every parameter block of a
model. Components return log-densities and gradients in the parameter's
original coordinates. A :class:`PointMass` pins a parameter, removing it
from the set of learned coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from scipy import stats
from scipy.special import gammaln

from ._validation import check_positive, check_random_state
from .models import LOG_2PI, DataSet, breakdown_feasible
from .score import QuadratureGrid


class ElicitationError(RuntimeError):
    """Raised when an elicitation target cannot be met inside the search box."""


# ---------------------------------------------------------------------------
# Components
# ---------------------------------------------------------------------------

class PriorComponent:
    nonlocal_at_zero = False
    fixed = False

    def logpdf(self, value, params):
        raise NotImplementedError

    def grad(self, value, params) -> dict:
        """Gradient contributions keyed by parameter name."""
        raise NotImplementedError


@dataclass(frozen=True)
class NormalScaledBySigma(PriorComponent):
    """``beta | sigma2 ~ N(0, g * sigma2 * I)``."""

    g: float = 5.0
    scale_param: str = "sigma2"

    def __post_init__(self):
        check_positive(self.g, "g")

    def logpdf(self, value, params):
        beta = np.atleast_1d(value)
        var = self.g * params[self.scale_param]
        if not var > 0:
            return -np.inf
        return float(-0.5 * beta.size * (LOG_2PI + np.log(var)) - beta @ beta / (2.0 * var))

    def grad(self, value, params):
        beta = np.atleast_1d(value)
        s2 = params[self.scale_param]
        var = self.g * s2
        return {
            "beta": -beta / var,
            self.scale_param: -0.5 * beta.size / s2 + beta @ beta / (2.0 * self.g * s2 * s2),
        }


@dataclass(frozen=True)
class InverseGamma(PriorComponent):
    """Inverse-gamma with shape ``a`` and scale ``b``; vanishes at zero."""

    a: float
    b: float
    nonlocal_at_zero = True

    def __post_init__(self):
        check_positive(self.a, "a")
        check_positive(self.b, "b")

    def logpdf(self, value, params=None):
        if not value > 0:
            return -np.inf
        return float(self.a * np.log(self.b) - gammaln(self.a) - (self.a + 1.0) * np.log(value) - self.b / value)

    def grad(self, value, params=None):
        return -(self.a + 1.0) / value + self.b / value ** 2

    def cdf(self, value):
        return stats.invgamma.cdf(value, self.a, scale=self.b)


@dataclass(frozen=True)
class InverseGammaOnSquare(PriorComponent):
    """Density of ``x > 0`` when ``x**2 ~ IG(a, b)`` (includes the Jacobian ``2x``)."""

    a: float
    b: float
    nonlocal_at_zero = True

    def __post_init__(self):
        check_positive(self.a, "a")
        check_positive(self.b, "b")

    def logpdf(self, value, params=None):
        if not value > 0:
            return -np.inf
        return InverseGamma(self.a, self.b).logpdf(value * value) + np.log(2.0 * value)

    def grad(self, value, params=None):
        return InverseGamma(self.a, self.b).grad(value * value) * 2.0 * value + 1.0 / value


@dataclass(frozen=True)
class HalfNormal(PriorComponent):
    """``N(0, s^2)`` truncated to ``[0, inf)``; positive density at zero (local)."""

    s: float = 1.0

    def __post_init__(self):
        check_positive(self.s, "s")

    def logpdf(self, value, params=None):
        if value < 0:
            return -np.inf
        return float(np.log(2.0) - 0.5 * LOG_2PI - np.log(self.s) - value * value / (2.0 * self.s ** 2))

    def grad(self, value, params=None):
        return -value / self.s ** 2


@dataclass(frozen=True)
class Exponential(PriorComponent):
    """Exponential with rate ``rate``."""

    rate: float

    def __post_init__(self):
        check_positive(self.rate, "rate")

    def logpdf(self, value, params=None):
        if value < 0:
            return -np.inf
        return float(np.log(self.rate) - self.rate * value)

    def grad(self, value, params=None):
        return -self.rate


@dataclass(frozen=True)
class PointMass(PriorComponent):
    """Pins a parameter at ``value``; contributes nothing to the log-prior."""

    value: float
    fixed = True

    def logpdf(self, value, params=None):
        return 0.0

    def grad(self, value, params=None):
        return 0.0


@dataclass(frozen=True)
class PriorSpec:
    """Per-block prior components plus an optional breakdown truncation."""

    components: Mapping[str, PriorComponent]
    truncate_breakdown: bool = False

    def fixed_values(self) -> dict:
        return {k: c.value for k, c in self.components.items() if c.fixed}

    def is_local(self, name: str) -> bool:
        return not self.components[name].nonlocal_at_zero

    def covers(self, model, data: DataSet) -> None:
        names = {name for name, _ in model.layout(data)}
        if set(self.components) != names:
            raise ValueError(f"prior blocks {sorted(self.components)} do not match model blocks {sorted(names)}")


def log_prior(spec: PriorSpec, params: Mapping, data: DataSet | None = None, with_grad: bool = False):
    """Sum of component log-densities; ``-inf`` outside the support or the truncation.

    With ``with_grad=True`` returns ``(value, grad_dict)`` where ``grad_dict``
    maps parameter names to gradient blocks (zero for pinned parameters).
    """
    total = 0.0
    grads = {name: np.zeros_like(np.asarray(v, dtype=float)) for name, v in params.items()}
    for name, comp in spec.components.items():
        value = params[name]
        if comp.fixed:
            continue
        lp = comp.logpdf(value, params)
        total += lp
        if with_grad and np.isfinite(lp):
            g = comp.grad(value, params)
            if isinstance(g, dict):
                for key, blk in g.items():
                    grads[key] = grads[key] + blk
            else:
                grads[name] = grads[name] + g
    if spec.truncate_breakdown and np.isfinite(total):
        if data is None:
            raise ValueError("a breakdown-truncated prior needs the data")
        if "nu2" in params and not breakdown_feasible(params, data):
            total = -np.inf
    if with_grad:
        return float(total), {k: (float(v) if np.ndim(v) == 0 else v) for k, v in grads.items()}
    return float(total)


# ---------------------------------------------------------------------------
# Defaults
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NlpSpec:
    """Inverse-gamma non-local prior on ``nu2`` and its paired half-normal local prior."""

    a0: float = 4.35
    b0: float = 1.56
    lp_scale: float = 1.0

    def __post_init__(self):
        for name in ("a0", "b0", "lp_scale"):
            check_positive(getattr(self, name), name)

    @property
    def nonlocal_prior(self) -> InverseGamma:
        return InverseGamma(self.a0, self.b0)

    @property
    def local_prior(self) -> HalfNormal:
        return HalfNormal(self.lp_scale)


def gaussian_prior(g: float = 5.0, a: float = 2.0, b: float = 0.5) -> PriorSpec:
    return PriorSpec({"beta": NormalScaledBySigma(g), "sigma2": InverseGamma(a, b)})


def tukey_prior(nu2="nlp", nlp: NlpSpec = NlpSpec(), g: float = 5.0, a: float = 2.0, b: float = 0.5,
                truncate: bool = True) -> PriorSpec:
    """Tukey prior: ``nu2`` is ``"nlp"``, ``"lp"``, or a float to pin the cutoff."""
    if nu2 == "nlp":
        comp = nlp.nonlocal_prior
    elif nu2 == "lp":
        comp = nlp.local_prior
    else:
        comp = PointMass(float(nu2))
    return PriorSpec(
        {"beta": NormalScaledBySigma(g), "sigma2": InverseGamma(a, b), "nu2": comp},
        truncate_breakdown=truncate,
    )


KDE_PRIOR_LEARNED_W = (0.024, 0.725)
KDE_PRIOR_FIXED_W = 0.061


def kde_prior(learn_w: bool = True, b0: float | None = None, lambda0: float | None = None) -> PriorSpec:
    """``h^2 ~ IG(2, b0)`` and ``w ~ Exp(lambda0)`` (or ``w`` pinned at 1)."""
    if learn_w:
        b0 = KDE_PRIOR_LEARNED_W[0] if b0 is None else b0
        lambda0 = KDE_PRIOR_LEARNED_W[1] if lambda0 is None else lambda0
        return PriorSpec({"h": InverseGammaOnSquare(2.0, b0), "w": Exponential(lambda0)})
    b0 = KDE_PRIOR_FIXED_W if b0 is None else b0
    return PriorSpec({"h": InverseGammaOnSquare(2.0, b0), "w": PointMass(1.0)})


# ---------------------------------------------------------------------------
# Non-local prior penalty and elicitation
# ---------------------------------------------------------------------------

def nlp_penalty(spec: NlpSpec, nu2: float) -> float:
    """``log d(nu2) = log pi_NLP(nu2) - log pi_LP(nu2)``; ``-inf`` for ``nu2 <= 0``."""
    if not nu2 > 0:
        return -np.inf
    return spec.nonlocal_prior.logpdf(nu2) - spec.local_prior.logpdf(nu2)


def kappa_interval_probability(a0: float, b0: float, lo: float, hi: float) -> float:
    """``P(lo < kappa < hi)`` when ``kappa = nu2^{-1/2}`` and ``nu2 ~ IG(a0, b0)``."""
    ig = stats.invgamma(a0, scale=b0)
    return float(ig.cdf(1.0 / lo ** 2) - ig.cdf(1.0 / hi ** 2))


def _bisect(fun, lo, hi, tol=1e-12, max_iter=200):
    f_lo = fun(lo)
    if np.sign(f_lo) == np.sign(fun(hi)):
        raise ElicitationError(f"no sign change on [{lo}, {hi}]")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        f_mid = fun(mid)
        if np.sign(f_mid) == np.sign(f_lo):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
        if hi - lo < tol * max(1.0, abs(mid)):
            break
    return 0.5 * (lo + hi)


def elicit_nlp(interval=(1.0, 3.0), prob: float = 0.95, lower_tail_fraction: float = 0.5,
               a_box=(1e-2, 1e3), b_box=(1e-6, 1e4)):
    """Inverse-gamma ``(a0, b0)`` on ``nu2`` with ``P(kappa in interval) = prob``.

    The excluded mass ``1 - prob`` is split as ``lower_tail_fraction`` below
    ``interval[0]`` and the rest above ``interval[1]`` (default: equal tails).
    Solved by nested bisection: for each shape ``a`` the scale matching the
    upper-kappa tail is found, then ``a`` is tuned to match the lower tail.
    """
    lo, hi = map(float, interval)
    if not (0 < lo < hi):
        raise ValueError("need 0 < lo < hi")
    if not (0 < prob < 1):
        raise ElicitationError(f"prob must lie strictly inside (0, 1), got {prob!r}")
    if not (0 < lower_tail_fraction < 1):
        raise ValueError("lower_tail_fraction must lie in (0, 1)")
    excluded = 1.0 - prob
    p_low_kappa = excluded * lower_tail_fraction  # P(nu2 > 1/lo^2)
    p_high_kappa = excluded - p_low_kappa  # P(nu2 < 1/hi^2)
    if min(p_low_kappa, p_high_kappa) < 1e-14:
        raise ElicitationError("tail targets below double-precision resolution")

    nu_small, nu_large = 1.0 / hi ** 2, 1.0 / lo ** 2

    def scale_for(a):
        # cdf at nu_small decreases in b
        return np.exp(_bisect(lambda lb: stats.invgamma.cdf(nu_small, a, scale=np.exp(lb)) - p_high_kappa,
                              np.log(b_box[0]), np.log(b_box[1])))

    def upper_gap(la):
        a = np.exp(la)
        return stats.invgamma.sf(nu_large, a, scale=scale_for(a)) - p_low_kappa

    try:
        a0 = float(np.exp(_bisect(upper_gap, np.log(a_box[0]), np.log(a_box[1]))))
        b0 = float(scale_for(a0))
    except ElicitationError as exc:
        raise ElicitationError(
            f"no inverse-gamma in a in {a_box}, b in {b_box} meets P(kappa in ({lo}, {hi}))={prob}"
            f" with lower-tail fraction {lower_tail_fraction}: {exc}"
        ) from None
    achieved = kappa_interval_probability(a0, b0, lo, hi)
    if abs(achieved - prob) > 1e-4:
        raise ElicitationError(f"solution (a0={a0:.4g}, b0={b0:.4g}) reaches probability {achieved:.6f}")
    return a0, b0


# KDE prior elicitation ------------------------------------------------------

def _gaussian_ise_kde(z, h):
    """Closed-form ISE of a Gaussian-kernel KDE of ``z`` against N(0, 1)."""
    n = z.size
    diff2 = np.square(z[:, None] - z[None, :])
    term_gg = np.exp(-diff2 / (4.0 * h * h)).sum() / (n * n * np.sqrt(4.0 * np.pi * h * h))
    v = 1.0 + h * h
    term_gf = np.exp(-z * z / (2.0 * v)).sum() / (n * np.sqrt(2.0 * np.pi * v))
    return term_gg - 2.0 * term_gf + 1.0 / (2.0 * np.sqrt(np.pi))


def _tempered_ise(z, h, w, grid):
    from .models import kde_log_density

    logg = w * kde_log_density(grid.nodes, z, h)
    dens = np.exp(logg - logg.max())
    dens /= grid.integrate(dens)
    truth = stats.norm.pdf(grid.nodes)
    return grid.integrate(np.square(dens - truth))


@dataclass
class KdeElicitation:
    b0: float
    lambda0: float | None
    expected_mise: float
    standard_error: float
    trace: list = field(default_factory=list)


def elicit_kde_prior(n: int = 1000, n_mc: int = 100, learn_w: bool = False, seed=0,
                     b_grid=None, lambda_grid=None, quad: QuadratureGrid | None = None,
                     refine: int = 2) -> KdeElicitation:
    """Prior-expected MISE minimisation for the KDE prior under N(0, 1) data.

    Each replicate draws a standard-Gaussian sample and standardised prior
    draws ``u ~ IG(2, 1)`` (and ``e ~ Exp(1)``); the prior draw for
    hyperparameters ``(b, lambda)`` is then ``h^2 = b*u`` and ``w = e/lambda``,
    so every candidate is scored with common random numbers. The argmin is
    located on a log-spaced grid and refined ``refine`` times around the best
    point.
    """
    if n < 2 or n_mc < 1:
        raise ValueError("need n >= 2 and n_mc >= 1")
    rng = check_random_state(seed)
    samples = [rng.standard_normal(n) for _ in range(n_mc)]
    u = stats.invgamma.rvs(2.0, size=n_mc, random_state=rng)
    e = rng.exponential(size=n_mc)
    quad = quad or QuadratureGrid(-8.0, 8.0, 801)
    cache = {}

    def ise_values(b, lam):
        key = (round(b, 14), None if lam is None else round(lam, 14))
        if key not in cache:
            vals = []
            for k, z in enumerate(samples):
                h = np.sqrt(b * u[k])
                if lam is None:
                    vals.append(_gaussian_ise_kde(z, h))
                else:
                    vals.append(_tempered_ise(z, h, e[k] / lam, quad))
            cache[key] = np.asarray(vals)
        return cache[key]

    b_grid = np.geomspace(1e-3, 1.0, 13) if b_grid is None else np.asarray(b_grid, dtype=float)
    if learn_w:
        lambda_grid = np.geomspace(0.05, 5.0, 9) if lambda_grid is None else np.asarray(lambda_grid, dtype=float)
    trace = []
    for level in range(refine + 1):
        cands = [(b, lam) for b in b_grid for lam in (lambda_grid if learn_w else [None])]
        scores = [(float(ise_values(b, lam).mean()), b, lam) for b, lam in cands]
        trace.extend(scores)
        best, b_best, lam_best = min(scores, key=lambda t: t[0])
        if level == refine:
            break
        lb_step = np.log(b_grid[1] / b_grid[0]) if b_grid.size > 1 else 0.5
        b_grid = b_best * np.exp(np.linspace(-lb_step, lb_step, 7))
        if learn_w:
            ll_step = np.log(lambda_grid[1] / lambda_grid[0]) if lambda_grid.size > 1 else 0.5
            lambda_grid = lam_best * np.exp(np.linspace(-ll_step, ll_step, 7))
    vals = ise_values(b_best, lam_best)
    return KdeElicitation(b_best, lam_best, float(vals.mean()), float(vals.std(ddof=1) / np.sqrt(vals.size))
                          if vals.size > 1 else float("nan"), trace)


def gaussian_optimal_bandwidth(n: int) -> float:
    """AMISE-optimal Gaussian-kernel bandwidth for N(0, 1) data, ``(4/3n)^{1/5}``."""
    return (4.0 / (3.0 * n)) ** 0.2
