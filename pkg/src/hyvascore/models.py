"""Model families: Gaussian and Tukey regression, tempered KDE, Tsallis-Gaussian.

Each model maps a parameter dict to per-observation losses, log improper
densities, derivatives in the observation, Hyvarinen scores and their
parameter gradients. Parameters always live in their original coordinates;
reparameterisation for optimisation happens in :mod:`hyvascore.inference`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, logsumexp

from ._validation import as_finite_matrix, as_finite_vector, check_positive
from .score import QuadratureFailure, QuadratureGrid, YDerivatives, hscore_from_derivatives

LOG_2PI = float(np.log(2.0 * np.pi))
DEFAULT_SMOOTHING = (100.0, 100.0)


class InfeasibleParameters(ValueError):
    """Parameters outside the model's support or constraints."""


@dataclass(frozen=True)
class DataSet:
    """Response vector with a covariate matrix whose first column is the intercept."""

    y: np.ndarray
    X: np.ndarray = field(default=None)

    def __post_init__(self):
        y = as_finite_vector(self.y, "y")
        X = np.ones((y.size, 1)) if self.X is None else as_finite_matrix(self.X, y.size, "X")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "X", X)

    @property
    def n(self) -> int:
        return self.y.size

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def subset(self, idx) -> "DataSet":
        return DataSet(self.y[idx], self.X[idx])


# ---------------------------------------------------------------------------
# Scalar/vectorised building blocks
# ---------------------------------------------------------------------------

def smooth_abs(x, k1: float = DEFAULT_SMOOTHING[0]):
    """Differentiable ``|x|`` approximation ``sqrt(x^2 + 1/k1)``."""
    return np.sqrt(np.square(x) + 1.0 / k1)


def smooth_indicator(x, k2: float = DEFAULT_SMOOTHING[1]):
    """Logistic approximation of ``I(x >= 0)``."""
    return expit(k2 * np.asarray(x, dtype=float))


def _residual(y_i, x_i, beta):
    return np.asarray(y_i, dtype=float) - np.asarray(x_i, dtype=float) @ np.asarray(beta, dtype=float)


def gaussian_loss(y_i, x_i, params):
    """Gaussian negative log-likelihood ``0.5 log(2 pi s2) + r^2 / (2 s2)``."""
    r = _residual(y_i, x_i, params["beta"])
    s2 = params["sigma2"]
    return 0.5 * (LOG_2PI + np.log(s2)) + r * r / (2.0 * s2)


def gaussian_y_derivatives(r, sigma2) -> YDerivatives:
    r = np.asarray(r, dtype=float)
    return YDerivatives(-r / sigma2, np.full_like(r, -1.0 / sigma2))


def gaussian_hscore(y_i, x_i, params):
    """Hyvarinen score of the Gaussian model, ``-2/s2 + r^2/s2^2``."""
    d = gaussian_y_derivatives(_residual(y_i, x_i, params["beta"]), params["sigma2"])
    return hscore_from_derivatives(d.d1, d.d2)


def tukey_cutoff(sigma2, nu2):
    """Residual cutoff ``kappa * sigma`` with ``kappa = 1/sqrt(nu2)`` (``inf`` at ``nu2=0``)."""
    with np.errstate(divide="ignore"):
        return np.sqrt(sigma2 / nu2) if nu2 > 0 else np.inf


def _tukey_poly(r, sigma2, nu2):
    """``rho`` polynomial in residual units (without the log-normaliser)."""
    z2 = r * r / sigma2
    return z2 / 2.0 - nu2 * z2 * z2 / 2.0 + nu2 * nu2 * z2 ** 3 / 6.0


def tukey_rho(z, nu2):
    """Tukey's bounded loss ``rho(z, kappa)`` of a standardised residual."""
    z = np.asarray(z, dtype=float)
    poly = _tukey_poly(z, 1.0, nu2)
    if nu2 == 0:
        return poly
    return np.where(np.abs(z) <= 1.0 / np.sqrt(nu2), poly, 1.0 / (6.0 * nu2))


def tukey_loss(y_i, x_i, params):
    """Tukey's loss, twice continuously differentiable in the residual."""
    r = _residual(y_i, x_i, params["beta"])
    s2, nu2 = params["sigma2"], params["nu2"]
    if nu2 == 0:  # exactly the Gaussian loss
        return gaussian_loss(y_i, x_i, params)
    return 0.5 * (LOG_2PI + np.log(s2)) + tukey_rho(r / np.sqrt(s2), nu2)


def _tukey_ab(r, s2, nu2):
    """y-derivatives of the loss inside the cutoff: first (a) and second (b)."""
    r2 = r * r
    a = r / s2 - 2.0 * nu2 * r * r2 / s2 ** 2 + nu2 ** 2 * r * r2 * r2 / s2 ** 3
    b = 1.0 / s2 - 6.0 * nu2 * r2 / s2 ** 2 + 5.0 * nu2 ** 2 * r2 * r2 / s2 ** 3
    return a, b


def tukey_y_derivatives(r, sigma2, nu2) -> YDerivatives:
    """Exact derivatives of ``-tukey_loss`` in the observation (zero beyond the cutoff)."""
    r = np.asarray(r, dtype=float)
    a, b = _tukey_ab(r, sigma2, nu2)
    inside = np.abs(r) <= tukey_cutoff(sigma2, nu2)
    return YDerivatives(np.where(inside, -a, 0.0), np.where(inside, -b, 0.0))


def _tukey_indicator(r, s2, nu2, smoothing):
    """Indicator of ``|r| <= cutoff`` and its partials in (r, s2, nu2)."""
    zeros = np.zeros_like(r)
    if nu2 == 0:
        return np.ones_like(r), zeros, zeros, zeros
    c = np.sqrt(s2 / nu2)
    if smoothing is None:
        return (np.abs(r) <= c).astype(float), zeros, zeros, zeros
    k1, k2 = smoothing
    m = smooth_abs(r, k1)
    s = smooth_indicator(c - m, k2)
    ds = s * (1.0 - s) * k2
    return s, -ds * r / m, ds * c / (2.0 * s2), -ds * c / (2.0 * nu2)


def _tukey_hscore_parts(r, s2, nu2, smoothing):
    """Per-observation Tukey H-score and its partials in (r, s2, nu2)."""
    r = np.asarray(r, dtype=float)
    r2 = r * r
    a, b = _tukey_ab(r, s2, nu2)
    poly = a * a - 2.0 * b
    a_r = b
    b_r = -12.0 * nu2 * r / s2 ** 2 + 20.0 * nu2 ** 2 * r * r2 / s2 ** 3
    a_s = -r / s2 ** 2 + 4.0 * nu2 * r * r2 / s2 ** 3 - 3.0 * nu2 ** 2 * r * r2 * r2 / s2 ** 4
    b_s = -1.0 / s2 ** 2 + 12.0 * nu2 * r2 / s2 ** 3 - 15.0 * nu2 ** 2 * r2 * r2 / s2 ** 4
    a_n = -2.0 * r * r2 / s2 ** 2 + 2.0 * nu2 * r * r2 * r2 / s2 ** 3
    b_n = -6.0 * r2 / s2 ** 2 + 10.0 * nu2 * r2 * r2 / s2 ** 3
    ind, ind_r, ind_s, ind_n = _tukey_indicator(r, s2, nu2, smoothing)
    h = ind * poly
    h_r = ind_r * poly + ind * (2.0 * a * a_r - 2.0 * b_r)
    h_s = ind_s * poly + ind * (2.0 * a * a_s - 2.0 * b_s)
    h_n = ind_n * poly + ind * (2.0 * a * a_n - 2.0 * b_n)
    return h, h_r, h_s, h_n


def tukey_hscore(y_i, x_i, params, smoothing=DEFAULT_SMOOTHING):
    """Tukey H-score; ``smoothing=None`` uses the exact indicator."""
    r = _residual(y_i, x_i, params["beta"])
    h = _tukey_hscore_parts(np.atleast_1d(r), params["sigma2"], params["nu2"], smoothing)[0]
    return h if np.ndim(r) else float(h[0])


def breakdown_lhs(params, data: DataSet) -> float:
    """Normalised ``sum rho(r_i/sigma) / rho(kappa, kappa)``; each term lies in [0, 1]."""
    nu2 = params["nu2"]
    if nu2 == 0:
        return 0.0
    z = (data.y - data.X @ params["beta"]) / np.sqrt(params["sigma2"])
    return float(np.sum(6.0 * nu2 * tukey_rho(z, nu2)))


def breakdown_feasible(params, data: DataSet) -> bool:
    """Breakdown constraint ``sum rho / rho(kappa,kappa) <= n/2 - p``."""
    bound = data.n / 2.0 - data.p
    if bound <= 0:
        return False
    return breakdown_lhs(params, data) <= bound


def kde_log_improper(y, i, data_y, params):
    """Tempered log pseudo-density of observation ``i`` evaluated at ``y``.

    The self-term ``K(0)`` stays in the sum as a constant, so it carries no
    y-dependence; the remaining kernels are centred at the other data points.
    """
    data_y = np.asarray(data_y, dtype=float)
    h = check_positive(params["h"], "h")
    w = params["w"]
    n = data_y.size
    others = np.delete(data_y, i)
    logs = np.concatenate([[0.0], -np.square(y - others) / (2.0 * h * h)])
    return w * (logsumexp(logs) - np.log(n * h) - 0.5 * LOG_2PI)


def _kde_pairwise(y, h):
    u = y[:, None] - y[None, :]
    e = np.exp(-np.square(u) / (2.0 * h * h))
    np.fill_diagonal(e, 0.0)
    return u, e


def kde_base_derivatives(data_y, h) -> YDerivatives:
    """Untempered (w=1) y-derivatives of the log pseudo-density at each observation."""
    y = np.asarray(data_y, dtype=float)
    u, e = _kde_pairwise(y, h)
    denom = 1.0 + e.sum(axis=1)
    a1 = (u * e).sum(axis=1) / h ** 2
    b2 = ((u * u / h ** 4 - 1.0 / h ** 2) * e).sum(axis=1)
    d1 = -a1 / denom
    return YDerivatives(d1, b2 / denom - d1 * d1)


def kde_hscore(data_y, params):
    """Per-observation H-score of the tempered KDE pseudo-likelihood.

    Closed form with leave-self-out numerators and self-inclusive
    denominators; equals ``2 w D2 + w^2 D1^2`` in terms of the w=1 derivatives.
    """
    h = check_positive(params["h"], "h")
    w = params["w"]
    y = np.asarray(data_y, dtype=float)
    u, e = _kde_pairwise(y, h)
    denom = 1.0 + e.sum(axis=1)
    a1 = (u * e).sum(axis=1) / h ** 2
    curv = ((u * u / h ** 4 - 1.0 / h ** 2) * e).sum(axis=1)
    return 2.0 * w * curv / denom - (2.0 * w - w * w) * (a1 / denom) ** 2


def _kde_hscore_parts(y, h, w):
    u, e = _kde_pairwise(y, h)
    u2 = u * u
    denom = 1.0 + e.sum(axis=1)
    a1 = (u * e).sum(axis=1) / h ** 2
    b2 = ((u2 / h ** 4 - 1.0 / h ** 2) * e).sum(axis=1)
    e_h = e * u2 / h ** 3
    denom_h = e_h.sum(axis=1)
    a1_h = (u * e).sum(axis=1) * (-2.0 / h ** 3) + (u * e_h).sum(axis=1) / h ** 2
    b2_h = ((-4.0 * u2 / h ** 5 + 2.0 / h ** 3) * e).sum(axis=1) + ((u2 / h ** 4 - 1.0 / h ** 2) * e_h).sum(axis=1)
    d1 = -a1 / denom
    d2 = b2 / denom - d1 * d1
    d1_h = -(a1_h * denom - a1 * denom_h) / denom ** 2
    d2_h = (b2_h * denom - b2 * denom_h) / denom ** 2 - 2.0 * d1 * d1_h
    hs = 2.0 * w * d2 + w * w * d1 * d1
    return hs, 2.0 * w * d2_h + 2.0 * w * w * d1 * d1_h, 2.0 * d2 + 2.0 * w * d1 * d1


def kde_density(x, data_y, h):
    """Standard Gaussian-kernel density estimate at the points ``x``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    data_y = np.asarray(data_y, dtype=float)
    logs = -np.square(x[:, None] - data_y[None, :]) / (2.0 * h * h)
    return np.exp(logsumexp(logs, axis=1) - np.log(data_y.size * h) - 0.5 * LOG_2PI)


def kde_log_density(x, data_y, h):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    data_y = np.asarray(data_y, dtype=float)
    logs = -np.square(x[:, None] - data_y[None, :]) / (2.0 * h * h)
    return logsumexp(logs, axis=1) - np.log(data_y.size * h) - 0.5 * LOG_2PI


def kde_grad_log_density(x, data_y, h):
    """d/dx log of the standard KDE, computed with stabilised kernel weights."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    data_y = np.asarray(data_y, dtype=float)
    diff = x[:, None] - data_y[None, :]
    logs = -np.square(diff) / (2.0 * h * h)
    wts = np.exp(logs - logs.max(axis=1, keepdims=True))
    return -(wts * diff).sum(axis=1) / (wts.sum(axis=1) * h * h)


def kde_predictive_density(x, data_y, params, grid: QuadratureGrid | None = None):
    """Normalised tempered KDE ``g_h(x)^w / int g_h^w`` with the integral on ``grid``."""
    grid = grid or QuadratureGrid()
    h = check_positive(params["h"], "h")
    w = check_positive(params["w"], "w")
    log_norm = _log_tempered_normaliser(data_y, h, w, grid)
    return np.exp(w * kde_log_density(x, data_y, h) - log_norm)


def _log_tempered_normaliser(data_y, h, w, grid):
    logg = w * kde_log_density(grid.nodes, data_y, h)
    top = logg.max()
    norm = grid.integrate(np.exp(logg - top))
    if not norm > 0:
        raise QuadratureFailure("tempered KDE normaliser is not positive")
    return float(np.log(norm) + top)


def tsallis_gaussian_loss(y_i, x_i, params):
    """Density-power (Tsallis) loss applied to the Gaussian model."""
    r = _residual(y_i, x_i, params["beta"])
    s2, bt = params["sigma2"], params["beta_ts"]
    f_b = np.exp(bt * (-0.5 * (LOG_2PI + np.log(s2)) - r * r / (2.0 * s2)))
    integral = (2.0 * np.pi * s2) ** (-bt / 2.0) * (bt + 1.0) ** -0.5
    return -f_b / bt + integral / (bt + 1.0)


def tsallis_y_derivatives(r, sigma2, beta_ts) -> YDerivatives:
    r = np.asarray(r, dtype=float)
    f_b = np.exp(beta_ts * (-0.5 * (LOG_2PI + np.log(sigma2)) - r * r / (2.0 * sigma2)))
    return YDerivatives(f_b * (-r / sigma2), f_b * (beta_ts * (r / sigma2) ** 2 - 1.0 / sigma2))


# ---------------------------------------------------------------------------
# Model classes
# ---------------------------------------------------------------------------

class ImproperModel:
    """Base class: a family bound to a named parameter layout.

    Subclasses define ``blocks`` (name, size-or-None for the covariate count),
    ``lower`` bounds and the per-observation kernels.
    """

    name = "model"
    blocks: tuple = ()
    lower: dict = {}

    def layout(self, data: DataSet):
        return [(name, data.p if size is None else size) for name, size in self.blocks]

    def dim(self, data: DataSet) -> int:
        return sum(size for _, size in self.layout(data))

    def to_vector(self, params, data: DataSet) -> np.ndarray:
        parts = [np.atleast_1d(np.asarray(params[name], dtype=float)).ravel() for name, _ in self.layout(data)]
        return np.concatenate(parts)

    def from_vector(self, vec, data: DataSet) -> dict:
        vec = np.asarray(vec, dtype=float)
        out, k = {}, 0
        for name, size in self.layout(data):
            block = vec[k:k + size]
            out[name] = block.copy() if name == "beta" else float(block[0])
            k += size
        return out

    def coordinate_names(self, data: DataSet) -> list[str]:
        names = []
        for name, size in self.layout(data):
            names.extend([f"{name}[{j}]" for j in range(size)] if name == "beta" else [name])
        return names

    def check_params(self, params, data: DataSet | None = None):
        for name, lo in self.lower.items():
            value = params[name]
            if not np.isfinite(value) or value < lo or (lo == 0 and name in self.strictly_positive and value == 0):
                raise InfeasibleParameters(f"{name}={value!r} outside support")

    strictly_positive: tuple = ()

    def in_support(self, params) -> bool:
        try:
            self.check_params(params)
        except InfeasibleParameters:
            return False
        return True

    def constraint_ok(self, params, data: DataSet) -> bool:
        return True

    # per-observation quantities -------------------------------------------------
    def hscore(self, params, data: DataSet) -> np.ndarray:
        raise NotImplementedError

    def hscore_grad(self, params, data: DataSet) -> np.ndarray:
        """Per-observation gradient, shape (n, d); central differences by default."""
        return _fd_jacobian(lambda v: self.hscore(self.from_vector(v, data), data), self.to_vector(params, data))

    def loss(self, params, data: DataSet) -> np.ndarray:
        raise NotImplementedError

    def loss_grad(self, params, data: DataSet) -> np.ndarray:
        return _fd_jacobian(lambda v: self.loss(self.from_vector(v, data), data), self.to_vector(params, data))

    def log_density_obs(self, params, data: DataSet, i: int, y: float) -> float:
        """Log improper density of observation ``i`` with its response replaced by ``y``."""
        raise NotImplementedError

    def y_derivatives(self, params, data: DataSet) -> YDerivatives:
        raise NotImplementedError

    def initial_params(self, data: DataSet) -> dict:
        raise NotImplementedError


def _fd_jacobian(fun, x0, rel_step=1e-6):
    x0 = np.asarray(x0, dtype=float)
    cols = []
    for j in range(x0.size):
        h = rel_step * max(1.0, abs(x0[j]))
        xp, xm = x0.copy(), x0.copy()
        xp[j] += h
        xm[j] -= h
        cols.append((np.asarray(fun(xp)) - np.asarray(fun(xm))) / (2.0 * h))
    return np.column_stack(cols)


def _robust_start(data: DataSet):
    beta, *_ = np.linalg.lstsq(data.X, data.y, rcond=None)
    r = data.y - data.X @ beta
    mad = 1.4826 * np.median(np.abs(r - np.median(r)))
    s2 = mad ** 2 if mad > 0 else max(float(np.var(r)), 1e-8)
    return beta, s2


class _Regression(ImproperModel):
    lower = {"sigma2": 0.0}
    strictly_positive = ("sigma2",)

    def residuals(self, params, data):
        return data.y - data.X @ params["beta"]

    def _chain_beta(self, h_r, data):
        # residual r = y - X beta
        return -h_r[:, None] * data.X


class GaussianRegression(_Regression):
    """Gaussian linear regression; parameters ``beta`` and ``sigma2``."""

    name = "gaussian"
    blocks = (("beta", None), ("sigma2", 1))

    def y_derivatives(self, params, data):
        return gaussian_y_derivatives(self.residuals(params, data), params["sigma2"])

    def hscore(self, params, data):
        d = self.y_derivatives(params, data)
        return hscore_from_derivatives(d.d1, d.d2)

    def hscore_grad(self, params, data):
        r, s2 = self.residuals(params, data), params["sigma2"]
        h_r = 2.0 * r / s2 ** 2
        h_s = -2.0 * r * r / s2 ** 3 + 2.0 / s2 ** 2
        return np.column_stack([self._chain_beta(h_r, data), h_s])

    def loss(self, params, data):
        return gaussian_loss(data.y, data.X, params)

    def loss_grad(self, params, data):
        r, s2 = self.residuals(params, data), params["sigma2"]
        return np.column_stack([self._chain_beta(r / s2, data), 0.5 / s2 - r * r / (2.0 * s2 ** 2)])

    def log_density_obs(self, params, data, i, y):
        return -float(gaussian_loss(y, data.X[i], params))

    def initial_params(self, data):
        beta, s2 = _robust_start(data)
        return {"beta": beta, "sigma2": s2}


class TukeyRegression(_Regression):
    """Improper model from Tukey's loss with cutoff ``kappa = 1/sqrt(nu2)``.

    ``smoothing=(k1, k2)`` replaces the cutoff indicator in the H-score by a
    logistic of ``cutoff - smooth_abs(r)``; ``smoothing=None`` is exact.
    """

    name = "tukey"
    blocks = (("beta", None), ("sigma2", 1), ("nu2", 1))
    lower = {"sigma2": 0.0, "nu2": 0.0}

    def __init__(self, smoothing=DEFAULT_SMOOTHING, init_nu2: float = 1.0 / 16.0):
        self.smoothing = None if smoothing is None else (float(smoothing[0]), float(smoothing[1]))
        self.init_nu2 = init_nu2

    # At nu2 = 0 the model is exactly Gaussian; the beta/sigma2 blocks are
    # delegated so the two models agree to the last bit.
    _gaussian = GaussianRegression()

    def y_derivatives(self, params, data):
        if params["nu2"] == 0:
            return self._gaussian.y_derivatives(params, data)
        return tukey_y_derivatives(self.residuals(params, data), params["sigma2"], params["nu2"])

    def hscore(self, params, data):
        if params["nu2"] == 0:
            return self._gaussian.hscore(params, data)
        r = self.residuals(params, data)
        return _tukey_hscore_parts(r, params["sigma2"], params["nu2"], self.smoothing)[0]

    def hscore_grad(self, params, data):
        r = self.residuals(params, data)
        _, h_r, h_s, h_n = _tukey_hscore_parts(r, params["sigma2"], params["nu2"], self.smoothing)
        if params["nu2"] == 0:
            return np.column_stack([self._gaussian.hscore_grad(params, data), h_n])
        return np.column_stack([self._chain_beta(h_r, data), h_s, h_n])

    def loss(self, params, data):
        return tukey_loss(data.y, data.X, params)

    def loss_grad(self, params, data):
        r, s2, nu2 = self.residuals(params, data), params["sigma2"], params["nu2"]
        r2 = r * r
        g_n_inside = -r2 * r2 / (2 * s2 ** 2) + nu2 * r2 ** 3 / (3 * s2 ** 3)
        if nu2 == 0:
            return np.column_stack([self._gaussian.loss_grad(params, data), g_n_inside])
        inside = np.abs(r) <= tukey_cutoff(s2, nu2)
        a, _ = _tukey_ab(r, s2, nu2)
        g_r = np.where(inside, a, 0.0)
        g_s = 0.5 / s2 + np.where(
            inside, -r2 / (2 * s2 ** 2) + nu2 * r2 * r2 / s2 ** 3 - nu2 ** 2 * r2 ** 3 / (2 * s2 ** 4), 0.0
        )
        g_n = np.where(inside, g_n_inside, -1.0 / (6.0 * nu2 ** 2))
        return np.column_stack([self._chain_beta(g_r, data), g_s, g_n])

    def log_density_obs(self, params, data, i, y):
        return -float(tukey_loss(y, data.X[i], params))

    def constraint_ok(self, params, data):
        return breakdown_feasible(params, data)

    def initial_params(self, data):
        beta, s2 = _robust_start(data)
        params = {"beta": beta, "sigma2": s2, "nu2": self.init_nu2}
        while not breakdown_feasible(params, data) and params["nu2"] > 1e-8:
            params["nu2"] /= 2.0
        return params


class TemperedKDE(ImproperModel):
    """Gaussian-kernel KDE pseudo-likelihood raised to the power ``w``."""

    name = "kde"
    blocks = (("h", 1), ("w", 1))
    lower = {"h": 0.0, "w": 0.0}
    strictly_positive = ("h", "w")

    def y_derivatives(self, params, data):
        base = kde_base_derivatives(data.y, params["h"])
        return YDerivatives(params["w"] * base.d1, params["w"] * base.d2)

    def hscore(self, params, data):
        return kde_hscore(data.y, params)

    def hscore_grad(self, params, data):
        _, g_h, g_w = _kde_hscore_parts(data.y, params["h"], params["w"])
        return np.column_stack([g_h, g_w])

    def loss(self, params, data):
        return -np.array([kde_log_improper(data.y[i], i, data.y, params) for i in range(data.n)])

    def log_density_obs(self, params, data, i, y):
        return float(kde_log_improper(y, i, data.y, params))

    def initial_params(self, data):
        from .bandwidth import silverman_bandwidth

        return {"h": silverman_bandwidth(data.y), "w": 1.0}


class TsallisGaussianRegression(_Regression):
    """Gaussian model scored with the density-power (Tsallis) loss."""

    name = "tsallis"
    blocks = (("beta", None), ("sigma2", 1), ("beta_ts", 1))
    lower = {"sigma2": 0.0, "beta_ts": 0.0}
    strictly_positive = ("sigma2", "beta_ts")

    def y_derivatives(self, params, data):
        return tsallis_y_derivatives(self.residuals(params, data), params["sigma2"], params["beta_ts"])

    def hscore(self, params, data):
        d = self.y_derivatives(params, data)
        return hscore_from_derivatives(d.d1, d.d2)

    def loss(self, params, data):
        return tsallis_gaussian_loss(data.y, data.X, params)

    def log_density_obs(self, params, data, i, y):
        return -float(tsallis_gaussian_loss(y, data.X[i], params))

    def initial_params(self, data):
        beta, s2 = _robust_start(data)
        return {"beta": beta, "sigma2": s2, "beta_ts": 0.5}


MODEL_FAMILIES = {
    "gaussian": GaussianRegression,
    "tukey": TukeyRegression,
    "kde": TemperedKDE,
    "tsallis": TsallisGaussianRegression,
}
