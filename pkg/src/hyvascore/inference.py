"""H-posterior and general-Bayes fitting, Hessians, sampling and calibration.

The optimiser works in unconstrained coordinates (logs of positive
parameters) but objective values, gradients and Hessians are reported in
the original coordinates, without a change-of-variables Jacobian, so the
mode is the original-coordinate mode of the penalised objective.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import linalg, optimize

from ._validation import check_random_state
from .models import DataSet, ImproperModel, InfeasibleParameters, tukey_loss
from .priors import PointMass, PriorSpec, log_prior


class InfeasibleStart(RuntimeError):
    """No initial value lies inside the support and the constraints."""


class CalibrationError(RuntimeError):
    pass


class SamplerHealthWarning(UserWarning):
    pass


# ---------------------------------------------------------------------------
# Objective assembly
# ---------------------------------------------------------------------------

class PenalisedObjective:
    """``sum_i score_i(theta) - log prior(theta)`` over the learned coordinates.

    Parameters
    ----------
    model : ImproperModel
    prior : PriorSpec
        Components that are :class:`PointMass` pin their parameter.
    data : DataSet
    score : {"hscore", "loss"}
        Per-observation term: Hyvarinen score (H-posterior) or the model loss
        (general Bayes).
    penalise : bool
        Drop the log-prior when False (unpenalised minimiser).
    """

    def __init__(self, model: ImproperModel, prior: PriorSpec, data: DataSet, score: str = "hscore",
                 penalise: bool = True):
        if score not in ("hscore", "loss"):
            raise ValueError(f"score must be 'hscore' or 'loss', got {score!r}")
        prior.covers(model, data)
        self.model, self.prior, self.data = model, prior, data
        self.score, self.penalise = score, penalise
        self.fixed = prior.fixed_values()
        self.full_layout = model.layout(data)
        self.free_layout = [(n, s) for n, s in self.full_layout if n not in self.fixed]
        self.names = []
        self.lower, self.transform = [], []
        for name, size in self.free_layout:
            for j in range(size):
                self.names.append(f"{name}[{j}]" if name == "beta" else name)
                lo = model.lower.get(name, -np.inf)
                self.lower.append(lo)
                if not np.isfinite(lo):
                    self.transform.append("identity")
                elif name in model.strictly_positive or not prior.is_local(name):
                    self.transform.append("log")
                else:
                    # local prior with positive density at the boundary: keep the
                    # native coordinate and let the optimiser sit on the bound
                    self.transform.append("bounded")
        self.lower = np.asarray(self.lower)
        self.dim = len(self.names)
        full_idx, k = [], 0
        for name, size in self.full_layout:
            if name not in self.fixed:
                full_idx.extend(range(k, k + size))
            k += size
        self._free_idx = np.asarray(full_idx, dtype=int)

    # parameter plumbing -----------------------------------------------------------
    def params(self, theta) -> dict:
        theta = np.asarray(theta, dtype=float)
        out, k = dict(self.fixed), 0
        for name, size in self.free_layout:
            block = theta[k:k + size]
            out[name] = block.copy() if name == "beta" else float(block[0])
            k += size
        return out

    def vector(self, params) -> np.ndarray:
        return self.model.to_vector(params, self.data)[self._free_idx]

    def to_unconstrained(self, theta):
        theta = np.asarray(theta, dtype=float)
        u = theta.copy()
        logs = np.array([t == "log" for t in self.transform])
        u[logs] = np.log(theta[logs])
        return u

    def from_unconstrained(self, u):
        u = np.asarray(u, dtype=float)
        theta = u.copy()
        logs = np.array([t == "log" for t in self.transform])
        theta[logs] = np.exp(u[logs])
        return theta

    def bounds(self):
        return [(lo, None) if t == "bounded" else (None, None) for lo, t in zip(self.lower, self.transform)]

    def feasible(self, theta) -> bool:
        return bool(np.isfinite(self.value(theta)))

    # evaluation -------------------------------------------------------------------
    def _terms(self, params):
        if self.score == "hscore":
            return self.model.hscore(params, self.data)
        return self.model.loss(params, self.data)

    def _term_grads(self, params):
        if self.score == "hscore":
            return self.model.hscore_grad(params, self.data)
        return self.model.loss_grad(params, self.data)

    def in_support(self, theta) -> bool:
        theta = np.asarray(theta, dtype=float)
        if not np.all(np.isfinite(theta)):
            return False
        return bool(np.all(theta >= self.lower) and np.all(theta[[t == "log" for t in self.transform]] > 0))

    def parts(self, theta):
        """``(sum of scores, log prior)``; ``(inf, -inf)`` outside the support."""
        if not self.in_support(theta):
            return np.inf, -np.inf
        params = self.params(theta)
        try:
            self.model.check_params(params)
        except InfeasibleParameters:
            return np.inf, -np.inf
        lp = log_prior(self.prior, params, self.data) if self.penalise else 0.0
        if self.penalise and not np.isfinite(lp):
            return np.inf, -np.inf
        if not self.penalise and not self.model.constraint_ok(params, self.data):
            return np.inf, -np.inf
        try:
            with np.errstate(over="ignore", invalid="ignore"):
                total = float(np.sum(self._terms(params)))
        except (OverflowError, ZeroDivisionError):  # extreme trial points of a line search
            return np.inf, lp
        if not np.isfinite(total):
            return np.inf, lp
        return total, lp

    def value(self, theta) -> float:
        total, lp = self.parts(theta)
        return total - lp if np.isfinite(total) else np.inf

    def __call__(self, theta) -> float:
        return self.value(theta)

    def gradient(self, theta) -> np.ndarray:
        params = self.params(theta)
        g_full = self.model.to_vector(
            {k: v for k, v in zip([n for n, _ in self.full_layout], self._sum_cols(params))}, self.data
        )
        g = g_full[self._free_idx]
        if self.penalise:
            _, lg = log_prior(self.prior, params, self.data, with_grad=True)
            g = g - self.model.to_vector(lg, self.data)[self._free_idx]
        return g

    def _sum_cols(self, params):
        cols = np.sum(self._term_grads(params), axis=0)
        out, k = [], 0
        for name, size in self.full_layout:
            out.append(cols[k:k + size])
            k += size
        return out

    def per_observation_grads(self, theta) -> np.ndarray:
        return self._term_grads(self.params(theta))[:, self._free_idx]

    def projected_gradient_norm(self, theta) -> float:
        g = self.gradient(theta)
        at_bound = np.array([t == "bounded" for t in self.transform]) & (np.asarray(theta) <= self.lower)
        g = np.where(at_bound & (g > 0), 0.0, g)
        return float(np.linalg.norm(g))


# ---------------------------------------------------------------------------
# Hessian
# ---------------------------------------------------------------------------

def fd_step(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return np.maximum(1e-4, 1e-4 * np.abs(x))


def fd_hessian(fun, x, lower=None, step=None):
    """Central-difference Hessian on the full ``d x d`` stencil.

    Where ``x_j - step_j`` would fall below ``lower_j`` the stencil centre is
    shifted up so that all evaluation points stay in the support.

    Returns
    -------
    hessian : ndarray
        Symmetrised Hessian.
    asymmetry : float
        ``max|A - A^T| / max|A|`` before symmetrisation.
    centre : ndarray
        The (possibly shifted) centre used.
    """
    x = np.asarray(x, dtype=float).copy()
    d = x.size
    h = fd_step(x) if step is None else np.broadcast_to(np.asarray(step, dtype=float), (d,)).copy()
    if lower is not None:
        lower = np.asarray(lower, dtype=float)
        x = np.where(x - h < lower, lower + h, x)
    f0 = fun(x)
    cache = {}

    def f(*shifts):
        key = shifts
        if key not in cache:
            xx = x.copy()
            for j, s in shifts:
                xx[j] += s * h[j]
            cache[key] = fun(xx)
        return cache[key]

    A = np.empty((d, d))
    for j in range(d):
        A[j, j] = (f((j, 1)) - 2.0 * f0 + f((j, -1))) / h[j] ** 2
        for k in range(d):
            if k == j:
                continue
            A[j, k] = (f((j, 1), (k, 1)) - f((j, 1), (k, -1)) - f((j, -1), (k, 1)) + f((j, -1), (k, -1))) / (
                4.0 * h[j] * h[k]
            )
    scale = np.max(np.abs(A)) if np.all(np.isfinite(A)) else np.inf
    asym = float(np.max(np.abs(A - A.T)) / scale) if np.isfinite(scale) and scale > 0 else 0.0
    return 0.5 * (A + A.T), asym, x


def is_positive_definite(A) -> bool:
    if not np.all(np.isfinite(A)):
        return False
    try:
        np.linalg.cholesky(A)
    except np.linalg.LinAlgError:
        return False
    return True


# ---------------------------------------------------------------------------
# Fitting
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StartRecord:
    init: np.ndarray
    init_objective: float
    mode: np.ndarray
    objective: float
    converged: bool
    message: str
    n_iter: int


@dataclass(frozen=True)
class FitResult:
    """Penalised optimum with its original-coordinate Hessian and diagnostics."""

    mode: np.ndarray
    params: dict
    objective: float
    hessian: np.ndarray
    converged: bool
    n_restarts_used: int
    gradient_norm: float
    names: list
    sum_score: float
    log_prior: float
    hessian_pd: bool
    hessian_asymmetry: float
    near_boundary: list = field(default_factory=list)
    starts: list = field(default_factory=list)
    score: str = "hscore"
    penalised: bool = True
    model_name: str = ""
    n: int = 0
    gradient: np.ndarray | None = None
    at_bound: list = field(default_factory=list)

    @property
    def d(self) -> int:
        return self.mode.size

    def to_dict(self) -> dict:
        eig = np.linalg.eigvalsh(self.hessian).tolist() if np.all(np.isfinite(self.hessian)) else None
        return {
            "model": self.model_name,
            "names": list(self.names),
            "mode": self.mode.tolist(),
            "params": {k: (np.asarray(v).tolist()) for k, v in self.params.items()},
            "objective": self.objective,
            "sum_score": self.sum_score,
            "log_prior": self.log_prior,
            "converged": self.converged,
            "gradient_norm": self.gradient_norm,
            "n_restarts_used": self.n_restarts_used,
            "hessian_eigenvalues": eig,
            "hessian_pd": self.hessian_pd,
            "near_boundary": list(self.near_boundary),
            "n": self.n,
        }


def default_inits(objective: PenalisedObjective, n_perturbed: int = 3, seed=0) -> list:
    """Moment-based start plus perturbed copies (in unconstrained coordinates)."""
    base_params = dict(objective.model.initial_params(objective.data))
    base_params.update(objective.fixed)
    base = objective.vector(base_params)
    if "sigma2" in base_params and "sigma2" not in objective.fixed:
        # widen the scale until the start satisfies the constraints (breakdown)
        k = objective.names.index("sigma2")
        for _ in range(60):
            if objective.feasible(base):
                break
            base[k] *= 1.5
    rng = check_random_state(seed)
    inits = [base]
    u0 = objective.to_unconstrained(base)
    scale = np.ones_like(u0)
    if "sigma2" in base_params:
        is_beta = np.array([n.startswith("beta[") for n in objective.names])
        scale[is_beta] = np.sqrt(base_params["sigma2"])
    for _ in range(n_perturbed):
        u = u0 + 0.3 * scale * rng.standard_normal(u0.size)
        bounded = np.array([t == "bounded" for t in objective.transform])
        # multiplicative jitter keeps bounded coordinates inside their support
        u[bounded] = base[bounded] * np.exp(0.3 * rng.standard_normal(bounded.sum()))
        inits.append(objective.from_unconstrained(u))
    return inits


def _minimise(objective: PenalisedObjective, theta0, tol):
    # Infeasible trial points get a large *finite* value: an infinite one makes
    # the line search abandon the step instead of backtracking into the
    # feasible region.
    wall = [None]

    def f_and_g(u):
        theta = objective.from_unconstrained(u)
        val = objective.value(theta)
        if not np.isfinite(val):
            return wall[0], np.zeros_like(u)
        try:
            with np.errstate(over="ignore", invalid="ignore"):
                g = objective.gradient(theta)
        except (OverflowError, ZeroDivisionError):  # extreme trial points of a line search
            return wall[0], np.zeros_like(u)
        if not np.all(np.isfinite(g)):
            return wall[0], np.zeros_like(u)
        g = g * np.where([t == "log" for t in objective.transform], theta, 1.0)
        return val, g

    u0 = objective.to_unconstrained(theta0)
    f0 = objective.value(theta0)
    wall[0] = float(f0 + 1e6 * (1.0 + abs(f0)))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        res = optimize.minimize(
            f_and_g, u0, jac=True, method="L-BFGS-B", bounds=objective.bounds(),
            options={"maxiter": 5000, "ftol": tol["ftol"], "gtol": tol["gtol"], "maxcor": 20},
        )
    return objective.from_unconstrained(res.x), res


def fit_objective(objective: PenalisedObjective, inits=None, restarts: int = 3, seed=0,
                  ftol: float = 1e-14, gtol: float = 1e-10, grad_tol: float = 1e-5) -> FitResult:
    """Multi-start minimisation of a :class:`PenalisedObjective`."""
    if inits is None:
        inits = default_inits(objective, restarts, seed)
    else:
        inits = [objective.vector(p) if isinstance(p, dict) else np.asarray(p, dtype=float) for p in inits]
    tol = {"ftol": ftol, "gtol": gtol}
    records = []
    for theta0 in inits:
        f0 = objective.value(theta0)
        if not np.isfinite(f0):
            continue
        theta, res = _minimise(objective, theta0, tol)
        f = objective.value(theta)
        if f > f0:  # never return something worse than the start
            theta, f = np.asarray(theta0, dtype=float), f0
        gnorm = objective.projected_gradient_norm(theta) if np.isfinite(f) else np.inf
        records.append(StartRecord(np.asarray(theta0), f0, theta, f, bool(gnorm < grad_tol * (1 + abs(f))),
                                   str(res.message), int(res.nit)))
    if not records:
        raise InfeasibleStart(f"none of the {len(inits)} initial values is feasible for {objective.model.name}")
    pool = [r for r in records if r.converged] or records
    best = min(pool, key=lambda r: r.objective)
    return _finalise(objective, best, records)


def _finalise(objective, best, records) -> FitResult:
    theta = best.mode
    total, lp = objective.parts(theta)
    A, asym, _ = fd_hessian(objective.value, theta, lower=objective.lower)
    gnorm = objective.projected_gradient_norm(theta)
    near = [
        name for name, x, lo, t in zip(objective.names, theta, objective.lower, objective.transform)
        if t != "identity" and x - lo <= 2.0 * fd_step(x)
    ]
    at_bound = [
        i for i, (x, lo, t) in enumerate(zip(theta, objective.lower, objective.transform))
        if t == "bounded" and x - lo <= 2.0 * fd_step(x)
    ]
    if "nu2" in objective.names and objective.prior.truncate_breakdown and objective.penalise:
        from .models import breakdown_lhs

        params = objective.params(theta)
        slack = (objective.data.n / 2.0 - objective.data.p) - breakdown_lhs(params, objective.data)
        if slack < 0.01 * objective.data.n:
            near.append("breakdown")
    return FitResult(
        mode=theta, params=objective.params(theta), objective=float(best.objective), hessian=A,
        converged=best.converged, n_restarts_used=len(records), gradient_norm=gnorm,
        names=list(objective.names), sum_score=float(total), log_prior=float(lp),
        hessian_pd=is_positive_definite(A), hessian_asymmetry=asym, near_boundary=near,
        starts=records, score=objective.score, penalised=objective.penalise,
        model_name=objective.model.name, n=objective.data.n,
        gradient=objective.gradient(theta), at_bound=at_bound,
    )


def fit_hposterior(model, prior: PriorSpec, data: DataSet, inits=None, restarts: int = 3, seed=0,
                   penalise: bool = True, **tol) -> FitResult:
    """Mode of the H-posterior ``prior * exp(-sum_i H(y_i))``.

    ``penalise=False`` gives the unpenalised H-score minimiser (used by SMIC);
    pinned (point-mass) parameters stay fixed either way.
    """
    return fit_objective(PenalisedObjective(model, prior, data, "hscore", penalise), inits, restarts, seed, **tol)


def pin(prior: PriorSpec, values: dict) -> PriorSpec:
    comps = dict(prior.components)
    for k, v in values.items():
        comps[k] = PointMass(float(v))
    return replace(prior, components=comps)


def fit_general_bayes(model, prior: PriorSpec, data: DataSet, kappa_fixed: dict | None = None, inits=None,
                      restarts: int = 3, seed=0, **tol) -> FitResult:
    """Mode of the loss-based posterior ``prior * exp(-sum_i loss_i)`` with pinned hyperparameters."""
    if kappa_fixed:
        prior = pin(prior, kappa_fixed)
    return fit_objective(PenalisedObjective(model, prior, data, "loss", True), inits, restarts, seed, **tol)


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SamplerResult:
    draws: np.ndarray
    acceptance_rate: float
    scale: float
    healthy: bool


def sample_posterior(objective, init: FitResult, n_draws: int, seed=0, burn_in: int | None = None,
                     target_accept: float = 0.234) -> SamplerResult:
    """Adaptive random-walk Metropolis on ``exp(-objective)``.

    The proposal covariance is the regularised inverse Hessian at the mode;
    the global scale is tuned towards ``target_accept`` during burn-in only,
    so the retained chain is a plain Metropolis chain.
    """
    if not init.converged:
        raise ValueError("sampling requires a converged fit")
    rng = check_random_state(seed)
    d = init.mode.size
    A = np.asarray(init.hessian, dtype=float)
    if not is_positive_definite(A):
        lam = 1e-8 * max(np.trace(np.abs(A)), 1.0) / d
        w, V = np.linalg.eigh(0.5 * (A + A.T))
        A = (V * np.maximum(w, lam)) @ V.T
    L = np.linalg.cholesky(np.linalg.inv(A))
    burn_in = max(1000, n_draws // 5) if burn_in is None else burn_in
    log_scale = np.log(2.38 / np.sqrt(d))
    x = init.mode.copy()
    fx = objective(x)
    out = np.empty((n_draws, d))
    accepted = 0
    for t in range(burn_in + n_draws):
        prop = x + np.exp(log_scale) * (L @ rng.standard_normal(d))
        fp = objective(prop)
        acc = np.isfinite(fp) and np.log(rng.uniform()) < fx - fp
        if acc:
            x, fx = prop, fp
        if t < burn_in:
            log_scale += (float(acc) - target_accept) / np.sqrt(t + 1.0)
        else:
            out[t - burn_in] = x
            accepted += acc
    rate = accepted / n_draws
    healthy = 0.05 <= rate <= 0.7
    if not healthy:
        warnings.warn(f"random-walk acceptance rate {rate:.3f} outside [0.05, 0.7]", SamplerHealthWarning)
    return SamplerResult(out, float(rate), float(np.exp(log_scale)), healthy)


# ---------------------------------------------------------------------------
# Sandwich calibration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SandwichMatrices:
    J: np.ndarray
    K: np.ndarray
    singular_J: bool

    def sandwich_covariance(self) -> np.ndarray:
        Jinv = np.linalg.inv(self.J)
        return Jinv @ self.K @ Jinv


def sandwich(model, params, data: DataSet, names=None, score: str = "loss", prior: PriorSpec | None = None):
    """Per-observation expected Hessian ``J`` and gradient covariance ``K``.

    ``J`` is the central-difference Jacobian of the mean per-observation
    gradient; ``K`` the (centred) covariance of per-observation gradients.
    Pass a prior with point masses to exclude pinned hyperparameters.
    """
    if prior is None:
        prior = PriorSpec({name: _Free() for name, _ in model.layout(data)})
    obj = PenalisedObjective(model, prior, data, score, penalise=False)
    theta = obj.vector(params)

    def mean_grad(t):
        return obj.per_observation_grads(t).mean(axis=0)

    d = theta.size
    h = fd_step(theta)
    J = np.empty((d, d))
    for j in range(d):
        tp, tm = theta.copy(), theta.copy()
        tp[j] += h[j]
        tm[j] -= h[j]
        J[:, j] = (mean_grad(tp) - mean_grad(tm)) / (2.0 * h[j])
    J = 0.5 * (J + J.T)
    G = obj.per_observation_grads(theta)
    G = G - G.mean(axis=0)
    K = G.T @ G / data.n
    singular = np.linalg.cond(J) > 1e12
    return SandwichMatrices(J, K, bool(singular))


class _Free(PointMass):
    """Marker component for an unpenalised, learned coordinate."""

    fixed = False
    nonlocal_at_zero = False

    def __init__(self):
        object.__setattr__(self, "value", 0.0)


def _sym_sqrt(M):
    w, V = np.linalg.eigh(0.5 * (M + M.T))
    if np.any(w <= 0):
        raise CalibrationError("matrix is not positive definite")
    return (V * np.sqrt(w)) @ V.T


def calibration_matrix(s: SandwichMatrices) -> np.ndarray:
    """``C = J^{-1/2} Sigma^{1/2}`` with ``Sigma = J K^{-1} J``; satisfies ``C^T J C = Sigma``."""
    try:
        Kinv = np.linalg.inv(s.K)
    except np.linalg.LinAlgError as exc:
        raise CalibrationError("K is not invertible") from exc
    if s.singular_J:
        raise CalibrationError("J is singular")
    Sigma = s.J @ Kinv @ s.J
    return np.linalg.inv(_sym_sqrt(s.J)) @ _sym_sqrt(Sigma)


def calibrate_posterior(draws, mode, s: SandwichMatrices) -> np.ndarray:
    """Draws from the calibrated density ``pi(mode + C (theta - mode))``.

    If ``theta'`` is drawn from the uncalibrated posterior then
    ``mode + C^{-1} (theta' - mode)`` follows the calibrated one; its
    covariance is ``J^{-1} K J^{-1} / n`` for a Gaussian-shaped posterior.
    """
    draws = np.atleast_2d(np.asarray(draws, dtype=float))
    mode = np.asarray(mode, dtype=float)
    Cinv = np.linalg.inv(calibration_matrix(s))
    return mode + (draws - mode) @ Cinv.T


# ---------------------------------------------------------------------------
# Asymptotic MSE of the Tukey location estimate
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AsymptoticMSE:
    kappa2: float
    location: float
    bias2: float
    variance: float
    rmse: float


def asymptotic_mse(kappa2: float, eps: float = 0.1, n: int = 500, clean=(0.0, 1.0), outlier=(5.0, 3.0),
                   sigma2: float | None = None, n_nodes: int = 20001) -> AsymptoticMSE:
    """Squared bias plus sandwich variance of the Tukey location minimiser.

    The generating density is ``(1-eps) N(clean) + eps N(outlier)`` with
    ``(mean, sd)`` pairs. The scale is held at the clean variance (or
    ``sigma2``) because the expected loss is unbounded below in the scale.
    ``kappa2 = inf`` gives the Gaussian loss.
    """
    from scipy.stats import norm

    m0, s0 = clean
    m1, s1 = outlier
    s2 = s0 ** 2 if sigma2 is None else sigma2
    nu2 = 0.0 if not np.isfinite(kappa2) else 1.0 / kappa2 ** 2
    lo = min(m0 - 12 * s0, m1 - 12 * s1)
    hi = max(m0 + 12 * s0, m1 + 12 * s1)
    y = np.linspace(lo, hi, n_nodes)
    from .score import QuadratureGrid

    grid = QuadratureGrid(lo, hi, n_nodes)
    g = (1 - eps) * norm.pdf(y, m0, s0) + eps * norm.pdf(y, m1, s1)
    X = np.ones((y.size, 1))

    def risk(mu):
        return grid.integrate(tukey_loss(y, X, {"beta": np.array([mu]), "sigma2": s2, "nu2": nu2}) * g)

    # the expected loss can be multimodal in the location: scan, then polish
    scan = np.linspace(m0 - 3 * s0, max(m0 + 3 * s0, m1), 121)
    start = scan[int(np.argmin([risk(m) for m in scan]))]
    step = scan[1] - scan[0]
    res = optimize.minimize_scalar(risk, bounds=(start - step, start + step), method="bounded",
                                   options={"xatol": 1e-10})
    if not res.success or not np.isfinite(res.fun):
        raise RuntimeError("asymptotic MSE optimisation failed")
    mu = float(res.x)
    r = y - mu
    # d loss / d mu = -a(r) inside the cutoff; second derivative = b(r)
    inside = np.ones_like(r, dtype=bool) if nu2 == 0 else np.abs(r) <= np.sqrt(s2 / nu2)
    a = r / s2 - 2 * nu2 * r ** 3 / s2 ** 2 + nu2 ** 2 * r ** 5 / s2 ** 3
    b = 1 / s2 - 6 * nu2 * r ** 2 / s2 ** 2 + 5 * nu2 ** 2 * r ** 4 / s2 ** 3
    grad = np.where(inside, -a, 0.0)
    J = grid.integrate(np.where(inside, b, 0.0) * g)
    mean_grad = grid.integrate(grad * g)
    K = grid.integrate(grad ** 2 * g) - mean_grad ** 2
    bias2 = (mu - m0) ** 2
    var = K / (J * J * n)
    return AsymptoticMSE(float(kappa2), mu, float(bias2), float(var), float(np.sqrt(bias2 + var)))
