"""Hyvarinen score primitives and the numerical oracles used to check them.

The Hyvarinen score of a (possibly improper) density ``f`` at ``y`` is

    H(y; f) = 2 * d2 + d1**2,

with ``d1`` and ``d2`` the first and second derivatives of ``log f`` with
respect to ``y``. Only derivatives of ``log f`` enter, so the normalising
constant never matters.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np


class OracleFailure(RuntimeError):
    """Raised when a finite-difference oracle meets non-finite evaluations."""


class QuadratureFailure(RuntimeError):
    """Raised when a quadrature estimate is inconsistent (e.g. negative divergence)."""


class YDerivatives(NamedTuple):
    """First and second derivatives of ``log f`` with respect to the observation."""

    d1: np.ndarray | float
    d2: np.ndarray | float


@dataclass(frozen=True)
class QuadratureGrid:
    """Composite Simpson grid on ``[lo, hi]`` with an odd number of nodes."""

    lo: float = -10.0
    hi: float = 10.0
    n_points: int = 4001

    def __post_init__(self):
        if not (np.isfinite(self.lo) and np.isfinite(self.hi)) or self.hi <= self.lo:
            raise ValueError(f"need finite lo < hi, got lo={self.lo}, hi={self.hi}")
        if self.n_points < 3 or self.n_points % 2 == 0:
            raise ValueError(f"n_points must be odd and >= 3, got {self.n_points}")

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.n_points)

    @property
    def weights(self) -> np.ndarray:
        step = (self.hi - self.lo) / (self.n_points - 1)
        w = np.ones(self.n_points)
        w[1:-1:2] = 4.0
        w[2:-1:2] = 2.0
        return w * step / 3.0

    def integrate(self, values) -> float:
        """Simpson integral of ``values`` sampled at :attr:`nodes`."""
        values = np.asarray(values, dtype=float)
        return float(values @ self.weights)


def hscore_from_derivatives(d1, d2):
    """Univariate Hyvarinen score ``2*d2 + d1**2`` (elementwise).

    Non-finite inputs are propagated so callers can flag them.
    """
    d1 = np.asarray(d1, dtype=float)
    d2 = np.asarray(d2, dtype=float)
    out = 2.0 * d2 + d1 * d1
    return out if out.ndim else float(out)


def hscore_multivariate(d1_vec, d2_diag) -> float:
    """Multivariate Hyvarinen score ``2*sum(d2_diag) + ||d1_vec||^2``.

    Parameters
    ----------
    d1_vec : array_like, shape (d,)
        Gradient of ``log f`` with respect to the observation.
    d2_diag : array_like, shape (d,)
        Pure second derivatives (diagonal of the Hessian of ``log f``).
    """
    d1_vec = np.atleast_1d(np.asarray(d1_vec, dtype=float))
    d2_diag = np.atleast_1d(np.asarray(d2_diag, dtype=float))
    if d1_vec.ndim != 1 or d1_vec.shape != d2_diag.shape or d1_vec.size == 0:
        raise ValueError(
            f"d1_vec and d2_diag must be 1-d of equal positive length, "
            f"got {d1_vec.shape} and {d2_diag.shape}"
        )
    return float(2.0 * d2_diag.sum() + d1_vec @ d1_vec)


class ScoreBreakdown(NamedTuple):
    total: float
    per_observation: np.ndarray
    nonfinite: np.ndarray  # indices of observations with non-finite scores


def total_hscore(model, params, data) -> ScoreBreakdown:
    """Sum of per-observation Hyvarinen scores of ``model`` at ``params``.

    Raises ``InfeasibleParameters`` (from :mod:`hyvascore.models`) when the
    parameters violate the model's constraints.
    """
    model.check_params(params)
    per_obs = np.asarray(model.hscore(params, data), dtype=float)
    bad = np.flatnonzero(~np.isfinite(per_obs))
    return ScoreBreakdown(float(per_obs.sum()), per_obs, bad)


def default_fd_step(y) -> float:
    return 1e-4 * max(1.0, abs(float(y)))


def fd_y_derivatives(logf: Callable[[float], float], y: float, h: float | None = None) -> YDerivatives:
    """Central-difference first and second derivatives of ``logf`` at ``y``."""
    if h is None:
        h = default_fd_step(y)
    f_minus, f_zero, f_plus = (float(logf(y + s)) for s in (-h, 0.0, h))
    if not np.all(np.isfinite([f_minus, f_zero, f_plus])):
        raise OracleFailure(f"log-density not finite near y={y!r} (step {h!r})")
    d1 = (f_plus - f_minus) / (2.0 * h)
    d2 = (f_plus - 2.0 * f_zero + f_minus) / (h * h)
    return YDerivatives(d1, d2)


def fd_hscore(logf: Callable[[float], float], y: float, h: float | None = None) -> float:
    d = fd_y_derivatives(logf, y, h)
    return hscore_from_derivatives(d.d1, d.d2)


def fisher_divergence(
    grad_log_g: Callable,
    grad_log_f: Callable,
    g_pdf: Callable,
    grid: QuadratureGrid | None = None,
) -> float:
    """Simpson estimate of ``0.5 * int (grad_log_g - grad_log_f)^2 g``.

    All three callables must accept a vector of nodes.
    """
    grid = grid or QuadratureGrid()
    x = grid.nodes
    g = np.asarray(g_pdf(x), dtype=float)
    if np.any(g < 0):
        raise QuadratureFailure("g_pdf returned negative values")
    diff = np.asarray(grad_log_g(x), dtype=float) - np.asarray(grad_log_f(x), dtype=float)
    # zero-density nodes carry no weight even if the log-gradients overflow there
    integrand = np.where(g > 0, 0.5 * diff * diff * g, 0.0)
    if not np.all(np.isfinite(integrand)):
        raise QuadratureFailure("non-finite integrand in Fisher divergence")
    value = grid.integrate(integrand)
    if value < -1e-10:
        raise QuadratureFailure(f"negative Fisher divergence {value!r}")
    return max(value, 0.0)
