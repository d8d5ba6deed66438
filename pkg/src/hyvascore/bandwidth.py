"""Classical KDE bandwidth rules used as competitors and starting values."""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from ._validation import as_finite_vector


class DegenerateData(ValueError):
    """Data with zero spread: no bandwidth is defined."""


def _spread(y):
    y = as_finite_vector(y, "data_y")
    if y.size < 2:
        raise DegenerateData("need at least two observations")
    s = float(np.std(y, ddof=1))
    q75, q25 = np.percentile(y, [75, 25])
    iqr = float(q75 - q25) / 1.34
    if not s > 0:
        raise DegenerateData("data have zero spread")
    return y, s, iqr


def silverman_bandwidth(data_y) -> float:
    """Silverman's rule of thumb ``0.9 min(s, IQR/1.34) n^{-1/5}``."""
    y, s, iqr = _spread(data_y)
    scale = min(s, iqr) if iqr > 0 else s
    return 0.9 * scale * y.size ** -0.2


def ucv_criterion(data_y, h) -> float:
    """Unbiased cross-validation ``int g^2 - (2/n) sum_i g_{-i}(y_i)`` for a Gaussian kernel."""
    y = np.asarray(data_y, dtype=float)
    n = y.size
    d2 = np.square(y[:, None] - y[None, :])
    int_sq = np.exp(-d2 / (4.0 * h * h)).sum() / (n * n * np.sqrt(4.0 * np.pi) * h)
    k = np.exp(-d2 / (2.0 * h * h))
    loo = (k.sum(axis=1) - 1.0) / ((n - 1) * np.sqrt(2.0 * np.pi) * h)
    return float(int_sq - 2.0 * loo.mean())


class UcvResult(NamedTuple):
    h: float
    grid: np.ndarray
    criterion: np.ndarray


def ucv_bandwidth(data_y, grid=None, n_grid: int = 64) -> UcvResult:
    """Grid minimiser of the UCV criterion.

    The default grid is ``n_grid`` log-spaced points on ``[0.05, 5]`` times
    Silverman's bandwidth (which the grid always contains).
    """
    y, _, _ = _spread(data_y)
    if grid is None:
        hs = silverman_bandwidth(y)
        grid = np.unique(np.concatenate([np.geomspace(0.05 * hs, 5.0 * hs, n_grid), [hs]]))
    grid = np.asarray(grid, dtype=float)
    if np.any(grid <= 0):
        raise ValueError("bandwidth grid must be positive")
    crit = np.array([ucv_criterion(y, h) for h in grid])
    return UcvResult(float(grid[int(np.argmin(crit))]), grid, crit)
