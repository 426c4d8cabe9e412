"""Least-squares VAR fits and the per-order sample loss.

Matrices follow the column-per-time-point layout: ``Y_p`` is ``k x (n-p)``
and ``X_p`` stacks the ``p`` lagged observations, most recent lag first.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import InsufficientData, SingularGram
from .timeseries import TimeSeries

__all__ = [
    "GRAM_CONDITION_LIMIT",
    "DesignMatrices",
    "FitResult",
    "build_design",
    "ols_fit",
    "fit_order",
    "sample_loss_curve",
    "aligned_loss_curve",
    "predict_one_step",
    "prediction_error_moment",
]

GRAM_CONDITION_LIMIT = 1e12


def _as_array(series: TimeSeries | np.ndarray) -> np.ndarray:
    z = series.values if isinstance(series, TimeSeries) else np.asarray(series, dtype=float)
    return z[:, None] if z.ndim == 1 else z


@dataclass(frozen=True)
class DesignMatrices:
    Y: np.ndarray  # k x (n - p)
    X: np.ndarray  # kp x (n - p)
    p: int

    @property
    def n_effective(self) -> int:
        return self.Y.shape[1]

    @property
    def k(self) -> int:
        return self.Y.shape[0]


@dataclass(frozen=True)
class FitResult:
    p: int
    A_hat: np.ndarray  # k x kp
    sigma_hat: np.ndarray  # k x k
    sample_loss: float
    n_effective: int

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "n_effective": self.n_effective,
            "sample_loss": self.sample_loss,
            "A_hat": self.A_hat.tolist(),
            "sigma_hat": self.sigma_hat.tolist(),
        }


def build_design(series: TimeSeries | np.ndarray, p: int) -> DesignMatrices:
    z = _as_array(series)
    n, k = z.shape
    if p < 0:
        raise ValueError("order must be nonnegative")
    if n <= p:
        raise InsufficientData(n, p, "need n > p")
    y = z[p:].T.copy()
    if p == 0:
        x = np.zeros((0, n))
    else:
        # row block i holds lag i + 1
        x = np.vstack([z[p - i - 1 : n - i - 1].T for i in range(p)])
    return DesignMatrices(y, x, p)


def ols_fit(design: DesignMatrices) -> FitResult:
    """Solve the normal equations ``A X X^T = Y X^T`` and form the residual moment.

    ``sigma_hat = (Y - A X)(Y - A X)^T / (n - p)``; its trace is the sample loss.
    """
    y, x, p = design.Y, design.X, design.p
    k, m = y.shape
    if p == 0:
        a_hat = np.zeros((k, 0))
        resid = y
    else:
        if m <= x.shape[0]:
            raise InsufficientData(m + p, p, f"{m} usable rows for {x.shape[0]} regressors")
        gram = x @ x.T
        rhs = x @ y.T
        w = np.linalg.eigvalsh(gram)
        cond = w[-1] / w[0] if w[0] > 0 else np.inf
        if cond > GRAM_CONDITION_LIMIT:
            raise SingularGram(p, float(cond))
        try:
            a_hat = linalg.cho_solve(linalg.cho_factor(gram), rhs).T
        except linalg.LinAlgError:
            a_hat = linalg.lstsq(x.T, y.T)[0].T
        resid = y - a_hat @ x
    sigma = resid @ resid.T / m
    sigma = (sigma + sigma.T) / 2
    return FitResult(p, a_hat, sigma, float(np.trace(sigma)), m)


def fit_order(series: TimeSeries | np.ndarray, p: int) -> FitResult:
    return ols_fit(build_design(series, p))


def sample_loss_curve(series: TimeSeries | np.ndarray, p_max_fit: int) -> list[FitResult]:
    """One fit per order ``0..p_max_fit``, each on its own ``n - p`` rows."""
    z = _as_array(series)
    return [fit_order(z, p) for p in range(p_max_fit + 1)]


def aligned_loss_curve(series: TimeSeries | np.ndarray, p_max_fit: int) -> np.ndarray:
    """Sample losses with every order fit to the same last ``n - p_max_fit`` rows.

    Unlike ``sample_loss_curve`` this is nonincreasing in ``p`` (nested least
    squares on a common sample).
    """
    z = _as_array(series)
    out = np.empty(p_max_fit + 1)
    for p in range(p_max_fit + 1):
        out[p] = fit_order(z[p_max_fit - p :], p).sample_loss
    return out


def predict_one_step(a_hat: np.ndarray, history: np.ndarray) -> np.ndarray:
    """Forecast the row after ``history`` (shape ``(>=p, k)``) from a fitted ``A_hat``."""
    k = a_hat.shape[0]
    p = a_hat.shape[1] // k
    if p == 0:
        return np.zeros(k)
    lagged = history[-p:][::-1].ravel()
    return a_hat @ lagged


def prediction_error_moment(a_hat: np.ndarray, z: np.ndarray, start: int) -> np.ndarray:
    """``(1/m) sum e_t e_t^T`` of one-step errors for rows ``start..n-1`` of ``z``.

    Lag windows may reach back before ``start``.
    """
    z = _as_array(z)
    k = z.shape[1]
    p = a_hat.shape[1] // k
    if start < p or start >= z.shape[0]:
        raise InsufficientData(z.shape[0], p, f"test rows start at {start}")
    d = build_design(z, p)
    first = start - p
    resid = d.Y[:, first:] - a_hat @ d.X[:, first:] if p else d.Y[:, first:]
    return resid @ resid.T / resid.shape[1]
