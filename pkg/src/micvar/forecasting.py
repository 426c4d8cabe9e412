"""Rolling-window one-step-ahead forecast evaluation.

Orders are chosen once on the first ``T1 = floor(split * n)`` rows. Every
later row ``t`` is then forecast from the ``T1`` rows before it: the window is
standardized column by column, the target is standardized with the window's
mean and SD, a VAR of the chosen order is fit by least squares and the
forecast is compared with the target in standardized units.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .criteria import AIC, BIC, HQ, MIC, CriterionKind, SelectionResult, select_many
from .errors import InsufficientData
from .estimation import fit_order, predict_one_step
from .timeseries import TimeSeries, sample_sd, standardize_window

__all__ = [
    "ForecastProtocol",
    "CriterionForecast",
    "ForecastReport",
    "one_step_forecast",
    "rolling_forecasts",
    "wmsfe",
    "evaluate",
]


@dataclass(frozen=True)
class ForecastProtocol:
    p_max: int = 10
    criteria: tuple[CriterionKind, ...] = (MIC, AIC, BIC, HQ)
    split: float = 0.8

    def __post_init__(self):
        if not 0 < self.split < 1:
            raise ValueError("split must lie strictly between 0 and 1")

    def window_size(self, n: int) -> int:
        return int(math.floor(self.split * n))


def _standardized_pair(window: np.ndarray, target: np.ndarray | None, p: int):
    w, tgt, _ = standardize_window(TimeSeries(window), target)
    z = w.values
    k = z.shape[1]
    if p > 0 and z.shape[0] - p <= k * p:
        raise InsufficientData(z.shape[0], p, "window too short for this order")
    a_hat = fit_order(z, p).A_hat
    return predict_one_step(a_hat, z), tgt


def one_step_forecast(window: TimeSeries | np.ndarray, p: int) -> np.ndarray:
    """Forecast of the row after ``window``, in the window's standardized units."""
    values = window.values if isinstance(window, TimeSeries) else np.atleast_2d(np.asarray(window, dtype=float))
    return _standardized_pair(values, None, p)[0]


def rolling_forecasts(series: TimeSeries, p: int, window: int) -> tuple[np.ndarray, np.ndarray]:
    """Standardized (actual, forecast) arrays for rows ``window..n-1``."""
    z = series.values
    n = z.shape[0]
    m = n - window
    actual = np.empty((m, series.k))
    forecast = np.empty((m, series.k))
    for i, s in enumerate(range(window, n)):
        try:
            forecast[i], actual[i] = _standardized_pair(z[s - window : s], z[s], p)
        except InsufficientData as exc:
            raise InsufficientData(exc.n, exc.p, f"at forecast row {s}") from None
    return actual, forecast


def wmsfe(actual: np.ndarray, forecast: np.ndarray, sigma: np.ndarray | None = None) -> float:
    """Mean over series and times of ``((y - yhat) / sigma_i)^2``.

    ``sigma`` defaults to the per-series SD of ``actual``.
    """
    actual = np.atleast_2d(np.asarray(actual, dtype=float))
    forecast = np.atleast_2d(np.asarray(forecast, dtype=float))
    if sigma is None:
        sigma = sample_sd(actual)
    return float(np.mean(((actual - forecast) / sigma) ** 2))


@dataclass(frozen=True)
class CriterionForecast:
    criterion: str
    order: int
    wmsfe: float
    forecast: np.ndarray  # (m, k), standardized units
    sq_errors: np.ndarray  # (m, k), ((y - yhat) / sigma_i)^2
    selection: SelectionResult | None = None


@dataclass(frozen=True)
class ForecastReport:
    n: int
    T1: int
    names: tuple[str, ...]
    actual: np.ndarray  # (n - T1, k), standardized units
    sigma_hat: np.ndarray
    results: dict[str, CriterionForecast] = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    @property
    def times(self) -> np.ndarray:
        """1-based time index of every forecast row."""
        return np.arange(self.T1 + 1, self.n + 1)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "T1": self.T1,
            "series": list(self.names),
            "sigma_hat": self.sigma_hat.tolist(),
            "metadata": self.metadata,
            "criteria": {
                name: {
                    "order": r.order,
                    "wmsfe": r.wmsfe,
                    **({"selection": r.selection.to_dict()} if r.selection is not None else {}),
                }
                for name, r in self.results.items()
            },
        }

    def errors_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["criterion", "t", "series", "actual", "forecast", "sq_error"])
        for name, r in self.results.items():
            for i, t in enumerate(self.times):
                for j, s in enumerate(self.names):
                    w.writerow([name, int(t), s, repr(float(self.actual[i, j])),
                                repr(float(r.forecast[i, j])), repr(float(r.sq_errors[i, j]))])
        return buf.getvalue()


def evaluate(
    series: TimeSeries,
    protocol: ForecastProtocol = ForecastProtocol(),
    orders: dict[str, int] | None = None,
) -> ForecastReport:
    """Select orders on the first ``T1`` rows, then forecast every remaining row.

    ``orders`` bypasses selection with fixed ``{label: order}`` pairs.
    """
    n, k = series.n, series.k
    t1 = protocol.window_size(n)
    if n - t1 < 2:
        raise InsufficientData(n, 0, f"forecast segment has {n - t1} rows; need at least 2 for its SD")
    if t1 < 2:
        raise InsufficientData(n, 0, "estimation window too short")

    selections: dict[str, SelectionResult] = {}
    if orders is None:
        chosen = select_many(series.values[:t1], protocol.p_max, list(protocol.criteria))
        selections = {kind.label: res for kind, res in chosen.items()}
        orders = {label: res.chosen_order for label, res in selections.items()}

    # criteria that agree on an order share one rolling pass
    forecasts: dict[int, np.ndarray] = {}
    actual = None
    for p in dict.fromkeys(orders.values()):
        actual, forecasts[p] = rolling_forecasts(series, p, t1)
    if actual is None:
        actual, _ = rolling_forecasts(series, 0, t1)
    sigma = sample_sd(actual)

    out = {}
    for label, p in orders.items():
        f = forecasts[p]
        sq = ((actual - f) / sigma) ** 2
        out[label] = CriterionForecast(label, p, float(np.mean(sq)), f, sq, selections.get(label))
    meta = {
        "units": "standardized",
        "sigma_hat": "SD (n-1 divisor) of standardized actuals over the forecast rows",
        "split": protocol.split,
        "p_max": protocol.p_max,
        "order_selection": "once, on rows 1..T1",
    }
    return ForecastReport(n, t1, series.names, actual, sigma, out, meta)
