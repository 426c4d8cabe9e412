"""Lag-order selection criteria.

MIC scores an order by the trace of its residual moment matrix plus a linear
penalty whose slope is tuned from the data: the average drop in sample loss
between ``p_max`` and ``2 p_max`` (where the population loss is flat) scaled
by ``sqrt(n / (k^2 log n))``. AIC, BIC and HQ use the log-determinant of the
same residual matrices.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError, InsufficientData, SingularSigma
from .estimation import FitResult, fit_order, prediction_error_moment, sample_loss_curve
from .timeseries import TimeSeries

__all__ = [
    "CriterionKind",
    "MIC",
    "AIC",
    "BIC",
    "HQ",
    "MIC_SP",
    "MIC_MT",
    "mic_oracle",
    "parse_criterion",
    "parse_criteria",
    "SelectionResult",
    "md",
    "md_mean_of_differences",
    "lambda_st",
    "information_penalty",
    "log_det",
    "criterion_score",
    "argmin_smallest",
    "select_from_fits",
    "select_order",
    "select_many",
    "mic_sp",
    "mic_mt",
    "TRAIN_FRACTION",
]

TRAIN_FRACTION = 0.7


@dataclass(frozen=True)
class CriterionKind:
    name: str
    lam: float | None = None

    def __post_init__(self):
        if self.name not in _NAMES:
            raise ConfigError(f"unknown criterion {self.name!r}")
        if self.name == "MIC_ORACLE" and not (self.lam is not None and self.lam > 0):
            raise ConfigError("MIC_ORACLE needs a strictly positive lambda")

    @property
    def label(self) -> str:
        return self.name.replace("_", "-")

    @property
    def needs_double_range(self) -> bool:
        return self.name in ("MIC", "MIC_SP")

    def __str__(self):
        return self.label


_NAMES = ("MIC", "AIC", "BIC", "HQ", "MIC_ORACLE", "MIC_SP", "MIC_MT")
MIC = CriterionKind("MIC")
AIC = CriterionKind("AIC")
BIC = CriterionKind("BIC")
HQ = CriterionKind("HQ")
MIC_SP = CriterionKind("MIC_SP")
MIC_MT = CriterionKind("MIC_MT")


def mic_oracle(lam: float) -> CriterionKind:
    return CriterionKind("MIC_ORACLE", float(lam))


def parse_criterion(text: str) -> CriterionKind:
    """``"mic"``, ``"aic"``, ``"mic-sp"``, ``"mic-oracle:0.05"`` and so on."""
    name, _, arg = text.strip().partition(":")
    name = name.upper().replace("-", "_")
    if name == "MIC_ORACLE":
        if not arg:
            raise ConfigError("mic-oracle needs a lambda, e.g. mic-oracle:0.05")
        return mic_oracle(float(arg))
    return CriterionKind(name)


def parse_criteria(text: str | Iterable[str]) -> list[CriterionKind]:
    items = text.split(",") if isinstance(text, str) else list(text)
    out: list[CriterionKind] = []
    for item in items:
        if item.strip().lower() == "all":
            out.extend([MIC, AIC, BIC, HQ])
        elif item.strip():
            out.append(parse_criterion(item))
    return list(dict.fromkeys(out))


@dataclass(frozen=True)
class SelectionResult:
    kind: CriterionKind
    scores: np.ndarray
    chosen_order: int
    p_max: int
    penalty_detail: dict = field(default_factory=dict)
    warnings: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "criterion": self.kind.label,
            "p_max": self.p_max,
            "chosen_order": self.chosen_order,
            "scores": [float(s) for s in self.scores],
            "penalty_detail": {k: (float(v) if isinstance(v, (float, np.floating)) else v)
                               for k, v in self.penalty_detail.items()},
            "warnings": list(self.warnings),
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["p", "score"])
        for p, s in enumerate(self.scores):
            w.writerow([p, format(float(s), ".17g")])
        return buf.getvalue()


# -- penalties ---------------------------------------------------------------


def md(losses: Sequence[float]) -> float:
    """Mean consecutive drop of ``L(p_max), ..., L(2 p_max)``.

    The differences telescope, so only the two endpoints matter.
    """
    losses = np.asarray(losses, dtype=float)
    p_max = len(losses) - 1
    if p_max < 1:
        raise ValueError("need losses for orders p_max..2*p_max with p_max >= 1")
    return abs(float(losses[0] - losses[-1])) / p_max


def md_mean_of_differences(losses: Sequence[float]) -> float:
    losses = np.asarray(losses, dtype=float)
    return abs(float(np.mean(losses[:-1] - losses[1:])))


def lambda_st(md_value: float, n: int, k: int) -> float:
    if n <= 1:
        raise InsufficientData(n, 0, "log(n) must be positive")
    return md_value * math.sqrt(n / (k * k * math.log(n)))


def information_penalty(name: str, n: int, k: int) -> float:
    """Per-order penalty slope of the log-determinant criteria."""
    if name == "AIC":
        return 2.0 / n * k * k
    if name == "BIC":
        return math.log(n) / n * k * k
    if name == "HQ":
        if n < 3:
            raise InsufficientData(n, 0, "HQ needs n >= 3 so that log log n is defined")
        return 2.0 * math.log(math.log(n)) / n * k * k
    raise ValueError(f"{name} is not a log-determinant criterion")


def log_det(sigma: np.ndarray, p: int) -> float:
    w = np.linalg.eigvalsh(sigma)
    if not w[0] > 1e-12 * w[-1]:
        raise SingularSigma(p)
    try:
        chol = np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError:
        raise SingularSigma(p) from None
    return 2.0 * float(np.sum(np.log(np.diag(chol))))


def criterion_score(kind: CriterionKind, fit: FitResult, n: int, k: int, lam: float | None = None) -> float:
    """Score of one fitted order. ``lam`` is the MIC penalty slope when applicable."""
    if kind.name in ("AIC", "BIC", "HQ"):
        return log_det(fit.sigma_hat, fit.p) + information_penalty(kind.name, n, k) * fit.p
    if kind.name == "MIC_ORACLE":
        lam = kind.lam
    if lam is None:
        raise ValueError(f"{kind.label} needs a penalty slope")
    return fit.sample_loss + lam * fit.p


def argmin_smallest(scores: Sequence[float]) -> int:
    """Index of the minimum; ties go to the smallest order."""
    scores = np.asarray(scores, dtype=float)
    return int(np.flatnonzero(scores == scores.min())[0])


# -- selection ---------------------------------------------------------------


def _require_data(n: int, k: int, p_top: int) -> None:
    if n - p_top <= k * p_top:
        raise InsufficientData(n, p_top, f"need n - p > k*p = {k * p_top}")


def select_from_fits(
    kind: CriterionKind, fits: Sequence[FitResult], n: int, k: int, p_max: int
) -> SelectionResult:
    """Apply a fit-based criterion to precomputed fits of orders ``0..``.

    MIC needs fits up to ``2 p_max``; the others up to ``p_max``.
    """
    if kind.name in ("MIC_SP", "MIC_MT"):
        raise ValueError(f"{kind.label} needs the series, use mic_sp / mic_mt")
    detail: dict = {}
    warnings: tuple[str, ...] = ()
    lam = None
    if kind.name == "MIC":
        if len(fits) < 2 * p_max + 1:
            raise ValueError(f"MIC needs fits up to order {2 * p_max}")
        md_value = md([f.sample_loss for f in fits[p_max : 2 * p_max + 1]])
        lam = lambda_st(md_value, n, k)
        detail = {"MD": md_value, "lambda_ST": lam}
        if lam == 0.0:
            warnings = ("self-tuned penalty is zero; the smallest minimizer of the loss is reported",)
    elif kind.name == "MIC_ORACLE":
        detail = {"lambda_oracle": kind.lam}
    elif kind.name == "HQ" and n < 3:
        raise InsufficientData(n, 0, "HQ needs n >= 3")
    scores = np.array([criterion_score(kind, fits[p], n, k, lam) for p in range(p_max + 1)])
    return SelectionResult(kind, scores, argmin_smallest(scores), p_max, detail, warnings)


def _prepare(series: TimeSeries | np.ndarray, demean: bool) -> np.ndarray:
    z = series.values if isinstance(series, TimeSeries) else np.asarray(series, dtype=float)
    if z.ndim == 1:
        z = z[:, None]
    return z - z.mean(axis=0) if demean else z


def select_many(
    series: TimeSeries | np.ndarray,
    p_max: int,
    kinds: Sequence[CriterionKind],
    demean: bool = True,
    fits: Sequence[FitResult] | None = None,
) -> dict[CriterionKind, SelectionResult]:
    """Run several criteria sharing one set of per-order fits."""
    z = _prepare(series, demean)
    n, k = z.shape
    if p_max < 1:
        raise ValueError("p_max must be >= 1")
    double = any(c.needs_double_range for c in kinds)
    top = 2 * p_max if double else p_max
    if fits is None or len(fits) < top + 1:
        if double:
            _require_data(n, k, 2 * p_max)
        _require_data(n, k, p_max)
        fits = sample_loss_curve(z, top)
    out = {}
    for kind in kinds:
        if kind.name == "MIC_SP":
            out[kind] = mic_sp(z, p_max, demean=False, full_fits=fits)
        elif kind.name == "MIC_MT":
            out[kind] = mic_mt(z, p_max, demean=False)
        else:
            out[kind] = select_from_fits(kind, fits, n, k, p_max)
    return out


def select_order(
    series: TimeSeries | np.ndarray, p_max: int, kind: CriterionKind = MIC, demean: bool = True
) -> SelectionResult:
    """Minimize ``kind`` over orders ``0..p_max``.

    The series is demeaned once up front unless ``demean=False``.
    """
    return select_many(series, p_max, [kind], demean=demean)[kind]


def _split(z: np.ndarray, p_max: int, top: int) -> int:
    n, k = z.shape
    n_train = int(math.floor(TRAIN_FRACTION * n))
    if n_train - top <= k * top:
        raise InsufficientData(n_train, top, "training split too short")
    if n - n_train < 1:
        raise InsufficientData(n, top, "empty test split")
    return n_train


def mic_sp(
    series: TimeSeries | np.ndarray,
    p_max: int,
    demean: bool = True,
    full_fits: Sequence[FitResult] | None = None,
) -> SelectionResult:
    """MIC with the penalty slope set from held-out prediction errors.

    Orders ``p_max..2 p_max`` are fit on the first 70% of rows; the slope is
    the mean absolute change in trace of the test-set error moment between
    consecutive orders. Final scores use losses fit on the full series.
    """
    z = _prepare(series, demean)
    n, k = z.shape
    n_train = _split(z, p_max, 2 * p_max)
    test_traces = []
    for p in range(p_max, 2 * p_max + 1):
        a_hat = fit_order(z[:n_train], p).A_hat
        test_traces.append(float(np.trace(prediction_error_moment(a_hat, z, n_train))))
    lam = float(np.mean(np.abs(np.diff(test_traces))))
    if full_fits is None or len(full_fits) < p_max + 1:
        _require_data(n, k, p_max)
        full_fits = sample_loss_curve(z, p_max)
    scores = np.array([full_fits[p].sample_loss + lam * p for p in range(p_max + 1)])
    detail = {"lambda_sp": lam, "n_train": n_train, "final_losses": "full series"}
    warnings = ("split penalty is zero; the smallest minimizer of the loss is reported",) if lam == 0 else ()
    return SelectionResult(MIC_SP, scores, argmin_smallest(scores), p_max, detail, warnings)


def mic_mt(series: TimeSeries | np.ndarray, p_max: int, demean: bool = True) -> SelectionResult:
    """Order with the smallest held-out one-step error after a 70/30 split."""
    z = _prepare(series, demean)
    n_train = _split(z, p_max, p_max)
    scores = np.empty(p_max + 1)
    for p in range(p_max + 1):
        a_hat = fit_order(z[:n_train], p).A_hat
        scores[p] = np.trace(prediction_error_moment(a_hat, z, n_train))
    return SelectionResult(MIC_MT, scores, argmin_smallest(scores), p_max, {"n_train": n_train})
