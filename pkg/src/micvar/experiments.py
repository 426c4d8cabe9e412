"""Monte Carlo order-selection experiments.

A named setting fixes the lag-coefficient recipe; an error structure
(``diag``, ``nondiag``, ``mixture``) fixes the noise. Coefficients and noise
parameters are drawn once from ``process_seed``; every replicate then gets its
own generator derived from ``(seed, n, b)`` so results do not depend on the
order in which replicates run.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .criteria import CriterionKind, mic_oracle, parse_criterion, select_from_fits, mic_mt, mic_sp
from .errors import ConfigError, MicvarError, StabilityRejectionExceeded
from .estimation import sample_loss_curve
from .process import (
    GaussianDiagonal,
    GaussianFull,
    GaussianMixture,
    NoiseSpec,
    RegimeSwitchingMean,
    VarCoefficients,
    is_stable,
    noise_from_dict,
    population_loss_curve,
    oracle_lambda_window,
    simulate,
)

__all__ = [
    "SETTINGS",
    "DEFAULT_N",
    "MAX_STABILITY_ATTEMPTS",
    "generate_coefficients",
    "generate_error_covariance",
    "generate_mixture_noise_spec",
    "build_process",
    "ExperimentConfig",
    "Cell",
    "ExperimentResult",
    "over_under_stats",
    "run_experiment",
    "run_replicate",
    "replicate_seed",
]

MAX_STABILITY_ATTEMPTS = 10_000
DEFAULT_N = (250, 500, 1000, 2000, 5000)

# (sparsity, draw rule, lo, hi): "pm" draws U(lo, hi) or U(-hi, -lo) with
# equal probability, "sym" draws U(lo, hi).
SETTINGS: dict[str, dict] = {
    "AR2": {"k": 1, "fixed": [[[0.3]], [[0.1]]]},
    "VAR2_2": {"k": 2, "lags": [(0.25, "pm", 0.1, 0.3), (0.50, "pm", 0.07, 0.2)]},
    "VAR5_3": {"k": 5, "lags": [(0.6, "pm", 0.1, 0.3), (0.6, "pm", 0.1, 0.2), (0.6, "pm", 0.05, 0.1)]},
    "VAR10_3": {
        "k": 10,
        "lags": [(0.4, "pm", 0.1, 0.3), (0.8, "sym", -0.2, 0.2), (0.8, "sym", -0.1, 0.1)],
        "min_n": 500,
    },
    "VAR3_2_SWITCH": {"k": 3, "lags": [(0.3, "pm", 0.1, 0.3), (0.6, "pm", 0.1, 0.2)], "switching": True},
}


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def _draw_lag_matrix(rng: np.random.Generator, k: int, sparsity: float, rule: str, lo: float, hi: float):
    size = k * k
    n_zero = _round_half_up(sparsity * size)
    if rule == "pm":
        mag = rng.uniform(lo, hi, size)
        vals = np.where(rng.random(size) < 0.5, mag, -mag)
    else:
        vals = rng.uniform(lo, hi, size)
    vals[rng.choice(size, size=n_zero, replace=False)] = 0.0
    return vals.reshape(k, k)


def generate_coefficients(setting_name: str, seed=None) -> VarCoefficients:
    """Draw lag matrices for a named setting, redrawing the whole set until stable."""
    try:
        spec = SETTINGS[setting_name]
    except KeyError:
        raise ConfigError(f"unknown setting {setting_name!r}; choose from {sorted(SETTINGS)}") from None
    if "fixed" in spec:
        return VarCoefficients(tuple(np.array(a, dtype=float) for a in spec["fixed"]))
    rng = np.random.default_rng(seed)
    k = spec["k"]
    for _ in range(MAX_STABILITY_ATTEMPTS):
        coef = VarCoefficients(tuple(_draw_lag_matrix(rng, k, *lag) for lag in spec["lags"]))
        if is_stable(coef)[0]:
            return coef
    raise StabilityRejectionExceeded(MAX_STABILITY_ATTEMPTS)


def _condition(s: np.ndarray) -> float:
    w = np.linalg.eigvalsh(s)
    return w[-1] / w[0] if w[0] > 0 else np.inf


def _recondition(s: np.ndarray, max_cond: float, step: float) -> np.ndarray:
    # adding c to the diagonal shifts every eigenvalue by c; jump straight to
    # the first multiple of `step` that meets the bound, then confirm
    w = np.linalg.eigvalsh(s)
    if w[0] > 0 and w[-1] <= max_cond * w[0]:
        return s
    need = (w[-1] - max_cond * w[0]) / (max_cond - 1)
    n_steps = max(1, math.ceil(need / step - 1e-9))
    s = s + n_steps * step * np.eye(len(s))
    while _condition(s) > max_cond:
        s = s + step * np.eye(len(s))
    return s


def generate_error_covariance(k: int, seed=None, max_cond: float = 100.0, step: float = 0.001) -> np.ndarray:
    """Random unit-variance SPD matrix with condition number at most ``max_cond``.

    ``B^T B`` for ``B ~ U(-3, 3)`` is reconditioned by adding ``step`` to the
    diagonal and then rescaled to unit variances. Rescaling can raise the
    condition number again, in which case the loop repeats on the rescaled
    matrix (where a diagonal shift keeps the diagonal uniform).
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    b = rng.uniform(-3.0, 3.0, (k, k))
    s = b.T @ b
    for _ in range(100):
        s = _recondition(s, max_cond, step)
        d = 1.0 / np.sqrt(np.diag(s))
        s = s * np.outer(d, d)
        s = (s + s.T) / 2
        np.fill_diagonal(s, 1.0)
        if _condition(s) <= max_cond:
            return s
    raise RuntimeError("reconditioning did not converge")


def generate_mixture_noise_spec(k: int, seed=None, n_components: int = 5) -> GaussianMixture:
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    means = rng.uniform(-5.0, 5.0, (n_components, k))
    means -= means.mean(axis=0)
    covs = np.stack([generate_error_covariance(k, rng) for _ in range(n_components)])
    weights = np.full(n_components, 1.0 / n_components)
    return GaussianMixture(weights, means, covs)


def build_process(setting: str, noise: str = "diag", process_seed: int = 0) -> tuple[VarCoefficients, NoiseSpec]:
    """Coefficients and noise for a named setting.

    The coefficient draw depends only on ``process_seed``, so all error
    structures share the same lag matrices.
    """
    coef = generate_coefficients(setting, np.random.default_rng([process_seed, 0]))
    k = coef.k
    rng = np.random.default_rng([process_seed, 1])
    if SETTINGS[setting].get("switching"):
        base = GaussianFull(generate_error_covariance(k, rng))
        return coef, RegimeSwitchingMean(base, rng.uniform(-0.5, 0.5, (2, k)))
    if noise == "diag":
        return coef, GaussianDiagonal(np.ones(k))
    if noise == "nondiag":
        return coef, GaussianFull(generate_error_covariance(k, rng))
    if noise == "mixture":
        return coef, generate_mixture_noise_spec(k, rng)
    raise ConfigError(f"unknown error structure {noise!r}")


# -- configuration -------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment grid.

    ``criteria`` holds names as accepted by ``parse_criterion``; a bare
    ``"mic-oracle"`` means the oracle penalty ``M / 2`` of the true process.
    """

    setting: str | None = "AR2"
    noise: str = "diag"
    n_values: tuple[int, ...] = DEFAULT_N
    B: int = 250
    p_max: int = 10
    criteria: tuple[str, ...] = ("mic", "aic", "bic", "hq")
    seed: int = 0
    process_seed: int = 0
    process: tuple[VarCoefficients, NoiseSpec] | None = None
    true_order: int | None = None
    name: str = ""

    def __post_init__(self):
        if self.B < 1:
            raise ConfigError("B must be >= 1")
        if self.p_max < 1:
            raise ConfigError("p_max must be >= 1")
        if self.setting is None and self.process is None:
            raise ConfigError("give either a named setting or a custom process")
        if self.setting is not None and self.setting not in SETTINGS:
            raise ConfigError(f"unknown setting {self.setting!r}")
        if not self.n_values:
            raise ConfigError("need at least one sample size")
        for c in self.criteria:
            if c.strip().lower() != "mic-oracle":
                parse_criterion(c)

    @property
    def label(self) -> str:
        if self.name:
            return self.name
        return f"{self.setting}_{self.noise}" if self.setting else "custom"

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {"name", "setting", "noise", "n", "B", "p_max", "criteria", "seed", "process_seed",
                 "process", "true_order"}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        process = None
        if "process" in d:
            pd = d["process"]
            noise = noise_from_dict(pd["noise"])
            process = (VarCoefficients.from_dict({"k": noise.k, **pd}), noise)
        setting = d.get("setting", None if process else "AR2")
        n_default = DEFAULT_N
        if setting and "min_n" in SETTINGS.get(setting, {}):
            n_default = tuple(n for n in DEFAULT_N if n >= SETTINGS[setting]["min_n"])
        crit = d.get("criteria", ["mic", "aic", "bic", "hq"])
        if isinstance(crit, str):
            crit = crit.split(",")
        return cls(
            setting=setting,
            noise=d.get("noise", "diag"),
            n_values=tuple(int(n) for n in d.get("n", n_default)),
            B=int(d.get("B", 250)),
            p_max=int(d.get("p_max", 10)),
            criteria=tuple(c.strip() for c in crit),
            seed=int(d.get("seed", 0)),
            process_seed=int(d.get("process_seed", 0)),
            process=process,
            true_order=d.get("true_order"),
            name=d.get("name", ""),
        )

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from None


# -- results -------------------------------------------------------------------


@dataclass(frozen=True)
class Cell:
    criterion: str
    n: int
    B: int
    correct: int
    over: int
    under: int
    failed: int

    @property
    def accuracy(self) -> float:
        return self.correct / self.B

    @property
    def over_rate(self) -> float:
        return self.over / self.B

    @property
    def under_rate(self) -> float:
        return self.under / self.B

    @property
    def failure_rate(self) -> float:
        return self.failed / self.B

    @property
    def se(self) -> float:
        acc = self.accuracy
        return math.sqrt(acc * (1 - acc) / self.B)


@dataclass
class ExperimentResult:
    setting: str
    true_order: int
    cells: list[Cell]
    chosen: dict[tuple[str, int], list[int | None]]
    oracle_lambda: float | None = None
    failures: dict[tuple[str, int], list[str]] = field(default_factory=dict)

    def cell(self, criterion: str, n: int) -> Cell:
        for c in self.cells:
            if c.criterion == criterion and c.n == n:
                return c
        raise KeyError((criterion, n))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["setting", "criterion", "n", "accuracy", "se", "over", "under", "failures"])
        for c in self.cells:
            w.writerow([self.setting, c.criterion, c.n, repr(c.accuracy), repr(c.se),
                        repr(c.over_rate), repr(c.under_rate), repr(c.failure_rate)])
        return buf.getvalue()


def over_under_stats(chosen_orders: Sequence[int | None], p0: int) -> tuple[float, float]:
    """Fractions of replicates choosing above / below ``p0``; failures count as neither."""
    b = len(chosen_orders)
    if b == 0:
        return 0.0, 0.0
    over = sum(1 for p in chosen_orders if p is not None and p > p0)
    under = sum(1 for p in chosen_orders if p is not None and p < p0)
    return over / b, under / b


# -- execution -----------------------------------------------------------------


def replicate_seed(seed: int, n: int, b: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([seed, 1, n, b])


def run_replicate(
    coef: VarCoefficients,
    noise: NoiseSpec,
    n: int,
    seed_seq: np.random.SeedSequence,
    p_max: int,
    kinds: Sequence[CriterionKind],
) -> dict[str, int | str]:
    """Simulate once and apply every criterion. Failures come back as messages."""
    z = simulate(coef, noise, n, np.random.default_rng(seed_seq)).values
    z = z - z.mean(axis=0)
    out: dict[str, int | str] = {}
    top = 2 * p_max if any(c.needs_double_range for c in kinds) else p_max
    try:
        fits = sample_loss_curve(z, top)
    except MicvarError as exc:
        fits = None
        fit_error = f"{type(exc).__name__}: {exc}"
    for kind in kinds:
        try:
            if kind.name == "MIC_SP":
                res = mic_sp(z, p_max, demean=False, full_fits=fits)
            elif kind.name == "MIC_MT":
                res = mic_mt(z, p_max, demean=False)
            elif fits is None:
                out[kind.label] = fit_error
                continue
            else:
                res = select_from_fits(kind, fits, n, coef.k, p_max)
            out[kind.label] = res.chosen_order
        except MicvarError as exc:
            out[kind.label] = f"{type(exc).__name__}: {exc}"
    return out


def _task(args):
    coef, noise, n, b, seed, p_max, kinds = args
    return (n, b), run_replicate(coef, noise, n, replicate_seed(seed, n, b), p_max, kinds)


def _resolve_kinds(config: ExperimentConfig, coef, noise) -> tuple[list[CriterionKind], float | None]:
    kinds, lam = [], None
    for c in config.criteria:
        if c.strip().lower() == "mic-oracle":
            curve = population_loss_curve(coef, noise.covariance(), max(config.p_max, coef.p0), with_window=False)
            lam = oracle_lambda_window(curve, coef.p0)[1]
            kinds.append(mic_oracle(lam))
        else:
            kinds.append(parse_criterion(c))
    return kinds, lam


def _worker_count(workers: int | None) -> int:
    if workers is None:
        env = os.environ.get("MICVAR_THREADS")
        workers = int(env) if env else (os.cpu_count() or 1)
    return max(1, int(workers))


def run_experiment(config: ExperimentConfig, workers: int | None = None) -> ExperimentResult:
    """Run every replicate of every sample size and aggregate per criterion.

    ``workers > 1`` spreads replicates over processes; the result is the same
    for any worker count.
    """
    if config.process is not None:
        coef, noise = config.process
    else:
        coef, noise = build_process(config.setting, config.noise, config.process_seed)
    p0 = coef.p0 if config.true_order is None else int(config.true_order)
    kinds, lam = _resolve_kinds(config, coef, noise)

    tasks = [(coef, noise, n, b, config.seed, config.p_max, kinds)
             for n in config.n_values for b in range(config.B)]
    n_workers = _worker_count(workers)
    if n_workers == 1 or len(tasks) == 1:
        results = dict(map(_task, tasks))
    else:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            results = dict(pool.map(_task, tasks, chunksize=max(1, len(tasks) // (4 * n_workers))))

    cells, chosen, failures = [], {}, {}
    for kind in kinds:
        label = kind.label
        for n in config.n_values:
            picks: list[int | None] = []
            msgs: list[str] = []
            for b in range(config.B):
                r = results[(n, b)][label]
                if isinstance(r, str):
                    picks.append(None)
                    msgs.append(r)
                else:
                    picks.append(r)
            correct = sum(1 for p in picks if p == p0)
            over = sum(1 for p in picks if p is not None and p > p0)
            under = sum(1 for p in picks if p is not None and p < p0)
            cells.append(Cell(label, n, config.B, correct, over, under, len(msgs)))
            chosen[(label, n)] = picks
            if msgs:
                failures[(label, n)] = msgs
    return ExperimentResult(config.label, p0, cells, chosen, lam, failures)
