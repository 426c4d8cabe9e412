"""Generative VAR processes and their population second-order structure.

The population loss of a fitted order ``p`` is the expected one-step squared
prediction error of the best linear predictor that uses ``p`` lags. It is
computed here directly from autocovariances, either in closed form through
the block Toeplitz matrix or by the order-by-order Schur complement update.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
from scipy import linalg

from .errors import (
    ConfigError,
    LyapunovSolveFailed,
    NonpositiveWindow,
    SingularToeplitz,
    UnstableProcess,
)
from .timeseries import TimeSeries

__all__ = [
    "STABILITY_TOL",
    "VarCoefficients",
    "GaussianDiagonal",
    "GaussianFull",
    "GaussianMixture",
    "RegimeSwitchingMean",
    "NoiseSpec",
    "AutocovarianceSequence",
    "PopulationLossCurve",
    "companion_matrix",
    "is_stable",
    "burn_in_length",
    "simulate",
    "population_autocovariances",
    "sample_autocovariances",
    "block_toeplitz",
    "population_loss",
    "population_loss_recursive",
    "population_loss_decrements",
    "population_loss_curve",
    "oracle_lambda_window",
    "noise_to_dict",
    "noise_from_dict",
    "process_to_json",
    "process_from_json",
]

STABILITY_TOL = 1e-8
SeedLike = Union[int, Sequence[int], np.random.SeedSequence, np.random.Generator, None]


def _rng(seed: SeedLike) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _check_spd(a: np.ndarray, what: str) -> np.ndarray:
    a = np.array(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ConfigError(f"{what} must be a square matrix")
    if not np.allclose(a, a.T, rtol=1e-10, atol=1e-12):
        raise ConfigError(f"{what} must be symmetric")
    try:
        np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        raise ConfigError(f"{what} must be positive definite") from None
    return (a + a.T) / 2


@dataclass(frozen=True)
class VarCoefficients:
    """Lag matrices ``A_1..A_p0`` of ``z_t = sum_i A_i z_{t-i} + e_t``.

    An empty list is a pure-noise process; ``k`` must then be given.
    """

    lag_matrices: tuple[np.ndarray, ...]
    k: int = 0

    def __post_init__(self):
        mats = tuple(np.array(np.atleast_2d(a), dtype=float) for a in self.lag_matrices)
        k = mats[0].shape[0] if mats else int(self.k)
        if k < 1:
            raise ConfigError("dimension k must be >= 1")
        for i, a in enumerate(mats):
            if a.shape != (k, k):
                raise ConfigError(f"lag matrix {i + 1} has shape {a.shape}, expected {(k, k)}")
            a.setflags(write=False)
        object.__setattr__(self, "lag_matrices", mats)
        object.__setattr__(self, "k", k)

    @classmethod
    def univariate(cls, coefs: Sequence[float]) -> "VarCoefficients":
        return cls(tuple(np.array([[c]]) for c in coefs), k=1)

    @property
    def p0(self) -> int:
        return len(self.lag_matrices)

    def stacked(self) -> np.ndarray:
        """``[A_1 ... A_p0]`` as a ``k x k*p0`` matrix."""
        if not self.lag_matrices:
            return np.zeros((self.k, 0))
        return np.hstack(self.lag_matrices)

    def to_dict(self) -> dict:
        return {"k": self.k, "lag_matrices": [a.tolist() for a in self.lag_matrices]}

    @classmethod
    def from_dict(cls, d: dict) -> "VarCoefficients":
        mats = d.get("lag_matrices", [])
        k = int(d.get("k", len(mats[0]) if mats else 0))
        return cls(tuple(np.array(m, dtype=float) for m in mats), k=k)


# -- noise specifications ------------------------------------------------------


@dataclass(frozen=True)
class GaussianDiagonal:
    variances: np.ndarray

    def __post_init__(self):
        v = np.atleast_1d(np.array(self.variances, dtype=float))
        if np.any(v <= 0):
            raise ConfigError("variances must be positive")
        object.__setattr__(self, "variances", v)

    @property
    def k(self) -> int:
        return self.variances.shape[0]

    def covariance(self) -> np.ndarray:
        return np.diag(self.variances)

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.standard_normal((size, self.k)) * np.sqrt(self.variances)


@dataclass(frozen=True)
class GaussianFull:
    covariance_matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "covariance_matrix", _check_spd(self.covariance_matrix, "covariance"))

    @property
    def k(self) -> int:
        return self.covariance_matrix.shape[0]

    def covariance(self) -> np.ndarray:
        return self.covariance_matrix.copy()

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        chol = np.linalg.cholesky(self.covariance_matrix)
        return rng.standard_normal((size, self.k)) @ chol.T


@dataclass(frozen=True)
class GaussianMixture:
    """Finite Gaussian mixture whose component means average to zero."""

    weights: np.ndarray
    means: np.ndarray  # (m, k)
    covariances: np.ndarray  # (m, k, k)

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        mu = np.atleast_2d(np.array(self.means, dtype=float))
        covs = np.array(self.covariances, dtype=float)
        if covs.ndim == 2:
            covs = covs[:, None, None] if covs.shape[1] == 1 else covs[None]
        m, k = mu.shape
        if w.shape != (m,) or covs.shape != (m, k, k):
            raise ConfigError("mixture weights, means and covariances disagree in shape")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ConfigError("mixture weights must be nonnegative and sum to 1")
        if np.max(np.abs(mu.mean(axis=0)), initial=0.0) > 1e-9 * max(1.0, np.abs(mu).max()):
            raise ConfigError("mixture component means must average to zero")
        covs = np.stack([_check_spd(c, f"mixture covariance {i}") for i, c in enumerate(covs)])
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", mu)
        object.__setattr__(self, "covariances", covs)

    @property
    def k(self) -> int:
        return self.means.shape[1]

    def covariance(self) -> np.ndarray:
        mean = self.weights @ self.means
        second = np.einsum("m,mij->ij", self.weights, self.covariances)
        second += np.einsum("m,mi,mj->ij", self.weights, self.means, self.means)
        return second - np.outer(mean, mean)

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        comp = rng.choice(len(self.weights), size=size, p=self.weights)
        chols = np.linalg.cholesky(self.covariances)
        z = rng.standard_normal((size, self.k))
        return self.means[comp] + np.einsum("nij,nj->ni", chols[comp], z)


@dataclass(frozen=True)
class RegimeSwitchingMean:
    """Gaussian errors plus a level that alternates between two mean vectors.

    The level switches every ``floor(switch_fraction * n)`` retained
    observations; the last segment absorbs any remainder.
    """

    base: GaussianFull
    regime_means: np.ndarray  # (2, k)
    switch_fraction: float = 0.10

    def __post_init__(self):
        rm = np.atleast_2d(np.array(self.regime_means, dtype=float))
        if rm.shape != (2, self.base.k):
            raise ConfigError("regime_means must have shape (2, k)")
        if not 0 < self.switch_fraction <= 1:
            raise ConfigError("switch_fraction must lie in (0, 1]")
        object.__setattr__(self, "regime_means", rm)

    @property
    def k(self) -> int:
        return self.base.k

    def covariance(self) -> np.ndarray:
        return self.base.covariance()

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return self.base.draw(rng, size)

    def regime_index(self, n: int) -> np.ndarray:
        seg = max(1, int(np.floor(self.switch_fraction * n)))
        n_segments = max(1, n // seg)
        return np.minimum(np.arange(n) // seg, n_segments - 1) % 2


NoiseSpec = Union[GaussianDiagonal, GaussianFull, GaussianMixture, RegimeSwitchingMean]


# -- stability -----------------------------------------------------------------


def companion_matrix(coef: VarCoefficients) -> np.ndarray:
    """First-order ``kp x kp`` representation with ``[A_1 ... A_p]`` on top."""
    k, p = coef.k, coef.p0
    if p < 1:
        raise ValueError("companion matrix needs p0 >= 1")
    f = np.zeros((k * p, k * p))
    f[:k, :] = coef.stacked()
    f[k:, :-k] = np.eye(k * (p - 1))
    return f


def is_stable(coef: VarCoefficients, tol: float = STABILITY_TOL) -> tuple[bool, float]:
    if coef.p0 == 0:
        return True, 0.0
    radius = float(np.max(np.abs(np.linalg.eigvals(companion_matrix(coef)))))
    return radius < 1.0 - tol, radius


def _require_stable(coef: VarCoefficients) -> None:
    ok, radius = is_stable(coef)
    if not ok:
        raise UnstableProcess(radius)


# -- simulation ----------------------------------------------------------------


def burn_in_length(p0: int) -> int:
    return max(1000, 50 * p0)


def simulate(
    coef: VarCoefficients,
    noise: NoiseSpec,
    n: int,
    seed: SeedLike = None,
    names: Sequence[str] | None = None,
) -> TimeSeries:
    """Draw ``n`` observations after a burn-in started from the zero state."""
    _require_stable(coef)
    if n < 1:
        raise ValueError("n must be >= 1")
    if noise.k != coef.k:
        raise ConfigError(f"noise dimension {noise.k} does not match k={coef.k}")
    rng = _rng(seed)
    k, p = coef.k, coef.p0
    burn = burn_in_length(p)
    total = burn + n
    eps = noise.draw(rng, total)

    if p == 0:
        z = eps
    else:
        a = coef.stacked()
        z = np.zeros((total + p, k))
        z[p:] = eps
        # z[t] = sum_i A_i z[t-i] + e[t]; rows before p stay zero
        lagged = np.zeros(k * p)
        for t in range(p, total + p):
            lagged[:] = z[t - p : t][::-1].ravel()
            z[t] += a @ lagged
        z = z[p:]

    out = z[burn:]
    if isinstance(noise, RegimeSwitchingMean):
        out = out + noise.regime_means[noise.regime_index(n)]
        out = out - out.mean(axis=0)
    return TimeSeries(out, tuple(names) if names else ())


# -- autocovariances -----------------------------------------------------------


@dataclass(frozen=True)
class AutocovarianceSequence:
    """``Gamma_0..Gamma_H`` with ``Gamma_h = E[z_t z_{t-h}^T]``."""

    matrices: tuple[np.ndarray, ...]
    source: str = "population"

    def __post_init__(self):
        mats = tuple(np.array(m, dtype=float) for m in self.matrices)
        if not mats:
            raise ValueError("need at least Gamma_0")
        object.__setattr__(self, "matrices", mats)

    @property
    def H(self) -> int:
        return len(self.matrices) - 1

    @property
    def k(self) -> int:
        return self.matrices[0].shape[0]

    def gamma(self, h: int) -> np.ndarray:
        """Autocovariance at lag ``h``; negative lags use ``Gamma_{-h} = Gamma_h^T``."""
        return self.matrices[h] if h >= 0 else self.matrices[-h].T


def population_autocovariances(coef: VarCoefficients, sigma: np.ndarray, H: int) -> AutocovarianceSequence:
    """Stationary autocovariances via the companion-form Lyapunov equation.

    ``S = F S F^T + Q`` is solved as the vectorized linear system
    ``(I - F kron F) vec(S) = vec(Q)``; lags ``>= p0`` then follow from
    ``Gamma_h = sum_i A_i Gamma_{h-i}``.
    """
    _require_stable(coef)
    sigma = np.asarray(sigma, dtype=float)
    k, p = coef.k, coef.p0
    if sigma.shape != (k, k):
        raise ConfigError(f"sigma must be {k}x{k}")
    gammas = [np.zeros((k, k)) for _ in range(H + 1)]
    if p == 0:
        gammas[0] = sigma.copy()
        return AutocovarianceSequence(tuple(gammas), "population")

    f = companion_matrix(coef)
    m = k * p
    q = np.zeros((m, m))
    q[:k, :k] = sigma
    try:
        s = np.linalg.solve(np.eye(m * m) - np.kron(f, f), q.ravel()).reshape(m, m)
    except np.linalg.LinAlgError as exc:
        raise LyapunovSolveFailed(str(exc)) from None
    if not np.all(np.isfinite(s)):
        raise LyapunovSolveFailed("non-finite state covariance")
    s = (s + s.T) / 2

    for h in range(min(p, H + 1)):
        gammas[h] = s[:k, h * k : (h + 1) * k].copy()
    for h in range(p, H + 1):
        # h - i >= 0 for every lag i <= p, so no transposed lookups are needed
        gammas[h] = sum(a @ gammas[h - i] for i, a in enumerate(coef.lag_matrices, start=1))
    return AutocovarianceSequence(tuple(gammas), "population")


def sample_autocovariances(series: TimeSeries | np.ndarray, H: int, demean: bool = True) -> AutocovarianceSequence:
    """``(1/n) sum_t z_t z_{t-h}^T`` for ``h = 0..H``."""
    z = series.values if isinstance(series, TimeSeries) else np.asarray(series, dtype=float)
    if z.ndim == 1:
        z = z[:, None]
    if demean:
        z = z - z.mean(axis=0)
    n = z.shape[0]
    mats = tuple(z[h:].T @ z[: n - h] / n for h in range(H + 1))
    return AutocovarianceSequence(mats, "sample")


# -- population loss -----------------------------------------------------------


def block_toeplitz(gammas: AutocovarianceSequence, p: int) -> np.ndarray:
    """``E[x_p x_p^T]`` for the stacked lag vector; block ``(i, j)`` is ``Gamma_{j-i}``."""
    k = gammas.k
    t = np.empty((k * p, k * p))
    for i in range(p):
        for j in range(p):
            t[i * k : (i + 1) * k, j * k : (j + 1) * k] = gammas.gamma(j - i)
    return t


def _spd_solve(a: np.ndarray, b: np.ndarray, p: int) -> np.ndarray:
    a = (a + a.T) / 2
    w = np.linalg.eigvalsh(a)
    if w[0] <= 1e-12 * max(w[-1], np.finfo(float).tiny):
        raise SingularToeplitz(p)
    return linalg.cho_solve(linalg.cho_factor(a), b)


def _check_horizon(gammas: AutocovarianceSequence, p: int) -> None:
    if p < 0:
        raise ValueError("order must be nonnegative")
    if gammas.H < p:
        raise ValueError(f"need autocovariances up to lag {p}, have {gammas.H}")


def population_loss(gammas: AutocovarianceSequence, p: int) -> float:
    """``Tr(Gamma_0) - Tr(G T_p^{-1} G^T)`` with ``G = [Gamma_1 ... Gamma_p]``."""
    _check_horizon(gammas, p)
    base = float(np.trace(gammas.gamma(0)))
    if p == 0:
        return base
    g = np.hstack([gammas.gamma(h) for h in range(1, p + 1)])
    sol = _spd_solve(block_toeplitz(gammas, p), g.T, p)
    return base - float(np.sum(g * sol.T))


def population_loss_decrements(gammas: AutocovarianceSequence, p: int) -> np.ndarray:
    """Per-order drops ``L(q-1) - L(q)`` for ``q = 1..p`` via Schur complements.

    Partition ``T_q = [[B, C^T], [C, D]]`` with ``D = Gamma_0``; then
    ``L(q) = L(q-1) - Tr(Delta H Delta^T)`` where ``H = (D - C B^{-1} C^T)^{-1}``
    and ``Delta = g B^{-1} C^T - Gamma_q``, ``g = [Gamma_1 ... Gamma_{q-1}]``.
    """
    _check_horizon(gammas, p)
    d = gammas.gamma(0)
    out = np.empty(p)
    for q in range(1, p + 1):
        if q == 1:
            delta = -gammas.gamma(1)
            schur = d
        else:
            b = block_toeplitz(gammas, q - 1)
            c = np.hstack([gammas.gamma(-(q - 1 - j)) for j in range(q - 1)])
            g = np.hstack([gammas.gamma(h) for h in range(1, q)])
            b_inv_ct = _spd_solve(b, c.T, q - 1)
            delta = g @ b_inv_ct - gammas.gamma(q)
            schur = d - c @ b_inv_ct
        h_delta_t = _spd_solve(schur, delta.T, q)
        out[q - 1] = float(np.sum(delta * h_delta_t.T))
    return out


def population_loss_recursive(gammas: AutocovarianceSequence, p: int) -> float:
    _check_horizon(gammas, p)
    return float(np.trace(gammas.gamma(0))) - float(np.sum(population_loss_decrements(gammas, p)))


@dataclass(frozen=True)
class PopulationLossCurve:
    losses: np.ndarray
    trace_sigma: float
    p0: int | None = None
    oracle_window: float | None = None

    @property
    def p_max(self) -> int:
        return len(self.losses) - 1


def oracle_lambda_window(curve: PopulationLossCurve | Sequence[float], p0: int) -> tuple[float, float]:
    """Largest admissible penalty ``M`` and the half-window oracle ``M / 2``.

    ``M = min_i (L(p0 - i) - L(p0)) / i`` over ``i = 1..p0``.
    """
    losses = np.asarray(curve.losses if isinstance(curve, PopulationLossCurve) else curve, dtype=float)
    if p0 < 1:
        raise ValueError("the window needs p0 >= 1")
    if len(losses) < p0 + 1:
        raise ValueError(f"curve must cover orders 0..{p0}")
    m = min((losses[p0 - i] - losses[p0]) / i for i in range(1, p0 + 1))
    if not m > 0:
        raise NonpositiveWindow(float(m))
    return float(m), float(m) / 2


def population_loss_curve(
    coef: VarCoefficients, sigma: np.ndarray, p_max: int, with_window: bool = True
) -> PopulationLossCurve:
    gammas = population_autocovariances(coef, sigma, p_max)
    losses = np.array([population_loss(gammas, p) for p in range(p_max + 1)])
    window = None
    if with_window and coef.p0 >= 1 and p_max >= coef.p0:
        window = oracle_lambda_window(losses, coef.p0)[0]
    return PopulationLossCurve(losses, float(np.trace(sigma)), coef.p0, window)


# -- JSON ----------------------------------------------------------------------


def noise_to_dict(noise: NoiseSpec) -> dict:
    if isinstance(noise, GaussianDiagonal):
        return {"type": "gaussian_diagonal", "variances": noise.variances.tolist()}
    if isinstance(noise, GaussianFull):
        return {"type": "gaussian_full", "covariance": noise.covariance_matrix.tolist()}
    if isinstance(noise, GaussianMixture):
        return {
            "type": "gaussian_mixture",
            "weights": noise.weights.tolist(),
            "means": noise.means.tolist(),
            "covariances": noise.covariances.tolist(),
        }
    if isinstance(noise, RegimeSwitchingMean):
        return {
            "type": "regime_switching",
            "covariance": noise.base.covariance_matrix.tolist(),
            "regime_means": noise.regime_means.tolist(),
            "switch_fraction": noise.switch_fraction,
        }
    raise TypeError(f"unknown noise spec {type(noise).__name__}")


def noise_from_dict(d: dict) -> NoiseSpec:
    kind = d.get("type")
    try:
        if kind == "gaussian_diagonal":
            return GaussianDiagonal(np.array(d["variances"], dtype=float))
        if kind == "gaussian_full":
            return GaussianFull(np.array(d["covariance"], dtype=float))
        if kind == "gaussian_mixture":
            return GaussianMixture(d["weights"], d["means"], d["covariances"])
        if kind == "regime_switching":
            return RegimeSwitchingMean(
                GaussianFull(np.array(d["covariance"], dtype=float)),
                np.array(d["regime_means"], dtype=float),
                float(d.get("switch_fraction", 0.10)),
            )
    except KeyError as exc:
        raise ConfigError(f"noise spec of type {kind!r} is missing field {exc}") from None
    raise ConfigError(f"unknown noise type {kind!r}")


def process_to_json(coef: VarCoefficients, noise: NoiseSpec, indent: int | None = 2) -> str:
    return json.dumps({**coef.to_dict(), "noise": noise_to_dict(noise)}, indent=indent)


def process_from_json(text: str) -> tuple[VarCoefficients, NoiseSpec]:
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from None
    if "noise" not in d:
        raise ConfigError("process spec needs a 'noise' entry")
    noise = noise_from_dict(d["noise"])
    coef = VarCoefficients.from_dict({"k": noise.k, **d})
    return coef, noise
