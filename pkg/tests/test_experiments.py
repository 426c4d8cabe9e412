import json
import math

import numpy as np
import pytest

from micvar.errors import ConfigError
from micvar.experiments import (
    SETTINGS,
    Cell,
    ExperimentConfig,
    build_process,
    generate_coefficients,
    generate_error_covariance,
    generate_mixture_noise_spec,
    over_under_stats,
    replicate_seed,
    run_experiment,
)
from micvar.process import GaussianDiagonal, GaussianMixture, RegimeSwitchingMean, VarCoefficients, is_stable


class TestCoefficients:
    def test_ar2_fixed(self):
        coef = generate_coefficients("AR2", 123)
        assert [a[0, 0] for a in coef.lag_matrices] == [0.3, 0.1]

    def test_var2_2_sparsity(self):
        for seed in range(20):
            a1, a2 = generate_coefficients("VAR2_2", seed).lag_matrices
            assert np.sum(a1 == 0) == 1
            assert np.sum(a2 == 0) == 2
            nz = np.abs(a1[a1 != 0])
            assert np.all((nz >= 0.1) & (nz <= 0.3))

    def test_var10_3_sparsity(self):
        a1, a2, a3 = generate_coefficients("VAR10_3", 0).lag_matrices
        assert (np.sum(a1 == 0), np.sum(a2 == 0), np.sum(a3 == 0)) == (40, 80, 80)
        assert np.all(np.abs(a3) <= 0.1)

    @pytest.mark.parametrize("name", sorted(SETTINGS))
    def test_stable_and_deterministic(self, name):
        a = generate_coefficients(name, 5)
        assert is_stable(a)[0]
        assert a.stacked().tobytes() == generate_coefficients(name, 5).stacked().tobytes()

    def test_unknown(self):
        with pytest.raises(ConfigError):
            generate_coefficients("VAR99_1", 0)


class TestCovariance:
    def test_scalar(self):
        np.testing.assert_array_equal(generate_error_covariance(1, 0), [[1.0]])

    @pytest.mark.parametrize("k", [2, 3, 5, 10, 16])
    def test_condition_and_unit_diagonal(self, k):
        for seed in range(5):
            s = generate_error_covariance(k, seed)
            w = np.linalg.eigvalsh(s)
            assert w[-1] / w[0] <= 100
            np.testing.assert_allclose(np.diag(s), 1, atol=1e-12)
            np.testing.assert_array_equal(s, s.T)

    def test_mixture(self):
        for k in (1, 3):
            mix = generate_mixture_noise_spec(k, 0)
            assert isinstance(mix, GaussianMixture) and len(mix.weights) == 5
            np.testing.assert_allclose(mix.means.sum(axis=0), 0, atol=1e-12)
            assert mix.covariances.shape == (5, k, k)


class TestBuildProcess:
    def test_shared_coefficients(self):
        a, _ = build_process("VAR5_3", "diag", 3)
        b, _ = build_process("VAR5_3", "mixture", 3)
        assert a.stacked().tobytes() == b.stacked().tobytes()

    def test_switching(self):
        coef, noise = build_process("VAR3_2_SWITCH", "diag", 0)
        assert isinstance(noise, RegimeSwitchingMean) and noise.regime_means.shape == (2, 3)
        assert np.all(np.abs(noise.regime_means) <= 0.5)

    def test_unknown_noise(self):
        with pytest.raises(ConfigError):
            build_process("VAR2_2", "laplace", 0)


class TestStats:
    def test_all_correct(self):
        assert over_under_stats([2, 2, 2], 2) == (0.0, 0.0)

    def test_counting(self):
        assert over_under_stats([1, 3, 2], 2) == (1 / 3, 1 / 3)

    def test_failures_count_as_neither(self):
        assert over_under_stats([None, 3], 2) == (0.5, 0.0)

    def test_cell_se(self):
        c = Cell("MIC", 100, 50, 40, 6, 3, 1)
        acc = 40 / 50
        assert c.se == math.sqrt(acc * (1 - acc) / 50)
        assert c.accuracy + c.over_rate + c.under_rate + c.failure_rate == pytest.approx(1, abs=1e-15)

    def test_replicate_seed_is_counter_based(self):
        a = np.random.default_rng(replicate_seed(0, 500, 3)).random()
        b = np.random.default_rng(replicate_seed(0, 500, 3)).random()
        c = np.random.default_rng(replicate_seed(0, 500, 4)).random()
        assert a == b != c


class TestConfig:
    def test_from_json(self):
        cfg = ExperimentConfig.from_json(json.dumps({"setting": "VAR10_3", "B": 3, "criteria": "mic,bic"}))
        assert cfg.n_values == (500, 1000, 2000, 5000)
        assert cfg.criteria == ("mic", "bic") and cfg.label == "VAR10_3_diag"

    @pytest.mark.parametrize("bad", [{"B": 0}, {"setting": "nope"}, {"criteria": ["zzz"]}, {"colour": 1}])
    def test_invalid(self, bad):
        with pytest.raises(ConfigError if "criteria" not in bad else ValueError):
            ExperimentConfig.from_dict(bad)

    def test_bad_json(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_json("{")


class TestRun:
    def test_single_replicate(self):
        cfg = ExperimentConfig(setting=None, process=(VarCoefficients.univariate([0.9]), GaussianDiagonal([1.0])),
                               n_values=(400,), B=1, p_max=3)
        res = run_experiment(cfg, workers=1)
        for c in res.cells:
            assert c.accuracy in (0.0, 1.0)
        assert res.true_order == 1

    def test_cells_partition(self):
        cfg = ExperimentConfig(setting="VAR2_2", n_values=(250, 500), B=8, p_max=4,
                               criteria=("mic", "aic", "bic", "hq", "mic-sp", "mic-mt", "mic-oracle"))
        res = run_experiment(cfg, workers=1)
        assert len(res.cells) == 14 and res.oracle_lambda > 0
        for c in res.cells:
            assert c.correct + c.over + c.under + c.failed == c.B
            assert c.se == math.sqrt(c.accuracy * (1 - c.accuracy) / c.B)
        lines = res.to_csv().splitlines()
        assert lines[0] == "setting,criterion,n,accuracy,se,over,under,failures"
        assert len(lines) == 15

    def test_worker_count_irrelevant(self):
        cfg = ExperimentConfig(setting="VAR2_2", n_values=(250,), B=6, p_max=3)
        one = run_experiment(cfg, workers=1)
        two = run_experiment(cfg, workers=2)
        assert one.to_csv() == two.to_csv()
        assert one.chosen == two.chosen

    def test_failures_recorded(self):
        # n = 30 cannot support orders up to 2 * p_max = 20
        cfg = ExperimentConfig(setting="AR2", n_values=(30,), B=3, p_max=10, criteria=("mic",))
        res = run_experiment(cfg, workers=1)
        c = res.cell("MIC", 30)
        assert c.failed == 3 and c.failure_rate == 1.0
        assert res.failures[("MIC", 30)][0].startswith("InsufficientData")
        assert res.chosen[("MIC", 30)] == [None] * 3


@pytest.mark.slow
@pytest.mark.parametrize("setting", ["AR2", "VAR2_2"])
def test_mic_accuracy_grows_with_n(setting):
    res = run_experiment(ExperimentConfig(setting=setting, B=50, seed=0, process_seed=0), workers=1)
    acc = [res.cell("MIC", n).accuracy for n in (250, 500, 1000, 2000, 5000)]
    assert all(b >= a - 0.05 for a, b in zip(acc, acc[1:])), acc
