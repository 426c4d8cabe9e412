import math
from fractions import Fraction

import numpy as np
import pytest

from micvar.criteria import (
    AIC,
    BIC,
    HQ,
    MIC,
    MIC_MT,
    MIC_SP,
    argmin_smallest,
    criterion_score,
    information_penalty,
    lambda_st,
    log_det,
    md,
    md_mean_of_differences,
    mic_mt,
    mic_oracle,
    mic_sp,
    parse_criteria,
    parse_criterion,
    select_from_fits,
    select_many,
    select_order,
)
from micvar.errors import InsufficientData, SingularSigma
from micvar.estimation import FitResult, sample_loss_curve
from micvar.process import GaussianDiagonal, VarCoefficients, simulate


def scalar_fit(p, s2):
    return FitResult(p, np.zeros((1, p)), np.array([[s2]]), s2, 100 - p)


class TestMd:
    def test_arithmetic(self):
        assert md([3.0, 2.9, 2.8]) == pytest.approx(0.1)

    def test_equal_endpoints(self):
        assert md([1.5, 1.2, 1.5]) == 0.0

    def test_telescoping_example(self):
        losses = [3.0, 2.95, 2.8]
        assert md_mean_of_differences(losses) == pytest.approx(md(losses), abs=1e-15)

    def test_exact_identity_on_sample_losses(self):
        z = np.random.default_rng(0).standard_normal((300, 3))
        for p_max in (1, 3, 5):
            losses = [f.sample_loss for f in sample_loss_curve(z, 2 * p_max)][p_max:]
            exact = [Fraction(x) for x in losses]
            mean_diff = abs(sum(a - b for a, b in zip(exact[:-1], exact[1:])) / p_max)
            assert mean_diff == abs(exact[0] - exact[-1]) / p_max
            assert md(losses) == pytest.approx(float(mean_diff), rel=1e-12)
            assert md_mean_of_differences(losses) == pytest.approx(float(mean_diff), rel=1e-12)

    def test_needs_two_points(self):
        with pytest.raises(ValueError):
            md([1.0])


class TestPenalties:
    def test_lambda_st_example(self):
        expected = 0.05 * math.sqrt(1000 / (100 * math.log(1000)))
        assert lambda_st(0.05, 1000, 10) == pytest.approx(expected, rel=1e-15)
        assert lambda_st(0.05, 1000, 10) == pytest.approx(0.0602, abs=5e-5)

    def test_lambda_st_zero(self):
        assert lambda_st(0.0, 500, 3) == 0.0

    def test_lambda_st_natural_log(self):
        assert lambda_st(0.1, math.e, 1) == pytest.approx(0.1 * math.sqrt(math.e))

    def test_aic_bic_examples(self):
        fit = scalar_fit(3, 2.0)
        assert criterion_score(AIC, fit, 100, 1) == pytest.approx(math.log(2) + 0.06, rel=1e-14)
        assert criterion_score(AIC, fit, 100, 1) == pytest.approx(0.7531, abs=5e-5)
        assert criterion_score(BIC, fit, 100, 1) == pytest.approx(0.8313, abs=5e-5)

    def test_hq(self):
        fit = scalar_fit(2, 1.0)
        assert criterion_score(HQ, fit, 1000, 1) == pytest.approx(2 * math.log(math.log(1000)) / 1000 * 2)

    def test_mic_example(self):
        fit = FitResult(4, np.zeros((1, 4)), np.array([[1.2]]), 1.2, 96)
        assert criterion_score(MIC, fit, 100, 1, lam=0.05) == pytest.approx(1.4)
        assert criterion_score(mic_oracle(0.05), fit, 100, 1) == pytest.approx(1.4)

    @pytest.mark.parametrize("n", [100, 1000, 5000])
    def test_penalty_ordering(self, n):
        a, b, h = (information_penalty(x, n, 2) for x in ("AIC", "BIC", "HQ"))
        assert b > h > a

    def test_hq_small_n(self):
        with pytest.raises(InsufficientData):
            information_penalty("HQ", 2, 1)

    def test_log_det(self):
        s = np.array([[2.0, 0.5], [0.5, 1.0]])
        assert log_det(s, 1) == pytest.approx(math.log(np.linalg.det(s)), rel=1e-14)
        with pytest.raises(SingularSigma):
            log_det(np.ones((2, 2)), 4)


class TestArgmin:
    def test_ties_smallest(self):
        assert argmin_smallest([3.0, 1.0, 1.0, 2.0]) == 1

    def test_single(self):
        assert argmin_smallest([0.0]) == 0


class TestParse:
    def test_names(self):
        assert parse_criterion("mic") == MIC
        assert parse_criterion("MIC-SP") == MIC_SP
        assert parse_criterion("mic_mt") == MIC_MT
        assert parse_criterion("mic-oracle:0.25") == mic_oracle(0.25)

    def test_all(self):
        assert parse_criteria("all") == [MIC, AIC, BIC, HQ]
        assert parse_criteria("aic,bic") == [AIC, BIC]

    @pytest.mark.parametrize("bad", ["foo", "mic-oracle:0", "mic-oracle:-1", "mic-oracle:x"])
    def test_bad(self, bad):
        with pytest.raises(ValueError):
            parse_criterion(bad)

    def test_labels(self):
        assert mic_oracle(0.1).label == "MIC-ORACLE"
        assert MIC.needs_double_range and not AIC.needs_double_range


class TestSelection:
    def test_result_shape(self):
        z = np.random.default_rng(1).standard_normal((500, 2))
        res = select_order(z, 6)
        assert len(res.scores) == 7 and res.p_max == 6
        assert set(res.penalty_detail) == {"MD", "lambda_ST"}
        assert res.chosen_order == argmin_smallest(res.scores)

    def test_zero_penalty_warning(self):
        fits = [scalar_fit(p, 1.0) for p in range(5)]
        res = select_from_fits(MIC, fits, 100, 1, 2)
        assert res.penalty_detail["lambda_ST"] == 0.0
        assert res.chosen_order == 0 and res.warnings

    def test_shared_sigma(self):
        z = np.random.default_rng(2).standard_normal((400, 2))
        zc = z - z.mean(0)
        fits = sample_loss_curve(zc, 8)
        res = select_many(z, 4, [MIC, AIC], fits=fits)
        lam = res[MIC].penalty_detail["lambda_ST"]
        for p in range(5):
            assert res[MIC].scores[p] == fits[p].sample_loss + lam * p
            assert fits[p].sample_loss == np.trace(fits[p].sigma_hat)
            assert res[AIC].scores[p] == pytest.approx(
                np.log(np.linalg.det(fits[p].sigma_hat)) + 2 / 400 * 4 * p, rel=1e-12
            )

    def test_insufficient_data(self):
        with pytest.raises(InsufficientData):
            select_order(np.random.default_rng(0).standard_normal((40, 3)), 5)

    def test_permutation_invariance(self):
        z = simulate(VarCoefficients((np.array([[0.4, 0.2, 0.0], [0.0, 0.3, 0.1], [0.1, 0.0, 0.2]]),)),
                     GaussianDiagonal(np.ones(3)), 600, seed=4).values
        a = select_order(z, 5)
        b = select_order(z[:, [2, 0, 1]], 5)
        assert a.chosen_order == b.chosen_order
        np.testing.assert_allclose(a.scores, b.scores, rtol=1e-10)

    def test_white_noise_mic(self):
        hits = 0
        noise = GaussianDiagonal(np.ones(2))
        for s in range(100):
            z = simulate(VarCoefficients((), k=2), noise, 2000, seed=[99, s])
            hits += select_order(z, 10).chosen_order == 0
        assert hits >= 95

    def test_to_dict_and_csv(self):
        res = select_order(np.random.default_rng(3).standard_normal((300, 1)), 3, AIC)
        d = res.to_dict()
        assert d["chosen_order"] == res.chosen_order and len(d["scores"]) == 4
        lines = res.to_csv().splitlines()
        assert lines[0] == "p,score" and len(lines) == 5


class TestSplitVariants:
    def test_mic_sp_white_noise(self):
        # the held-out penalty is of the same order as one lag's in-sample drop,
        # so order 0 wins only about two thirds of the time (65/100 here)
        noise = GaussianDiagonal(np.ones(2))
        picks = [mic_sp(simulate(VarCoefficients((), k=2), noise, 4000, seed=[98, s]), 5).chosen_order
                 for s in range(100)]
        counts = np.bincount(picks)
        assert counts.argmax() == 0 and counts[0] >= 60

    def test_mic_sp_detail(self):
        z = np.random.default_rng(4).standard_normal((600, 2))
        res = mic_sp(z, 4)
        assert res.penalty_detail["lambda_sp"] >= 0
        assert res.penalty_detail["n_train"] == 420
        assert mic_sp(z, 4).scores.tobytes() == res.scores.tobytes()

    def test_mic_mt_noiseless(self):
        # exact data makes lag 2 collinear with lag 1, so stop at p_max = 1
        z = 0.9 ** np.arange(200)
        res = mic_mt(z, 1, demean=False)
        assert res.chosen_order == 1 and res.scores[1] == pytest.approx(0, abs=1e-25)
        assert len(mic_mt(np.random.default_rng(0).standard_normal(200), 4).scores) == 5

    def test_mic_mt_white_noise(self):
        noise = GaussianDiagonal(np.ones(2))
        picks = [mic_mt(simulate(VarCoefficients((), k=2), noise, 4000, seed=[97, s]), 5).chosen_order
                 for s in range(30)]
        assert np.bincount(picks).argmax() == 0

    def test_split_too_short(self):
        with pytest.raises(InsufficientData):
            mic_sp(np.random.default_rng(0).standard_normal((30, 2)), 5)
