"""Multiple-testing procedures and combination tests."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conformal_outliers.conformal import PValueVector
from conformal_outliers.mtest import (
    RejectionReport,
    bh,
    fdp_power,
    fisher_corrected_test,
    fisher_test,
    harmonic_mean_pvalue,
    simes_global_pvalue,
    storey_bh,
    storey_pi0,
    stouffer_pvalue,
)
from conformal_outliers.randomness import RandomStream


class TestBH:
    def test_hand_example(self):
        rep = bh(np.array([0.01, 0.04, 0.03, 0.9]), 0.1)
        assert set(rep.rejected) == {0, 1, 2}

    def test_all_ones_empty(self):
        assert bh(np.ones(5), 0.1).num_rejected == 0

    def test_single_test(self):
        assert bh(np.array([0.04]), 0.05).num_rejected == 1
        assert bh(np.array([0.06]), 0.05).num_rejected == 0

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            bh(np.array([]), 0.1)

    def test_boundary_ties_all_rejected(self):
        # two p-values exactly at the r=2 threshold
        rep = bh(np.array([0.05, 0.05]), 0.05)
        assert rep.num_rejected == 2

    @settings(max_examples=50)
    @given(st.lists(st.floats(1e-6, 1.0), min_size=1, max_size=40),
           st.floats(0.01, 0.5))
    def test_lower_set(self, p, alpha):
        p = np.asarray(p)
        rej = set(bh(p, alpha).rejected)
        if rej:
            crit = max(p[sorted(rej)])
            assert all(i in rej for i in range(len(p)) if p[i] <= crit)

    @settings(max_examples=50)
    @given(st.lists(st.floats(1e-6, 1.0), min_size=1, max_size=40),
           st.floats(0.01, 0.3), st.floats(0.0, 0.4))
    def test_monotone_in_alpha(self, p, alpha, bump):
        p = np.asarray(p)
        small = set(bh(p, alpha).rejected)
        large = set(bh(p, min(alpha + bump, 0.99)).rejected)
        assert small <= large


class TestStorey:
    def test_pi0_hand_example(self):
        assert storey_pi0(np.array([0.1, 0.6, 0.7, 0.9]), 0.5) == pytest.approx(2.0)

    def test_pi0_all_small(self):
        p = np.array([0.01, 0.02, 0.03])
        assert storey_pi0(p, 0.5) == pytest.approx(1 / (3 * 0.5))

    def test_pi0_uniform_near_one(self):
        g = RandomStream(3).generator()
        p = g.random(200_000)
        assert storey_pi0(p, 0.5) == pytest.approx(1.0, abs=4 * 2 / math.sqrt(200_000))

    def test_storey_bh_hand_example(self):
        p = np.array([0.001, 0.002, 0.9, 0.9, 0.9])
        rep = storey_bh(p, 0.1, 0.5)
        assert rep.params["pi0"] == pytest.approx(1.6)
        assert set(rep.rejected) == {0, 1}

    def test_subset_of_plain_bh_when_pi0_above_one(self):
        g = RandomStream(4).generator()
        p = g.random(60)
        rep = storey_bh(p, 0.1, 0.5)
        if rep.params["pi0"] >= 1.0:
            assert set(rep.rejected) <= set(bh(p, 0.1).rejected)

    def test_all_above_lambda_empty(self):
        rep = storey_bh(np.array([0.6, 0.7, 0.9]), 0.9, 0.5)
        assert rep.num_rejected == 0

    def test_off_grid_lambda_warns_for_conformal(self):
        pv = PValueVector(values=np.array([1 / 6, 3 / 6]), kind="marginal", n=5)
        rep = storey_bh(pv, 0.1, 0.37)
        assert rep.warnings
        rep2 = storey_bh(pv, 0.1, 3 / 6)
        assert not rep2.warnings


class TestFisher:
    def test_single_pvalue_equivalence(self):
        # m=1: reject iff p <= alpha (chi-square with 2 df identity)
        for p, alpha in ((0.04, 0.05), (0.06, 0.05), (0.0499, 0.05)):
            res = fisher_test(np.array([p]), alpha)
            assert res.reject == (p <= alpha)
            assert res.combined_p == pytest.approx(p, rel=1e-10)

    def test_all_ones_never_rejects(self):
        res = fisher_test(np.ones(10), 0.05)
        assert res.statistic == 0.0
        assert not res.reject

    def test_zero_p_rejected(self):
        with pytest.raises(ValueError):
            fisher_test(np.array([0.0, 0.5]), 0.1)

    def test_iid_uniform_level(self):
        # rejection rate under iid uniforms is alpha +- 3 s.e.
        reps, m, alpha = 10_000, 20, 0.05
        g = RandomStream(6).generator()
        p = g.random((reps, m))
        stat = -2 * np.log(p).sum(axis=1)
        thr = fisher_test(p[0], alpha).threshold
        rate = (stat >= thr).mean()
        assert rate == pytest.approx(alpha, abs=3 * math.sqrt(alpha * (1 - alpha) / reps))

    def test_statistic_threshold_consistency(self):
        res = fisher_test(np.array([0.01, 0.2, 0.6]), 0.05)
        assert res.reject == (res.statistic >= res.threshold)


class TestFisherCorrected:
    def test_gamma_zero_matches_plain(self):
        p = np.array([0.01, 0.2, 0.03, 0.6])
        plain = fisher_test(p, 0.05)
        corr = fisher_corrected_test(p, 0.05, 0.0)
        assert corr.reject == plain.reject
        assert corr.statistic == pytest.approx(plain.statistic)

    def test_correction_is_conservative_shift(self):
        # with gamma > 0 the adjusted statistic shrinks large raw statistics
        p = np.full(100, 0.02)
        raw = fisher_test(p, 0.05).statistic
        adj = fisher_corrected_test(p, 0.05, 3.0).statistic
        assert adj < raw

    def test_negative_gamma_rejected(self):
        with pytest.raises(ValueError):
            fisher_corrected_test(np.array([0.5]), 0.05, -1.0)


class TestCombiners:
    def test_stouffer_identity(self):
        assert stouffer_pvalue(np.array([0.3])) == pytest.approx(0.3, rel=1e-9)

    def test_stouffer_halves(self):
        assert stouffer_pvalue(np.array([0.5, 0.5, 0.5])) == pytest.approx(0.5, abs=1e-12)

    def test_stouffer_hand_value(self):
        assert stouffer_pvalue(np.array([0.05, 0.05])) == pytest.approx(
            0.010004626858059, abs=1e-9)

    def test_stouffer_domain(self):
        with pytest.raises(ValueError):
            stouffer_pvalue(np.array([1.0]))
        with pytest.raises(ValueError):
            stouffer_pvalue(np.array([0.0]))

    def test_simes_global(self):
        assert simes_global_pvalue(np.array([0.01, 0.5])) == pytest.approx(0.02)
        assert simes_global_pvalue(np.array([0.42])) == pytest.approx(0.42)
        assert simes_global_pvalue(np.full(7, 0.3)) == pytest.approx(0.3)

    def test_harmonic(self):
        assert harmonic_mean_pvalue(np.array([0.01, 1.0])) == pytest.approx(2 / 101)
        assert harmonic_mean_pvalue(np.array([0.77])) == pytest.approx(0.77)
        assert harmonic_mean_pvalue(np.full(4, 0.2)) == pytest.approx(0.2)
        with pytest.raises(ValueError):
            harmonic_mean_pvalue(np.array([0.0, 0.5]))


class TestFdpPower:
    def test_empty_rejections(self):
        rep = RejectionReport(rejected=np.array([], dtype=int), procedure="bh")
        assert fdp_power(rep, {1, 2}, 10) == (0.0, 0.0)

    def test_perfect(self):
        rep = RejectionReport(rejected=np.array([1, 2]), procedure="bh")
        assert fdp_power(rep, {1, 2}, 10) == (0.0, 1.0)

    def test_half(self):
        rep = RejectionReport(rejected=np.array([0, 1]), procedure="bh")
        assert fdp_power(rep, {1, 2}, 10) == (0.5, 0.5)

    def test_out_of_range_truth(self):
        rep = RejectionReport(rejected=np.array([0]), procedure="bh")
        with pytest.raises(ValueError):
            fdp_power(rep, {11}, 10)
