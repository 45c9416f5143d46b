"""Marginal conformal p-value behaviour, including the null-law invariants."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conformal_outliers import special as sp
from conformal_outliers.conformal import (
    CalibrationSet,
    PValueVector,
    marginal_pvalue,
    marginal_pvalue_randomized,
    marginal_pvalues_batch,
)
from conformal_outliers.randomness import RandomStream


CAL5 = CalibrationSet([1, 2, 3, 4, 5])


class TestMarginalPvalue:
    def test_interior(self):
        assert marginal_pvalue(CAL5, 2.5) == pytest.approx(3 / 6)

    def test_below_all(self):
        assert marginal_pvalue(CAL5, 0.0) == pytest.approx(1 / 6)

    def test_above_all(self):
        assert marginal_pvalue(CAL5, 10.0) == 1.0

    def test_tie_counts_as_leq(self):
        assert marginal_pvalue(CAL5, 3.0) == pytest.approx(4 / 6)

    @given(st.lists(st.floats(-100, 100), min_size=1, max_size=50),
           st.floats(-100, 100), st.floats(-100, 100))
    def test_monotone_in_score(self, cal, s1, s2):
        c = CalibrationSet(cal)
        lo, hi = min(s1, s2), max(s1, s2)
        assert marginal_pvalue(c, lo) <= marginal_pvalue(c, hi)


class TestRandomized:
    def test_no_ties_u_one_equals_marginal(self):
        assert marginal_pvalue_randomized(CAL5, 2.5, 1.0) == marginal_pvalue(CAL5, 2.5)

    def test_no_ties_any_u_equals_marginal(self):
        # without ties the ceiling is 1 for every u > 0
        assert marginal_pvalue_randomized(CAL5, 2.5, 0.2) == marginal_pvalue(CAL5, 2.5)

    def test_all_ties_u_half(self):
        cal = CalibrationSet([1, 1, 1])
        assert marginal_pvalue_randomized(cal, 1.0, 0.5) == pytest.approx(0.5)

    def test_all_ties_u_small(self):
        cal = CalibrationSet([1, 1, 1])
        assert marginal_pvalue_randomized(cal, 1.0, 1e-12) == pytest.approx(1 / 4)

    def test_u_domain(self):
        with pytest.raises(ValueError):
            marginal_pvalue_randomized(CAL5, 1.0, 1.5)

    def test_randomized_superuniform_with_ties(self):
        # atoms at 0/1 scores: randomized p-values stay super-uniform
        rng = RandomStream(99)
        g = rng.generator()
        reps, n = 4000, 19
        hits = {0.25: 0, 0.5: 0}
        for r in range(reps):
            cal = CalibrationSet((g.random(n) < 0.5).astype(float))
            s = float(g.random() < 0.5)
            p = marginal_pvalue_randomized(cal, s, g.random())
            for t in hits:
                hits[t] += p <= t
        for t, h in hits.items():
            assert h / reps <= t + 3 * math.sqrt(t * (1 - t) / reps)


class TestBatch:
    def test_single_matches_scalar(self):
        out = marginal_pvalues_batch(CAL5, np.array([2.5]))
        assert out.m == 1
        assert out.values[0] == marginal_pvalue(CAL5, 2.5)

    def test_sorted_inputs_give_sorted_outputs(self):
        out = marginal_pvalues_batch(CAL5, np.array([0.5, 1.5, 3.5, 9.0]))
        assert (np.diff(out.values) >= 0).all()

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            marginal_pvalues_batch(CAL5, np.array([]))

    def test_grid_membership(self):
        out = marginal_pvalues_batch(CAL5, np.array([-5, 1.1, 2.9, 100.0]))
        grid = np.arange(1, 7) / 6
        assert all(any(abs(v - gv) < 1e-12 for gv in grid) for v in out.values)

    def test_null_grid_uniformity_chisq(self):
        # pooled null p-values over fresh (cal, test) draws are uniform on the
        # grid {1/(n+1),...,1}: chi-square GOF at 1%
        n, reps = 9, 10_000
        g = RandomStream(7).generator()
        cells = np.zeros(n + 1)
        for _ in range(reps):
            cal = np.sort(g.random(n))
            u = g.random()
            p = (1 + np.searchsorted(cal, u, side="right")) / (n + 1)
            cells[round(p * (n + 1)) - 1] += 1
        expected = reps / (n + 1)
        stat = ((cells - expected) ** 2 / expected).sum()
        assert stat < sp.chi_square_quantile(n, 0.99)

    def test_marginal_superuniformity(self):
        # P[p <= t] <= t + 3 s.e. over fresh (cal, inlier) draws
        n, reps = 49, 20_000
        g = RandomStream(12).generator()
        cal = np.sort(g.random((reps, n)), axis=1)
        tests = g.random(reps)
        counts = (cal <= tests[:, None]).sum(axis=1)
        p = (1 + counts) / (n + 1)
        for t in (0.05, 0.1, 0.25, 0.5, 0.9):
            freq = (p <= t).mean()
            assert freq <= t + 3 * math.sqrt(t * (1 - t) / reps)

    def test_positive_dependence_smoke(self):
        # indicator covariance over a (t1, t2) grid is >= -3 s.e.
        n, reps = 20, 20_000
        g = RandomStream(13).generator()
        cal = np.sort(g.random((reps, n)), axis=1)
        u = g.random((reps, 2))
        p1 = (1 + (cal <= u[:, :1]).sum(axis=1)) / (n + 1)
        p2 = (1 + (cal <= u[:, 1:]).sum(axis=1)) / (n + 1)
        for t1 in (0.1, 0.3, 0.6):
            for t2 in (0.1, 0.3, 0.6):
                a = p1 <= t1
                b = p2 <= t2
                cov = (a & b).mean() - a.mean() * b.mean()
                assert cov >= -3.0 / math.sqrt(reps)


class TestPValueVector:
    def test_marginal_grid_enforced(self):
        with pytest.raises(ValueError):
            PValueVector(values=np.array([0.123]), kind="marginal", n=5)

    def test_rejects_zero(self):
        with pytest.raises(ValueError):
            PValueVector(values=np.array([0.0]), kind="conditional", n=5)

    def test_calibration_sorted_and_frozen(self):
        c = CalibrationSet([3, 1, 2])
        assert (np.diff(c.scores) >= 0).all()
        with pytest.raises(ValueError):
            c.scores[0] = 5.0


@settings(max_examples=30)
@given(st.lists(st.floats(-50, 50), min_size=1, max_size=30),
       st.lists(st.floats(-50, 50), min_size=1, max_size=10))
def test_batch_matches_scalar_everywhere(cal, tests):
    c = CalibrationSet(cal)
    out = marginal_pvalues_batch(c, np.asarray(tests))
    for s, v in zip(tests, out.values):
        assert v == marginal_pvalue(c, s)
