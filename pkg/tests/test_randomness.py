"""Random-stream reproducibility and uniform order-statistic checks."""

import math

import numpy as np

from conformal_outliers.randomness import (
    RandomStream,
    chunk_sizes,
    uniform_order_stats,
    uniform_order_stats_block,
)


class TestRandomStream:
    def test_reproducible(self):
        a = RandomStream(123, 7).generator().random(1000)
        b = RandomStream(123, 7).generator().random(1000)
        np.testing.assert_array_equal(a, b)

    def test_distinct_streams_differ(self):
        a = RandomStream(123, 0).generator().random(100)
        b = RandomStream(123, 1).generator().random(100)
        assert not np.array_equal(a, b)

    def test_split_deterministic(self):
        s = RandomStream(5)
        assert s.split(3) == s.split(3)
        assert s.split(3) != s.split(4)

    def test_substream_independence_smoke(self):
        # correlation of 1e5 paired draws within 4 MC s.e. of 0
        n = 100_000
        s = RandomStream(2024)
        x = s.split(0).generator().random(n)
        y = s.split(1).generator().random(n)
        corr = np.corrcoef(x, y)[0, 1]
        assert abs(corr) < 4.0 / math.sqrt(n)


class TestUniformOrderStats:
    def test_nondecreasing_and_bounded(self):
        u = uniform_order_stats(5, RandomStream(1))
        assert (np.diff(u) >= 0).all()
        assert u[0] >= 0.0 and u[-1] <= 1.0

    def test_single_mean(self):
        # mean of U_(1) with n=1 is 1/2; 1e5 draws within 4 s.e.
        reps = 100_000
        u = uniform_order_stats_block(1, reps, RandomStream(2))
        se = math.sqrt(1.0 / 12.0 / reps)
        assert abs(u.mean() - 0.5) < 4 * se

    def test_marginal_beta_means(self):
        # i-th of n=100 has mean i/101; 1e4 draws within 4 s.e. each
        n, reps = 100, 10_000
        u = uniform_order_stats_block(n, reps, RandomStream(3))
        i = np.arange(1, n + 1)
        mean = i / (n + 1)
        var = i * (n + 1 - i) / ((n + 1) ** 2 * (n + 2))
        se = np.sqrt(var / reps)
        assert (np.abs(u.mean(axis=0) - mean) < 4 * se).all()

    def test_pooled_ks_uniform(self):
        # KS of 1e5 pooled single draws vs Unif(0,1) below the 1% critical value
        reps = 100_000
        u = np.sort(uniform_order_stats_block(1, reps, RandomStream(4)).ravel())
        i = np.arange(1, reps + 1)
        d = max((i / reps - u).max(), (u - (i - 1) / reps).max())
        assert d < 1.6276 / math.sqrt(reps)


class TestChunking:
    def test_covers_total(self):
        for total, budget, width in ((10, 100, 3), (1000, 50, 10), (7, 1, 1)):
            sizes = chunk_sizes(total, budget, width)
            assert sum(sizes) == total
            assert all(s >= 1 for s in sizes)
