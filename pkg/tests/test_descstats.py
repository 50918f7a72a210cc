from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy import stats

from solarterm.descstats import moments, per_term_stats, sample_stats, shapiro_wilk, t_test_mean
from solarterm.errors import DataError

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


class TestMoments:
    def test_against_scipy(self):
        x = np.random.default_rng(0).standard_t(5, size=400)
        mean, std, skew, kurt = moments(x)
        assert mean == pytest.approx(x.mean(), abs=1e-15)
        assert std == pytest.approx(np.std(x, ddof=1), rel=1e-13)
        assert skew == pytest.approx(stats.skew(x), rel=1e-12)
        assert kurt == pytest.approx(stats.kurtosis(x, fisher=False), rel=1e-12)

    def test_constant_sample(self):
        assert moments([2.0, 2.0, 2.0]) == (2.0, 0.0, None, None)

    def test_too_small(self):
        with pytest.raises(DataError):
            moments([1.0])

    @settings(max_examples=50, deadline=None)
    @given(arrays(float, st.integers(5, 40), elements=finite), st.floats(0.1, 10), st.floats(-5, 5))
    def test_affine_invariance(self, x, a, b):
        if np.ptp(x) < 1e-3:
            return
        m0, s0, k0, c0 = moments(x)
        m1, s1, k1, c1 = moments(a * x + b)
        assert s1 == pytest.approx(a * s0, rel=1e-9)
        assert k1 == pytest.approx(k0, rel=1e-6, abs=1e-6)
        assert c1 == pytest.approx(c0, rel=1e-6)


class TestTTest:
    def test_against_scipy(self):
        x = np.random.default_rng(1).normal(0.3, 1.0, size=28)
        t, p = t_test_mean(x)
        ref = stats.ttest_1samp(x, 0.0)
        assert t == pytest.approx(ref.statistic, rel=1e-12)
        assert p == pytest.approx(ref.pvalue, rel=1e-10)

    def test_zero_variance(self):
        with pytest.raises(DataError):
            t_test_mean([1.0, 1.0, 1.0])

    def test_null_p_uniform(self):
        rng = np.random.default_rng(2)
        ps = [t_test_mean(rng.standard_normal(28))[1] for _ in range(400)]
        assert stats.kstest(ps, "uniform").pvalue > 0.01


class TestShapiroWilk:
    @pytest.mark.parametrize("n", [3, 4, 5, 6, 7, 11, 12, 30, 200, 2000])
    def test_matches_scipy(self, n):
        x = np.random.default_rng(n).uniform(size=n)
        w, p = shapiro_wilk(x)
        ref = stats.shapiro(x)
        assert w == pytest.approx(ref.statistic, abs=1e-6)
        assert p == pytest.approx(ref.pvalue, abs=1e-6)

    def test_pinned_uniform_30(self):
        x = np.random.default_rng(30).uniform(size=30)
        w, p = shapiro_wilk(x)
        assert w == pytest.approx(0.93791020, abs=1e-7)  # scipy.stats.shapiro
        assert p == pytest.approx(0.07991148, abs=1e-7)

    @settings(max_examples=40, deadline=None)
    @given(arrays(float, st.integers(3, 60), elements=finite), st.floats(0.01, 100), st.floats(-10, 10))
    def test_invariances(self, x, a, b):
        if np.ptp(x) < 1e-2:
            return
        w0, p0 = shapiro_wilk(x)
        w1, _ = shapiro_wilk(a * x + b)
        w2, _ = shapiro_wilk(np.random.default_rng(0).permutation(x))
        assert 0.0 < w0 <= 1.0 + 1e-12 and 0.0 <= p0 <= 1.0
        assert w1 == pytest.approx(w0, abs=1e-9)
        assert w2 == pytest.approx(w0, abs=1e-12)

    def test_null_p_uniform(self):
        rng = np.random.default_rng(3)
        ps = [shapiro_wilk(rng.standard_normal(28))[1] for _ in range(400)]
        assert stats.kstest(ps, "uniform").pvalue > 0.01

    @pytest.mark.parametrize("x", [[1.0, 2.0], [3.0, 3.0, 3.0], list(range(5001))])
    def test_rejects(self, x):
        with pytest.raises(DataError):
            shapiro_wilk(x)


class TestSampleStats:
    def test_flags(self):
        assert "insufficient" in sample_stats([1.0, 2.0]).flag
        assert sample_stats([1.0, 1.0, 1.0]).flag == "zero variance"
        big = sample_stats(np.random.default_rng(0).standard_normal(6000))
        assert big.sw_W is None and "skipped" in big.flag

    def test_per_term(self, small_labeled):
        rows = per_term_stats(small_labeled)
        assert [r.term for r in rows] == list(range(1, 25))
        y = small_labeled.y[small_labeled.dummies[:, 2] == 1]
        assert rows[2].n == y.size and rows[2].mean == pytest.approx(y.mean())
