"""Descriptive statistics per solar term: moments, one-sample t tests and
Shapiro-Wilk normality tests."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.polynomial import polynomial as P
from scipy import stats

from .errors import DataError
from .returns import LabeledSeries

__all__ = ["SampleStats", "moments", "t_test_mean", "shapiro_wilk", "per_term_stats", "sample_stats"]


@dataclass(frozen=True)
class SampleStats:
    n: int
    mean: float
    std: float
    skewness: Optional[float]
    kurtosis: Optional[float]
    t_stat: Optional[float]
    t_p: Optional[float]
    sw_W: Optional[float]
    sw_p: Optional[float]
    term: Optional[int] = None
    flag: str = ""


def moments(sample) -> tuple[float, float, Optional[float], Optional[float]]:
    """Mean, sample std (ddof=1), skewness and non-excess kurtosis.

    Skewness and kurtosis use the biased moment estimators ``m3/m2**1.5`` and
    ``m4/m2**2``; both are ``None`` when the variance is zero.
    """
    x = np.asarray(sample, dtype=float)
    n = x.size
    if n < 2:
        raise DataError(f"need at least 2 observations for moments, got {n}")
    mean = float(x.mean())
    d = x - mean
    std = float(np.sqrt(d @ d / (n - 1)))
    if np.ptp(x) == 0:
        return mean, 0.0, None, None
    if n < 3:
        return mean, std, None, None
    m2 = float(np.mean(d**2))
    skew = float(np.mean(d**3) / m2**1.5)
    kurt = float(np.mean(d**4) / m2**2)
    return mean, std, skew, kurt


def t_test_mean(sample) -> tuple[float, float]:
    """Two-sided one-sample t test of zero mean."""
    x = np.asarray(sample, dtype=float)
    n = x.size
    if n < 2:
        raise DataError(f"t test needs at least 2 observations, got {n}")
    std = float(np.std(x, ddof=1))
    if std == 0 or np.ptp(x) == 0:
        raise DataError("t test undefined for a zero-variance sample")
    t = float(x.mean() / (std / math.sqrt(n)))
    p = float(2.0 * stats.t.sf(abs(t), n - 1))
    return t, min(p, 1.0)


# Royston (1995) AS R94 coefficients
_C1 = [0.0, 0.221157, -0.147981, -2.07119, 4.434685, -2.706056]
_C2 = [0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633]
_C3 = [0.544, -0.39978, 0.025054, -6.714e-4]
_C4 = [1.3822, -0.77857, 0.062767, -0.0020322]
_C5 = [-1.5861, -0.31082, -0.083751, 0.0038915]
_C6 = [-0.4803, -0.082676, 0.0030302]
_G = [-2.273, 0.459]


def _swilk_coefficients(n: int) -> np.ndarray:
    """Upper-half weights a_1 >= a_2 >= ... (length n // 2)."""
    nn2 = n // 2
    if n == 3:
        return np.array([math.sqrt(0.5)])
    i = np.arange(1, nn2 + 1)
    m = stats.norm.ppf((i - 0.375) / (n + 0.25))
    summ2 = 2.0 * float(m @ m)
    ssumm2 = math.sqrt(summ2)
    rsn = 1.0 / math.sqrt(n)
    a1 = P.polyval(rsn, _C1) - m[0] / ssumm2
    a = np.empty(nn2)
    if n > 5:
        a2 = -m[1] / ssumm2 + P.polyval(rsn, _C2)
        fac = math.sqrt((summ2 - 2 * m[0] ** 2 - 2 * m[1] ** 2) / (1 - 2 * a1**2 - 2 * a2**2))
        a[1] = a2
        first = 2
    else:
        fac = math.sqrt((summ2 - 2 * m[0] ** 2) / (1 - 2 * a1**2))
        first = 1
    a[0] = a1
    a[first:] = -m[first:] / fac
    return a


def shapiro_wilk(sample) -> tuple[float, float]:
    """Shapiro-Wilk W and p-value (Royston's AS R94 approximation, 3 <= n <= 5000)."""
    x = np.sort(np.asarray(sample, dtype=float))
    n = x.size
    if not 3 <= n <= 5000:
        raise DataError(f"Shapiro-Wilk requires 3 <= n <= 5000, got {n}")
    rng = x[-1] - x[0]
    if rng <= 1e-19 * max(1.0, abs(x[-1])):
        raise DataError("Shapiro-Wilk undefined for a zero-variance sample")

    half = _swilk_coefficients(n)
    a = np.zeros(n)
    a[: n // 2] = -half
    a[n - n // 2 :] = half[::-1]

    # W as the squared correlation between coefficients and ordered data
    xs = x / rng
    da = a - a.mean()
    dx = xs - xs.mean()
    ssa, ssx, sax = da @ da, dx @ dx, da @ dx
    ssassx = math.sqrt(ssa * ssx)
    w1 = (ssassx - sax) * (ssassx + sax) / (ssa * ssx)
    w = 1.0 - w1

    if n == 3:
        p = 1.909859317102744 * (math.asin(math.sqrt(w)) - 1.047197551196598)
        return w, min(max(p, 0.0), 1.0)
    y = math.log(w1)
    lxx = math.log(n)
    if n <= 11:
        gamma = P.polyval(n, _G)
        if y >= gamma:
            return w, 1e-99
        y = -math.log(gamma - y)
        mu = P.polyval(n, _C3)
        sigma = math.exp(P.polyval(n, _C4))
    else:
        mu = P.polyval(lxx, _C5)
        sigma = math.exp(P.polyval(lxx, _C6))
    p = float(stats.norm.sf(y, loc=mu, scale=sigma))
    return w, p


def sample_stats(sample, term: int | None = None) -> SampleStats:
    """Moments, t test and Shapiro-Wilk for one sample; small samples are flagged."""
    x = np.asarray(sample, dtype=float)
    n = x.size
    if n < 3:
        mean = float(x.mean()) if n else float("nan")
        std = float(np.std(x, ddof=1)) if n >= 2 else float("nan")
        return SampleStats(n, mean, std, None, None, None, None, None, None, term,
                           flag=f"insufficient observations (n={n})")
    mean, std, skew, kurt = moments(x)
    if skew is None:
        return SampleStats(n, mean, std, None, None, None, None, None, None, term,
                           flag="zero variance")
    t, tp = t_test_mean(x)
    flag = ""
    if n <= 5000:
        w, wp = shapiro_wilk(x)
    else:
        w = wp = None
        flag = "Shapiro-Wilk skipped (n > 5000)"
    return SampleStats(n, mean, std, skew, kurt, t, tp, w, wp, term, flag)


def per_term_stats(labeled: LabeledSeries) -> list[SampleStats]:
    """One :class:`SampleStats` row per term order (1..24), keyed by ``term``."""
    if labeled.label_mode != "term-day":
        raise DataError("per-term statistics need term-day labels")
    y = labeled.y
    return [
        sample_stats(y[labeled.dummies[:, k] == 1], term=k + 1) for k in range(24)
    ]
