"""Shared builders for the test modules."""
from __future__ import annotations

from datetime import date, timedelta

import numpy as np

from solarterm.returns import LabeledSeries, ReturnSeries


def grouped_labeled(values: np.ndarray, groups: np.ndarray) -> LabeledSeries:
    """Term-day LabeledSeries where row ``i`` belongs to term ``groups[i]``."""
    n = values.size
    start = date(2000, 1, 3)
    dates = tuple(start + timedelta(days=i) for i in range(n))
    dummies = np.zeros((n, 24))
    dummies[np.arange(n), groups - 1] = 1.0
    lagged = np.concatenate([[np.nan], values[:-1]])
    return LabeledSeries(ReturnSeries(dates, values.astype(float)), dummies,
                         1.0 - dummies.sum(axis=1), lagged)


# Pinned five-point regression: y on an intercept and x
HC3_X = [[1, 0], [1, 1], [1, 2], [1, 3], [1, 4]]
HC3_Y = [1, 3, 2, 5, 4]


def exact_hc3(X, y):
    """HC3 covariance in exact rational arithmetic for a two-column design.

    Returns ``(cov, resid, a)`` as floats, where ``a_i = e_i^2 / (1 - h_i)^2``.
    """
    from fractions import Fraction as F

    X = [[F(v) for v in row] for row in X]
    y = [F(v) for v in y]
    n = len(y)
    s00 = sum(r[0] * r[0] for r in X)
    s01 = sum(r[0] * r[1] for r in X)
    s11 = sum(r[1] * r[1] for r in X)
    det = s00 * s11 - s01 * s01
    inv = [[s11 / det, -s01 / det], [-s01 / det, s00 / det]]
    xty = [sum(X[i][j] * y[i] for i in range(n)) for j in range(2)]
    b = [sum(inv[j][k] * xty[k] for k in range(2)) for j in range(2)]
    e = [y[i] - X[i][0] * b[0] - X[i][1] * b[1] for i in range(n)]
    h = [sum(X[i][j] * inv[j][k] * X[i][k] for j in range(2) for k in range(2)) for i in range(n)]
    a = [e[i] ** 2 / (1 - h[i]) ** 2 for i in range(n)]
    meat = [[sum(a[i] * X[i][j] * X[i][k] for i in range(n)) for k in range(2)] for j in range(2)]
    tmp = [[sum(inv[j][m] * meat[m][k] for m in range(2)) for k in range(2)] for j in range(2)]
    cov = [[sum(tmp[j][m] * inv[m][k] for m in range(2)) for k in range(2)] for j in range(2)]
    return (np.array(cov, dtype=float), np.array(e, dtype=float), np.array(a, dtype=float))


def normal_equations(X, y):
    """Coefficients from ``(X'X) b = X'y``, the textbook route."""
    return np.linalg.solve(X.T @ X, X.T @ y)
