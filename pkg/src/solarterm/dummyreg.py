"""Inter-term dummy regression with a reference term, collinearity
diagnostics, HC3 covariance and extreme-bound robustness classification."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import linalg, stats

from .errors import CollinearityError, DataError, LeverageError, RankDeficiencyError
from .returns import LabeledSeries

__all__ = [
    "OlsFit",
    "EbaRow",
    "EbaResult",
    "Panel",
    "ols",
    "hc3_cov",
    "vif",
    "reference_regression",
    "eba_bounds",
    "significant_panels",
]


@dataclass
class OlsFit:
    columns: list[str]
    coef: np.ndarray
    se: np.ndarray
    t: np.ndarray
    p: np.ndarray
    ci95: np.ndarray  # (k, 2)
    resid: np.ndarray
    hat: np.ndarray
    cov_ols: np.ndarray
    cov_hc3: Optional[np.ndarray]
    df_resid: int
    sigma2: float
    design: np.ndarray = field(repr=False)
    y: np.ndarray = field(repr=False)

    @property
    def nobs(self) -> int:
        return self.design.shape[0]

    def index(self, column: str) -> int:
        return self.columns.index(column)

    def r_squared(self) -> float:
        yc = self.y - self.y.mean()
        return 1.0 - float(self.resid @ self.resid) / float(yc @ yc)


def _rank_check(X: np.ndarray, columns: Sequence[str]) -> None:
    _, r, piv = linalg.qr(X, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    tol = diag[0] * max(X.shape) * np.finfo(float).eps if diag.size else 0.0
    rank = int(np.sum(diag > tol))
    if rank < X.shape[1]:
        dependent = [columns[j] for j in sorted(piv[rank:])]
        raise RankDeficiencyError(dependent)


def ols(X, y, columns: Sequence[str] | None = None) -> OlsFit:
    """Ordinary least squares with classical and HC3 covariances.

    ``cov_hc3`` is ``None`` when some observation has leverage one; call
    :func:`hc3_cov` directly to get the offending row.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise DataError(f"shape mismatch: X {X.shape}, y {y.shape}")
    n, k = X.shape
    cols = list(columns) if columns is not None else [f"x{j}" for j in range(k)]
    if n <= k:
        raise DataError(f"need more observations than regressors (n={n}, k={k})")
    _rank_check(X, cols)

    q, r = linalg.qr(X, mode="economic")
    coef = linalg.solve_triangular(r, q.T @ y)
    resid = y - X @ coef
    hat = np.einsum("ij,ij->i", q, q)
    rinv = linalg.solve_triangular(r, np.eye(k))
    xtx_inv = rinv @ rinv.T
    df = n - k
    sigma2 = float(resid @ resid) / df
    cov = sigma2 * xtx_inv
    se = np.sqrt(np.diag(cov))
    with np.errstate(divide="ignore", invalid="ignore"):
        t = coef / se
    p = 2.0 * stats.t.sf(np.abs(t), df)
    q975 = stats.t.ppf(0.975, df)
    ci = np.column_stack([coef - q975 * se, coef + q975 * se])
    fit = OlsFit(cols, coef, se, t, p, ci, resid, hat, cov, None, df, sigma2, X, y)
    try:
        fit.cov_hc3 = hc3_cov(fit, _xtx_inv=xtx_inv)
    except LeverageError:
        fit.cov_hc3 = None
    return fit


def hc3_cov(fit: OlsFit, _xtx_inv: np.ndarray | None = None) -> np.ndarray:
    """``(X'X)^-1 X' A X (X'X)^-1`` with ``A = diag(e_i^2 / (1 - h_i)^2)``."""
    X = fit.design
    h = fit.hat
    bad = np.flatnonzero(h >= 1.0 - 1e-10)
    if bad.size:
        raise LeverageError(bad[0])
    xtx_inv = _xtx_inv if _xtx_inv is not None else np.linalg.inv(X.T @ X)
    a = fit.resid**2 / (1.0 - h) ** 2
    meat = (X * a[:, None]).T @ X
    cov = xtx_inv @ meat @ xtx_inv
    return 0.5 * (cov + cov.T)


def vif(X, columns: Sequence[str] | None = None) -> list[tuple[str, float, float]]:
    """(column, tolerance, VIF) for each column of a design without intercept.

    Each column is regressed on all the others plus an intercept.
    """
    X = np.asarray(X, dtype=float)
    n, k = X.shape
    cols = list(columns) if columns is not None else [f"x{j}" for j in range(k)]
    out = []
    for j in range(k):
        target = X[:, j]
        others = np.column_stack([np.ones(n), np.delete(X, j, axis=1)])
        coef, *_ = np.linalg.lstsq(others, target, rcond=None)
        resid = target - others @ coef
        tc = target - target.mean()
        sst = float(tc @ tc)
        ssr = float(resid @ resid)
        if sst == 0.0 or ssr <= 1e-12 * sst:
            raise CollinearityError(f"perfect collinearity: column {cols[j]!r} is explained by the others")
        tol = ssr / sst
        out.append((cols[j], tol, 1.0 / tol))
    return out


def _term_name(order: int) -> str:
    return f"ST{order}"


def reference_regression(labeled: LabeledSeries, ref: int) -> OlsFit:
    """Regress term-day returns on an intercept and the dummies of every other
    present term.  The intercept is the mean return of ``ref``."""
    sub = labeled.term_days()
    counts = sub.term_counts()
    if not 1 <= ref <= 24:
        raise ValueError(f"reference term must be in 1..24, got {ref}")
    if counts[ref - 1] == 0:
        raise DataError(f"reference term {ref} has no observations")
    present = [k + 1 for k in range(24) if counts[k] > 0 and k + 1 != ref]
    X = np.column_stack([np.ones(len(sub))] + [sub.dummies[:, k - 1] for k in present])
    names = ["const"] + [_term_name(k) for k in present]
    return ols(X, sub.y, names)


@dataclass(frozen=True)
class EbaRow:
    column: str
    estimate: float
    eba_se: float
    bounds: dict  # level -> (lower, upper)
    classification: str


@dataclass(frozen=True)
class EbaResult:
    rows: tuple[EbaRow, ...]
    levels: tuple[float, ...]

    def row(self, column: str) -> EbaRow:
        for r in self.rows:
            if r.column == column:
                return r
        raise KeyError(column)


def _robust(beta: float, lo: float, hi: float) -> bool:
    if beta == 0.0:
        return False
    s = np.sign(beta)
    return np.sign(lo) == s and np.sign(hi) == s


def eba_bounds(fit: OlsFit, levels: Sequence[float] = (0.95, 0.90)) -> EbaResult:
    """Extreme bounds ``beta +/- u * sigma`` with ``sigma`` from HC3 and ``u``
    the two-sided standard-normal quantile of each level."""
    cov = fit.cov_hc3 if fit.cov_hc3 is not None else hc3_cov(fit)
    sig = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    levels = tuple(sorted(levels, reverse=True))
    rows = []
    for j, col in enumerate(fit.columns):
        b = float(fit.coef[j])
        bounds = {}
        label = "fragile"
        for lev in levels:
            u = stats.norm.ppf(0.5 + lev / 2.0)
            lo, hi = b - u * sig[j], b + u * sig[j]
            bounds[lev] = (float(lo), float(hi))
        for lev in levels:
            if _robust(b, *bounds[lev]):
                label = f"robust-{round(lev * 100)}"
                break
        rows.append(EbaRow(col, b, float(sig[j]), bounds, label))
    return EbaResult(tuple(rows), levels)


@dataclass
class Panel:
    ref: int
    fit: OlsFit
    vif: list
    eba: EbaResult
    watchlist: bool = False
    shown: list = field(default_factory=list)  # relative-term columns with p < display threshold

    @property
    def intercept_p(self) -> float:
        return float(self.fit.p[0])


def significant_panels(
    labeled: LabeledSeries,
    ref_p: float = 0.10,
    display_p: float = 0.10,
    watch_p: float = 0.25,
) -> list[Panel]:
    """Reference-term panels whose intercept is significant at ``ref_p``,
    plus watchlist panels for near misses (``ref_p <= p < watch_p``)."""
    if labeled.label_mode != "term-day":
        raise DataError("inter-term panels need term-day labels")
    sub = labeled.term_days()
    counts = sub.term_counts()
    panels = []
    for ref in range(1, 25):
        if counts[ref - 1] == 0:
            continue
        fit = reference_regression(sub, ref)
        p0 = float(fit.p[0])
        if not p0 < watch_p:
            continue
        present = fit.columns[1:]
        pv = vif(fit.design[:, 1:], present) if present else []
        eba = eba_bounds(fit)
        shown = [c for j, c in enumerate(fit.columns) if j > 0 and fit.p[j] < display_p]
        panels.append(Panel(ref, fit, pv, eba, watchlist=not p0 < ref_p, shown=shown))
    return panels
