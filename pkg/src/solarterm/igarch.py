"""Full-sample models: AR(1) mean regressions with term dummies, the ARCH-LM
pretest, and IGARCH(1,1) variance regressions with term dummies estimated by
maximum likelihood under normal, Student-t and GED errors."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np
from numba import njit
from scipy import optimize, special, stats

from .dummyreg import OlsFit, ols
from .errors import ConvergenceError, DataError, EstimationError
from .returns import LabeledSeries

__all__ = [
    "DISTS",
    "MeanFit",
    "GarchFit",
    "ArchTestResult",
    "ar1_dummy_fit",
    "refined_mean_fit",
    "arch_lm_test",
    "dist_logpdf",
    "ged_lambda",
    "igarch_fit",
    "prune_insignificant",
    "turn_of_term_fit",
    "strongly_efficient",
]

log = logging.getLogger(__name__)

DISTS = ("normal", "t", "ged")
_DIST_CODE = {"normal": 0, "t": 1, "ged": 2}
_ALIASES = {"student_t": "t", "student-t": "t", "studentt": "t", "gaussian": "normal"}

VARIANCE_FLOOR = 1e-12
FLOOR_SHARE_LIMIT = 1e-3
GRAD_TOL = 1e-4
START_GAMMA = 0.06
_FD_LADDER = (1e-2, 3e-3, 1e-3, 3e-4, 1e-4, 3e-5, 1e-5, 3e-6, 1e-6)
START_SHAPE = {"t": 8.0, "ged": 1.5}


def _dist_name(dist: str) -> str:
    d = _ALIASES.get(dist.lower(), dist.lower())
    if d not in DISTS:
        raise ValueError(f"unknown distribution {dist!r}; choose from {DISTS}")
    return d


# ---------------------------------------------------------------------------
# mean level


@dataclass
class MeanFit:
    mu: float
    r: float
    alpha: dict  # term -> coefficient
    columns: list[str]
    coef: np.ndarray
    se: np.ndarray
    t: np.ndarray
    p: np.ndarray
    resid: np.ndarray
    n_obs: int
    dropped: list[int] = field(default_factory=list)
    ols: Optional[OlsFit] = field(default=None, repr=False)

    def term_p(self, term: int) -> float:
        return float(self.p[self.columns.index(f"ST{term}")])


def _usable(labeled: LabeledSeries) -> slice:
    if len(labeled) < 3:
        raise DataError("series too short")
    return slice(1, None)


def ar1_dummy_fit(labeled: LabeledSeries, terms: Iterable[int] | None = None,
                  min_obs: int = 100) -> MeanFit:
    """Conditional least squares of ``R_t`` on a constant, term dummies and ``R_{t-1}``.

    Normal days form the baseline, so all 24 dummies can enter together.
    Terms without any labeled day are dropped with a warning.
    """
    rows = _usable(labeled)
    y = labeled.y[rows]
    if y.size < min_obs:
        raise DataError(f"need at least {min_obs} observations, got {y.size}")
    lag = labeled.lagged_return[rows]
    D = labeled.dummies[rows]
    wanted = list(range(1, 25)) if terms is None else sorted(set(terms))
    counts = D.sum(axis=0)
    keep = [k for k in wanted if counts[k - 1] > 0]
    dropped = [k for k in wanted if counts[k - 1] == 0]
    for k in dropped:
        log.warning("term %d has no labeled days; its dummy is dropped", k)
    X = np.column_stack([np.ones(y.size), lag] + [D[:, k - 1] for k in keep])
    names = ["const", "R(t-1)"] + [f"ST{k}" for k in keep]
    fit = ols(X, y, names)
    alpha = {k: float(fit.coef[2 + j]) for j, k in enumerate(keep)}
    return MeanFit(
        float(fit.coef[0]), float(fit.coef[1]), alpha, names, fit.coef, fit.se, fit.t,
        fit.p, fit.resid, y.size, dropped, fit,
    )


def refined_mean_fit(labeled: LabeledSeries, keep: Iterable[int]) -> MeanFit:
    """:func:`ar1_dummy_fit` restricted to the ``keep`` dummies."""
    return ar1_dummy_fit(labeled, terms=list(keep))


@dataclass
class ArchTestResult:
    lags: list[int]
    lm: list[float]
    p: list[float]
    nobs: list[int]
    level: float = 0.01

    @property
    def reject(self) -> list[bool]:
        return [pv < self.level for pv in self.p]


def arch_lm_test(resid, lags: Sequence[int] = (1, 2, 3, 4, 5, 10, 15)) -> ArchTestResult:
    """Engle's LM test: regress squared residuals on ``q`` of their own lags;
    ``LM = n_eff * R^2`` is chi-squared with ``q`` degrees of freedom."""
    e2 = np.asarray(resid, dtype=float) ** 2
    n = e2.size
    qs = sorted(set(int(q) for q in lags))
    if not qs or qs[0] < 1:
        raise ValueError("lags must be positive integers")
    if n <= qs[-1] + 1:
        raise DataError(f"need more than {qs[-1] + 1} residuals for lag {qs[-1]}")
    if np.ptp(e2) == 0:
        raise DataError("degenerate residuals: squared residuals are constant")
    out_lm, out_p, out_n = [], [], []
    for q in qs:
        target = e2[q:]
        X = np.column_stack([np.ones(n - q)] + [e2[q - j : n - j] for j in range(1, q + 1)])
        coef, *_ = np.linalg.lstsq(X, target, rcond=None)
        res = target - X @ coef
        tc = target - target.mean()
        r2 = 1.0 - float(res @ res) / float(tc @ tc)
        lm = max(0.0, (n - q) * r2)
        out_lm.append(lm)
        out_p.append(float(stats.chi2.sf(lm, q)))
        out_n.append(n - q)
    return ArchTestResult(qs, out_lm, out_p, out_n)


# ---------------------------------------------------------------------------
# error distributions (unit variance)


def ged_lambda(v: float) -> float:
    return math.sqrt(2.0 ** (-2.0 / v) * math.exp(special.gammaln(1.0 / v) - special.gammaln(3.0 / v)))


def _dist_constants(dist: str, shape: float | None) -> tuple[float, float, float, float]:
    """(log-normaliser, its derivative in the shape, GED lambda, dlog(lambda)/dv)."""
    if dist == "normal":
        return -0.5 * math.log(2.0 * math.pi), 0.0, 1.0, 0.0
    if dist == "t":
        nu = shape
        if not nu > 2.0:
            raise ValueError(f"Student-t degrees of freedom must exceed 2, got {nu}")
        c = (special.gammaln(0.5 * (nu + 1)) - special.gammaln(0.5 * nu)
             - 0.5 * math.log(math.pi * (nu - 2.0)))
        dc = 0.5 * special.digamma(0.5 * (nu + 1)) - 0.5 * special.digamma(0.5 * nu) - 0.5 / (nu - 2.0)
        return c, dc, 1.0, 0.0
    v = shape
    if not v > 0.0:
        raise ValueError(f"GED shape must be positive, got {v}")
    lam = ged_lambda(v)
    ln2 = math.log(2.0)
    dloglam = 0.5 * (2.0 * ln2 - special.digamma(1.0 / v) + 3.0 * special.digamma(3.0 / v)) / v**2
    k = math.log(v) - math.log(lam) - (1.0 + 1.0 / v) * ln2 - special.gammaln(1.0 / v)
    dk = 1.0 / v - dloglam + ln2 / v**2 + special.digamma(1.0 / v) / v**2
    return k, dk, lam, dloglam


def dist_logpdf(z, dist: str = "normal", dist_param: float | None = None):
    """Log density of the zero-mean, unit-variance error distribution.

    ``dist_param`` is the Student-t degrees of freedom (> 2) or the GED shape
    (> 0); it is ignored for the normal.
    """
    dist = _dist_name(dist)
    z = np.asarray(z, dtype=float)
    c, _, lam, _ = _dist_constants(dist, dist_param)
    if dist == "normal":
        out = c - 0.5 * z * z
    elif dist == "t":
        nu = dist_param
        out = c - 0.5 * (nu + 1.0) * np.log1p(z * z / (nu - 2.0))
    else:
        out = c - 0.5 * np.abs(z / lam) ** dist_param
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# IGARCH likelihood


@njit(cache=True)
def _igarch_kernel(y, X, dv, beta, gamma, dist, shape, const, dconst, lam, dloglam,
                   h0, floor, free_shape, want_grad, e_out, h_out, ch_out, scores):
    """Filter the variance path and accumulate the log-likelihood.

    ``dv`` is the dummy contribution ``D @ a`` per observation.  With
    ``want_grad`` the gradient in the mean coefficients, gamma and the shape is
    accumulated directly; ``ch_out`` receives d(loglik_t)/d(h_t), zeroed where
    the floor binds, from which the dummy gradient is assembled afterwards.
    """
    n = y.shape[0]
    km = X.shape[1]
    p = km + 2
    grad = np.zeros(p)  # [beta..., gamma, shape]
    dh_b = np.zeros(km)
    dh_g = 0.0
    keep_scores = scores.shape[0] == n
    e_prev = 0.0
    h_prev = h0
    ll = 0.0
    ll_c = 0.0
    nfloor = 0
    omg = 1.0 - gamma
    for t in range(n):
        e = y[t]
        for j in range(km):
            e -= X[t, j] * beta[j]
        if t == 0:
            # presample eps^2 = h = h0, both independent of the parameters
            h = dv[0] + h0
            if want_grad:
                for j in range(km):
                    dh_b[j] = 0.0
                dh_g = 0.0
        else:
            h = dv[t] + gamma * e_prev * e_prev + omg * h_prev
            if want_grad:
                for j in range(km):
                    dh_b[j] = -2.0 * gamma * e_prev * X[t - 1, j] + omg * dh_b[j]
                dh_g = e_prev * e_prev - h_prev + omg * dh_g
        floored = False
        if not (h >= floor):
            h = floor
            nfloor += 1
            floored = True
            if want_grad:
                for j in range(km):
                    dh_b[j] = 0.0
                dh_g = 0.0
        sq = math.sqrt(h)
        z = e / sq
        ds = 0.0
        if dist == 0:
            lf = const - 0.5 * z * z
            g = -z
        elif dist == 1:
            nu = shape
            q = z * z / (nu - 2.0)
            lq = math.log1p(q)
            lf = const - 0.5 * (nu + 1.0) * lq
            g = -(nu + 1.0) * z / (nu - 2.0 + z * z)
            if free_shape:
                ds = dconst - 0.5 * lq + 0.5 * (nu + 1.0) * z * z / ((nu - 2.0) * (nu - 2.0 + z * z))
        else:
            v = shape
            u = abs(z) / lam
            if u > 0.0:
                uv = u ** v
                lf = const - 0.5 * uv
                g = -0.5 * v * uv / z
                if free_shape:
                    ds = dconst - 0.5 * uv * (math.log(u) - v * dloglam)
            else:
                lf = const
                g = 0.0
                ds = dconst
        # compensated sum: finite-difference checks difference this total
        # at steps where plain accumulation noise would dominate
        term = -0.5 * math.log(h) + lf - ll_c
        acc = ll + term
        ll_c = (acc - ll) - term
        ll = acc
        e_out[t] = e
        h_out[t] = h
        if want_grad:
            cb = g / sq
            ch = (-0.5 - 0.5 * g * z) / h
            ch_out[t] = 0.0 if floored else ch
            for j in range(km):
                s = -cb * X[t, j] + ch * dh_b[j]
                grad[j] += s
                if keep_scores:
                    scores[t, j] = s
            s = ch * dh_g
            grad[km] += s
            if keep_scores:
                scores[t, km] = s
            if free_shape:
                grad[p - 1] += ds
                if keep_scores:
                    scores[t, scores.shape[1] - 1] = ds
        e_prev = e
        h_prev = h
    return ll, grad, nfloor


@njit(cache=True)
def _reverse_accumulate(ch, gamma):
    """``R_t = ch_t + (1 - gamma) R_{t+1}``, cut where ``ch_t`` marks a floor."""
    n = ch.shape[0]
    r = np.empty(n)
    acc = 0.0
    omg = 1.0 - gamma
    for t in range(n - 1, -1, -1):
        if ch[t] == 0.0:
            acc = 0.0
        else:
            acc = ch[t] + omg * acc
        r[t] = acc
    return r


@njit(cache=True)
def _dummy_scores(D, ch, gamma, out, offset):
    """Per-observation dummy scores ``ch_t * dh_t/da_j`` by forward recursion."""
    n, kv = D.shape
    dh = np.zeros(kv)
    omg = 1.0 - gamma
    for t in range(n):
        for j in range(kv):
            dh[j] = D[t, j] + (omg * dh[j] if t > 0 else 0.0)
            if ch[t] == 0.0:
                dh[j] = 0.0
            out[t, offset + j] = ch[t] * dh[j]


def _sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    ex = math.exp(x)
    return ex / (1.0 + ex)


class _Likelihood:
    """Log-likelihood on standardized data in unconstrained coordinates.

    theta = [mean coefficients, logit(gamma), variance dummies, shape transform]
    with the shape transform ``log(nu - 2)`` (t) or ``log(v)`` (GED).
    """

    def __init__(self, y, X, D, dist, fixed_shape, h0, scale, mean_scale):
        self.y = np.ascontiguousarray(y, dtype=float)
        self.X = np.ascontiguousarray(X, dtype=float)
        self.D = np.ascontiguousarray(D, dtype=float)
        self.n = self.y.size
        self.km = self.X.shape[1]
        self.kv = self.D.shape[1]
        self.dist = dist
        self.code = _DIST_CODE[dist]
        self.fixed_shape = fixed_shape
        self.free_shape = dist != "normal" and fixed_shape is None
        self.h0 = float(h0)
        self.scale = float(scale)
        self.mean_scale = np.asarray(mean_scale, dtype=float)
        self.floor = VARIANCE_FLOOR / scale**2
        self.p = self.km + 1 + self.kv + (1 if self.free_shape else 0)
        self._e = np.empty(self.n)
        self._h = np.empty(self.n)
        self._no_scores = np.empty((0, 0))
        self._ch = np.empty(self.n)
        self._no_ch = np.empty(0)
        self._zeros = np.zeros(self.n)

    def shape_of(self, theta) -> float | None:
        if self.dist == "normal":
            return None
        if not self.free_shape:
            return self.fixed_shape
        w = theta[-1]
        return 2.0 + math.exp(w) if self.dist == "t" else math.exp(w)

    def shape_deriv(self, theta) -> float:
        w = theta[-1]
        return math.exp(w)

    def _call(self, theta, want_grad, scores=None):
        theta = np.asarray(theta, dtype=float)
        km, kv = self.km, self.kv
        beta = theta[:km]
        gamma = _sigmoid(theta[km])
        a = theta[km + 1 : km + 1 + kv]
        shape = self.shape_of(theta)
        if shape is not None and self.free_shape and not (0.0 < shape < 1e8 and math.isfinite(shape)):
            return -np.inf, np.zeros(self.p), self.n
        try:
            const, dconst, lam, dloglam = _dist_constants(self.dist, shape)
        except (ValueError, OverflowError):
            return -np.inf, np.zeros(self.p), self.n
        dv = self.D @ a if kv else self._zeros
        ch = self._ch if want_grad else self._no_ch
        ll, g_core, nfloor = _igarch_kernel(
            self.y, self.X, dv, beta, gamma, self.code,
            0.0 if shape is None else shape, const, dconst, lam, dloglam,
            self.h0, self.floor, self.free_shape, want_grad,
            self._e, self._h, ch, self._no_scores if scores is None else scores,
        )
        grad = np.zeros(self.p)
        if want_grad:
            grad[: km + 1] = g_core[: km + 1]
            if kv:
                grad[km + 1 : km + 1 + kv] = self.D.T @ _reverse_accumulate(ch, gamma)
                if scores is not None:
                    _dummy_scores(self.D, ch, gamma, scores, km + 1)
            if self.free_shape:
                grad[-1] = g_core[-1]
        if want_grad:
            jac_g = gamma * (1.0 - gamma)
            grad[km] *= jac_g
            if scores is not None:
                scores[:, km] *= jac_g
            if self.free_shape:
                js = self.shape_deriv(theta)
                grad[-1] *= js
                if scores is not None:
                    scores[:, -1] *= js
        if not math.isfinite(ll):
            return -np.inf, grad, nfloor
        return ll, grad, nfloor

    def loglik(self, theta) -> float:
        return self._call(theta, False)[0]

    def loglik_grad(self, theta):
        ll, g, _ = self._call(theta, True)
        return ll, g

    def scores(self, theta) -> np.ndarray:
        s = np.zeros((self.n, self.p))
        self._call(theta, True, s)
        return s

    def filtered(self, theta):
        _, _, nfloor = self._call(theta, False)
        return self._e.copy(), self._h.copy(), nfloor

    def hessian(self, theta) -> np.ndarray:
        """Central differences of the analytic gradient."""
        theta = np.asarray(theta, dtype=float)
        H = np.empty((self.p, self.p))
        for i in range(self.p):
            step = 1e-5 * max(1.0, abs(theta[i]))
            tp = theta.copy()
            tm = theta.copy()
            tp[i] += step
            tm[i] -= step
            gp = self.loglik_grad(tp)[1]
            gm = self.loglik_grad(tm)[1]
            H[:, i] = (gp - gm) / (2.0 * step)
        return 0.5 * (H + H.T)

    def fd_gradient(self, theta) -> np.ndarray:
        """Finite-difference gradient of the log-likelihood, independent of the
        analytic derivative recursion.

        Each coordinate is differenced with a five-point central stencil over
        a ladder of relative steps.  The reported value is the middle of the
        three consecutive steps that agree best, which balances truncation error
        (large steps on strongly curved coordinates, or GED residuals moved
        across zero) against rounding noise in the summed log-likelihood.
        """
        theta = np.asarray(theta, dtype=float)
        g = np.empty(self.p)
        f0 = self.loglik(theta)
        for i in range(self.p):
            base = min(max(1.0, abs(theta[i])), 100.0 * self._curvature_scale(theta, i, f0))

            def diff(rel):
                step = rel * base
                f = {}
                for k in (-2, -1, 1, 2):
                    tk = theta.copy()
                    tk[i] += k * step
                    f[k] = self.loglik(tk)
                return (f[-2] - 8.0 * f[-1] + 8.0 * f[1] - f[2]) / (12.0 * step)

            # the middle pair settles most coordinates; the full ladder is
            # only walked when it disagrees
            est = {rel: diff(rel) for rel in _FD_LADDER[5:7]}
            a, b = est.values()
            w = 1.0 + abs(theta[i])
            if abs(a - b) * w < 0.05 * GRAD_TOL and abs(b) * w < 0.1 * GRAD_TOL:
                g[i] = b
                continue
            vals = np.array([est[rel] if rel in est else diff(rel) for rel in _FD_LADDER])
            # three consecutive steps must agree; two can coincide on a
            # spurious truncation plateau
            spread = np.array([np.ptp(vals[j : j + 3]) for j in range(vals.size - 2)])
            j = int(np.argmin(spread))
            g[i] = vals[j + 1]
        return g

    def _curvature_scale(self, theta, i, f0) -> float:
        """Distance along coordinate ``i`` over which the log-likelihood
        drops by about one unit, from its own second difference.

        A dummy that pushes the variance path close to zero makes the
        likelihood smooth only on a tiny neighbourhood; steps sized to the
        parameter value alone then straddle that region.
        """
        probe = 1e-6 * max(1.0, abs(theta[i]))
        scale = math.inf
        for _ in range(4):
            tp = theta.copy()
            tm = theta.copy()
            tp[i] += probe
            tm[i] -= probe
            curv = abs(self.loglik(tp) - 2.0 * f0 + self.loglik(tm)) / probe**2
            if not math.isfinite(curv):
                probe *= 0.01
                continue
            scale = 1.0 / math.sqrt(curv) if curv > 0 else math.inf
            if probe <= 0.1 * scale:
                break
            probe = 0.01 * scale
        return scale

    def natural_jacobian(self, theta) -> np.ndarray:
        """d(natural parameter)/d(theta), diagonal."""
        km, kv = self.km, self.kv
        gamma = _sigmoid(theta[km])
        jac = np.empty(self.p)
        jac[:km] = self.mean_scale
        jac[km] = gamma * (1.0 - gamma)
        jac[km + 1 : km + 1 + kv] = self.scale**2
        if self.free_shape:
            jac[-1] = self.shape_deriv(theta)
        return jac


def _newton_polish(lik: _Likelihood, theta, free, max_iter: int = 8):
    """Newton steps over the ``free`` coordinates; returns (theta, ll, H_free)."""
    theta = np.asarray(theta, dtype=float).copy()
    ll, g = lik.loglik_grad(theta)

    def hess():
        return lik.hessian(theta)[np.ix_(free, free)]

    def small(gv, th):
        return np.max(np.abs(gv[free]) * (1.0 + np.abs(th[free])), initial=0.0) < 1e-9

    H = hess()
    for _ in range(max_iter):
        if small(g, theta):
            break
        try:
            np.linalg.cholesky(-H)
        except np.linalg.LinAlgError:
            break
        step = np.zeros_like(theta)
        step[free] = np.linalg.solve(-H, g[free])
        t = 1.0
        improved = False
        for _ in range(12):
            cand = theta + t * step
            ll_c, g_c = lik.loglik_grad(cand)
            # near the optimum the gain drowns in summation noise; accept a
            # step that shrinks the gradient without a material loss
            if math.isfinite(ll_c) and (
                ll_c > ll or (ll_c > ll - 1e-7 and np.max(np.abs(g_c[free])) < np.max(np.abs(g[free])))
            ):
                improved = True
                break
            t *= 0.5
        if not improved:
            break
        theta, ll, g = cand, ll_c, g_c
        H = hess()
    return theta, ll, H


def _maximize(lik: _Likelihood, theta0, bounds):
    """L-BFGS-B on the mean log-likelihood, then Newton polish of the
    coordinates not stuck at a bound.  Returns (theta, ll, H_free, free)."""
    n = lik.n

    def objective(th):
        ll, g = lik.loglik_grad(th)
        if not math.isfinite(ll):
            return 1e10, np.zeros_like(th)
        return -ll / n, -g / n

    res = optimize.minimize(
        objective, theta0, jac=True, method="L-BFGS-B", bounds=bounds,
        options={"maxiter": 5000, "ftol": 1e-15, "gtol": 1e-10, "maxcor": 30},
    )
    theta = res.x
    if not math.isfinite(lik.loglik(theta)):
        return theta, -np.inf, None, np.arange(lik.p)
    free = np.array([
        i for i, (lo, hi) in enumerate(bounds)
        if not ((lo is not None and theta[i] - lo < 1e-7) or (hi is not None and hi - theta[i] < 1e-7))
    ], dtype=int)
    theta, ll, H = _newton_polish(lik, theta, free)
    return theta, ll, H, free


# ---------------------------------------------------------------------------
# results


@dataclass
class GarchFit:
    dist: str
    mean_columns: list[str]
    mean_coef: np.ndarray
    mean_se: np.ndarray
    gamma: float
    beta: float
    gamma_se: float
    var_terms: list[int]
    var_coef: np.ndarray
    var_se: np.ndarray
    dist_param: Optional[float]
    dist_param_se: Optional[float]
    loglik: float
    nobs: int
    h: np.ndarray = field(repr=False)
    resid: np.ndarray = field(repr=False)
    n_floor: int = 0
    valid: bool = True
    se_method: str = "hessian"
    grad_check: float = float("nan")
    fixed_dist_param: bool = False
    two_step: bool = False
    restarts: int = 0
    warnings: list[str] = field(default_factory=list)
    theta: np.ndarray = field(default=None, repr=False)

    @property
    def lam(self) -> Optional[float]:
        """GED normaliser lambda (``None`` for other distributions)."""
        if self.dist != "ged" or self.dist_param is None:
            return None
        return ged_lambda(self.dist_param)

    @staticmethod
    def _p(est, se):
        est = np.asarray(est, dtype=float)
        se = np.asarray(se, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.where(se > 0, est / se, np.nan)
        p = 2.0 * stats.norm.sf(np.abs(z))
        return np.where(np.isnan(p), 1.0, p)

    @property
    def gamma_p(self) -> float:
        return float(self._p(self.gamma, self.gamma_se))

    @property
    def var_p(self) -> np.ndarray:
        return self._p(self.var_coef, self.var_se)

    @property
    def mean_p(self) -> np.ndarray:
        return self._p(self.mean_coef, self.mean_se)

    @property
    def dist_param_p(self) -> Optional[float]:
        if self.dist_param is None or self.dist_param_se is None:
            return None
        return float(self._p(self.dist_param, self.dist_param_se))

    def var_term_p(self, term: int) -> float:
        return float(self.var_p[self.var_terms.index(term)])

    def significant_terms(self, threshold: float = 0.10) -> list[int]:
        return [k for k, pv in zip(self.var_terms, self.var_p) if pv < threshold]

    def start_values(self) -> dict:
        return {
            "mean": np.asarray(self.mean_coef, dtype=float).copy(),
            "gamma": self.gamma,
            "var": dict(zip(self.var_terms, map(float, self.var_coef))),
            "dist_param": self.dist_param if not self.fixed_dist_param else None,
        }


_MEAN_SPECS = ("ar1", "const", "none", "ar1-dummies")


def _mean_design(labeled: LabeledSeries, mean_spec: str):
    rows = _usable(labeled)
    y = labeled.y[rows]
    lag = labeled.lagged_return[rows]
    ones = np.ones(y.size)
    if mean_spec == "ar1":
        return y, np.column_stack([ones, lag]), ["const", "R(t-1)"], [True, False]
    if mean_spec == "const":
        return y, ones[:, None], ["const"], [True]
    if mean_spec == "none":
        return y, np.empty((y.size, 0)), [], []
    if mean_spec == "ar1-dummies":
        D = labeled.dummies[rows]
        present = [k for k in range(1, 25) if D[:, k - 1].sum() > 0]
        cols = [ones, lag] + [D[:, k - 1] for k in present]
        names = ["const", "R(t-1)"] + [f"ST{k}" for k in present]
        return y, np.column_stack(cols), names, [True, False] + [True] * len(present)
    raise ValueError(f"unknown mean_spec {mean_spec!r}; choose from {_MEAN_SPECS}")


_SHAPE_BOUNDS = {"t": (2.1, 500.0), "ged": (0.3, 20.0)}
_GAMMA_BOUNDS = (1e-6, 1.0 - 1e-6)


def _bounds(lik: "_Likelihood") -> list[tuple]:
    logit = lambda q: math.log(q / (1.0 - q))  # noqa: E731
    b: list[tuple] = [(None, None)] * lik.km
    b.append((logit(_GAMMA_BOUNDS[0]), logit(_GAMMA_BOUNDS[1])))
    b += [(None, None)] * lik.kv
    if lik.free_shape:
        lo, hi = _SHAPE_BOUNDS[lik.dist]
        if lik.dist == "t":
            b.append((math.log(lo - 2.0), math.log(hi - 2.0)))
        else:
            b.append((math.log(lo), math.log(hi)))
    return b


def _bound_arrays(bounds):
    lo = np.array([-np.inf if l is None else l for l, _ in bounds])
    hi = np.array([np.inf if h is None else h for _, h in bounds])
    return lo, hi


def _param_label(lik, i, mean_names, terms) -> str:
    if i < lik.km:
        return mean_names[i]
    if i == lik.km:
        return "gamma"
    if i < lik.km + 1 + lik.kv:
        return f"ST{terms[i - lik.km - 1]}"
    return "dist_param"


def igarch_fit(
    labeled: LabeledSeries,
    dist: str = "normal",
    dummy_terms: Iterable[int] | None = None,
    mean_spec: str = "ar1",
    two_step: bool = False,
    fixed_dist_param: float | None = None,
    start: dict | None = None,
    seed: int = 0,
    restarts: int = 3,
    min_obs: int = 500,
) -> GarchFit:
    """Maximum-likelihood AR(1)-IGARCH(1,1) with term dummies in the variance.

    The variance recursion is
    ``h_t = sum_i a_i ST_it + gamma * eps_{t-1}^2 + (1 - gamma) * h_{t-1}``
    with no intercept, so ``gamma + beta = 1`` holds exactly.  ``h`` is
    floored at 1e-12; fits flooring more than 0.1% of observations are marked
    invalid.  With ``two_step=True`` the mean equation (constant, lag and all
    24 dummies) is fitted by OLS first and only the variance is estimated.
    """
    dist = _dist_name(dist)
    if fixed_dist_param is not None and dist == "normal":
        raise ValueError("the normal distribution has no shape parameter")
    notes: list[str] = []

    rows = _usable(labeled)
    D_all = labeled.dummies[rows]
    wanted = list(range(1, 25)) if dummy_terms is None else sorted(set(int(k) for k in dummy_terms))
    counts = D_all.sum(axis=0)
    terms = [k for k in wanted if counts[k - 1] > 0]
    for k in wanted:
        if counts[k - 1] == 0:
            notes.append(f"variance dummy ST{k} dropped: no labeled days")
    D = D_all[:, [k - 1 for k in terms]] if terms else np.empty((D_all.shape[0], 0))

    if two_step:
        mfit = ar1_dummy_fit(labeled, min_obs=min_obs)
        y = mfit.resid
        X = np.empty((y.size, 0))
        mean_names: list[str] = []
        level_like: list[bool] = []
        resid0 = y
        beta0 = np.empty(0)
    else:
        y, X, mean_names, level_like = _mean_design(labeled, mean_spec)
        if X.shape[1]:
            ofit = ols(X, y, mean_names)
            beta0 = ofit.coef.copy()
            resid0 = ofit.resid
        else:
            beta0 = np.empty(0)
            resid0 = y
    if y.size < min_obs:
        raise DataError(f"IGARCH needs at least {min_obs} observations, got {y.size}")

    scale = float(np.std(y))
    if not scale > 0:
        raise DataError("zero-variance return series")
    mean_scale = np.array([scale if lv else 1.0 for lv in level_like])
    h0 = float(np.var(resid0)) / scale**2
    lik = _Likelihood(y / scale, X, D, dist, fixed_dist_param, h0, scale, mean_scale)

    theta0 = np.zeros(lik.p)
    theta0[: lik.km] = beta0 / np.where(mean_scale > 0, mean_scale, 1.0) if lik.km else beta0
    g0 = START_GAMMA
    if start is not None:
        if start.get("mean") is not None and len(start["mean"]) == lik.km:
            theta0[: lik.km] = np.asarray(start["mean"]) / mean_scale
        g0 = float(start.get("gamma", g0))
        for j, k in enumerate(terms):
            theta0[lik.km + 1 + j] = start.get("var", {}).get(k, 0.0) / scale**2
    theta0[lik.km] = math.log(g0 / (1.0 - g0))
    if lik.free_shape:
        s0 = START_SHAPE[dist]
        if start is not None and start.get("dist_param") is not None:
            s0 = float(start["dist_param"])
        theta0[-1] = math.log(s0 - 2.0) if dist == "t" else math.log(s0)

    bounds = _bounds(lik)
    theta0 = np.clip(theta0, *_bound_arrays(bounds))
    rng = np.random.default_rng(seed)
    best = None
    attempts = 0
    starts = [theta0]
    while starts:
        th_start = starts.pop(0)
        theta, ll, H, free = _maximize(lik, th_start, bounds)
        if math.isfinite(ll):
            fdg = lik.fd_gradient(theta)
            check = float(np.max(np.abs(fdg[free]) * (1.0 + np.abs(theta[free])), initial=0.0))
            if best is None or ll > best[1] + 1e-9:
                best = (theta, ll, H, free, check)
            if check < GRAD_TOL:
                break
        if attempts < restarts:
            attempts += 1
            jitter = rng.normal(0.0, 0.1, size=lik.p) * (1.0 + np.abs(theta0))
            starts.append(np.clip(theta0 + jitter, *_bound_arrays(bounds)))
    if best is None:
        raise ConvergenceError(f"IGARCH ({dist}) likelihood is not finite at any start")
    theta, ll, H, free, check = best
    if check >= GRAD_TOL:
        raise ConvergenceError(
            f"IGARCH ({dist}) did not converge after {attempts} restarts "
            f"(scaled gradient {check:.2e})"
        )
    at_bound = sorted(set(range(lik.p)) - set(free.tolist()))
    for i in at_bound:
        notes.append(f"parameter {_param_label(lik, i, mean_names, terms)} at its bound; standard error undefined")

    se_method = "hessian"
    cov_free = None
    if H is not None and len(free):
        try:
            np.linalg.cholesky(-H)
            cov_free = np.linalg.inv(-H)
        except np.linalg.LinAlgError:
            cov_free = None
    if cov_free is None and len(free):
        se_method = "opg"
        notes.append("Hessian not negative definite; outer-product-of-gradients standard errors")
        S = lik.scores(theta)[:, free]
        cov_free = np.linalg.pinv(S.T @ S)
    se_int = np.full(lik.p, np.nan)
    if len(free):
        se_int[free] = np.sqrt(np.clip(np.diag(cov_free), 0.0, None))
    se = np.abs(lik.natural_jacobian(theta)) * se_int

    km, kv = lik.km, lik.kv
    gamma = _sigmoid(theta[km])
    e, h, nfloor = lik.filtered(theta)
    valid = nfloor <= FLOOR_SHARE_LIMIT * lik.n
    if nfloor:
        notes.append(f"variance floor hit on {nfloor} of {lik.n} observations")
    if not valid:
        notes.append("fit flagged invalid: floor share above 0.1%")
    shape = lik.shape_of(theta)
    return GarchFit(
        dist=dist,
        mean_columns=mean_names,
        mean_coef=theta[:km] * mean_scale,
        mean_se=se[:km],
        gamma=gamma,
        beta=1.0 - gamma,
        gamma_se=float(se[km]),
        var_terms=terms,
        var_coef=theta[km + 1 : km + 1 + kv] * scale**2,
        var_se=se[km + 1 : km + 1 + kv],
        dist_param=shape,
        dist_param_se=float(se[-1]) if lik.free_shape and np.isfinite(se[-1]) else None,
        loglik=float(ll - lik.n * math.log(scale)),
        nobs=lik.n,
        h=h * scale**2,
        resid=e * scale,
        n_floor=int(nfloor),
        valid=bool(valid),
        se_method=se_method,
        grad_check=check,
        fixed_dist_param=fixed_dist_param is not None,
        two_step=two_step,
        restarts=attempts,
        warnings=notes,
        theta=theta,
    )


def prune_insignificant(
    fit_fn: Callable[[list[int], dict | None], GarchFit],
    terms: Iterable[int],
    threshold: float = 0.10,
) -> tuple[GarchFit, list[dict]]:
    """Backward elimination of variance dummies.

    ``fit_fn(terms, start)`` fits the model with the given dummy set.  The
    dummy with the largest p-value at or above ``threshold`` is removed and
    the model refitted (warm-started) until every remaining dummy has
    ``p < threshold``.  Returns the final fit and the removal trace.
    """
    current = sorted(set(terms))
    fit = fit_fn(current, None)
    trace = []
    while fit.var_terms:
        pv = fit.var_p
        worst = int(np.argmax(pv))
        if pv[worst] < threshold:
            break
        term = fit.var_terms[worst]
        trace.append({"removed": term, "p": float(pv[worst]), "loglik_before": fit.loglik})
        start = fit.start_values()
        start["var"].pop(term, None)
        current = [k for k in fit.var_terms if k != term]
        fit = fit_fn(current, start)
    return fit, trace


def turn_of_term_fit(
    labeled: LabeledSeries,
    dist: str = "normal",
    threshold: float = 0.10,
    terms: Iterable[int] | None = None,
    **kwargs,
) -> tuple[GarchFit, list[dict]]:
    """IGARCH with window dummies (term day +/- radius), pruned at ``threshold``."""
    if not labeled.label_mode.startswith("window"):
        raise DataError("turn-of-term fits need window labels (radius 1 or 2)")
    terms = list(range(1, 25)) if terms is None else list(terms)

    def fit_fn(ts, start):
        return igarch_fit(labeled, dist=dist, dummy_terms=ts, start=start, **kwargs)

    return prune_insignificant(fit_fn, terms, threshold)


def strongly_efficient(fits: dict, threshold: float = 0.10) -> list[int]:
    """Terms whose dummy survives with ``p < threshold`` under every distribution."""
    sets = [set(f.significant_terms(threshold)) for f in fits.values()]
    if not sets:
        return []
    return sorted(set.intersection(*sets))
