"""Seeded synthetic price series with injected solar-term anomalies."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from datetime import date, timedelta

import numpy as np

from .calendar import term_calendar
from .returns import ReturnSeries, build_labeled

__all__ = ["SynthSpec", "SynthResult", "synth_generate", "weekday_calendar", "simulate_igarch"]


@dataclass(frozen=True)
class SynthSpec:
    """Parameters of a synthetic market.

    ``mean_inj`` adds a fixed return on term days; ``var_inj`` multiplies the
    conditional variance on every trading day within ``var_radius`` calendar
    days of the term.
    """

    n_years: int = 28
    start_year: int = 1995
    base_mean: float = 0.0
    base_std: float = 0.015
    ar: float = 0.0
    gamma: float = 0.0
    mean_inj: dict = field(default_factory=dict)
    var_inj: dict = field(default_factory=dict)
    var_radius: int = 1
    seed: int = 0
    p0: float = 100.0
    burn_in: int = 500

    def __post_init__(self):
        if self.n_years < 1:
            raise ValueError("n_years must be positive")
        if not self.base_std > 0:
            raise ValueError("base_std must be positive")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must lie in [0, 1)")
        if not abs(self.ar) < 1.0:
            raise ValueError("AR coefficient must lie in (-1, 1)")
        for k, f in self.var_inj.items():
            if not f > 0:
                raise ValueError(f"variance factor for term {k} must be positive")
        for k in list(self.mean_inj) + list(self.var_inj):
            if not 1 <= int(k) <= 24:
                raise ValueError(f"term {k} outside 1..24")
        if self.var_radius not in (0, 1, 2):
            raise ValueError("var_radius must be 0, 1 or 2")

    @property
    def end_year(self) -> int:
        return self.start_year + self.n_years - 1

    @property
    def omega(self) -> float:
        # keeps the log-variance of the intercept-augmented IGARCH near base_std**2
        return self.gamma**2 * self.base_std**2


@dataclass
class SynthResult:
    csv: str
    truth: dict
    dates: tuple
    returns: np.ndarray

    def truth_json(self) -> str:
        return json.dumps(self.truth, indent=2, sort_keys=True) + "\n"


def weekday_calendar(start_year: int, end_year: int) -> list[date]:
    """Every Monday-Friday from Jan 1 of ``start_year`` to Dec 31 of ``end_year``."""
    d = date(start_year, 1, 1)
    last = date(end_year, 12, 31)
    out = []
    while d <= last:
        if d.weekday() < 5:
            out.append(d)
        d += timedelta(days=1)
    return out


def synth_generate(spec: SynthSpec) -> SynthResult:
    """Simulate prices on a Mon-Fri calendar.

    ``R_t = base_mean + sum_i m_i ST_it + ar * R_{t-1} + sqrt(f_t h_t) z_t`` with
    ``h_{t+1} = omega + gamma * eps_t^2 + (1 - gamma) * h_t``, ``z_t`` standard
    normal, ``f_t`` the variance factor of a window day (1 otherwise) and
    ``omega = gamma^2 * base_std^2``.
    """
    days = weekday_calendar(spec.start_year, spec.end_year)
    events = term_calendar(spec.start_year, spec.end_year)
    ret_dates = tuple(days[1:])
    n = len(ret_dates)
    placeholder = ReturnSeries(ret_dates, np.zeros(n))
    term_lab = build_labeled(placeholder, events, None, trading_days=days)
    win_lab = build_labeled(placeholder, events, spec.var_radius, trading_days=days)

    shift = np.zeros(n)
    for k, m in spec.mean_inj.items():
        shift += float(m) * term_lab.dummies[:, int(k) - 1]
    factor = np.ones(n)
    for k, f in spec.var_inj.items():
        col = win_lab.dummies[:, int(k) - 1] == 1
        factor[col] = float(f)

    rng = np.random.default_rng(spec.seed)
    z_burn = rng.standard_normal(spec.burn_in)
    z = rng.standard_normal(n)
    s2 = spec.base_std**2
    omega, g = spec.omega, spec.gamma
    h = s2
    for zb in z_burn:
        h = omega + g * h * zb * zb + (1.0 - g) * h
    r = np.empty(n)
    h_path = np.empty(n)
    prev = spec.base_mean
    for t in range(n):
        eps = np.sqrt(factor[t] * h) * z[t]
        r[t] = spec.base_mean + shift[t] + spec.ar * prev + eps
        h_path[t] = h
        h = omega + g * eps * eps + (1.0 - g) * h
        prev = r[t]

    logp = np.log(spec.p0) + np.concatenate([[0.0], np.cumsum(r)])
    prices = np.exp(logp)
    lines = ["date,close"]
    lines += [f"{d.isoformat()},{float(p)!r}" for d, p in zip(days, prices)]
    truth = {
        "spec": {
            k: ({str(kk): vv for kk, vv in v.items()} if isinstance(v, dict) else v)
            for k, v in asdict(spec).items()
        },
        "omega": omega,
        "n_prices": len(days),
        "term_day_counts": {str(k + 1): int(c) for k, c in enumerate(term_lab.term_counts())},
        "window_day_counts": {str(k + 1): int(c) for k, c in enumerate(win_lab.term_counts())},
        "return_definition": "log",
    }
    return SynthResult("\n".join(lines) + "\n", truth, ret_dates, r)


def simulate_igarch(n: int, gamma: float, std: float = 0.015, seed: int = 0,
                    burn_in: int = 500) -> np.ndarray:
    """Plain IGARCH(1,1) returns with ``omega = gamma^2 * std^2`` and normal shocks."""
    rng = np.random.default_rng(seed)
    z = rng.standard_normal(n + burn_in)
    omega = gamma**2 * std**2
    h = std**2
    out = np.empty(n + burn_in)
    for t in range(n + burn_in):
        e = np.sqrt(h) * z[t]
        out[t] = e
        h = omega + gamma * e * e + (1.0 - gamma) * h
    return out[burn_in:]
