"""Acceptance suite.

Each test logs one ``criterion N: PASS|FAIL|SKIP`` line, collected into the
pytest terminal summary.  Criteria 10-13 need the Shanghai Composite daily
closes for 1995-2022; point ``SOLARTERM_SHANGHAI_CSV`` at a CSV (columns
``date`` and ``close`` unless ``SOLARTERM_SHANGHAI_DATE_COL`` /
``SOLARTERM_SHANGHAI_CLOSE_COL`` / ``SOLARTERM_SHANGHAI_DATE_FORMAT`` say
otherwise) to run them.
"""
from __future__ import annotations

import math
import os
import time
from datetime import date, timedelta

import numpy as np
import pytest
from scipy import integrate, stats

from helpers import HC3_X, HC3_Y, exact_hc3, grouped_labeled, normal_equations
from solarterm import igarch as G
from solarterm.calendar import TERM_DATE_RANGES, solar_longitude, target_longitude, term_calendar
from solarterm.descstats import t_test_mean
from solarterm.dummyreg import hc3_cov, ols, reference_regression
from solarterm.pipeline import RunConfig, run_pipeline
from solarterm.returns import ReturnSeries, build_labeled, compute_returns, parse_price_csv
from solarterm.synth import SynthSpec, simulate_igarch, synth_generate, weekday_calendar

SHANGHAI = os.environ.get("SOLARTERM_SHANGHAI_CSV")


def record(log, n: int, ok: bool, detail: str) -> None:
    log.append(f"criterion {n}: {'PASS' if ok else 'FAIL'} - {detail}")
    assert ok, detail


# ---------------------------------------------------------------------------
# unconditional


def test_ephemeris_against_published_ranges(acceptance_log):
    t0 = time.perf_counter()
    events = term_calendar(1995, 2022)
    elapsed = time.perf_counter() - t0

    outside, worst = [], 0.0
    for ev in events:
        (m0, d0), (m1, d1) = TERM_DATE_RANGES[ev.order]
        lo = date(ev.year, m0, d0) - timedelta(days=1)
        hi = date(ev.year, m1, d1) + timedelta(days=1)
        if not lo <= ev.local_date <= hi:
            outside.append((ev.year, ev.order, ev.local_date))
        err = abs((solar_longitude(ev.jd) - target_longitude(ev.order) + 180.0) % 360.0 - 180.0)
        worst = max(worst, err)
    ordered = all(a.jd < b.jd for a, b in zip(events, events[1:])) and all(
        [e.order for e in events[24 * i : 24 * i + 24]] == list(range(1, 25)) for i in range(28)
    )
    ok = len(events) == 672 and not outside and worst < 5e-4 and ordered and elapsed < 1.0
    record(acceptance_log, 1, ok,
           f"{len(events)} instants, {len(outside)} outside range+-1d, "
           f"max longitude error {worst:.2e} deg, ordered={ordered}, {elapsed:.3f} s")


def test_ols_normal_equations_oracle(acceptance_log):
    worst_coef = worst_orth = worst_hat = 0.0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        k = int(rng.integers(1, 7))
        n = int(rng.integers(k + 2, 51))
        X = np.column_stack([np.ones(n), rng.normal(size=(n, k - 1))])
        y = rng.normal(size=n)
        fit = ols(X, y)
        ref = normal_equations(X, y)
        worst_coef = max(worst_coef, float(np.max(np.abs(fit.coef - ref))))
        worst_orth = max(worst_orth, float(np.max(np.abs(X.T @ fit.resid))))
        worst_hat = max(worst_hat, abs(float(fit.hat.sum()) - k))
    ok = worst_coef < 1e-8 and worst_orth < 1e-8 and worst_hat < 1e-8
    record(acceptance_log, 2, ok,
           f"100 problems: max |coef diff| {worst_coef:.1e}, max |X'e| {worst_orth:.1e}, "
           f"max |sum h - k| {worst_hat:.1e}")


def test_hc3_exact_oracle(acceptance_log):
    fit = ols(np.array(HC3_X, float), np.array(HC3_Y, float))
    cov, e, a = exact_hc3(HC3_X, HC3_Y)
    diff = float(np.max(np.abs(hc3_cov(fit) - cov)))
    inflation = bool(np.all(a >= e**2))
    record(acceptance_log, 3, diff < 1e-10 and inflation,
           f"max |HC3 - exact| {diff:.1e}, a_i >= e_i^2: {inflation}")


def test_reference_term_algebra(acceptance_log):
    worst_x = worst_m = 0.0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        terms = rng.choice(np.arange(1, 25), size=int(rng.integers(3, 9)), replace=False)
        groups = np.concatenate([terms, rng.choice(terms, size=int(rng.integers(30, 120)))])
        y = rng.normal(0.0, 0.02, size=groups.size) + 0.001 * groups
        lab = grouped_labeled(y, groups)
        a, b = (int(v) for v in rng.choice(terms, size=2, replace=False))
        fa = reference_regression(lab, a)
        fb = reference_regression(lab, b)
        worst_x = max(worst_x, abs(fa.coef[fa.index(f"ST{b}")] + fb.coef[fb.index(f"ST{a}")]))
        for col, coef in zip(fa.columns[1:], fa.coef[1:]):
            g = int(col[2:])
            worst_m = max(worst_m, abs(fa.coef[0] + coef - y[groups == g].mean()))
        worst_m = max(worst_m, abs(fa.coef[0] - y[groups == a].mean()))
    ok = worst_x < 1e-10 and worst_m < 1e-10
    record(acceptance_log, 4, ok,
           f"100 seeds: exchange {worst_x:.1e}, intercept+alpha vs group mean {worst_m:.1e}")


def test_error_distribution_identities(acceptance_log):
    z = np.linspace(-5.0, 5.0, 2001)
    ged2 = float(np.max(np.abs(G.dist_logpdf(z, "ged", 2.0) - stats.norm.logpdf(z))))
    # t(1e6) is compared on |z| <= 4: at |z| = 5 the exact densities differ by 1.2e-4
    z4 = np.linspace(-4.0, 4.0, 1601)
    t_big = float(np.max(np.abs(G.dist_logpdf(z4, "t", 1e6) - stats.norm.logpdf(z4))))
    quad = 0.0
    for dist, v in [("normal", None), ("t", 3.0), ("t", 5.0), ("t", 30.0), ("ged", 0.7),
                    ("ged", 1.0), ("ged", 1.5), ("ged", 3.0)]:
        f = lambda x: math.exp(G.dist_logpdf(x, dist, v))  # noqa: E731
        kw = dict(epsabs=1e-13, epsrel=1e-13, limit=400)
        mass = integrate.quad(f, -np.inf, np.inf, **kw)[0]
        var = integrate.quad(lambda x: x * x * f(x), -np.inf, np.inf, **kw)[0]
        quad = max(quad, abs(mass - 1.0), abs(var - 1.0))
    ok = ged2 < 1e-10 and t_big < 1e-4 and quad < 1e-6
    record(acceptance_log, 5, ok,
           f"GED(2) vs normal {ged2:.1e}, t(1e6) vs normal {t_big:.1e}, "
           f"unit mass/variance {quad:.1e}")


@pytest.mark.slow
def test_igarch_recovery(acceptance_log):
    days = weekday_calendar(1995, 2022)
    events = term_calendar(1995, 2022)
    inside, exact, worst_grad, slowest = 0, True, 0.0, 0.0
    for seed in range(100):
        r = simulate_igarch(7000, 0.06, seed=seed)
        lab = build_labeled(ReturnSeries(tuple(days[1:7001]), r), events, None)
        t0 = time.perf_counter()
        fit = G.igarch_fit(lab, "normal", dummy_terms=[])
        slowest = max(slowest, time.perf_counter() - t0)
        inside += 0.04 <= fit.gamma <= 0.08
        exact &= fit.gamma + fit.beta == 1.0
        worst_grad = max(worst_grad, fit.grad_check)
    ok = inside >= 90 and exact and worst_grad < 1e-4 and slowest < 60.0
    record(acceptance_log, 6, ok,
           f"gamma in [0.04, 0.08] for {inside}/100, gamma+beta==1: {exact}, "
           f"max scaled FD gradient {worst_grad:.1e}, slowest fit {slowest:.2f} s")


@pytest.mark.slow
def test_false_positive_rates(acceptance_log):
    days = weekday_calendar(1995, 2022)
    events = term_calendar(1995, 2022)
    n = len(days) - 1
    template = build_labeled(ReturnSeries(tuple(days[1:]), np.zeros(n)), events, None)
    lags = (1, 2, 3, 4, 5, 10, 15)
    arch_rej = np.zeros(len(lags))
    t_rej = t_total = 0
    for seed in range(1000):
        y = np.random.default_rng(seed).normal(0.0, 0.015, size=n)
        lab = build_labeled(ReturnSeries(template.dates, y), events, None)
        fit = G.ar1_dummy_fit(lab)
        arch_rej += np.array(G.arch_lm_test(fit.resid, lags).p) < 0.05
        for k in range(24):
            sample = y[template.dummies[:, k] == 1]
            t_rej += t_test_mean(sample)[1] < 0.05
            t_total += 1
    arch_rate = arch_rej / 1000
    t_rate = t_rej / t_total
    ok = bool(np.all((arch_rate >= 0.03) & (arch_rate <= 0.07))) and 0.03 <= t_rate <= 0.07
    rates = ", ".join(f"q={q}: {r:.1%}" for q, r in zip(lags, arch_rate))
    record(acceptance_log, 7, ok,
           f"ARCH-LM size over 1000 null series ({rates}); per-term t-test size "
           f"{t_rate:.2%} over {t_total} tests")


@pytest.mark.slow
def test_mean_injection_recovery(acceptance_log):
    events = term_calendar(1995, 2022)
    hits = 0
    for seed in range(100):
        res = synth_generate(SynthSpec(mean_inj={3: 0.01}, seed=seed))
        lab = build_labeled(compute_returns(parse_price_csv(res.csv)), events, None)
        hits += G.ar1_dummy_fit(lab).term_p(3) < 0.05
    record(acceptance_log, 8, hits >= 85,
           f"mean: +0.01 on term 3 significant at 5% in {hits}/100 seeds")


@pytest.mark.slow
def test_variance_injection_recovery(acceptance_log):
    events = term_calendar(1995, 2022)
    survived, spurious = 0, []
    for seed in range(100):
        res = synth_generate(SynthSpec(gamma=0.06, var_inj={8: 5.0}, var_radius=1, seed=seed))
        lab = build_labeled(compute_returns(parse_price_csv(res.csv)), events, 1)
        sets = []
        for dist in G.DISTS:
            fit, _ = G.turn_of_term_fit(lab, dist, threshold=0.10)
            sets.append(set(fit.significant_terms(0.10)))
        survived += all(8 in s for s in sets)
        spurious.append(np.mean([len(s - {8}) for s in sets]))
    record(acceptance_log, 8, survived >= 90,
           f"variance: x5 bump on term 8's radius-1 window kept by all three distributions "
           f"in {survived}/100 seeds (mean {np.mean(spurious):.1f} other terms kept)")


def test_pipeline_determinism(acceptance_log, tmp_path):
    res = synth_generate(SynthSpec(n_years=8, start_year=2010, gamma=0.06, mean_inj={3: 0.01},
                                   var_inj={8: 5.0}, seed=21))
    src = tmp_path / "prices.csv"
    src.write_text(res.csv)
    out = tmp_path / "report"
    cfg = dict(input=str(src), out=str(out), figures=True, seed=5)

    def snapshot():
        bundle = run_pipeline(RunConfig(**cfg))
        return {p.relative_to(out).as_posix(): p.read_bytes() for p in bundle.paths}

    first = snapshot()
    second = snapshot()
    json_files = sorted(k for k in first if k.endswith(".json"))
    same_json = json_files == sorted(k for k in second if k.endswith(".json")) and all(
        first[k] == second[k] for k in json_files
    )
    same_all = first == second
    record(acceptance_log, 9, same_json,
           f"{len(json_files)} JSON artifacts byte-identical: {same_json} "
           f"(all {len(first)} files incl. CSV/Markdown/PNG: {same_all})")


# ---------------------------------------------------------------------------
# conditional on the Shanghai Composite data


@pytest.fixture(scope="module")
def shanghai(tmp_path_factory):
    if not SHANGHAI:
        return None
    cfg = RunConfig(
        input=SHANGHAI,
        date_col=os.environ.get("SOLARTERM_SHANGHAI_DATE_COL", "date"),
        close_col=os.environ.get("SOLARTERM_SHANGHAI_CLOSE_COL", "close"),
        date_format=os.environ.get("SOLARTERM_SHANGHAI_DATE_FORMAT"),
        years=(1995, 2022),
        out=str(tmp_path_factory.mktemp("shanghai")),
        figures=False,
    )
    return run_pipeline(cfg)


def _need(bundle, log, n):
    if bundle is None:
        log.append(f"criterion {n}: SKIP - set SOLARTERM_SHANGHAI_CSV to run")
        pytest.skip("Shanghai Composite 1995-2022 closes not supplied")


def test_shanghai_overall_moments(shanghai, acceptance_log):
    _need(shanghai, acceptance_log, 10)
    s = shanghai.results["describe"]["overall"]
    ok = abs(s.mean - 4.149e-4) <= 1e-4 and abs(s.std - 0.0172) <= 0.002 and abs(s.kurtosis - 25.18) <= 4
    record(acceptance_log, 10, ok,
           f"mean {s.mean:.4e}, std {s.std:.4f}, kurtosis {s.kurtosis:.2f}")


def test_shanghai_reference_panels(shanghai, acceptance_log):
    _need(shanghai, acceptance_log, 11)
    panels = {p.ref: p for p in shanghai.results["inter"]["panels"] if not p.watchlist}
    have = {1, 3, 4, 13} <= set(panels)
    b1 = panels[1].fit.coef[0] if 1 in panels else float("nan")
    labels = {k: panels[k].eba.row("const").classification for k in (1, 3) if k in panels}
    ok = have and abs(b1 - 0.0086) <= 0.002 and labels == {1: "robust-90", 3: "robust-90"}
    record(acceptance_log, 11, ok,
           f"panels {sorted(panels)}, term-1 reference mean {b1:.4f}, EBA {labels}")


def test_shanghai_full_sample_models(shanghai, acceptance_log):
    _need(shanghai, acceptance_log, 12)
    r = shanghai.results["full-mean"]["full"].r
    vol = shanghai.results["full-vol"]["fits"]
    g = vol["normal"].gamma
    t_set = set(vol["t"].significant_terms(0.10))
    overlap = len(t_set & {1, 2, 4, 8, 14, 19})
    ok = abs(r - 0.0306) <= 0.01 and abs(g - 0.0518) <= 0.01 and overlap >= 4
    record(acceptance_log, 12, ok,
           f"AR coefficient {r:.4f}, normal gamma {g:.4f}, Student-t survivors {sorted(t_set)}")


def test_shanghai_turn_of_term(shanghai, acceptance_log):
    _need(shanghai, acceptance_log, 13)
    r1 = set(shanghai.results["turn1"]["strongly_efficient"])
    r2 = set(shanghai.results["turn2"]["strongly_efficient"])
    ok = len(r1 & {8, 11, 14}) >= 2 and bool(r2 & {8, 11})
    record(acceptance_log, 13, ok, f"radius 1 {sorted(r1)}, radius 2 {sorted(r2)}")
