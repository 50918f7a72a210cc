from __future__ import annotations

import json

import numpy as np
import pytest

from solarterm.returns import compute_returns, parse_price_csv
from solarterm.synth import SynthSpec, simulate_igarch, synth_generate, weekday_calendar


def test_weekday_calendar():
    days = weekday_calendar(2021, 2021)
    assert len(days) == 261 and all(d.weekday() < 5 for d in days)


def test_csv_round_trip():
    res = synth_generate(SynthSpec(n_years=2, start_year=2010, seed=1))
    rs = compute_returns(parse_price_csv(res.csv))
    np.testing.assert_allclose(rs.values, res.returns, atol=1e-12)
    assert rs.dates == res.dates


def test_seeded():
    a = synth_generate(SynthSpec(n_years=2, seed=7))
    b = synth_generate(SynthSpec(n_years=2, seed=7))
    c = synth_generate(SynthSpec(n_years=2, seed=8))
    assert a.csv == b.csv and a.csv != c.csv


def test_mean_injection_shifts_term_days():
    base = synth_generate(SynthSpec(n_years=3, seed=2))
    bumped = synth_generate(SynthSpec(n_years=3, seed=2, mean_inj={3: 0.05}))
    diff = bumped.returns - base.returns
    assert np.count_nonzero(np.abs(diff) > 1e-12) == int(base.truth["term_day_counts"]["3"])
    assert np.allclose(diff[np.abs(diff) > 1e-12], 0.05)


def test_truth_sidecar():
    res = synth_generate(SynthSpec(n_years=2, var_inj={8: 3.0}, gamma=0.05))
    truth = json.loads(res.truth_json())
    assert truth["spec"]["var_inj"] == {"8": 3.0}
    assert truth["omega"] == pytest.approx(0.05**2 * 0.015**2)
    assert truth["n_prices"] == len(res.dates) + 1


@pytest.mark.parametrize("kw", [dict(n_years=0), dict(base_std=0.0), dict(gamma=1.0), dict(ar=1.0),
                                dict(var_inj={8: -1.0}), dict(mean_inj={25: 0.1}), dict(var_radius=3)])
def test_invalid(kw):
    with pytest.raises(ValueError):
        SynthSpec(**kw)


def test_simulate_igarch_scale():
    r = simulate_igarch(20000, 0.06, std=0.015, seed=0)
    assert 0.008 < r.std() < 0.03
