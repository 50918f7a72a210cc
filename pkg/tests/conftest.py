from __future__ import annotations

import pytest

from solarterm.calendar import term_calendar
from solarterm.returns import build_labeled, compute_returns, parse_price_csv
from solarterm.synth import SynthSpec, synth_generate

_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def acceptance_log():
    """Collects one PASS/FAIL line per acceptance criterion for the terminal summary."""
    return _ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def events_1995_2022():
    return term_calendar(1995, 2022)


@pytest.fixture(scope="session")
def small_synth():
    """Ten years of synthetic prices with a mean bump on term 3 and a variance bump on term 8."""
    spec = SynthSpec(n_years=10, start_year=2005, gamma=0.06, mean_inj={3: 0.01},
                     var_inj={8: 5.0}, seed=11)
    return synth_generate(spec)


@pytest.fixture(scope="session")
def small_synth_csv(tmp_path_factory, small_synth):
    path = tmp_path_factory.mktemp("data") / "synth.csv"
    path.write_text(small_synth.csv)
    return path


@pytest.fixture(scope="session")
def small_labeled(small_synth):
    rs = compute_returns(parse_price_csv(small_synth.csv))
    return build_labeled(rs, term_calendar(2005, 2014), None)
