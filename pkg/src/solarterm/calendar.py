"""Solar-term instants from the apparent solar longitude, and their alignment
with a trading calendar.

Terms are numbered 1 (Xiaohan, 285 deg) to 24 (Dongzhi, 270 deg) in the order
they fall within a Gregorian year.  Instants are expressed in Beijing civil
time (fixed UTC+8, no daylight saving).
"""
from __future__ import annotations

import bisect
import csv
import io
import math
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta, timezone
from typing import Iterable, Sequence

from .errors import DataError, EphemerisError, WindowOverlapError

__all__ = [
    "BEIJING",
    "SolarTerm",
    "TERMS",
    "TermEvent",
    "TermWindow",
    "TERM_DATE_RANGES",
    "julian_day",
    "jd_to_datetime",
    "solar_longitude",
    "target_longitude",
    "term_instant",
    "term_calendar",
    "align_terms",
    "window_labels",
    "near_midnight",
    "calendar_to_csv",
]

BEIJING = timezone(timedelta(hours=8), "UTC+8")

MIN_YEAR = 1900
MAX_YEAR = 2100

J2000 = 2451545.0
_J2000_DT = datetime(2000, 1, 1, 12, tzinfo=timezone.utc)
# 1900-01-01 and 2101-01-01 00:00 UTC, padded by 60 days so the bisection
# bracket of the first and last terms stays inside the guard
_JD_MIN = 2415020.5 - 60.0
_JD_MAX = 2488434.5 + 60.0

MEAN_MOTION = 360.0 / 365.2422  # deg/day, tropical year

_NAMES = (
    "Xiaohan", "Dahan", "Lichun", "Yushui", "Jingzhe", "Chunfen",
    "Qingming", "Gu'yu", "Lixia", "Xiaoman", "Mangzhong", "Xiazhi",
    "Xiaoshu", "Dashu", "Liqiu", "Chushu", "Bailu", "Qiufen",
    "Hanlu", "Shuangjiang", "Lidong", "Xiaoxue", "Daxue", "Dongzhi",
)

# Published (month, day) ranges per term.  Two source typos are corrected here:
# Xiaoman "Mar 20-May 22" -> May 20-22 and Xiaoshu "Jul 6-Jun 8" -> Jul 6-8.
TERM_DATE_RANGES: dict[int, tuple[tuple[int, int], tuple[int, int]]] = {
    1: ((1, 5), (1, 7)),
    2: ((1, 20), (1, 21)),
    3: ((2, 3), (2, 5)),
    4: ((2, 18), (2, 20)),
    5: ((3, 5), (3, 7)),
    6: ((3, 20), (3, 22)),
    7: ((4, 4), (4, 6)),
    8: ((4, 19), (4, 21)),
    9: ((5, 5), (5, 7)),
    10: ((5, 20), (5, 22)),
    11: ((6, 5), (6, 7)),
    12: ((6, 21), (6, 22)),
    13: ((7, 6), (7, 8)),
    14: ((7, 22), (7, 24)),
    15: ((8, 7), (8, 9)),
    16: ((8, 22), (8, 24)),
    17: ((9, 7), (9, 9)),
    18: ((9, 22), (9, 24)),
    19: ((10, 8), (10, 9)),
    20: ((10, 23), (10, 24)),
    21: ((11, 7), (11, 8)),
    22: ((11, 22), (11, 23)),
    23: ((12, 6), (12, 8)),
    24: ((12, 20), (12, 21)),
}


def target_longitude(order: int) -> float:
    """Apparent solar longitude (deg) at which term ``order`` begins."""
    _check_order(order)
    return float((285 + 15 * (order - 1)) % 360)


@dataclass(frozen=True)
class SolarTerm:
    order: int
    name: str
    target_longitude: float

    @classmethod
    def of(cls, order: int) -> "SolarTerm":
        _check_order(order)
        return TERMS[order - 1]


TERMS: tuple[SolarTerm, ...] = tuple(
    SolarTerm(k, _NAMES[k - 1], float((285 + 15 * (k - 1)) % 360)) for k in range(1, 25)
)


@dataclass(frozen=True)
class TermEvent:
    term: SolarTerm
    year: int
    instant: datetime  # aware, UTC+8
    jd: float
    trading_day: date | None = None

    @property
    def order(self) -> int:
        return self.term.order

    @property
    def local_date(self) -> date:
        return self.instant.date()


@dataclass(frozen=True)
class TermWindow:
    event: TermEvent
    radius: int
    member_days: tuple[date, ...] = field(default_factory=tuple)


def _check_order(order: int) -> None:
    if not isinstance(order, int) or not 1 <= order <= 24:
        raise ValueError(f"term order must be an integer in 1..24, got {order!r}")


def _check_year(year: int) -> None:
    if not MIN_YEAR <= year <= MAX_YEAR:
        raise ValueError(f"year {year} outside the supported range {MIN_YEAR}-{MAX_YEAR}")


def julian_day(when: datetime | date | str) -> float:
    """Astronomical Julian date of a UTC timestamp.

    Naive datetimes are taken as UTC; aware ones are converted.  A bare
    :class:`date` means 00:00 UTC.  ISO-8601 strings are parsed, so an invalid
    calendar date such as ``"2001-02-29"`` raises :class:`ValueError`.
    """
    if isinstance(when, str):
        try:
            when = datetime.fromisoformat(when)
        except ValueError as exc:
            raise ValueError(f"invalid calendar date {when!r}: {exc}") from None
    if not isinstance(when, datetime):
        when = datetime(when.year, when.month, when.day)
    if when.tzinfo is not None:
        when = when.astimezone(timezone.utc).replace(tzinfo=None)
    _check_year(when.year)

    y, m = when.year, when.month
    if m <= 2:
        y -= 1
        m += 12
    a = y // 100
    b = 2 - a + a // 4
    frac = (
        when.hour
        + when.minute / 60.0
        + (when.second + when.microsecond * 1e-6) / 3600.0
    ) / 24.0
    return (
        math.floor(365.25 * (y + 4716))
        + math.floor(30.6001 * (m + 1))
        + when.day
        + b
        - 1524.5
        + frac
    )


def jd_to_datetime(jd: float, tz: timezone = BEIJING) -> datetime:
    """Inverse of :func:`julian_day`, returned as an aware datetime in ``tz``."""
    return (_J2000_DT + timedelta(days=jd - J2000)).astimezone(tz)


def solar_longitude(jd: float) -> float:
    """Apparent geocentric ecliptic longitude of the Sun in degrees, [0, 360).

    Low-accuracy analytic theory (mean longitude, equation of centre,
    nutation and aberration corrections); about 0.01 deg over 1900-2100.
    """
    if not _JD_MIN <= jd < _JD_MAX:
        raise ValueError(f"Julian date {jd} outside the validated range 1900-2100")
    t = (jd - J2000) / 36525.0
    l0 = 280.46646 + 36000.76983 * t + 0.0003032 * t * t
    m = math.radians(357.52911 + 35999.05029 * t - 0.0001537 * t * t)
    c = (
        (1.914602 - 0.004817 * t - 0.000014 * t * t) * math.sin(m)
        + (0.019993 - 0.000101 * t) * math.sin(2 * m)
        + 0.000289 * math.sin(3 * m)
    )
    omega = math.radians(125.04 - 1934.136 * t)
    lam = l0 + c - 0.00569 - 0.00478 * math.sin(omega)
    return lam % 360.0


def _offset(jd: float, target: float) -> float:
    # signed angular distance in (-180, 180], increasing through the crossing
    return (solar_longitude(jd) - target + 180.0) % 360.0 - 180.0


def term_instant(year: int, order: int, tol_days: float = 1e-7) -> TermEvent:
    """Locate the instant the Sun reaches the longitude of term ``order`` in ``year``.

    Bisection on a +/-20 day bracket around the mean-motion prediction;
    ``tol_days`` bounds the final bracket width (default ~0.01 s).
    """
    _check_year(year)
    _check_order(order)
    target = target_longitude(order)
    # March equinox ~ Mar 20.5 UTC; terms before it in the year sit at 285-345 deg
    equinox = julian_day(datetime(year, 3, 20, 12))
    ahead = target if target < 280.0 else target - 360.0
    guess = equinox + ahead / MEAN_MOTION
    lo, hi = guess - 20.0, guess + 20.0
    f_lo, f_hi = _offset(lo, target), _offset(hi, target)
    if not (f_lo < 0.0 < f_hi):
        raise EphemerisError(
            f"cannot bracket term {order} of {year}: offsets {f_lo:.4f}, {f_hi:.4f} deg"
        )
    while hi - lo > tol_days:
        mid = 0.5 * (lo + hi)
        if _offset(mid, target) < 0.0:
            lo = mid
        else:
            hi = mid
    jd = 0.5 * (lo + hi)
    instant = jd_to_datetime(jd)
    if instant.year != year:
        raise EphemerisError(f"term {order} of {year} resolved into {instant.year}")
    return TermEvent(term=TERMS[order - 1], year=year, instant=instant, jd=jd)


def term_calendar(start_year: int, end_year: int) -> list[TermEvent]:
    """All 24 terms of every year in ``[start_year, end_year]``, sorted by instant."""
    _check_year(start_year)
    _check_year(end_year)
    if start_year > end_year:
        raise ValueError(f"start_year {start_year} is after end_year {end_year}")
    events = [
        term_instant(year, order)
        for year in range(start_year, end_year + 1)
        for order in range(1, 25)
    ]
    events.sort(key=lambda ev: ev.jd)
    return events


def _as_sorted_days(trading_days: Iterable[date]) -> list[date]:
    days = list(trading_days)
    if not days:
        raise DataError("trading calendar is empty")
    for prev, cur in zip(days, days[1:]):
        if cur <= prev:
            raise DataError(f"trading days must be sorted and unique; offending day {cur}")
    return days


def align_terms(events: Sequence[TermEvent], trading_days: Iterable[date]) -> list[TermEvent]:
    """Attach the trading day to each event whose local date is a trading day.

    Terms on non-trading days get ``trading_day=None``; they are never moved
    to a neighbouring session.
    """
    days = set(_as_sorted_days(trading_days))
    out = []
    for ev in events:
        d = ev.local_date
        out.append(
            TermEvent(ev.term, ev.year, ev.instant, ev.jd, d if d in days else None)
        )
    return out


def window_labels(
    events: Sequence[TermEvent], trading_days: Iterable[date], radius: int
) -> list[TermWindow]:
    """Trading days within ``radius`` calendar days of each term's local date.

    Raises :class:`WindowOverlapError` if two windows share a trading day.
    """
    if radius not in (0, 1, 2):
        raise ValueError(f"radius must be 0, 1 or 2, got {radius!r}")
    days = _as_sorted_days(trading_days)
    owner: dict[date, int] = {}
    collisions = []
    windows = []
    for ev in events:
        d = ev.local_date
        lo = bisect.bisect_left(days, d - timedelta(days=radius))
        hi = bisect.bisect_right(days, d + timedelta(days=radius))
        members = tuple(days[lo:hi])
        for m in members:
            if m in owner:
                collisions.append((m, owner[m], ev.order))
            else:
                owner[m] = ev.order
        tday = d if d in members else None
        windows.append(
            TermWindow(TermEvent(ev.term, ev.year, ev.instant, ev.jd, tday), radius, members)
        )
    if collisions:
        raise WindowOverlapError(collisions)
    return windows


def near_midnight(event: TermEvent, minutes: float = 60.0) -> bool:
    """True when the local instant is within ``minutes`` of a date boundary."""
    t = event.instant
    since = t.hour * 60 + t.minute + t.second / 60.0
    return since < minutes or (1440.0 - since) < minutes


def calendar_to_csv(events: Sequence[TermEvent]) -> str:
    """Serialise events as ``year,order,name,instant_utc8,trading_day``."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["year", "order", "name", "instant_utc8", "trading_day"])
    for ev in events:
        instant = ev.instant.replace(microsecond=0).isoformat()
        writer.writerow(
            [
                ev.year,
                ev.order,
                ev.term.name,
                instant,
                ev.trading_day.isoformat() if ev.trading_day else "",
            ]
        )
    return buf.getvalue()
