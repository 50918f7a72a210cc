"""Price parsing, return computation and the labeled design shared by the
estimators."""
from __future__ import annotations

import csv
import hashlib
import io
import math
from dataclasses import dataclass, field
from datetime import date, datetime
from typing import Sequence

import numpy as np

from .calendar import TermEvent, align_terms, window_labels
from .errors import DataError

__all__ = [
    "PriceSeries",
    "ReturnSeries",
    "LabeledSeries",
    "parse_price_csv",
    "parse_returns_csv",
    "compute_returns",
    "build_labeled",
    "fingerprint",
]


@dataclass(frozen=True)
class PriceSeries:
    dates: tuple[date, ...]
    close: np.ndarray
    source_id: str = ""

    def __len__(self) -> int:
        return len(self.dates)


@dataclass(frozen=True)
class ReturnSeries:
    dates: tuple[date, ...]
    values: np.ndarray
    method: str = "log"

    def __len__(self) -> int:
        return len(self.dates)

    def between(self, start_year: int, end_year: int) -> "ReturnSeries":
        keep = [i for i, d in enumerate(self.dates) if start_year <= d.year <= end_year]
        return ReturnSeries(
            tuple(self.dates[i] for i in keep), self.values[keep].copy(), self.method
        )


@dataclass(frozen=True)
class LabeledSeries:
    """Returns plus an ``n x 24`` term-dummy matrix.

    Column ``i`` of ``dummies`` is term ``i + 1``.  ``lagged_return[0]`` is NaN.
    """

    returns: ReturnSeries
    dummies: np.ndarray
    normal_day: np.ndarray
    lagged_return: np.ndarray
    label_mode: str = "term-day"
    radius: int = 0
    events: tuple[TermEvent, ...] = field(default=(), repr=False)

    @property
    def y(self) -> np.ndarray:
        return self.returns.values

    @property
    def dates(self) -> tuple[date, ...]:
        return self.returns.dates

    def __len__(self) -> int:
        return len(self.returns)

    def term_counts(self) -> np.ndarray:
        return self.dummies.sum(axis=0).astype(int)

    def term_days(self) -> "LabeledSeries":
        """Restrict to rows carrying a term label."""
        rows = np.flatnonzero(self.dummies.sum(axis=1) > 0)
        rs = ReturnSeries(
            tuple(self.returns.dates[i] for i in rows),
            self.returns.values[rows].copy(),
            self.returns.method,
        )
        return LabeledSeries(
            rs,
            self.dummies[rows].copy(),
            self.normal_day[rows].copy(),
            self.lagged_return[rows].copy(),
            self.label_mode,
            self.radius,
            self.events,
        )


def _parse_date(text: str, fmt: str | None, line: int) -> date:
    text = text.strip()
    try:
        if fmt is None:
            return date.fromisoformat(text)
        return datetime.strptime(text, fmt).date()
    except ValueError:
        raise DataError(f"line {line}: malformed date {text!r}") from None


def _read_rows(content, date_col: str, value_col: str, date_format: str | None):
    if isinstance(content, (bytes, bytearray)):
        content = content.decode("utf-8-sig")
    reader = csv.DictReader(io.StringIO(content))
    if reader.fieldnames is None:
        raise DataError("input has no header row")
    header = [h.strip() for h in reader.fieldnames]
    reader.fieldnames = header
    for col in (date_col, value_col):
        if col not in header:
            raise DataError(f"column {col!r} not found; header is {header}")
    dates: list[date] = []
    values: list[float] = []
    for line, row in enumerate(reader, start=2):
        raw = (row.get(value_col) or "").strip()
        d = _parse_date(row.get(date_col) or "", date_format, line)
        try:
            v = float(raw)
        except ValueError:
            raise DataError(f"line {line}: non-numeric value {raw!r} in {value_col!r}") from None
        if not math.isfinite(v):
            raise DataError(f"line {line}: non-finite value {raw!r}")
        if dates and d <= dates[-1]:
            kind = "duplicate" if d == dates[-1] else "decreasing"
            raise DataError(f"line {line}: {kind} date {d.isoformat()} (dates must strictly increase)")
        dates.append(d)
        values.append(v)
    return dates, values


def parse_price_csv(
    content,
    date_col: str = "date",
    close_col: str = "close",
    date_format: str | None = None,
    source_id: str = "",
) -> PriceSeries:
    """Parse a ``date,close`` style CSV into a validated :class:`PriceSeries`.

    Rows must already be in strictly increasing date order; nothing is sorted.
    """
    dates, closes = _read_rows(content, date_col, close_col, date_format)
    for d, c in zip(dates, closes):
        if c <= 0:
            raise DataError(f"non-positive price {c} on {d.isoformat()}")
    return PriceSeries(tuple(dates), np.asarray(closes, dtype=float), source_id)


def parse_returns_csv(
    content,
    date_col: str = "date",
    returns_col: str = "return",
    date_format: str | None = None,
) -> ReturnSeries:
    """Parse pre-computed returns; the method is recorded as ``"supplied"``."""
    dates, values = _read_rows(content, date_col, returns_col, date_format)
    if not dates:
        raise DataError("no return rows found")
    return ReturnSeries(tuple(dates), np.asarray(values, dtype=float), "supplied")


def compute_returns(prices: PriceSeries, method: str = "log") -> ReturnSeries:
    """Daily returns dated by the later day: ``log(P_t/P_{t-1})`` or ``P_t/P_{t-1} - 1``."""
    if len(prices) < 2:
        raise DataError("need at least two prices to compute returns")
    p = prices.close
    if method == "log":
        r = np.log(p[1:] / p[:-1])
    elif method == "simple":
        r = p[1:] / p[:-1] - 1.0
    else:
        raise ValueError(f"unknown return method {method!r}")
    return ReturnSeries(prices.dates[1:], r, method)


def build_labeled(
    returns: ReturnSeries,
    events: Sequence[TermEvent],
    radius: int | None = None,
    trading_days: Sequence[date] | None = None,
) -> LabeledSeries:
    """Assemble term dummies for ``returns``.

    ``radius=None`` labels term days only (the aligned trading day of each
    event); an integer radius labels every trading day of the event's window.
    The trading calendar defaults to the return dates.
    """
    if len(returns) == 0:
        raise DataError("empty return series")
    days = list(trading_days) if trading_days is not None else list(returns.dates)
    index = {d: i for i, d in enumerate(returns.dates)}
    n = len(returns)
    dummies = np.zeros((n, 24))
    if radius is None:
        mode = "term-day"
        aligned = tuple(align_terms(events, days))
        for ev in aligned:
            if ev.trading_day is not None and ev.trading_day in index:
                dummies[index[ev.trading_day], ev.order - 1] = 1.0
        rad = 0
    else:
        mode = f"window({radius})"
        windows = window_labels(events, days, radius)
        for w in windows:
            for d in w.member_days:
                if d in index:
                    dummies[index[d], w.event.order - 1] = 1.0
        rad = radius
        aligned = tuple(w.event for w in windows)
    rowsum = dummies.sum(axis=1)
    if np.any(rowsum > 1):
        bad = returns.dates[int(np.flatnonzero(rowsum > 1)[0])]
        raise DataError(f"trading day {bad} carries more than one term label")
    lagged = np.empty(n)
    lagged[0] = np.nan
    lagged[1:] = returns.values[:-1]
    return LabeledSeries(returns, dummies, 1.0 - rowsum, lagged, mode, rad, aligned)


def fingerprint(series: PriceSeries | ReturnSeries) -> str:
    """SHA-256 of the parsed rows in a canonical text form."""
    h = hashlib.sha256()
    values = series.close if isinstance(series, PriceSeries) else series.values
    for d, v in zip(series.dates, values):
        h.update(f"{d.isoformat()},{float(v)!r}\n".encode())
    return h.hexdigest()
