"""Domain types, trading calendar, returns and movement labels."""

from __future__ import annotations

import bisect
import math
import re
from dataclasses import dataclass
from datetime import date
from enum import IntEnum
from typing import Iterable, Sequence

from .errors import DomainError, RangeError

_TICKER_RE = re.compile(r"^[A-Z][A-Z0-9.]{0,5}$")


def validate_ticker(symbol: str) -> str:
    """Return ``symbol`` unchanged if it is a well-formed ticker, else raise."""
    if not isinstance(symbol, str) or not _TICKER_RE.match(symbol):
        raise DomainError(f"invalid ticker symbol {symbol!r}")
    return symbol


class MovementLabel(IntEnum):
    """Three-way movement class. Integer order is Down < Neutral < Up."""

    DOWN = 0
    NEUTRAL = 1
    UP = 2

    @property
    def display(self) -> str:
        return self.name.capitalize()

    @classmethod
    def parse(cls, value: "str | int | MovementLabel") -> "MovementLabel":
        if isinstance(value, str):
            try:
                return cls[value.upper()]
            except KeyError:
                raise DomainError(f"unknown movement label {value!r}") from None
        return cls(int(value))


@dataclass(frozen=True)
class Thresholds:
    r_up: float = 0.01
    r_down: float = -0.01

    def __post_init__(self):
        if not (self.r_down < 0.0 < self.r_up):
            raise DomainError(
                f"thresholds must satisfy r_down < 0 < r_up, got ({self.r_down}, {self.r_up})"
            )


@dataclass(frozen=True)
class Bar:
    """One ticker's market data for one trading day."""

    ticker: str
    date: date
    open: float
    close: float
    high: float
    low: float
    ask: float
    bid: float
    volume: float
    dividend: float

    def __post_init__(self):
        validate_ticker(self.ticker)
        for name in ("open", "close", "high", "low", "ask", "bid", "volume", "dividend"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise DomainError(f"{name} is not finite: {v!r}")
        for name in ("open", "close", "high", "low"):
            if getattr(self, name) <= 0:
                raise DomainError(f"{name} must be > 0, got {getattr(self, name)}")
        for name in ("ask", "bid", "volume", "dividend"):
            if getattr(self, name) < 0:
                raise DomainError(f"{name} must be >= 0, got {getattr(self, name)}")
        if self.low > min(self.open, self.close):
            raise DomainError(f"low {self.low} exceeds min(open, close)")
        if self.high < max(self.open, self.close):
            raise DomainError(f"high {self.high} below max(open, close)")
        if self.ask > 0 and self.bid > 0 and self.bid > self.ask:
            raise DomainError(f"bid {self.bid} exceeds ask {self.ask}")


class TradingCalendar:
    """Strictly increasing sequence of trading dates."""

    __slots__ = ("_dates", "_index")

    def __init__(self, dates: Iterable[date]):
        ds = tuple(dates)
        for a, b in zip(ds, ds[1:]):
            if not a < b:
                raise DomainError(f"calendar dates must be strictly increasing ({a} !< {b})")
        self._dates = ds
        self._index = {d: i for i, d in enumerate(ds)}

    @classmethod
    def from_bars(cls, bars: Iterable[Bar]) -> "TradingCalendar":
        return cls(sorted({b.date for b in bars}))

    @property
    def dates(self) -> tuple[date, ...]:
        return self._dates

    def __len__(self) -> int:
        return len(self._dates)

    def __iter__(self):
        return iter(self._dates)

    def __contains__(self, d: object) -> bool:
        return d in self._index

    def __getitem__(self, i):
        return self._dates[i]

    def index(self, d: date) -> int:
        try:
            return self._index[d]
        except KeyError:
            raise RangeError(f"{d} is not a trading day") from None

    @property
    def first(self) -> date:
        if not self._dates:
            raise RangeError("empty calendar")
        return self._dates[0]

    @property
    def last(self) -> date:
        if not self._dates:
            raise RangeError("empty calendar")
        return self._dates[-1]

    def last_on_or_before(self, d: date) -> date:
        i = bisect.bisect_right(self._dates, d)
        if i == 0:
            raise RangeError(f"no trading day on or before {d}")
        return self._dates[i - 1]

    def __repr__(self) -> str:
        if not self._dates:
            return "TradingCalendar([])"
        return f"TradingCalendar({self._dates[0]}..{self._dates[-1]}, n={len(self._dates)})"


def compute_return(p_t: float, p_prev: float) -> float:
    if not p_prev > 0:
        raise DomainError(f"previous price must be > 0, got {p_prev}")
    return p_t / p_prev - 1.0


def label_movement(r: float, th: Thresholds = Thresholds()) -> MovementLabel:
    if math.isnan(r):
        raise DomainError("cannot label a NaN return")
    if r >= th.r_up:
        return MovementLabel.UP
    if r <= th.r_down:
        return MovementLabel.DOWN
    return MovementLabel.NEUTRAL


def next_trading_day(cal: TradingCalendar, d: date) -> date:
    """Smallest calendar date strictly after ``d``."""
    dates = cal.dates
    if not dates:
        raise RangeError("empty calendar")
    i = bisect.bisect_right(dates, d)
    if i >= len(dates):
        raise RangeError(f"no trading day after {d} (calendar ends {dates[-1]})")
    return dates[i]


def universe_index(universe: Sequence[str]) -> dict[str, int]:
    idx = {}
    for i, t in enumerate(universe):
        validate_ticker(t)
        if t in idx:
            raise DomainError(f"duplicate ticker {t} in universe")
        idx[t] = i
    return idx
