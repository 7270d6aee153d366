"""Market-data and headline parsing, 16:00 alignment, feature panels."""

from __future__ import annotations

import csv
import json
import logging
import math
import re
from dataclasses import dataclass, replace
from datetime import date, datetime, time
from pathlib import Path
from typing import Iterable, Mapping, Sequence
from zoneinfo import ZoneInfo

import numpy as np

from . import kernels
from .core import (
    Bar,
    Thresholds,
    TradingCalendar,
    label_movement,
    next_trading_day,
    validate_ticker,
)
from .errors import ConfigError, DomainError, RangeError, RowError, SchemaError

log = logging.getLogger(__name__)

MARKET_COLUMNS = (
    "ticker", "date", "open", "close", "high", "low", "ask", "bid", "volume", "dividend",
)
FEATURE_NAMES = (
    "open", "close", "high", "low", "ask", "bid", "log1p_volume", "dividend", "return",
)
STD_FLOOR = 1e-8
MARKET_CLOSE = time(16, 0)
DEFAULT_EXCHANGE_TZ = "America/New_York"


# ---------------------------------------------------------------- market data

def parse_market_csv(path) -> list[Bar]:
    """Read a market CSV into bars, one per (ticker, date) row."""
    path = Path(path)
    bars: list[Bar] = []
    seen: set[tuple[str, date]] = set()
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file, expected header {','.join(MARKET_COLUMNS)}")
        header = [h.strip() for h in header]
        missing = [c for c in MARKET_COLUMNS if c not in header]
        if missing:
            raise SchemaError(f"{path}: missing columns {missing}")
        col = {name: header.index(name) for name in MARKET_COLUMNS}
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) < len(header):
                raise RowError(f"expected {len(header)} fields, got {len(row)}", lineno, str(path))
            try:
                ticker = row[col["ticker"]].strip()
                d = date.fromisoformat(row[col["date"]].strip())
                nums = {k: float(row[col[k]]) for k in MARKET_COLUMNS[2:]}
                bar = Bar(ticker=ticker, date=d, **nums)
            except (ValueError, DomainError) as exc:
                raise RowError(str(exc), lineno, str(path)) from None
            key = (bar.ticker, bar.date)
            if key in seen:
                raise RowError(f"duplicate row for {bar.ticker} {bar.date}", lineno, str(path))
            seen.add(key)
            bars.append(bar)
    return bars


def _fmt(x: float) -> str:
    return repr(float(x))


def write_market_csv(path, bars: Iterable[Bar]) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MARKET_COLUMNS)
        for b in bars:
            w.writerow([
                b.ticker, b.date.isoformat(), _fmt(b.open), _fmt(b.close), _fmt(b.high),
                _fmt(b.low), _fmt(b.ask), _fmt(b.bid), _fmt(b.volume), _fmt(b.dividend),
            ])


# ---------------------------------------------------------------- headlines

@dataclass(frozen=True)
class HeadlineRecord:
    text: str
    timestamp: datetime
    provider: str
    effective_date: date | None = None

    def __post_init__(self):
        if not self.text or not self.text.strip():
            raise DomainError("headline text is empty")
        if self.timestamp.tzinfo is None or self.timestamp.utcoffset() is None:
            raise DomainError(f"timestamp {self.timestamp.isoformat()} has no timezone")

    def to_json(self) -> dict:
        out = {
            "text": self.text,
            "timestamp": self.timestamp.isoformat(),
            "provider": self.provider,
        }
        if self.effective_date is not None:
            out["effective_date"] = self.effective_date.isoformat()
        return out


def parse_timestamp(value: str) -> datetime:
    if not isinstance(value, str):
        raise DomainError(f"timestamp must be a string, got {type(value).__name__}")
    v = value.strip()
    if v.endswith(("Z", "z")):
        v = v[:-1] + "+00:00"
    ts = datetime.fromisoformat(v)
    if ts.tzinfo is None:
        raise DomainError(f"timestamp {value!r} has no UTC offset")
    return ts


def parse_headlines(path) -> list[HeadlineRecord]:
    """Read line-delimited JSON headlines, dropping exact (text, timestamp) repeats."""
    path = Path(path)
    out: list[HeadlineRecord] = []
    seen: set[tuple[str, datetime]] = set()
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise RowError(f"malformed JSON: {exc.msg}", lineno, str(path)) from None
            if not isinstance(obj, dict):
                raise RowError("record is not a JSON object", lineno, str(path))
            for key in ("text", "timestamp", "provider"):
                if key not in obj:
                    raise RowError(f"missing field {key!r}", lineno, str(path))
            try:
                ts = parse_timestamp(obj["timestamp"])
                eff = obj.get("effective_date")
                rec = HeadlineRecord(
                    text=str(obj["text"]),
                    timestamp=ts,
                    provider=str(obj["provider"]),
                    effective_date=date.fromisoformat(eff) if eff else None,
                )
            except (ValueError, DomainError) as exc:
                raise RowError(str(exc), lineno, str(path)) from None
            key = (rec.text, rec.timestamp)
            if key in seen:
                continue
            seen.add(key)
            out.append(rec)
    return out


def write_headlines(path, records: Iterable[HeadlineRecord]) -> None:
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        for r in records:
            fh.write(json.dumps(r.to_json(), ensure_ascii=False, sort_keys=True) + "\n")


def assign_effective_date(
    h: HeadlineRecord, cal: TradingCalendar, tz: str | ZoneInfo = DEFAULT_EXCHANGE_TZ
) -> HeadlineRecord:
    """Attach the trading day whose market data the headline may inform.

    Before 16:00 exchange time on a trading day maps to that day; 16:00
    exactly, later, or any time on a non-trading day maps to the next
    trading day. Headlines dated before the calendar starts are out of range.
    """
    zone = ZoneInfo(tz) if isinstance(tz, str) else tz
    local = h.timestamp.astimezone(zone)
    d = local.date()
    if not len(cal):
        raise RangeError("empty calendar")
    if d < cal.first:
        raise RangeError(f"headline dated {d} precedes calendar start {cal.first}")
    if d in cal and local.time() < MARKET_CLOSE:
        eff = d
    else:
        eff = next_trading_day(cal, d)
    return replace(h, effective_date=eff)


# ---------------------------------------------------------------- mention filter

DOW30_NAMES: dict[str, tuple[str, ...]] = {
    "AAPL": ("Apple",),
    "AMGN": ("Amgen",),
    "AXP": ("American Express", "Amex"),
    "BA": ("Boeing",),
    "CAT": ("Caterpillar",),
    "CRM": ("Salesforce",),
    "CSCO": ("Cisco",),
    "CVX": ("Chevron",),
    "DIS": ("Disney", "Walt Disney"),
    "DOW": ("Dow Inc",),
    "GS": ("Goldman Sachs",),
    "HD": ("Home Depot",),
    "HON": ("Honeywell",),
    "IBM": ("International Business Machines",),
    "INTC": ("Intel",),
    "JNJ": ("Johnson & Johnson", "Johnson and Johnson"),
    "JPM": ("JPMorgan", "JP Morgan", "JPMorgan Chase"),
    "KO": ("Coca-Cola", "Coca Cola"),
    "MCD": ("McDonald's", "McDonalds"),
    "MMM": ("3M",),
    "MRK": ("Merck",),
    "MSFT": ("Microsoft",),
    "NKE": ("Nike",),
    "PG": ("Procter & Gamble", "Procter and Gamble"),
    "TRV": ("Travelers",),
    "UNH": ("UnitedHealth", "United Health"),
    "V": ("Visa",),
    "VZ": ("Verizon",),
    "WBA": ("Walgreens", "Walgreens Boots Alliance"),
    "WMT": ("Walmart", "Wal-Mart"),
}


class MentionMatcher:
    """Heuristic test for whether a headline names a universe company.

    A ticker counts when it appears as a whole word; a company name counts
    as a case-insensitive substring. Both are crude: "V" or "KO" collide
    with ordinary words when ``ticker_case_sensitive`` is off.
    """

    def __init__(
        self,
        universe: Sequence[str],
        names: Mapping[str, Sequence[str]] | None = None,
        ticker_case_sensitive: bool = False,
    ):
        self.universe = tuple(universe)
        names = DOW30_NAMES if names is None else names
        flags = 0 if ticker_case_sensitive else re.IGNORECASE
        self._ticker_re = {
            t: re.compile(rf"(?<![A-Za-z0-9]){re.escape(t)}(?![A-Za-z0-9])", flags)
            for t in self.universe
        }
        self._names = {t: tuple(n.lower() for n in names.get(t, ())) for t in self.universe}

    def mentions(self, text: str) -> list[str]:
        low = text.lower()
        found = []
        for t in self.universe:
            if self._ticker_re[t].search(text) or any(n in low for n in self._names[t]):
                found.append(t)
        return found

    def __call__(self, text: str) -> bool:
        return bool(self.mentions(text))


# ---------------------------------------------------------------- feature panel

@dataclass
class FeaturePanel:
    """Standardized [ticker x date x feature] market features.

    ``closes`` keeps the raw (forward-filled) close prices for labels and
    backtests; ``mask`` marks imputed cells.
    """

    tickers: tuple[str, ...]
    dates: tuple[date, ...]
    values: np.ndarray
    feature_names: tuple[str, ...]
    mask: np.ndarray
    means: np.ndarray
    stds: np.ndarray
    train_end: date
    closes: np.ndarray

    def __post_init__(self):
        n, t, f = len(self.tickers), len(self.dates), len(self.feature_names)
        if self.values.shape != (n, t, f):
            raise DomainError(f"values shape {self.values.shape} != {(n, t, f)}")
        if self.mask.shape != (n, t) or self.closes.shape != (n, t):
            raise DomainError("mask/closes shape does not match tickers x dates")
        if self.means.shape != (n, f) or self.stds.shape != (n, f):
            raise DomainError("normalization stats shape does not match tickers x features")

    @property
    def calendar(self) -> TradingCalendar:
        return TradingCalendar(self.dates)

    def train_slice(self) -> slice:
        k = sum(1 for d in self.dates if d <= self.train_end)
        return slice(0, k)

    def to_json(self) -> dict:
        return {
            "format": "newsgraph.feature_panel",
            "version": 1,
            "tickers": list(self.tickers),
            "dates": [d.isoformat() for d in self.dates],
            "feature_names": list(self.feature_names),
            "train_end": self.train_end.isoformat(),
            "means": self.means.tolist(),
            "stds": self.stds.tolist(),
            "values": self.values.tolist(),
            "mask": self.mask.astype(int).tolist(),
            "closes": self.closes.tolist(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "FeaturePanel":
        if obj.get("format") != "newsgraph.feature_panel":
            raise SchemaError("not a feature panel artifact")
        if obj.get("version") != 1:
            raise SchemaError(f"unsupported feature panel version {obj.get('version')}")
        return cls(
            tickers=tuple(obj["tickers"]),
            dates=tuple(date.fromisoformat(d) for d in obj["dates"]),
            values=np.asarray(obj["values"], dtype=np.float64),
            feature_names=tuple(obj["feature_names"]),
            mask=np.asarray(obj["mask"], dtype=bool),
            means=np.asarray(obj["means"], dtype=np.float64),
            stds=np.asarray(obj["stds"], dtype=np.float64),
            train_end=date.fromisoformat(obj["train_end"]),
            closes=np.asarray(obj["closes"], dtype=np.float64),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), separators=(",", ":")), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "FeaturePanel":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def _raw_feature(bar: Bar, name: str) -> float:
    if name == "log1p_volume":
        return math.log1p(bar.volume)
    if name == "return":
        return math.nan  # filled after imputation
    return float(getattr(bar, name))


def build_feature_panel(
    bars: Sequence[Bar],
    cal: TradingCalendar,
    train_end: date,
    tickers: Sequence[str] | None = None,
    feature_names: Sequence[str] = FEATURE_NAMES,
) -> FeaturePanel:
    """Assemble, impute and z-score per-ticker features.

    Normalization moments use only dates <= ``train_end``. Missing cells are
    forward-filled from the ticker's previous bar (back-filled before its
    first bar) and flagged in ``mask``.
    """
    unknown = [f for f in feature_names if f not in FEATURE_NAMES]
    if unknown:
        raise ConfigError(f"unknown features {unknown}; choose from {FEATURE_NAMES}")
    if tickers is None:
        tickers = sorted({b.ticker for b in bars})
    tickers = tuple(validate_ticker(t) for t in tickers)
    tix = {t: i for i, t in enumerate(tickers)}
    dates = cal.dates
    n, T, F = len(tickers), len(dates), len(feature_names)
    raw = np.full((n, T, F), np.nan)
    closes = np.full((n, T, 1), np.nan)
    present = np.zeros((n, T), dtype=bool)
    for b in bars:
        i = tix.get(b.ticker)
        if i is None:
            continue
        t = cal.index(b.date)
        raw[i, t] = [_raw_feature(b, f) for f in feature_names]
        closes[i, t, 0] = b.close
        present[i, t] = True

    n_train = sum(1 for d in dates if d <= train_end)
    for i, t in enumerate(tickers):
        if present[i, :n_train].sum() < 2:
            raise ConfigError(f"ticker {t} has fewer than 2 bars on or before {train_end}")

    filled, imputed = kernels.forward_fill(raw, present)
    filled_close, _ = kernels.forward_fill(closes, present)
    filled_close = filled_close[:, :, 0]
    if "return" in feature_names:
        k = list(feature_names).index("return")
        ret = np.zeros((n, T))
        ret[:, 1:] = filled_close[:, 1:] / filled_close[:, :-1] - 1.0
        filled[:, :, k] = ret

    train = filled[:, :n_train]
    means = train.mean(axis=1)
    stds = np.maximum(train.std(axis=1), STD_FLOOR)
    # exactly constant in training: pin the mean so those values map to 0, not rounding noise
    flat = train.max(axis=1) == train.min(axis=1)
    means[flat] = train[:, 0][flat]
    stds[flat] = STD_FLOOR
    values = (filled - means[:, None, :]) / stds[:, None, :]
    return FeaturePanel(
        tickers=tickers,
        dates=tuple(dates),
        values=values,
        feature_names=tuple(feature_names),
        mask=imputed,
        means=means,
        stds=stds,
        train_end=train_end,
        closes=filled_close,
    )


def movement_labels(panel: FeaturePanel, th: Thresholds = Thresholds()) -> np.ndarray:
    """Close-to-close movement labels [ticker x date]; -1 where undefined.

    A label is undefined on the first date and wherever the bar itself was
    imputed.
    """
    n, T = panel.closes.shape
    out = np.full((n, T), -1, dtype=np.int64)
    for i in range(n):
        for t in range(1, T):
            if panel.mask[i, t]:
                continue
            r = panel.closes[i, t] / panel.closes[i, t - 1] - 1.0
            out[i, t] = int(label_movement(r, th))
    return out
