"""Synthetic market + headline fixtures with a planted graph-contagion signal.

Each trading day may carry one news event that names a small group of
companies. One group member (the leader) takes a large return shock that
day. On the next day the leader keeps most of its shock (visible from its
own history) while every other group member moves by a fraction of the
leader's shock, which is only visible through the day's graph.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date, datetime, time, timedelta
from pathlib import Path
from zoneinfo import ZoneInfo

import numpy as np

from .core import Bar
from .ingest import DEFAULT_EXCHANGE_TZ, DOW30_NAMES, HeadlineRecord, write_headlines, write_market_csv

DOW30 = tuple(sorted(DOW30_NAMES))

_EVENT_TEMPLATES = (
    "{lead} shares swing on surprise guidance; suppliers {others} in focus",
    "{lead} unveils major contract, analysts flag read-through for {others}",
    "Regulators open probe into {lead}; partners {others} under scrutiny",
    "{lead} rallies on earnings beat as investors eye {others}",
)
_FILLER = (
    "Treasury yields edge higher ahead of jobs report",
    "Oil prices steady as traders weigh supply outlook",
    "Central bank minutes signal patience on rates",
    "Retail sales data due later this week",
    "Global equities mixed in quiet trading session",
)
_SINGLE = (
    "{t} announces leadership change",
    "{t} schedules investor day",
    "Analyst reiterates rating on {t}",
)


@dataclass(frozen=True)
class SyntheticSpec:
    n_tickers: int = 30
    n_days: int = 300
    seed: int = 0
    start: date = date(2020, 9, 1)
    train_fraction: float = 0.7
    noise_vol: float = 0.006
    event_prob: float = 0.9
    group_min: int = 4
    group_max: int = 7
    shock_min: float = 0.025
    shock_max: float = 0.04
    momentum: float = 0.8
    contagion: float = 0.6
    single_mention_prob: float = 0.3
    missing_rate: float = 0.0


@dataclass
class SyntheticData:
    tickers: tuple[str, ...]
    dates: tuple[date, ...]
    bars: list[Bar]
    headlines: list[HeadlineRecord]
    returns: np.ndarray
    groups: list[tuple[str, ...]]
    split_date: date


def weekdays(start: date, n: int) -> list[date]:
    out = []
    d = start
    while len(out) < n:
        if d.weekday() < 5:
            out.append(d)
        d += timedelta(days=1)
    return out


def generate(spec: SyntheticSpec = SyntheticSpec()) -> SyntheticData:
    if not 2 <= spec.n_tickers <= len(DOW30):
        raise ValueError(f"n_tickers must be in [2, {len(DOW30)}]")
    rng = np.random.default_rng(spec.seed)
    tickers = DOW30[: spec.n_tickers]
    N, T = len(tickers), spec.n_days
    dates = weekdays(spec.start, T)
    tz = ZoneInfo(DEFAULT_EXCHANGE_TZ)

    r = rng.normal(0.0, spec.noise_vol, size=(N, T))
    shock = np.zeros((N, T))
    groups: list[tuple[str, ...]] = []
    headlines: list[HeadlineRecord] = []
    for t in range(T):
        members: tuple[str, ...] = ()
        if rng.random() < spec.event_prob:
            k = int(rng.integers(spec.group_min, min(spec.group_max, N) + 1))
            idx = rng.choice(N, size=k, replace=False)
            lead = int(idx[0])
            sign = 1.0 if rng.random() < 0.5 else -1.0
            shock[lead, t] = sign * rng.uniform(spec.shock_min, spec.shock_max)
            members = tuple(tickers[i] for i in idx)
            if t + 1 < T:
                r[lead, t + 1] += spec.momentum * shock[lead, t]
                for i in idx[1:]:
                    r[int(i), t + 1] += spec.contagion * shock[lead, t]
            tpl = _EVENT_TEMPLATES[int(rng.integers(len(_EVENT_TEMPLATES)))]
            text = tpl.format(lead=members[0], others=", ".join(members[1:]))
            headlines.append(_headline(text, dates, t, rng, tz))
        groups.append(members)
        if rng.random() < spec.single_mention_prob:
            t_single = tickers[int(rng.integers(N))]
            text = _SINGLE[int(rng.integers(len(_SINGLE)))].format(t=t_single)
            headlines.append(_headline(text, dates, t, rng, tz))
        for _ in range(int(rng.integers(0, 3))):
            text = _FILLER[int(rng.integers(len(_FILLER)))] + f" (bulletin {t}-{int(rng.integers(1000))})"
            headlines.append(_headline(text, dates, t, rng, tz))
    r += shock

    bars: list[Bar] = []
    price = rng.uniform(50.0, 300.0, size=N)
    for t, d in enumerate(dates):
        prev = price.copy()
        price = prev * (1.0 + r[:, t])
        for i, tk in enumerate(tickers):
            if t > 0 and rng.random() < spec.missing_rate:
                continue
            close = float(price[i])
            open_ = float(prev[i] * (1.0 + rng.normal(0.0, 0.002)))
            high = max(open_, close) * (1.0 + abs(rng.normal(0.0, 0.003)))
            low = min(open_, close) * (1.0 - abs(rng.normal(0.0, 0.003)))
            spread = close * 0.0005
            volume = float(np.round(rng.lognormal(15.0, 0.3) * (1.0 + 20.0 * abs(r[i, t]))))
            dividend = round(close * 0.005, 4) if (t % 63 == 20 + i % 5) else 0.0
            bars.append(Bar(
                ticker=tk, date=d, open=open_, close=close, high=high, low=low,
                ask=close + spread, bid=close - spread, volume=volume, dividend=dividend,
            ))
    split = dates[int(T * spec.train_fraction)]
    return SyntheticData(
        tickers=tickers, dates=tuple(dates), bars=bars, headlines=headlines, returns=r,
        groups=groups, split_date=split,
    )


def _headline(text: str, dates, t: int, rng: np.random.Generator, tz: ZoneInfo) -> HeadlineRecord:
    """Timestamp that the 16:00 rule maps onto ``dates[t]``."""
    d = dates[t]
    if t > 0 and rng.random() < 0.3:
        # after the previous session's close
        prev = dates[t - 1]
        minute = int(rng.integers(16 * 60, 24 * 60))
        local = datetime.combine(prev, time(minute // 60, minute % 60), tzinfo=tz)
    else:
        minute = int(rng.integers(6 * 60, 16 * 60))
        local = datetime.combine(d, time(minute // 60, minute % 60), tzinfo=tz)
    return HeadlineRecord(text=text, timestamp=local, provider="synthetic-wire")


CONFIG_TEMPLATE = """\
; newsgraph run configuration (INI). Relative paths resolve against this file.
[paths]
market = market.csv
headlines = headlines.jsonl
cache_dir = cache
output_dir = out

[data]
; empty universe = every ticker in the market file
universe =
split_date = {split}
exchange_tz = America/New_York
mention_filter = true

[provider]
mode = mock
seed = {seed}
replay_of = mock:{seed}
batch_size = 200
max_workers = 4
timeout = 60
retries = 3

[model]
seed = {seed}
lookback = 20
gnn_dim = 32
lstm_dim = 64
mlp_hidden = 64
gnn_layers = 1
epochs = 30
lr = 0.001
batch_size = 128

[thresholds]
r_up = 0.01
r_down = -0.01

[backtest]
long_only = true
long_short = true
cost_bps = 0
"""


def write_fixture(directory, spec: SyntheticSpec = SyntheticSpec()) -> SyntheticData:
    """Write market.csv, headlines.jsonl and config.ini into ``directory``."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    data = generate(spec)
    write_market_csv(out / "market.csv", data.bars)
    write_headlines(out / "headlines.jsonl", data.headlines)
    (out / "config.ini").write_text(
        CONFIG_TEMPLATE.format(split=data.split_date.isoformat(), seed=spec.seed), encoding="utf-8"
    )
    return data
