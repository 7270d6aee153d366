"""Long-only and long-short portfolios from daily movement predictions."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from . import kernels
from .core import MovementLabel
from .errors import DataError, DomainError

TRADING_DAYS = 252


@dataclass(frozen=True)
class DailyWeights:
    date: date
    weights: Mapping[str, float]


@dataclass
class BacktestReport:
    dates: list[date]
    daily_returns: np.ndarray
    equity_curve: np.ndarray
    cumulative_return: float
    annualized_volatility: float
    sharpe: float | None
    max_drawdown: float
    name: str = ""
    extra: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "cumulative_return": self.cumulative_return,
            "annualized_volatility": self.annualized_volatility,
            "sharpe": self.sharpe,
            "max_drawdown": self.max_drawdown,
            "dates": [d.isoformat() for d in self.dates],
            "daily_returns": self.daily_returns.tolist(),
            "equity_curve": self.equity_curve.tolist(),
            **self.extra,
        }


def _by_ticker(preds) -> dict[str, MovementLabel]:
    items = preds.items() if isinstance(preds, Mapping) else preds
    out: dict[str, MovementLabel] = {}
    for ticker, label in items:
        if ticker in out:
            raise DomainError(f"duplicate prediction for {ticker}")
        out[ticker] = MovementLabel.parse(label)
    return out


def long_only_weights(day: date, preds) -> DailyWeights:
    """Equal weight across predicted-Up tickers; all cash if there are none."""
    p = _by_ticker(preds)
    ups = [t for t, l in p.items() if l == MovementLabel.UP]
    w = {t: 0.0 for t in p}
    for t in ups:
        w[t] = 1.0 / len(ups)
    return DailyWeights(day, w)


def long_short_weights(day: date, preds) -> DailyWeights:
    """+1/k_up on Up names, -1/k_down on Down names; an empty side adds nothing."""
    p = _by_ticker(preds)
    ups = [t for t, l in p.items() if l == MovementLabel.UP]
    downs = [t for t, l in p.items() if l == MovementLabel.DOWN]
    w = {t: 0.0 for t in p}
    for t in ups:
        w[t] = 1.0 / len(ups)
    for t in downs:
        w[t] = -1.0 / len(downs)
    return DailyWeights(day, w)


def risk_metrics(daily_returns) -> tuple[float, float | None, float]:
    """``(annualized_volatility, sharpe, max_drawdown)`` with a zero risk-free rate.

    Sharpe is ``None`` when the sample standard deviation is zero, except for
    an all-zero series (a portfolio that never traded), where it is 0.
    """
    r = np.asarray(daily_returns, dtype=np.float64)
    if r.size < 2:
        raise DomainError("risk metrics need at least 2 daily returns")
    # a constant series has exactly zero spread; np.std leaves rounding residue
    sd = 0.0 if np.all(r == r[0]) else float(np.std(r, ddof=1))
    vol = sd * math.sqrt(TRADING_DAYS)
    if sd == 0.0:
        sharpe = 0.0 if not r.any() else None
    else:
        sharpe = float(np.mean(r) / sd * math.sqrt(TRADING_DAYS))
    equity = np.concatenate([[1.0], np.cumprod(1.0 + r)])
    return vol, sharpe, max_drawdown(equity)


def max_drawdown(equity) -> float:
    """Largest (peak - value) / peak over the path."""
    return kernels.max_drawdown(np.asarray(equity, dtype=np.float64))


CostFn = Callable[[Mapping[str, float], Mapping[str, float]], float]


def zero_cost(prev: Mapping[str, float], cur: Mapping[str, float]) -> float:
    return 0.0


def simulate(
    weights: Sequence[DailyWeights],
    realized: Mapping[date, Mapping[str, float]],
    name: str = "",
    cost: CostFn = zero_cost,
) -> BacktestReport:
    """Apply each day's weights to that day's close-to-next-close returns.

    ``realized[d][ticker]`` is the return from d's close to the next trading
    day's close. ``cost`` receives (previous weights, new weights) and returns
    a return-fraction charge for the rebalance; it defaults to zero.
    """
    weights = sorted(weights, key=lambda w: w.date)
    tickers = sorted({t for w in weights for t in w.weights})
    col = {t: j for j, t in enumerate(tickers)}
    W = np.zeros((len(weights), len(tickers)))
    R = np.zeros_like(W)
    costs = np.zeros(len(weights))
    prev: Mapping[str, float] = {}
    for k, dw in enumerate(weights):
        day_ret = realized.get(dw.date)
        for t, w in dw.weights.items():
            if w == 0.0:
                continue
            if day_ret is None or t not in day_ret or not math.isfinite(day_ret[t]):
                raise DataError(f"no realized return for held ticker {t} on {dw.date}")
            W[k, col[t]] = w
            R[k, col[t]] = day_ret[t]
        costs[k] = cost(prev, dw.weights)
        prev = dw.weights
    daily = kernels.portfolio_returns(W, R) - costs
    equity = np.cumprod(1.0 + daily)
    cum = float(equity[-1] - 1.0) if equity.size else 0.0
    if daily.size >= 2:
        vol, sharpe, mdd = risk_metrics(daily)
    else:
        vol, sharpe, mdd = 0.0, None, max_drawdown(np.concatenate([[1.0], equity]))
    return BacktestReport(
        dates=[w.date for w in weights],
        daily_returns=daily,
        equity_curve=equity,
        cumulative_return=cum,
        annualized_volatility=vol,
        sharpe=sharpe,
        max_drawdown=mdd,
        name=name,
    )


def realized_returns(tickers: Sequence[str], dates: Sequence[date], closes: np.ndarray) -> dict:
    """``{d: {ticker: close[d+1] / close[d] - 1}}`` for every date but the last."""
    out = {}
    for t in range(len(dates) - 1):
        out[dates[t]] = {tk: float(closes[i, t + 1] / closes[i, t] - 1.0) for i, tk in enumerate(tickers)}
    return out


def weights_from_predictions(predictions: Iterable, dates: Sequence[date], strategy: str) -> list[DailyWeights]:
    """Group predictions by target date and form weights on the previous trading day."""
    prev_day = {dates[k + 1]: dates[k] for k in range(len(dates) - 1)}
    by_target: dict[date, list] = {}
    for p in predictions:
        by_target.setdefault(p.date, []).append((p.ticker, p.label))
    build = {"long_only": long_only_weights, "long_short": long_short_weights}[strategy]
    out = []
    for target in sorted(by_target):
        if target not in prev_day:
            raise DataError(f"prediction target {target} has no previous trading day")
        out.append(build(prev_day[target], by_target[target]))
    return out


def write_equity_csv(path, reports: Sequence[BacktestReport]) -> None:
    dates = sorted({d for r in reports for d in r.dates})
    series = [dict(zip(r.dates, r.equity_curve)) for r in reports]
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date"] + [r.name for r in reports])
        for d in dates:
            w.writerow([d.isoformat()] + [repr(float(s[d])) if d in s else "" for s in series])


_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf")


def render_svg(reports: Sequence[BacktestReport], title: str = "Cumulative return", width=800, height=400) -> str:
    """Static line chart, one polyline per strategy, equity starting at 1.0."""
    pad_l, pad_r, pad_t, pad_b = 60, 160, 30, 40
    curves = [np.concatenate([[1.0], r.equity_curve]) for r in reports]
    n = max((c.size for c in curves), default=1)
    lo = min((float(c.min()) for c in curves), default=0.0)
    hi = max((float(c.max()) for c in curves), default=2.0)
    if hi - lo < 1e-12:
        lo, hi = lo - 0.5, hi + 0.5
    pw, ph = width - pad_l - pad_r, height - pad_t - pad_b

    def xy(k, v):
        x = pad_l + (pw * k / max(n - 1, 1))
        y = pad_t + ph * (1.0 - (v - lo) / (hi - lo))
        return f"{x:.2f},{y:.2f}"

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{pad_l}" y="18" font-family="sans-serif" font-size="14">{_esc(title)}</text>',
        f'<line x1="{pad_l}" y1="{pad_t + ph}" x2="{pad_l + pw}" y2="{pad_t + ph}" stroke="#444"/>',
        f'<line x1="{pad_l}" y1="{pad_t}" x2="{pad_l}" y2="{pad_t + ph}" stroke="#444"/>',
        f'<text x="{pad_l - 6}" y="{pad_t + 4}" font-family="sans-serif" font-size="11" '
        f'text-anchor="end">{hi:.3f}</text>',
        f'<text x="{pad_l - 6}" y="{pad_t + ph}" font-family="sans-serif" font-size="11" '
        f'text-anchor="end">{lo:.3f}</text>',
    ]
    for k, (r, c) in enumerate(zip(reports, curves)):
        color = _PALETTE[k % len(_PALETTE)]
        pts = " ".join(xy(i, float(v)) for i, v in enumerate(c))
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        ly = pad_t + 16 * k + 8
        parts.append(
            f'<text x="{pad_l + pw + 10}" y="{ly}" font-family="sans-serif" font-size="11" '
            f'fill="{color}">{_esc(r.name)}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _esc(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
