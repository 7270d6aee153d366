import math
import re
from datetime import date, timedelta

import numpy as np
import pytest

from newsgraph.backtest import (
    DailyWeights,
    long_only_weights,
    long_short_weights,
    max_drawdown,
    realized_returns,
    render_svg,
    risk_metrics,
    simulate,
    weights_from_predictions,
    write_equity_csv,
)
from newsgraph.core import MovementLabel as L
from newsgraph.errors import DataError, DomainError
from newsgraph.model import Prediction

D0 = date(2022, 1, 3)
DAYS = [D0 + timedelta(days=k) for k in range(12)]


def hand_simulation(weights_by_day, returns_by_day):
    """Day-by-day scalar loop: portfolio return, equity, and risk figures."""
    daily = []
    for w, r in zip(weights_by_day, returns_by_day):
        daily.append(sum(w[t] * r[t] for t in w))
    equity, e = [], 1.0
    for x in daily:
        e *= 1.0 + x
        equity.append(e)
    n = len(daily)
    mean = sum(daily) / n
    sd = math.sqrt(sum((x - mean) ** 2 for x in daily) / (n - 1))
    path = [1.0] + equity
    mdd = 0.0
    for i in range(len(path)):
        for j in range(i, len(path)):
            mdd = max(mdd, (path[i] - path[j]) / path[i])
    sharpe = None if sd == 0 else mean / sd * math.sqrt(252)
    return daily, equity, equity[-1] - 1.0, sd * math.sqrt(252), sharpe, mdd


def test_long_only_weights():
    w = long_only_weights(D0, {"A": L.UP, "B": L.UP, "C": L.DOWN}).weights
    assert w == {"A": 0.5, "B": 0.5, "C": 0.0}
    assert set(long_only_weights(D0, {"A": L.NEUTRAL, "B": L.DOWN}).weights.values()) == {0.0}
    assert long_only_weights(D0, {t: L.UP for t in "ABCD"}).weights == {t: 0.25 for t in "ABCD"}


def test_long_short_weights():
    assert long_short_weights(D0, {"A": L.UP, "B": L.DOWN}).weights == {"A": 1.0, "B": -1.0}
    assert long_short_weights(D0, {"A": L.UP, "B": L.UP, "C": L.DOWN, "D": L.DOWN}).weights == {
        "A": 0.5, "B": 0.5, "C": -0.5, "D": -0.5}
    preds = {"A": L.UP, "B": L.NEUTRAL, "C": L.UP}
    assert long_short_weights(D0, preds).weights == long_only_weights(D0, preds).weights


def test_duplicate_prediction_rejected():
    with pytest.raises(DomainError):
        long_only_weights(D0, [("A", L.UP), ("A", L.DOWN)])


def test_compounding_two_days():
    w = [DailyWeights(DAYS[0], {"A": 1.0}), DailyWeights(DAYS[1], {"A": 1.0})]
    rep = simulate(w, {DAYS[0]: {"A": 0.01}, DAYS[1]: {"A": 0.01}})
    assert rep.cumulative_return == pytest.approx(1.01 ** 2 - 1, abs=1e-15)
    assert rep.annualized_volatility == 0.0 and rep.sharpe is None and rep.max_drawdown == 0.0


def test_all_zero_weights():
    w = [DailyWeights(d, {"A": 0.0, "B": 0.0}) for d in DAYS[:5]]
    rep = simulate(w, {})
    assert np.all(rep.equity_curve == 1.0)
    assert (rep.cumulative_return, rep.annualized_volatility, rep.sharpe, rep.max_drawdown) == (0.0, 0.0, 0.0, 0.0)


def test_constant_positive_returns():
    vol, sharpe, mdd = risk_metrics([0.001] * 20)
    assert vol == 0.0 and mdd == 0.0 and sharpe is None
    rep = simulate([DailyWeights(d, {"A": 1.0}) for d in DAYS[:10]], {d: {"A": 0.001} for d in DAYS[:10]})
    assert rep.cumulative_return == pytest.approx(1.001 ** 10 - 1, abs=1e-15)


def test_drawdown_example():
    assert max_drawdown([1.0, 1.2, 0.9, 1.1]) == 0.25


def test_drawdown_counts_loss_on_first_day():
    # equity curve starts below the 1.0 starting capital
    _, _, mdd = risk_metrics([-0.1, 0.05])
    assert mdd == pytest.approx(0.1, abs=1e-15)


def test_risk_metrics_needs_two_returns():
    with pytest.raises(DomainError):
        risk_metrics([0.01])


def test_missing_return_for_held_ticker():
    with pytest.raises(DataError):
        simulate([DailyWeights(D0, {"A": 1.0})], {D0: {"B": 0.01}})
    with pytest.raises(DataError):
        simulate([DailyWeights(D0, {"A": 1.0})], {D0: {"A": math.nan}})


def test_random_fixtures_match_hand_simulation():
    rng = np.random.default_rng(11)
    tickers = ["A", "B", "C", "D", "E"]
    for _ in range(100):
        labels = rng.integers(0, 3, size=(10, 5))
        rets = rng.normal(0, 0.02, size=(10, 5))
        strategy = long_only_weights if rng.random() < 0.5 else long_short_weights
        weights = [strategy(DAYS[k], {t: L(int(labels[k, j])) for j, t in enumerate(tickers)}) for k in range(10)]
        realized = {DAYS[k]: {t: float(rets[k, j]) for j, t in enumerate(tickers)} for k in range(10)}
        rep = simulate(weights, realized)
        daily, equity, cum, vol, sharpe, mdd = hand_simulation(
            [w.weights for w in weights], [realized[d] for d in DAYS[:10]])
        assert np.max(np.abs(rep.daily_returns - daily)) <= 1e-12
        assert np.max(np.abs(rep.equity_curve - equity)) <= 1e-12
        assert abs(rep.cumulative_return - cum) <= 1e-12
        assert abs(rep.annualized_volatility - vol) <= 1e-12
        assert abs(rep.max_drawdown - mdd) <= 1e-12
        assert (rep.sharpe is None) == (sharpe is None)
        if sharpe is not None:
            assert abs(rep.sharpe - sharpe) <= 1e-12


def test_long_only_equity_positive():
    rng = np.random.default_rng(2)
    rets = rng.uniform(-0.99, 0.5, size=(10, 3))
    w = [DailyWeights(DAYS[k], {"A": 0.5, "B": 0.5, "C": 0.0}) for k in range(10)]
    realized = {DAYS[k]: dict(zip("ABC", rets[k])) for k in range(10)}
    assert np.all(simulate(w, realized).equity_curve > 0)


def test_cost_hook_receives_previous_weights():
    seen = []

    def cost(prev, cur):
        seen.append((dict(prev), dict(cur)))
        return 0.001

    w = [DailyWeights(DAYS[0], {"A": 1.0}), DailyWeights(DAYS[1], {"A": 0.0})]
    rep = simulate(w, {DAYS[0]: {"A": 0.01}, DAYS[1]: {"A": 0.02}}, cost=cost)
    assert seen == [({}, {"A": 1.0}), ({"A": 1.0}, {"A": 0.0})]
    np.testing.assert_allclose(rep.daily_returns, [0.009, -0.001], atol=1e-15)


def test_weights_formed_on_previous_trading_day():
    preds = [Prediction("A", DAYS[2], L.UP, (0, 0, 1)), Prediction("B", DAYS[2], L.DOWN, (1, 0, 0))]
    (w,) = weights_from_predictions(preds, DAYS, "long_short")
    assert w.date == DAYS[1] and w.weights == {"A": 1.0, "B": -1.0}
    with pytest.raises(DataError):
        weights_from_predictions([Prediction("A", DAYS[0], L.UP, (0, 0, 1))], DAYS, "long_only")


def test_realized_returns():
    closes = np.array([[100.0, 101.0, 99.99]])
    r = realized_returns(["A"], DAYS[:3], closes)
    assert list(r) == DAYS[:2]
    assert r[DAYS[0]]["A"] == pytest.approx(0.01, abs=1e-15)


def test_svg_one_polyline_per_report(tmp_path):
    reps = []
    for k in range(3):
        w = [DailyWeights(d, {"A": 1.0}) for d in DAYS[:4]]
        reps.append(simulate(w, {d: {"A": 0.01 * (k - 1)} for d in DAYS[:4]}, name=f"s{k}<&>"))
    svg = render_svg(reps)
    assert svg.startswith("<svg") and svg.count("<polyline") == 3
    assert "s0&lt;&amp;&gt;" in svg
    points = re.findall(r'points="([^"]+)"', svg)
    assert all(len(p.split()) == 5 for p in points)
    write_equity_csv(tmp_path / "e.csv", reps)
    lines = (tmp_path / "e.csv").read_text().splitlines()
    assert lines[0] == "date,s0<&>,s1<&>,s2<&>" and len(lines) == 5
