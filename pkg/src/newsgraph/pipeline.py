"""Pipeline stages behind the CLI subcommands.

Every stage writes its artifacts into ``output_dir`` together with a
``<artifact>.meta.json`` sidecar holding the artifact's own SHA-256 and the
hashes of everything it was built from. Downstream stages re-hash their
inputs and refuse to run when the chain no longer matches.
"""

from __future__ import annotations

import hashlib
import json
import logging
from collections import defaultdict
from dataclasses import replace
from datetime import date, timedelta
from pathlib import Path

import numpy as np

from . import autograd as ag
from .backtest import (
    BacktestReport,
    realized_returns,
    render_svg,
    simulate,
    weights_from_predictions,
    write_equity_csv,
)
from .config import RunConfig
from .core import MovementLabel, TradingCalendar
from .errors import ConfigError, RangeError, StaleArtifactError
from .evaluate import confusion, majority_baseline, metrics_report
from .graph_infer import (
    LiveProvider,
    MockProvider,
    ReplayProvider,
    ResponseCache,
    infer_graph_sequence,
    read_graphs,
    write_graphs,
)
from .ingest import (
    FeaturePanel,
    MentionMatcher,
    assign_effective_date,
    build_feature_panel,
    movement_labels,
    parse_headlines,
    parse_market_csv,
    write_headlines,
)
from .model import (
    ModelConfig,
    Prediction,
    SequenceData,
    make_windows,
    param_count,
    params_from_arrays,
    params_to_arrays,
    predict,
    split_windows,
    stock_lstm_ablation,
    train,
)

log = logging.getLogger(__name__)

PANEL = "panel.json"
HEADLINES = "headlines.effective.jsonl"
GRAPHS = "graphs.jsonl"
PREDICTIONS = "predictions.jsonl"
METRICS = "metrics.json"
EQUITY = "equity.csv"
REPORT_SVG = "report.svg"
REPORT_MD = "summary.md"

MODELS = ("gnn_lstm", "stock_lstm")


def checkpoint_name(model: str) -> str:
    return f"{model}.ckpt"


def backtest_name(model: str, strategy: str) -> str:
    return f"backtest_{model}_{strategy}.json"


# ---------------------------------------------------------------- hashing / chain

def sha256_file(path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _dump_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def _meta_path(out: Path, name: str) -> Path:
    return out / f"{name}.meta.json"


def write_meta(cfg: RunConfig, name: str, inputs: dict[str, str], params: dict | None = None) -> None:
    out = cfg.output_dir
    _dump_json(_meta_path(out, name), {
        "artifact": name,
        "sha256": sha256_file(out / name),
        "inputs": inputs,
        "params": params or {},
    })


def _raw_inputs(cfg: RunConfig) -> dict[str, Path]:
    return {"input:market": cfg.market, "input:headlines": cfg.headlines}


def verify_chain(cfg: RunConfig, name: str, _seen=None) -> str:
    """Check ``name`` and everything upstream of it; return its current hash."""
    out = cfg.output_dir
    seen = {} if _seen is None else _seen
    if name in seen:
        return seen[name]
    path, mpath = out / name, _meta_path(out, name)
    if not path.exists() or not mpath.exists():
        raise StaleArtifactError(f"missing artifact {path}; run the upstream command first")
    meta = json.loads(mpath.read_text(encoding="utf-8"))
    current = sha256_file(path)
    if current != meta["sha256"]:
        raise StaleArtifactError(f"{name} was modified after it was built; rebuild it")
    raw = _raw_inputs(cfg)
    for label, recorded in meta["inputs"].items():
        if label in raw:
            if raw[label].exists() and sha256_file(raw[label]) != recorded:
                raise StaleArtifactError(
                    f"{name} was built from a different {raw[label].name}; rerun ingest"
                )
            continue
        upstream = verify_chain(cfg, label, seen)
        if upstream != recorded:
            raise StaleArtifactError(
                f"{name} was built from an older {label}; rerun the commands after it"
            )
    seen[name] = current
    return current


# ---------------------------------------------------------------- stages

def cmd_ingest(cfg: RunConfig) -> dict:
    for label, p in _raw_inputs(cfg).items():
        if not p.exists():
            raise ConfigError(f"{label.split(':')[1]} file not found: {p}")
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)

    bars = parse_market_csv(cfg.market)
    universe = cfg.universe or tuple(sorted({b.ticker for b in bars}))
    uni = set(universe)
    bars = [b for b in bars if b.ticker in uni]
    cal = TradingCalendar.from_bars(bars)
    if not len(cal):
        raise ConfigError(f"{cfg.market}: no bars for the configured universe")
    if not cal.first < cfg.split_date <= cal.last:
        raise ConfigError(f"split date {cfg.split_date} outside data range {cal.first}..{cal.last}")
    train_end = cal.last_on_or_before(cfg.split_date - timedelta(days=1))
    panel = build_feature_panel(bars, cal, train_end, universe)
    panel.save(out / PANEL)

    records = parse_headlines(cfg.headlines)
    matcher = MentionMatcher(universe) if cfg.mention_filter else None
    kept, unmatched, out_of_range = [], 0, 0
    for r in records:
        if matcher is not None and not matcher(r.text):
            unmatched += 1
            continue
        try:
            kept.append(assign_effective_date(r, cal, cfg.exchange_tz))
        except RangeError:
            out_of_range += 1
    kept.sort(key=lambda r: (r.effective_date, r.timestamp, r.text))
    write_headlines(out / HEADLINES, kept)

    raw = {k: sha256_file(p) for k, p in _raw_inputs(cfg).items()}
    params = {"universe": list(universe), "split_date": cfg.split_date.isoformat(),
              "exchange_tz": cfg.exchange_tz, "mention_filter": cfg.mention_filter}
    write_meta(cfg, PANEL, {"input:market": raw["input:market"]}, params)
    write_meta(cfg, HEADLINES, raw, params)
    return {
        "bars": len(bars), "tickers": len(universe), "trading_days": len(cal),
        "train_end": train_end.isoformat(), "headlines_read": len(records),
        "headlines_kept": len(kept), "headlines_unmatched": unmatched,
        "headlines_out_of_range": out_of_range,
    }


def make_provider(cfg: RunConfig):
    pc = cfg.provider
    if pc.mode == "mock":
        return MockProvider(pc.seed)
    if pc.mode == "replay":
        return ReplayProvider(pc.replay_of)
    return LiveProvider.from_env(timeout=pc.timeout, retries=pc.retries)


def cmd_infer_graphs(cfg: RunConfig, provider=None) -> dict:
    out = cfg.output_dir
    inputs = {PANEL: verify_chain(cfg, PANEL), HEADLINES: verify_chain(cfg, HEADLINES)}
    panel = FeaturePanel.load(out / PANEL)
    by_day: dict[date, list[str]] = defaultdict(list)
    for r in parse_headlines(out / HEADLINES):
        by_day[r.effective_date].append(r.text)
    provider = provider or make_provider(cfg)
    cache = ResponseCache(cfg.cache_dir)
    graphs = infer_graph_sequence(
        panel.dates, by_day, panel.tickers, provider, cache,
        batch_size=cfg.provider.batch_size, max_workers=cfg.provider.max_workers,
    )
    write_graphs(out / GRAPHS, graphs)
    write_meta(cfg, GRAPHS, inputs, {"provider": provider.identifier,
                                     "batch_size": cfg.provider.batch_size})
    return {
        "days": len(graphs),
        "days_with_edges": sum(1 for g in graphs if g.edges),
        "edges": sum(len(g.edges) for g in graphs),
        "provider": provider.identifier,
    }


def load_sequence(cfg: RunConfig) -> tuple[FeaturePanel, SequenceData]:
    out = cfg.output_dir
    panel = FeaturePanel.load(out / PANEL)
    graphs = read_graphs(out / GRAPHS, panel.tickers)
    return panel, SequenceData(panel, graphs)


def _windows(cfg: RunConfig, panel: FeaturePanel, data: SequenceData):
    labels = movement_labels(panel, cfg.thresholds)
    windows = make_windows(panel, data.graphs, labels, cfg.model.lookback)
    return split_windows(windows, cfg.split_date)


def cmd_train(cfg: RunConfig) -> dict:
    out = cfg.output_dir
    inputs = {PANEL: verify_chain(cfg, PANEL), GRAPHS: verify_chain(cfg, GRAPHS)}
    panel, data = load_sequence(cfg)
    train_w, test_w = _windows(cfg, panel, data)
    summary = {"train_windows": len(train_w), "test_windows": len(test_w)}
    for name, fn, mcfg in (
        ("gnn_lstm", train, cfg.model),
        ("stock_lstm", stock_lstm_ablation, replace(cfg.model, use_graph=False)),
    ):
        result = fn(train_w, data, cfg.model)
        ckpt = checkpoint_name(name)
        ag.save_checkpoint(out / ckpt, params_to_arrays(result.params))
        _dump_json(out / f"{name}.json", {
            "model": name,
            "config": mcfg.to_json(),
            "seed": mcfg.seed,
            "split_date": cfg.split_date.isoformat(),
            "data_sha256": inputs,
            "param_count": param_count(result.params),
            "train_windows": len(train_w),
            "initial_loss": result.initial_loss,
            "epoch_losses": result.epoch_losses,
        })
        write_meta(cfg, ckpt, inputs, {"config": mcfg.to_json()})
        summary[name] = {"initial_loss": result.initial_loss, "final_loss": result.final_loss,
                         "params": param_count(result.params)}
    return summary


def _load_model(cfg: RunConfig, name: str) -> tuple[dict, ModelConfig]:
    out = cfg.output_dir
    meta = json.loads(_meta_path(out, checkpoint_name(name)).read_text(encoding="utf-8"))
    mcfg = ModelConfig.from_json(meta["params"]["config"])
    return params_from_arrays(ag.load_checkpoint(out / checkpoint_name(name))), mcfg


def cmd_predict(cfg: RunConfig) -> dict:
    out = cfg.output_dir
    inputs = {n: verify_chain(cfg, n) for n in (PANEL, GRAPHS) + tuple(checkpoint_name(m) for m in MODELS)}
    panel, data = load_sequence(cfg)
    _, test_w = _windows(cfg, panel, data)
    truth = {(w.ticker, w.label_date): w.label for w in test_w}
    lines = []
    counts = {}
    for name in MODELS:
        params, mcfg = _load_model(cfg, name)
        preds = predict(test_w, data, params, mcfg)
        counts[name] = len(preds)
        for p in sorted(preds, key=lambda p: (p.date, p.ticker)):
            lines.append({
                "model": name, "ticker": p.ticker, "date": p.date.isoformat(),
                "pred": p.label.display, "true": truth[(p.ticker, p.date)].display,
                "probs": list(p.probs),
            })
    with (out / PREDICTIONS).open("w", encoding="utf-8", newline="\n") as fh:
        for rec in lines:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    write_meta(cfg, PREDICTIONS, inputs)
    return {"predictions": counts}


def read_predictions(path) -> dict[str, list[tuple[Prediction, MovementLabel]]]:
    out: dict[str, list] = defaultdict(list)
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            r = json.loads(line)
            p = Prediction(r["ticker"], date.fromisoformat(r["date"]),
                           MovementLabel.parse(r["pred"]), tuple(r["probs"]))
            out[r["model"]].append((p, MovementLabel.parse(r["true"])))
    return out


def cmd_evaluate(cfg: RunConfig) -> dict:
    out = cfg.output_dir
    inputs = {PREDICTIONS: verify_chain(cfg, PREDICTIONS)}
    preds = read_predictions(out / PREDICTIONS)
    report = {}
    for name, items in sorted(preds.items()):
        report[name] = metrics_report(confusion((t, p.label) for p, t in items))
    any_model = next(iter(sorted(preds)), None)
    if any_model is not None:
        report["majority_baseline"] = metrics_report(
            majority_baseline(t for _, t in preds[any_model])
        )
    _dump_json(out / METRICS, report)
    write_meta(cfg, METRICS, inputs)
    return {k: {m: v[m] for m in ("weighted_f1", "micro_f1", "macro_f1")} for k, v in report.items()}


def _turnover_cost(bps: float):
    rate = bps / 1e4

    def cost(prev, cur):
        names = set(prev) | set(cur)
        return rate * sum(abs(cur.get(t, 0.0) - prev.get(t, 0.0)) for t in names)

    return cost


def cmd_backtest(cfg: RunConfig) -> dict:
    out = cfg.output_dir
    inputs = {PANEL: verify_chain(cfg, PANEL), PREDICTIONS: verify_chain(cfg, PREDICTIONS)}
    panel = FeaturePanel.load(out / PANEL)
    preds = read_predictions(out / PREDICTIONS)
    realized = realized_returns(panel.tickers, panel.dates, panel.closes)
    cost = _turnover_cost(cfg.backtest.cost_bps)
    reports: list[BacktestReport] = []
    summary = {}
    for name in MODELS:
        for strategy in cfg.backtest.strategies:
            weights = weights_from_predictions([p for p, _ in preds.get(name, [])], panel.dates, strategy)
            rep = simulate(weights, realized, name=f"{name}:{strategy}", cost=cost)
            rep.extra = {"model": name, "strategy": strategy, "cost_bps": cfg.backtest.cost_bps}
            fname = backtest_name(name, strategy)
            _dump_json(out / fname, rep.to_json())
            write_meta(cfg, fname, inputs)
            reports.append(rep)
            summary[rep.name] = {
                "cumulative_return": rep.cumulative_return,
                "annualized_volatility": rep.annualized_volatility,
                "sharpe": rep.sharpe,
                "max_drawdown": rep.max_drawdown,
            }
    write_equity_csv(out / EQUITY, reports)
    return summary


def _report_from_json(obj: dict) -> BacktestReport:
    return BacktestReport(
        dates=[date.fromisoformat(d) for d in obj["dates"]],
        daily_returns=np.asarray(obj["daily_returns"], dtype=float),
        equity_curve=np.asarray(obj["equity_curve"], dtype=float),
        cumulative_return=obj["cumulative_return"],
        annualized_volatility=obj["annualized_volatility"],
        sharpe=obj["sharpe"],
        max_drawdown=obj["max_drawdown"],
        name=obj["name"],
    )


def cmd_report(cfg: RunConfig) -> dict:
    out = cfg.output_dir
    names = [backtest_name(m, s) for m in MODELS for s in cfg.backtest.strategies]
    for n in names:
        verify_chain(cfg, n)
    reports = [_report_from_json(json.loads((out / n).read_text(encoding="utf-8"))) for n in names]
    (out / REPORT_SVG).write_text(render_svg(reports, "Cumulative return, test period"), encoding="utf-8")
    rows = ["| strategy | cumulative return | annualized volatility | Sharpe | max drawdown |",
            "|---|---|---|---|---|"]
    for r in reports:
        sharpe = "n/a" if r.sharpe is None else f"{r.sharpe:.3f}"
        rows.append(f"| {r.name} | {r.cumulative_return:.4f} | {r.annualized_volatility:.4f} | "
                    f"{sharpe} | {r.max_drawdown:.4f} |")
    metrics_path = out / METRICS
    if metrics_path.exists():
        metrics = json.loads(metrics_path.read_text(encoding="utf-8"))
        rows += ["", "| model | weighted F1 | micro F1 | macro F1 |", "|---|---|---|---|"]
        for k, v in metrics.items():
            rows.append(f"| {k} | {v['weighted_f1']:.4f} | {v['micro_f1']:.4f} | {v['macro_f1']:.4f} |")
    table = "\n".join(rows) + "\n"
    (out / REPORT_MD).write_text(table, encoding="utf-8")
    return {"svg": str(out / REPORT_SVG), "table": table}


STAGES = (
    ("ingest", cmd_ingest),
    ("infer-graphs", cmd_infer_graphs),
    ("train", cmd_train),
    ("predict", cmd_predict),
    ("evaluate", cmd_evaluate),
    ("backtest", cmd_backtest),
    ("report", cmd_report),
)


def run_all(cfg: RunConfig) -> dict:
    return {name: fn(cfg) for name, fn in STAGES}
