import json
import re
from dataclasses import replace
from datetime import date

import pytest

from newsgraph import pipeline
from newsgraph.cli import main
from newsgraph.config import load_config
from newsgraph.errors import CacheMissError, ConfigError, StaleArtifactError

from conftest import small_fixture

SMALL_MODEL = {"epochs": 1, "lookback": 5, "gnn_dim": 4, "lstm_dim": 6, "mlp_hidden": 6, "batch_size": 32}


def shrink_ini(directory, **extra):
    """Rewrite the fixture config so a CLI run finishes in seconds."""
    path = directory / "config.ini"
    text = path.read_text(encoding="utf-8")
    for key, value in {**SMALL_MODEL, **extra}.items():
        text = re.sub(rf"(?m)^{key} = .*$", f"{key} = {value}", text)
    path.write_text(text, encoding="utf-8")
    return path


def gen_small(directory, days=60):
    assert main(["gen-synthetic", str(directory), "--tickers", "6", "--days", str(days), "--seed", "3"]) == 0
    return shrink_ini(directory)


def artifact_bytes(out):
    return {p.name: p.read_bytes() for p in sorted(out.iterdir()) if p.is_file()}


def test_gen_synthetic_is_deterministic(tmp_path, capsys):
    gen_small(tmp_path / "a")
    gen_small(tmp_path / "b")
    for name in ("market.csv", "headlines.jsonl", "config.ini"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_missing_market_file_names_path(tmp_path, capsys):
    ini = gen_small(tmp_path)
    (tmp_path / "market.csv").unlink()
    capsys.readouterr()
    assert main(["ingest", "-c", str(ini)]) == 2
    err = capsys.readouterr().err
    assert str(tmp_path / "market.csv") in err


def test_missing_config_file(tmp_path, capsys):
    assert main(["run", "-c", str(tmp_path / "nope.ini")]) == 2
    assert "nope.ini" in capsys.readouterr().err


def test_split_outside_range_rejected(tmp_path, capsys):
    ini = gen_small(tmp_path)
    assert main(["ingest", "-c", str(ini), "--split-date", "1999-01-04"]) == 2
    assert "split date" in capsys.readouterr().err


def test_full_run_and_idempotent_rerun(tmp_path, capsys):
    ini = gen_small(tmp_path)
    assert main(["run", "-c", str(ini)]) == 0
    out = tmp_path / "out"
    first = artifact_bytes(out)
    for name in ("panel.json", "graphs.jsonl", "gnn_lstm.ckpt", "stock_lstm.ckpt", "predictions.jsonl",
                 "metrics.json", "backtest_gnn_lstm_long_only.json", "backtest_stock_lstm_long_short.json",
                 "equity.csv", "report.svg", "summary.md"):
        assert name in first
    assert main(["run", "-c", str(ini)]) == 0
    assert artifact_bytes(out) == first

    rec = json.loads((out / "predictions.jsonl").read_text().splitlines()[0])
    assert set(rec) == {"model", "ticker", "date", "pred", "true", "probs"}
    assert date.fromisoformat(rec["date"]) >= load_config(ini).split_date
    svg = (out / "report.svg").read_text()
    assert svg.count("<polyline") == 4
    metrics = json.loads((out / "metrics.json").read_text())
    assert set(metrics) == {"gnn_lstm", "stock_lstm", "majority_baseline"}


@pytest.fixture
def built(tmp_path):
    cfg = small_fixture(tmp_path)
    pipeline.run_all(cfg)
    return cfg


def test_stale_chain_refused(built, capsys):
    cfg = built
    with cfg.market.open("a", encoding="utf-8") as fh:
        fh.write("\n")
    with pytest.raises(StaleArtifactError, match="rerun ingest"):
        pipeline.cmd_train(cfg)


def test_modified_artifact_refused(built):
    cfg = built
    path = cfg.output_dir / "graphs.jsonl"
    path.write_text(path.read_text() + "\n")
    with pytest.raises(StaleArtifactError, match="modified"):
        pipeline.cmd_predict(cfg)


def test_upstream_rebuild_invalidates_downstream(built):
    cfg = built
    pipeline.cmd_train(replace(cfg, model=replace(cfg.model, seed=cfg.model.seed + 1)))
    with pytest.raises(StaleArtifactError, match="older"):
        pipeline.cmd_evaluate(cfg)


def test_cli_reports_stale_chain(built, capsys):
    (built.output_dir / "predictions.jsonl").unlink()
    ini = built.source
    # the shrunken model lives only in the RunConfig; evaluate needs nothing from it
    assert main(["evaluate", "-c", str(ini)]) == 2
    assert "missing artifact" in capsys.readouterr().err


def test_perfect_predictions_score_one(built):
    cfg = built
    out = cfg.output_dir
    path = out / pipeline.PREDICTIONS
    recs = [json.loads(line) for line in path.read_text().splitlines()]
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        for r in recs:
            fh.write(json.dumps({**r, "pred": r["true"]}, sort_keys=True) + "\n")
    meta = json.loads((out / f"{pipeline.PREDICTIONS}.meta.json").read_text())
    pipeline.write_meta(cfg, pipeline.PREDICTIONS, meta["inputs"])
    pipeline.cmd_evaluate(cfg)
    metrics = json.loads((out / pipeline.METRICS).read_text())
    for name in pipeline.MODELS:
        assert (metrics[name]["weighted_f1"], metrics[name]["micro_f1"], metrics[name]["macro_f1"]) == (1.0, 1.0, 1.0)


def test_replay_miss_exits_3(tmp_path, capsys):
    ini = gen_small(tmp_path)
    assert main(["ingest", "-c", str(ini)]) == 0
    capsys.readouterr()
    assert main(["infer-graphs", "-c", str(ini), "--provider-mode", "replay"]) == 3
    err = capsys.readouterr().err
    assert "missing: " in err


def test_replay_after_mock_run(tmp_path):
    cfg = small_fixture(tmp_path)
    pipeline.cmd_ingest(cfg)
    pipeline.cmd_infer_graphs(cfg)
    mock_graphs = (cfg.output_dir / pipeline.GRAPHS).read_bytes()
    replay = cfg.with_overrides(provider_mode="replay")
    summary = pipeline.cmd_infer_graphs(replay)
    assert summary["provider"] == f"mock:{cfg.provider.seed}"
    assert (cfg.output_dir / pipeline.GRAPHS).read_bytes() == mock_graphs


def test_config_overrides(tmp_path):
    cfg = small_fixture(tmp_path)
    o = cfg.with_overrides(split_date="2020-10-01", seed=9, provider_mode="replay")
    assert o.split_date == date(2020, 10, 1) and o.model.seed == 9 and o.provider.mode == "replay"
    with pytest.raises(ConfigError):
        cfg.with_overrides(provider_mode="offline")
    with pytest.raises(ConfigError):
        cfg.with_overrides(split_date="10/01/2020")


def test_bad_config_value(tmp_path):
    ini = gen_small(tmp_path)
    ini.write_text(ini.read_text().replace("lookback = 5", "lookback = 1"))
    with pytest.raises(ConfigError):
        load_config(ini)


def test_cache_miss_error_carries_dates(tmp_path):
    cfg = small_fixture(tmp_path).with_overrides(provider_mode="replay")
    pipeline.cmd_ingest(cfg)
    with pytest.raises(CacheMissError) as info:
        pipeline.cmd_infer_graphs(cfg)
    assert info.value.dates
