import shutil
from dataclasses import replace
from datetime import date

import numpy as np
import pytest

from newsgraph.config import load_config
from newsgraph.core import TradingCalendar
from newsgraph.graph_infer import AffectedSet, build_daily_graph
from newsgraph.ingest import build_feature_panel, movement_labels
from newsgraph.model import ModelConfig, SequenceData, make_windows
from newsgraph.synthetic import SyntheticSpec, generate, write_fixture


def tiny_instance(n_tickers=5, n_days=12, lookback=3, seed=0, dims=(4, 5, 6), edge_prob=0.5):
    """Small panel + random graphs + windows for gradient and oracle tests."""
    syn = generate(SyntheticSpec(n_tickers=n_tickers, n_days=n_days, seed=seed))
    cal = TradingCalendar.from_bars(syn.bars)
    panel = build_feature_panel(syn.bars, cal, cal.dates[n_days // 2])
    rng = np.random.default_rng(seed + 100)
    graphs = []
    for d in panel.dates:
        members = [t for t in panel.tickers if rng.random() < edge_prob]
        graphs.append(build_daily_graph(AffectedSet(d, tuple((t, "neutral") for t in members)), panel.tickers))
    labels = movement_labels(panel)
    cfg = ModelConfig(seed=seed, lookback=lookback, gnn_dim=dims[0], lstm_dim=dims[1], mlp_hidden=dims[2],
                      epochs=2, batch_size=16)
    windows = make_windows(panel, graphs, labels, lookback)
    return panel, graphs, SequenceData(panel, graphs), windows, cfg


@pytest.fixture
def tiny():
    return tiny_instance()


@pytest.fixture(scope="session")
def fixture_template(tmp_path_factory):
    """The default synthetic fixture, generated once per session."""
    d = tmp_path_factory.mktemp("fixture_template")
    write_fixture(d, SyntheticSpec())
    return d


@pytest.fixture
def fixture_dir(fixture_template, tmp_path):
    d = tmp_path / "fx"
    shutil.copytree(fixture_template, d)
    return d


def quick_config(directory, epochs=1, **model_overrides):
    """Config of a copied fixture with a short training run."""
    cfg = load_config(directory / "config.ini")
    return replace(cfg, model=replace(cfg.model, epochs=epochs, **model_overrides))


def small_fixture(directory, n_tickers=6, n_days=60, seed=3, epochs=1):
    spec = SyntheticSpec(n_tickers=n_tickers, n_days=n_days, seed=seed)
    write_fixture(directory, spec)
    cfg = load_config(directory / "config.ini")
    return replace(cfg, model=replace(cfg.model, epochs=epochs, lookback=5, gnn_dim=4, lstm_dim=6,
                                      mlp_hidden=6, batch_size=32))




def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(RESULTS, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
