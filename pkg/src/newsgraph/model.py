"""GNN + dual-LSTM movement classifier and its stock-only ablation.

Per trading day a mean-aggregation GNN embeds every company using that
day's clique graph. For a window of L+1 consecutive days, one LSTM reads
``[gnn embedding, features]`` per day, a second LSTM reads the raw
features, and an MLP maps both final hidden states to Down/Neutral/Up
logits. The ablation drops the first stream (and the GNN) entirely.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field, replace
from datetime import date
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from . import autograd as ag
from .autograd import Tensor
from .core import MovementLabel, Thresholds
from .errors import ConfigError, ShapeError, TrainingError
from .graph_infer.graph import DailyGraph
from .ingest import FeaturePanel

log = logging.getLogger(__name__)

N_CLASSES = 3


@dataclass(frozen=True)
class ModelConfig:
    seed: int
    lookback: int = 20
    gnn_dim: int = 32
    lstm_dim: int = 64
    mlp_hidden: int = 64
    gnn_layers: int = 1
    epochs: int = 30
    lr: float = 1e-3
    batch_size: int = 128
    thresholds: Thresholds = field(default_factory=Thresholds)
    use_graph: bool = True

    def __post_init__(self):
        for name in ("gnn_dim", "lstm_dim", "mlp_hidden", "gnn_layers", "batch_size"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.lookback < 2:
            raise ConfigError("lookback must be >= 2")
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")

    def to_json(self) -> dict:
        d = asdict(self)
        d["thresholds"] = {"r_up": self.thresholds.r_up, "r_down": self.thresholds.r_down}
        return d

    @classmethod
    def from_json(cls, d: dict) -> "ModelConfig":
        d = dict(d)
        th = d.pop("thresholds", None)
        if th is not None:
            d["thresholds"] = Thresholds(**th)
        return cls(**d)


@dataclass(frozen=True)
class Window:
    """L+1 consecutive trading days of one company plus the next-day label."""

    ticker: str
    ticker_index: int
    start: int
    dates: tuple[date, ...]
    label: MovementLabel
    label_date: date


@dataclass(frozen=True)
class Prediction:
    ticker: str
    date: date
    label: MovementLabel
    probs: tuple[float, float, float]


class SequenceData:
    """Day-major view of a panel plus its graph sequence, ready for batching.

    ``features`` is [T*N, F] with row ``t*N + i`` for ticker i on day t;
    ``adjacency`` is the matching block-diagonal mean-aggregation matrix.
    """

    def __init__(self, panel: FeaturePanel, graphs: Sequence[DailyGraph]):
        if len(graphs) != len(panel.dates):
            raise ShapeError(f"{len(graphs)} graphs for {len(panel.dates)} panel dates")
        for g, d in zip(graphs, panel.dates):
            if g.date != d:
                raise ShapeError(f"graph dated {g.date} where panel has {d}")
            if tuple(g.nodes) != tuple(panel.tickers):
                raise ShapeError(f"graph {g.date} nodes do not match panel tickers")
        self.tickers = tuple(panel.tickers)
        self.dates = tuple(panel.dates)
        self.n_tickers = len(self.tickers)
        self.n_days = len(self.dates)
        self.n_features = panel.values.shape[2]
        self.features = np.ascontiguousarray(
            panel.values.transpose(1, 0, 2).reshape(self.n_days * self.n_tickers, self.n_features)
        )
        self.graphs = list(graphs)
        self.adjacency = sp.block_diag([g.mean_adjacency() for g in graphs], format="csr")

    def rows(self, ticker_idx, start_idx, length: int) -> np.ndarray:
        """Row indices [length, B] into ``features`` for a batch of windows."""
        ticker_idx = np.asarray(ticker_idx, dtype=np.int64)
        start_idx = np.asarray(start_idx, dtype=np.int64)
        offs = np.arange(length, dtype=np.int64)[:, None]
        return (start_idx[None, :] + offs) * self.n_tickers + ticker_idx[None, :]


# ---------------------------------------------------------------- parameters

def _xavier(rng: np.random.Generator, fan_in: int, fan_out: int) -> Tensor:
    lim = math.sqrt(6.0 / (fan_in + fan_out))
    return Tensor(rng.uniform(-lim, lim, size=(fan_in, fan_out)), requires_grad=True)


def _zeros(*shape) -> Tensor:
    return Tensor(np.zeros(shape), requires_grad=True)


def init_params(config: ModelConfig, n_features: int) -> dict[str, Tensor]:
    rng = np.random.default_rng([config.seed, 0])
    F, G, H, M = n_features, config.gnn_dim, config.lstm_dim, config.mlp_hidden
    p: dict[str, Tensor] = {}
    if config.use_graph:
        d_in = F
        for layer in range(config.gnn_layers):
            p[f"gnn.{layer}.w_self"] = _xavier(rng, d_in, G)
            p[f"gnn.{layer}.w_neigh"] = _xavier(rng, d_in, G)
            p[f"gnn.{layer}.b"] = _zeros(G)
            d_in = G
        p["lstm1.wx"] = _xavier(rng, G + F, 4 * H)
        p["lstm1.wh"] = _xavier(rng, H, 4 * H)
        p["lstm1.b"] = _zeros(4 * H)
    p["lstm2.wx"] = _xavier(rng, F, 4 * H)
    p["lstm2.wh"] = _xavier(rng, H, 4 * H)
    p["lstm2.b"] = _zeros(4 * H)
    head_in = 2 * H if config.use_graph else H
    p["mlp.w1"] = _xavier(rng, head_in, M)
    p["mlp.b1"] = _zeros(M)
    p["mlp.w2"] = _xavier(rng, M, N_CLASSES)
    p["mlp.b2"] = _zeros(N_CLASSES)
    return p


def param_count(params: dict[str, Tensor]) -> int:
    return int(sum(t.size for t in params.values()))


def check_params(params: dict[str, Tensor], config: ModelConfig, n_features: int) -> None:
    ref = init_params(replace(config, seed=0), n_features)
    if set(ref) != set(params):
        raise ShapeError(f"parameter names {sorted(params)} do not match config {sorted(ref)}")
    for k, t in ref.items():
        if params[k].shape != t.shape:
            raise ShapeError(f"parameter {k} has shape {params[k].shape}, config expects {t.shape}")


def params_to_arrays(params: dict[str, Tensor]) -> dict[str, np.ndarray]:
    return {k: v.data for k, v in params.items()}


def params_from_arrays(arrays: dict[str, np.ndarray]) -> dict[str, Tensor]:
    return {k: Tensor(v, requires_grad=True) for k, v in arrays.items()}


def _constant(params: dict[str, Tensor]) -> dict[str, Tensor]:
    return {k: Tensor(v.data) for k, v in params.items()}


# ---------------------------------------------------------------- forward pass

def _gnn(h: Tensor, adjacency, params: dict[str, Tensor], layers: int) -> Tensor:
    for layer in range(layers):
        m = ag.sparse_matmul(adjacency, h)
        h = ag.tanh(
            ag.add(
                ag.add(ag.matmul(h, params[f"gnn.{layer}.w_self"]),
                       ag.matmul(m, params[f"gnn.{layer}.w_neigh"])),
                params[f"gnn.{layer}.b"],
            )
        )
    return h


def gnn_forward(features, graph: DailyGraph, params: dict[str, Tensor], config: ModelConfig) -> Tensor:
    """Embeddings [N, gnn_dim] for one day; ``features`` is [N, F] in graph node order."""
    h = features if isinstance(features, Tensor) else Tensor(features)
    if h.ndim != 2 or h.shape[0] != len(graph.nodes):
        raise ShapeError(f"features shape {h.shape} does not fit {len(graph.nodes)} graph nodes")
    w = params["gnn.0.w_self"]
    if h.shape[1] != w.shape[0]:
        raise ShapeError(f"feature width {h.shape[1]} != GNN input width {w.shape[0]}")
    return _gnn(h, graph.mean_adjacency(), params, config.gnn_layers)


def forward_batch(
    data: SequenceData,
    params: dict[str, Tensor],
    config: ModelConfig,
    ticker_idx,
    start_idx,
) -> Tensor:
    """Logits [B, 3] for windows given by (ticker index, start day index)."""
    length = config.lookback + 1
    start_idx = np.asarray(start_idx, dtype=np.int64)
    if start_idx.size and (start_idx.min() < 0 or start_idx.max() + length > data.n_days):
        raise ShapeError("window extends beyond the available days")
    rows = data.rows(ticker_idx, start_idx, length)
    s_all = Tensor(data.features)
    x_stock = ag.take(s_all, rows)
    h_stock = ag.lstm(x_stock, params["lstm2.wx"], params["lstm2.wh"], params["lstm2.b"])
    if config.use_graph:
        # only days touched by the batch; the GNN is local to each day
        days = np.unique(rows // data.n_tickers)
        sel = (days[:, None] * data.n_tickers + np.arange(data.n_tickers)[None, :]).reshape(-1)
        remap = np.full(data.n_days * data.n_tickers, -1, dtype=np.int64)
        remap[sel] = np.arange(sel.size)
        s_sel = Tensor(data.features[sel])
        adj = data.adjacency[sel][:, sel]
        h_gnn = _gnn(s_sel, adj, params, config.gnn_layers)
        comb = ag.concat([h_gnn, s_sel], axis=1)
        x_comb = ag.take(comb, remap[rows])
        h_comb = ag.lstm(x_comb, params["lstm1.wx"], params["lstm1.wh"], params["lstm1.b"])
        z = ag.concat([h_comb, h_stock], axis=1)
    else:
        z = h_stock
    hidden = ag.relu(ag.add(ag.matmul(z, params["mlp.w1"]), params["mlp.b1"]))
    return ag.add(ag.matmul(hidden, params["mlp.w2"]), params["mlp.b2"])


def forward(window: Window, data: SequenceData, params: dict[str, Tensor], config: ModelConfig) -> Tensor:
    if len(window.dates) != config.lookback + 1:
        raise ShapeError(f"window has {len(window.dates)} days, expected {config.lookback + 1}")
    return forward_batch(data, params, config, [window.ticker_index], [window.start])[0]


# ---------------------------------------------------------------- windows

def make_windows(
    panel: FeaturePanel,
    graphs: Sequence[DailyGraph],
    labels: np.ndarray,
    lookback: int,
) -> list[Window]:
    """Every (ticker, start) whose L+1 days and next-day label lie in range.

    Windows whose label is undefined (imputed label-day bar) are skipped.
    """
    T = len(panel.dates)
    length = lookback + 1
    if length + 1 > T:
        raise ConfigError(f"lookback {lookback} needs at least {length + 1} dates, have {T}")
    if len(graphs) != T or any(g.date != d for g, d in zip(graphs, panel.dates)):
        raise ConfigError("graph sequence does not share the panel calendar")
    if labels.shape != (len(panel.tickers), T):
        raise ConfigError(f"labels shape {labels.shape} does not match panel")
    out = []
    for i, tk in enumerate(panel.tickers):
        for s in range(T - length):
            y = int(labels[i, s + length])
            if y < 0:
                continue
            out.append(Window(
                ticker=tk,
                ticker_index=i,
                start=s,
                dates=tuple(panel.dates[s:s + length]),
                label=MovementLabel(y),
                label_date=panel.dates[s + length],
            ))
    return out


def split_windows(windows: Sequence[Window], split_date: date) -> tuple[list[Window], list[Window]]:
    """Train: label date before ``split_date``; test: on or after it.

    Test windows may still reach back into pre-split days for features.
    """
    train = [w for w in windows if w.label_date < split_date]
    test = [w for w in windows if w.label_date >= split_date]
    return train, test


def _arrays(windows: Sequence[Window]):
    ti = np.array([w.ticker_index for w in windows], dtype=np.int64)
    st = np.array([w.start for w in windows], dtype=np.int64)
    y = np.array([int(w.label) for w in windows], dtype=np.int64)
    return ti, st, y


# ---------------------------------------------------------------- training

@dataclass
class TrainResult:
    params: dict[str, Tensor]
    initial_loss: float
    epoch_losses: list[float]

    @property
    def final_loss(self) -> float:
        return self.epoch_losses[-1] if self.epoch_losses else self.initial_loss


def dataset_loss(windows, data, params, config, chunk: int = 1024) -> float:
    ti, st, y = _arrays(windows)
    fixed = _constant(params)
    total = 0.0
    for lo in range(0, len(y), chunk):
        logits = forward_batch(data, fixed, config, ti[lo:lo + chunk], st[lo:lo + chunk])
        total += float(ag.cross_entropy(logits, y[lo:lo + chunk]).data) * len(y[lo:lo + chunk])
    return total / len(y)


def train(windows: Sequence[Window], data: SequenceData, config: ModelConfig) -> TrainResult:
    """Minimize mean cross-entropy with Adam over seeded mini-batches."""
    if not windows:
        raise ConfigError("no training windows")
    params = init_params(config, data.n_features)
    ti, st, y = _arrays(windows)
    initial = dataset_loss(windows, data, params, config)
    opt = ag.Adam(list(params.values()), lr=config.lr)
    rng = np.random.default_rng([config.seed, 1])
    losses: list[float] = []
    for epoch in range(config.epochs):
        order = rng.permutation(len(y))
        running = 0.0
        for lo in range(0, len(y), config.batch_size):
            b = order[lo:lo + config.batch_size]
            opt.zero_grad()
            logits = forward_batch(data, params, config, ti[b], st[b])
            loss = ag.cross_entropy(logits, y[b])
            value = float(loss.data)
            if not math.isfinite(value):
                raise TrainingError(
                    f"non-finite loss {value} at epoch {epoch}, batch starting {lo}; "
                    f"max |logit| {np.nanmax(np.abs(logits.data)):.3g}"
                )
            ag.backward(loss)
            opt.step()
            running += value * len(b)
        losses.append(running / len(y))
        log.info("epoch %d/%d loss %.5f", epoch + 1, config.epochs, losses[-1])
    return TrainResult(params=params, initial_loss=initial, epoch_losses=losses)


def stock_lstm_ablation(windows: Sequence[Window], data: SequenceData, config: ModelConfig) -> TrainResult:
    """Same training loop with the graph stream removed."""
    return train(windows, data, replace(config, use_graph=False))


# ---------------------------------------------------------------- inference

def softmax_rows(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def predict(
    windows: Sequence[Window],
    data: SequenceData,
    params: dict[str, Tensor],
    config: ModelConfig,
    chunk: int = 1024,
) -> list[Prediction]:
    """Argmax class per window (ties go to the lowest class index)."""
    check_params(params, config, data.n_features)
    if not windows:
        return []
    ti, st, _ = _arrays(windows)
    fixed = _constant(params)
    probs = []
    for lo in range(0, len(ti), chunk):
        logits = forward_batch(data, fixed, config, ti[lo:lo + chunk], st[lo:lo + chunk]).data
        probs.append(softmax_rows(logits))
    p = np.concatenate(probs, axis=0)
    cls = np.argmax(p, axis=1)
    return [
        Prediction(w.ticker, w.label_date, MovementLabel(int(c)), tuple(float(v) for v in row))
        for w, c, row in zip(windows, cls, p)
    ]
