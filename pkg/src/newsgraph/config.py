"""Run configuration: one INI file, secrets only from the environment."""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace
from datetime import date
from pathlib import Path

from .core import Thresholds, validate_ticker
from .errors import ConfigError
from .model import ModelConfig

PROVIDER_MODES = ("live", "replay", "mock")


@dataclass(frozen=True)
class ProviderConfig:
    mode: str = "mock"
    seed: int = 0
    replay_of: str = ""
    batch_size: int = 200
    max_workers: int = 4
    timeout: float = 60.0
    retries: int = 3


@dataclass(frozen=True)
class BacktestConfig:
    long_only: bool = True
    long_short: bool = True
    cost_bps: float = 0.0

    @property
    def strategies(self) -> tuple[str, ...]:
        return tuple(s for s, on in (("long_only", self.long_only), ("long_short", self.long_short)) if on)


@dataclass(frozen=True)
class RunConfig:
    market: Path
    headlines: Path
    cache_dir: Path
    output_dir: Path
    split_date: date
    model: ModelConfig
    universe: tuple[str, ...] = ()
    exchange_tz: str = "America/New_York"
    mention_filter: bool = True
    provider: ProviderConfig = field(default_factory=ProviderConfig)
    backtest: BacktestConfig = field(default_factory=BacktestConfig)
    source: Path | None = None

    @property
    def thresholds(self) -> Thresholds:
        return self.model.thresholds

    def with_overrides(self, split_date=None, seed=None, provider_mode=None) -> "RunConfig":
        cfg = self
        if split_date is not None:
            cfg = replace(cfg, split_date=_parse_date(split_date, "split_date"))
        if seed is not None:
            cfg = replace(cfg, model=replace(cfg.model, seed=int(seed)))
        if provider_mode is not None:
            if provider_mode not in PROVIDER_MODES:
                raise ConfigError(f"provider mode must be one of {PROVIDER_MODES}")
            cfg = replace(cfg, provider=replace(cfg.provider, mode=provider_mode))
        return cfg


def _parse_date(value, key: str) -> date:
    if isinstance(value, date):
        return value
    try:
        return date.fromisoformat(str(value).strip())
    except ValueError:
        raise ConfigError(f"{key}: expected ISO date, got {value!r}") from None


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    cp.read(path, encoding="utf-8")
    base = path.resolve().parent

    def get(section, key, fallback=None):
        if cp.has_option(section, key):
            return cp.get(section, key)
        if fallback is None:
            raise ConfigError(f"{path}: missing [{section}] {key}")
        return fallback

    def p(key):
        v = Path(get("paths", key))
        return v if v.is_absolute() else base / v

    try:
        universe_raw = get("data", "universe", "")
        universe = tuple(validate_ticker(t.strip()) for t in universe_raw.split(",") if t.strip())
        thresholds = Thresholds(
            r_up=float(get("thresholds", "r_up", "0.01")),
            r_down=float(get("thresholds", "r_down", "-0.01")),
        )
        m = "model"
        model = ModelConfig(
            seed=int(get(m, "seed")),
            lookback=int(get(m, "lookback", "20")),
            gnn_dim=int(get(m, "gnn_dim", "32")),
            lstm_dim=int(get(m, "lstm_dim", "64")),
            mlp_hidden=int(get(m, "mlp_hidden", "64")),
            gnn_layers=int(get(m, "gnn_layers", "1")),
            epochs=int(get(m, "epochs", "30")),
            lr=float(get(m, "lr", "0.001")),
            batch_size=int(get(m, "batch_size", "128")),
            thresholds=thresholds,
        )
        mode = get("provider", "mode", "mock").strip()
        if mode not in PROVIDER_MODES:
            raise ConfigError(f"provider mode must be one of {PROVIDER_MODES}, got {mode!r}")
        provider = ProviderConfig(
            mode=mode,
            seed=int(get("provider", "seed", "0")),
            replay_of=get("provider", "replay_of", "").strip(),
            batch_size=int(get("provider", "batch_size", "200")),
            max_workers=int(get("provider", "max_workers", "4")),
            timeout=float(get("provider", "timeout", "60")),
            retries=int(get("provider", "retries", "3")),
        )
        backtest = BacktestConfig(
            long_only=cp.getboolean("backtest", "long_only", fallback=True),
            long_short=cp.getboolean("backtest", "long_short", fallback=True),
            cost_bps=float(get("backtest", "cost_bps", "0")),
        )
        return RunConfig(
            market=p("market"),
            headlines=p("headlines"),
            cache_dir=p("cache_dir"),
            output_dir=p("output_dir"),
            split_date=_parse_date(get("data", "split_date"), "split_date"),
            model=model,
            universe=universe,
            exchange_tz=get("data", "exchange_tz", "America/New_York").strip(),
            mention_filter=cp.getboolean("data", "mention_filter", fallback=True),
            provider=provider,
            backtest=backtest,
            source=path,
        )
    except (ValueError, configparser.Error) as exc:
        raise ConfigError(f"{path}: {exc}") from None
