"""``newsgraph`` command-line entry point."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import pipeline
from .config import PROVIDER_MODES, load_config
from .errors import CacheMissError, NewsGraphError
from .synthetic import SyntheticSpec, write_fixture


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("-c", "--config", required=True, help="run configuration (INI)")
    p.add_argument("--split-date", help="override [data] split_date (first test date)")
    p.add_argument("--seed", type=int, help="override [model] seed")
    p.add_argument("--provider-mode", choices=PROVIDER_MODES, help="override [provider] mode")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="newsgraph",
        description="News-inferred company graphs + GNN/LSTM stock movement forecasting.",
    )
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, _ in pipeline.STAGES:
        _add_common(sub.add_parser(name, help=f"run the {name} stage"))
    _add_common(sub.add_parser("run", help="run every stage in order"))

    g = sub.add_parser("gen-synthetic", help="write a synthetic fixture with a planted graph signal")
    g.add_argument("out_dir")
    g.add_argument("--tickers", type=int, default=30)
    g.add_argument("--days", type=int, default=300)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--missing-rate", type=float, default=0.0)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.command == "gen-synthetic":
            spec = SyntheticSpec(n_tickers=args.tickers, n_days=args.days, seed=args.seed,
                                 missing_rate=args.missing_rate)
            data = write_fixture(args.out_dir, spec)
            result = {"out_dir": args.out_dir, "bars": len(data.bars),
                      "headlines": len(data.headlines), "split_date": data.split_date.isoformat()}
        else:
            cfg = load_config(args.config).with_overrides(
                split_date=args.split_date, seed=args.seed, provider_mode=args.provider_mode
            )
            if args.command == "run":
                result = pipeline.run_all(cfg)
            else:
                result = dict(pipeline.STAGES)[args.command](cfg)
    except CacheMissError as exc:
        print(f"error: {exc}", file=sys.stderr)
        for d in exc.dates:
            print(f"missing: {d.isoformat()}", file=sys.stderr)
        return 3
    except (NewsGraphError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.command == "report":
        print(result["table"], end="")
    else:
        print(json.dumps(result, indent=2, sort_keys=True, default=str))
    return 0


if __name__ == "__main__":
    sys.exit(main())
