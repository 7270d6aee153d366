"""Provider queries with caching, and the per-day graph sequence."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from datetime import date
from typing import Mapping, Sequence

from ..errors import CacheMissError
from .cache import ResponseCache, cache_key
from .graph import AffectedSet, DailyGraph, build_daily_graph, empty_graph
from .parse import parse_affected
from .prompt import PromptRequest, build_prompt
from .providers import Provider

log = logging.getLogger(__name__)

MIN_EXPECTED_AFFECTED = 5


def query_provider(req: PromptRequest, provider: Provider, cache: ResponseCache) -> AffectedSet:
    key = cache_key(req.prompt_text, provider.identifier)
    hit = cache.get(key)
    if hit is not None:
        raw = hit["raw_response"]
    elif provider.replay_only:
        raise CacheMissError(
            f"no cached response for {req.date} under provider {provider.identifier}", [req.date]
        )
    else:
        raw = provider.complete(req.prompt_text)
        cache.put(key, req.prompt_text, raw, provider.identifier)
    entries = parse_affected(raw, req.universe)
    if len(entries) < MIN_EXPECTED_AFFECTED:
        log.info("%s: %d affected companies (prompt asks for at least %d)",
                 req.date, len(entries), MIN_EXPECTED_AFFECTED)
    return AffectedSet(date=req.date, entries=tuple(entries), raw_response=raw)


def _batches(items: Sequence[str], size: int):
    for i in range(0, len(items), size):
        yield items[i:i + size]


def infer_day(
    day: date,
    headlines: Sequence[str],
    universe: Sequence[str],
    provider: Provider,
    cache: ResponseCache,
    batch_size: int = 200,
) -> DailyGraph:
    """Graph for one day; headline batches are unioned before the clique is built."""
    if not headlines:
        return empty_graph(day, universe)
    entries: list[tuple[str, str]] = []
    seen: set[str] = set()
    raws = []
    for chunk in _batches(list(headlines), max(1, int(batch_size))):
        aff = query_provider(build_prompt(day, chunk, universe), provider, cache)
        raws.append(aff.raw_response)
        for t, s in aff.entries:
            if t not in seen:
                seen.add(t)
                entries.append((t, s))
    merged = AffectedSet(date=day, entries=tuple(entries), raw_response="\n".join(raws))
    return build_daily_graph(merged, universe)


def infer_graph_sequence(
    days: Sequence[date],
    headlines_by_day: Mapping[date, Sequence[str]],
    universe: Sequence[str],
    provider: Provider,
    cache: ResponseCache,
    batch_size: int = 200,
    max_workers: int = 4,
) -> list[DailyGraph]:
    """One graph per day in ``days``; days without headlines get an empty graph.

    In replay mode every missing day is collected before raising, so the
    error lists all of them at once.
    """
    def one(day):
        try:
            return infer_day(day, headlines_by_day.get(day, ()), universe, provider, cache, batch_size)
        except CacheMissError as exc:
            return exc

    workers = max(1, int(max_workers))
    if workers == 1:
        results = [one(d) for d in days]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, days))
    missing = [d for d, r in zip(days, results) if isinstance(r, CacheMissError)]
    if missing:
        shown = ", ".join(d.isoformat() for d in missing[:10])
        more = f" (+{len(missing) - 10} more)" if len(missing) > 10 else ""
        raise CacheMissError(f"replay cache is missing {len(missing)} day(s): {shown}{more}", missing)
    return results
