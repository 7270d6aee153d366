"""Daily clique graphs and their line-delimited JSON export."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import date
from itertools import combinations
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from ..errors import DomainError, SchemaError


@dataclass(frozen=True)
class AffectedSet:
    date: date
    entries: tuple[tuple[str, str], ...]
    raw_response: str = ""

    @property
    def tickers(self) -> tuple[str, ...]:
        return tuple(t for t, _ in self.entries)


@dataclass(frozen=True)
class DailyGraph:
    date: date
    nodes: tuple[str, ...]
    edges: frozenset[tuple[str, str]]
    sentiments: Mapping[str, str] = field(default_factory=dict)

    @property
    def affected(self) -> tuple[str, ...]:
        """Affected tickers in universe order."""
        return tuple(t for t in self.nodes if t in self.sentiments)

    def neighbors(self) -> dict[str, set[str]]:
        nb: dict[str, set[str]] = {t: set() for t in self.nodes}
        for a, b in self.edges:
            nb[a].add(b)
            nb[b].add(a)
        return nb

    def sorted_edges(self) -> list[tuple[str, str]]:
        pos = {t: i for i, t in enumerate(self.nodes)}
        return sorted(self.edges, key=lambda e: (pos[e[0]], pos[e[1]]))

    def mean_adjacency(self) -> sp.csr_matrix:
        """Row-normalized adjacency; isolated nodes get an all-zero row."""
        n = len(self.nodes)
        pos = {t: i for i, t in enumerate(self.nodes)}
        rows, cols = [], []
        for a, b in self.edges:
            rows += [pos[a], pos[b]]
            cols += [pos[b], pos[a]]
        a = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
        deg = np.asarray(a.sum(axis=1)).ravel()
        inv = np.divide(1.0, deg, out=np.zeros(n), where=deg > 0)
        return sp.diags(inv) @ a

    def to_json(self) -> dict:
        return {
            "date": self.date.isoformat(),
            "affected": list(self.affected),
            "sentiments": {t: self.sentiments[t] for t in self.affected},
            "edges": [list(e) for e in self.sorted_edges()],
        }

    @classmethod
    def from_json(cls, obj: dict, universe: Sequence[str]) -> "DailyGraph":
        try:
            d = date.fromisoformat(obj["date"])
            edges = frozenset(tuple(e) for e in obj["edges"])
            sentiments = dict(obj["sentiments"])
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"bad graph record: {exc}") from None
        g = cls(date=d, nodes=tuple(universe), edges=edges, sentiments=sentiments)
        for a, b in edges:
            if a not in g.nodes or b not in g.nodes:
                raise SchemaError(f"graph {d}: edge {a}-{b} leaves the universe")
        return g


def empty_graph(day: date, universe: Sequence[str]) -> DailyGraph:
    return DailyGraph(date=day, nodes=tuple(universe), edges=frozenset(), sentiments={})


def build_daily_graph(affected: AffectedSet, universe: Sequence[str]) -> DailyGraph:
    """Connect every pair of affected tickers; everyone else stays isolated."""
    pos = {t: i for i, t in enumerate(universe)}
    sentiments: dict[str, str] = {}
    for t, s in affected.entries:
        if t not in pos:
            raise DomainError(f"affected ticker {t} is not in the universe")
        sentiments.setdefault(t, s)
    members = sorted(sentiments, key=pos.__getitem__)
    edges = frozenset(combinations(members, 2))
    return DailyGraph(date=affected.date, nodes=tuple(universe), edges=edges, sentiments=sentiments)


def write_graphs(path, graphs: Iterable[DailyGraph]) -> None:
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        for g in graphs:
            fh.write(json.dumps(g.to_json(), sort_keys=True) + "\n")


def read_graphs(path, universe: Sequence[str]) -> list[DailyGraph]:
    out = []
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"{path}:{lineno}: {exc.msg}") from None
            out.append(DailyGraph.from_json(obj, universe))
    return out
