"""Extraction of the "Affected Companies" block from free-form responses."""

from __future__ import annotations

import json
import logging
import re
from typing import Mapping, Sequence

from ..errors import ParseError
from ..ingest import DOW30_NAMES

log = logging.getLogger(__name__)

KEY = "Affected Companies"
SENTIMENTS = ("positive", "negative", "neutral")

_QUOTES = str.maketrans({"“": '"', "”": '"', "‘": "'", "’": "'"})
_SUFFIX_RE = re.compile(
    r"\b(inc|incorporated|corp|corporation|co|company|companies|plc|ltd|the|group|holdings)\b\.?"
)


def _norm_name(s: str) -> str:
    s = s.lower().replace("&", " and ")
    s = _SUFFIX_RE.sub(" ", s)
    s = re.sub(r"[^a-z0-9 ]+", " ", s)
    return " ".join(s.split())


def name_table(universe: Sequence[str], names: Mapping[str, Sequence[str]] | None = None) -> dict:
    names = DOW30_NAMES if names is None else names
    table = {}
    for t in universe:
        for n in names.get(t, ()):
            table.setdefault(_norm_name(n), t)
    return table


def _find_block(raw: str):
    text = raw.translate(_QUOTES)
    dec = json.JSONDecoder()
    for m in re.finditer(r"\{", text):
        try:
            obj, _ = dec.raw_decode(text, m.start())
        except json.JSONDecodeError:
            continue
        if isinstance(obj, dict) and KEY in obj:
            return obj[KEY]
    return None


def parse_affected(
    raw: str,
    universe: Sequence[str],
    names: Mapping[str, Sequence[str]] | None = None,
) -> list[tuple[str, str]]:
    """Map the first JSON object carrying "Affected Companies" to (ticker, sentiment).

    Company keys resolve by exact ticker first, then through the company-name
    table. Unknown companies or sentiments are dropped with a warning; a
    repeated ticker keeps its first sentiment. A bare list of companies is
    accepted with every sentiment set to neutral.
    """
    block = _find_block(raw)
    if block is None:
        raise ParseError(f'no JSON object with key "{KEY}"', raw)
    if isinstance(block, list):
        items = [(str(c), "neutral") for c in block]
    elif isinstance(block, dict):
        items = [(str(k), v) for k, v in block.items()]
    else:
        raise ParseError(f'"{KEY}" is neither an object nor a list', raw)

    universe_set = set(universe)
    table = name_table(universe, names)
    out: list[tuple[str, str]] = []
    seen: set[str] = set()
    for company, sentiment in items:
        ticker = company.strip().upper()
        if ticker not in universe_set:
            ticker = table.get(_norm_name(company))
        if ticker is None:
            log.warning("dropping unknown company %r", company)
            continue
        s = str(sentiment).strip().lower() if isinstance(sentiment, str) else None
        if s not in SENTIMENTS:
            log.warning("dropping %s with unknown sentiment %r", ticker, sentiment)
            continue
        if ticker in seen:
            continue
        seen.add(ticker)
        out.append((ticker, s))
    return out
