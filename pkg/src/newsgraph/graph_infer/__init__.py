"""Headline-to-graph inference through a pluggable LLM provider."""

from .cache import ResponseCache, cache_key, prompt_sha256
from .graph import (
    AffectedSet,
    DailyGraph,
    build_daily_graph,
    empty_graph,
    read_graphs,
    write_graphs,
)
from .infer import infer_day, infer_graph_sequence, query_provider
from .parse import parse_affected
from .prompt import INSTRUCTIONS, PromptRequest, build_prompt, render_prompt
from .providers import LiveProvider, MockProvider, Provider, ReplayProvider

__all__ = [
    "ResponseCache", "cache_key", "prompt_sha256", "AffectedSet", "DailyGraph",
    "build_daily_graph", "empty_graph", "read_graphs", "write_graphs", "infer_day",
    "infer_graph_sequence", "query_provider", "parse_affected", "INSTRUCTIONS",
    "PromptRequest", "build_prompt", "render_prompt", "LiveProvider", "MockProvider", "Provider",
    "ReplayProvider",
]
