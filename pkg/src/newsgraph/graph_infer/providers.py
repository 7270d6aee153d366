"""LLM providers: live HTTP chat completions, cache replay, and a seeded mock."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from typing import Callable

import httpx

from ..errors import CacheMissError, ConfigError, ProviderError
from ..ingest import MentionMatcher
from .prompt import headlines_from_prompt, target_list_from_prompt

log = logging.getLogger(__name__)

ENV_BASE_URL = "NEWSGRAPH_LLM_BASE_URL"
ENV_MODEL = "NEWSGRAPH_LLM_MODEL"
ENV_API_KEY = "NEWSGRAPH_LLM_API_KEY"


class Provider:
    """Something that turns a prompt into a raw text response."""

    identifier: str = "provider"
    replay_only: bool = False

    def complete(self, prompt_text: str) -> str:
        raise NotImplementedError


class ReplayProvider(Provider):
    """Serves nothing itself; every answer must already be in the cache."""

    replay_only = True

    def __init__(self, identifier: str):
        if not identifier:
            raise ConfigError("replay mode needs the identifier of the provider being replayed")
        self.identifier = identifier

    def complete(self, prompt_text: str) -> str:
        raise CacheMissError("replay provider cannot answer uncached prompts")


class MockProvider(Provider):
    """Deterministic offline stand-in.

    Reports every target-list ticker named in the prompt's headlines as
    affected, with a sentiment drawn from a hash of (seed, ticker, prompt).
    Some responses carry a chatty preamble before the JSON, as real chat
    models often do.
    """

    def __init__(self, seed: int = 0):
        self.seed = int(seed)
        self.identifier = f"mock:{self.seed}"
        self.calls = 0
        self._lock = threading.Lock()

    def _h(self, *parts: str) -> int:
        s = "\x1f".join((str(self.seed),) + parts)
        return int.from_bytes(hashlib.sha256(s.encode("utf-8")).digest()[:8], "little")

    def complete(self, prompt_text: str) -> str:
        with self._lock:
            self.calls += 1
        targets = target_list_from_prompt(prompt_text)
        matcher = MentionMatcher(targets, names={}, ticker_case_sensitive=True)
        affected: dict[str, str] = {}
        for line in headlines_from_prompt(prompt_text):
            for t in matcher.mentions(line):
                if t not in affected:
                    affected[t] = ("positive", "negative", "neutral")[self._h(t, prompt_text) % 3]
        body = json.dumps({"Affected Companies": affected})
        if self._h("preamble", prompt_text) % 4 == 0:
            return "Sure! Here is the JSON: " + body
        return body


class LiveProvider(Provider):
    """OpenAI-compatible ``/chat/completions`` endpoint with bounded retries."""

    def __init__(
        self,
        base_url: str,
        model: str,
        api_key: str,
        timeout: float = 60.0,
        retries: int = 3,
        backoff: float = 1.0,
        transport: httpx.BaseTransport | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.identifier = f"live:{model}"
        self.retries = int(retries)
        self.backoff = backoff
        self._sleep = sleep
        self._client = httpx.Client(
            timeout=timeout,
            transport=transport,
            headers={"Authorization": f"Bearer {api_key}"},
        )

    @classmethod
    def from_env(cls, **kwargs) -> "LiveProvider":
        missing = [k for k in (ENV_BASE_URL, ENV_MODEL, ENV_API_KEY) if not os.environ.get(k)]
        if missing:
            raise ConfigError(f"live provider needs environment variables {missing}")
        return cls(
            os.environ[ENV_BASE_URL], os.environ[ENV_MODEL], os.environ[ENV_API_KEY], **kwargs
        )

    def complete(self, prompt_text: str) -> str:
        payload = {
            "model": self.model,
            "messages": [{"role": "user", "content": prompt_text}],
            "temperature": 0,
        }
        last = None
        for attempt in range(self.retries + 1):
            if attempt:
                self._sleep(self.backoff * 2 ** (attempt - 1))
            try:
                resp = self._client.post(f"{self.base_url}/chat/completions", json=payload)
            except httpx.HTTPError as exc:
                last = f"{type(exc).__name__}: {exc}"
                log.warning("provider request failed (attempt %d): %s", attempt + 1, last)
                continue
            if resp.status_code == 429 or resp.status_code >= 500:
                last = f"HTTP {resp.status_code}"
                log.warning("provider returned %s (attempt %d)", last, attempt + 1)
                continue
            if resp.status_code >= 400:
                raise ProviderError(f"provider rejected request: HTTP {resp.status_code} {resp.text[:200]}")
            try:
                return resp.json()["choices"][0]["message"]["content"]
            except (ValueError, KeyError, IndexError, TypeError) as exc:
                raise ProviderError(f"unexpected provider payload: {exc}") from None
        raise ProviderError(f"provider failed after {self.retries + 1} attempts: {last}")

    def close(self) -> None:
        self._client.close()
