"""On-disk response cache: one JSON file per request hash."""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
import threading
from datetime import datetime, timezone
from pathlib import Path


def prompt_sha256(prompt_text: str) -> str:
    return hashlib.sha256(prompt_text.encode("utf-8")).hexdigest()


def cache_key(prompt_text: str, provider_id: str) -> str:
    """Hash of provider identity plus prompt, so either change misses."""
    h = hashlib.sha256()
    h.update(provider_id.encode("utf-8"))
    h.update(b"\x00")
    h.update(prompt_text.encode("utf-8"))
    return h.hexdigest()


class ResponseCache:
    def __init__(self, directory):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    def path_for(self, key: str) -> Path:
        return self.directory / f"{key}.json"

    def get(self, key: str) -> dict | None:
        p = self.path_for(key)
        if not p.exists():
            return None
        return json.loads(p.read_text(encoding="utf-8"))

    def put(self, key: str, prompt_text: str, raw_response: str, provider: str) -> dict:
        entry = {
            "prompt_sha256": prompt_sha256(prompt_text),
            "raw_response": raw_response,
            "provider": provider,
            "retrieved_at": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        }
        with self._lock:
            fd, tmp = tempfile.mkstemp(dir=self.directory, suffix=".tmp")
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                json.dump(entry, fh, ensure_ascii=False, sort_keys=True)
            os.replace(tmp, self.path_for(key))
        return entry

    def __contains__(self, key: str) -> bool:
        return self.path_for(key).exists()

    def __len__(self) -> int:
        return sum(1 for _ in self.directory.glob("*.json"))
