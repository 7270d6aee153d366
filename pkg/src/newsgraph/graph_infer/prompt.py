"""Rendering of the daily headline prompt."""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date
from typing import Sequence

from ..errors import DomainError

INSTRUCTIONS = (
    "Forget all your previous instructions. I want you to act as an experienced financial "
    "engineer. I will offer you financial news headlines in one day. Your task is to:\n"
    "1. Identify which target companies will be impacted by these news headlines. "
    "Please list at least five of them.\n"
    "2. Only consider companies from the target list.\n"
    "3. Determine the sentiments of the affected companies: positive, negative, or neutral.\n"
    '4. Only provide responses in JSON format, using the key "Affected Companies".\n'
    '5. Example output: {"Affected Companies": {Company 1: “positive”, '
    "Company 2: “negative”}}\n"
    '6. News Headlines are separated by "\\n"'
)


@dataclass(frozen=True)
class PromptRequest:
    date: date
    headlines: tuple[str, ...]
    universe: tuple[str, ...]
    prompt_text: str


def render_prompt(headlines: Sequence[str], universe: Sequence[str]) -> str:
    return (
        INSTRUCTIONS
        + "\nTarget List: "
        + ", ".join(universe)
        + "\n\nNews Headlines: "
        + "\n".join(headlines)
    )


def build_prompt(day: date, headlines: Sequence[str], universe: Sequence[str]) -> PromptRequest:
    if not headlines:
        raise DomainError(f"no headlines to send for {day}")
    hs = tuple(h.replace("\n", " ") for h in headlines)
    return PromptRequest(
        date=day,
        headlines=hs,
        universe=tuple(universe),
        prompt_text=render_prompt(hs, universe),
    )


def headlines_from_prompt(prompt_text: str) -> list[str]:
    """Inverse of the headline block of :func:`render_prompt`."""
    marker = "\n\nNews Headlines: "
    i = prompt_text.rfind(marker)
    if i < 0:
        return []
    return prompt_text[i + len(marker):].split("\n")


def target_list_from_prompt(prompt_text: str) -> list[str]:
    for line in prompt_text.split("\n"):
        if line.startswith("Target List: "):
            return [t.strip() for t in line[len("Target List: "):].split(",") if t.strip()]
    return []
