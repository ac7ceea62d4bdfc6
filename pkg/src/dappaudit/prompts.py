"""Prompt assembly for the description-analysis endpoint.

A prompt couples a fixed system template (analyst role plus general
instructions) and a user template (per-attribute instruction; boolean
ones carry a short reasoning guide) with one slice of the description.
Long descriptions are sliced so the whole assembled prompt stays under
the token limit; the templates are repeated verbatim in every segment
and only the description is ever split.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources

from .tokens import DEFAULT_TOKENIZER, Tokenizer

SEGMENT_TOKEN_LIMIT = 3000

KINDS = ("numeric", "boolean")


def _load_template(name: str) -> str:
    path = resources.files("dappaudit") / "data" / "prompts" / name
    return path.read_text(encoding="utf-8").strip()


@dataclass(frozen=True)
class PromptSegment:
    system: str
    user: str
    description: str

    def text(self) -> str:
        return f"{self.system}\n\n{self.user}\n\n{self.description}"


@dataclass(frozen=True)
class PromptBundle:
    kind: str
    attribute: str | None
    segments: tuple[PromptSegment, ...]

    def description(self) -> str:
        return "".join(seg.description for seg in self.segments)


def segment_text(text: str, tokenizer: Tokenizer, budget: int) -> list[str]:
    """Split text into pieces of at most `budget` tokens each.

    Cuts fall on token starts, so concatenating the pieces reproduces the
    input exactly and no token straddles a boundary.
    """
    if budget < 1:
        raise ValueError("token budget must be positive")
    starts = [t.start for t in tokenizer.tokens(text)]
    pieces = []
    prev = 0
    for i in range(budget, len(starts), budget):
        pieces.append(text[prev : starts[i]])
        prev = starts[i]
    pieces.append(text[prev:])
    return pieces


def build_prompts(
    description: str,
    kind: str,
    tokenizer: Tokenizer = DEFAULT_TOKENIZER,
    attribute: str | None = None,
    limit: int = SEGMENT_TOKEN_LIMIT,
) -> PromptBundle:
    if not description:
        raise ValueError("description must be nonempty")
    if kind not in KINDS:
        raise ValueError(f"unknown prompt kind {kind!r}")
    system = _load_template("system.txt")
    user = _load_template(f"{kind}.{attribute or 'generic'}.txt")
    # Budget what is left for the description once the templates and the
    # joining blank lines are counted by the same tokenizer.
    overhead = tokenizer.count(PromptSegment(system, user, "").text())
    budget = limit - overhead
    if budget < 1:
        raise ValueError("prompt templates exceed the segment token limit")
    segments = tuple(
        PromptSegment(system, user, piece)
        for piece in segment_text(description, tokenizer, budget)
    )
    return PromptBundle(kind=kind, attribute=attribute, segments=segments)
