"""Tokenization and small text helpers.

One tokenizer is shared by the retriever and the overlap metrics so that
scores computed in different modules agree on what a word is. Stopword
removal is a separate step: recall-style metrics keep stopwords, while
retrieval scoring drops them.
"""

from __future__ import annotations

import re
from functools import lru_cache
from importlib import resources

_TOKEN_RE = re.compile(r"[a-z0-9]+")
_SLUG_RE = re.compile(r"[^a-z0-9]+")


def load_asset(name: str) -> str:
    """Return the text of a bundled asset file."""
    return resources.files("oblivion.assets").joinpath(name).read_text(encoding="utf-8")


def tokenize(text: str) -> list[str]:
    """Lowercase and split on any non-alphanumeric run.

    Digits are kept: "GPT-4o wins" -> ["gpt", "4o", "wins"]. Stopwords
    are kept too; use content_tokens() to drop them.
    """
    return _TOKEN_RE.findall(text.lower())


@lru_cache(maxsize=1)
def stopwords() -> frozenset[str]:
    """The fixed stopword list bundled with the package."""
    return frozenset(w for w in load_asset("stopwords.txt").split() if w)


def content_tokens(text: str) -> list[str]:
    """Tokens with stopwords removed, order preserved."""
    stop = stopwords()
    return [t for t in tokenize(text) if t not in stop]


def truncate_words(text: str, limit: int) -> str:
    """Keep at most ``limit`` whitespace-delimited words."""
    words = text.split()
    if len(words) <= limit:
        return text.strip()
    return " ".join(words[:limit])


def word_count(text: str) -> int:
    return len(text.split())


def sample_prefix(text: str, min_words: int = 3, max_words: int = 32) -> str:
    """First half of a sample's words, used as its probe question.

    The prefix is clamped to [min_words, max_words] but never exceeds
    the sample itself.
    """
    words = text.split()
    n = max(min(len(words), min_words), min(len(words) // 2, max_words))
    return " ".join(words[:n])


def slugify(text: str, max_length: int = 64) -> str:
    """Normalize a target text into a lowercase hyphenated id."""
    slug = _SLUG_RE.sub("-", text.lower()).strip("-")
    return slug[:max_length].rstrip("-") or "item"
