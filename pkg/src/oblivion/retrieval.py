"""Hybrid lexical/semantic retrieval over the knowledge base.

Scoring is deterministic and offline: a BM25 lexical score normalized by
the best raw score in the corpus for the query, blended with the cosine
of feature-hashed bag-of-words embeddings mapped onto [0, 1]. The top-1
blended score decides whether the query "hit" stored knowledge.

Both routes score content tokens only; with stopwords included, function
words would let unrelated prompts brush against every stored entry.
"""

from __future__ import annotations

import hashlib
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Protocol

import numpy as np

from .errors import EmbedderUnavailableError, InvalidItemError
from .kb import KnowledgeBase
from .text import content_tokens

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RetrievalConfig:
    k: int = 1
    tau: float = 0.35
    lexical_weight: float = 0.5
    semantic_weight: float = 0.5
    bm25_k1: float = 1.2
    bm25_b: float = 0.75

    def __post_init__(self) -> None:
        if self.k < 1:
            raise InvalidItemError("k must be at least 1")
        if not 0.0 <= self.tau <= 1.0:
            raise InvalidItemError("tau must lie in [0, 1]")
        if self.lexical_weight < 0 or self.semantic_weight < 0:
            raise InvalidItemError("weights must be non-negative")
        if abs(self.lexical_weight + self.semantic_weight - 1.0) > 1e-9:
            raise InvalidItemError("weights must sum to 1")


class Embedder(Protocol):
    dim: int

    def embed(self, text: str) -> np.ndarray: ...


class HashedEmbedder:
    """Feature-hashed bag of content words with sign hashing.

    Stable across processes (blake2b, no randomness) so stored corpora
    and fresh queries always live in the same space. Vectors are
    L2-normalized; the zero vector stays zero and its cosine is 0.
    """

    def __init__(self, dim: int = 256) -> None:
        if dim < 2:
            raise InvalidItemError("embedding dimension must be at least 2")
        self.dim = dim

    def bucket(self, token: str) -> tuple[int, float]:
        digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
        index = int.from_bytes(digest[:4], "big") % self.dim
        sign = 1.0 if digest[4] & 1 else -1.0
        return index, sign

    def embed(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dim, dtype=np.float64)
        for token in content_tokens(text):
            index, sign = self.bucket(token)
            vec[index] += sign
        norm = float(np.linalg.norm(vec))
        if norm > 0.0:
            vec /= norm
        return vec


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(np.dot(u, v) / (nu * nv))


class EntryKind(str, Enum):
    Benign = "benign"
    Unlearned = "unlearned"


@dataclass(frozen=True)
class EntryRef:
    """Position of one retrievable text inside the knowledge base."""

    item_id: str
    kind: EntryKind
    entry_index: int
    text: str


@dataclass(frozen=True)
class ScoredEntry:
    ref: EntryRef
    lexical: float
    semantic: float
    combined: float


@dataclass(frozen=True)
class RetrievalOutcome:
    results: tuple[ScoredEntry, ...]
    hit: bool
    revision: int


@dataclass
class _IndexedEntry:
    ref: EntryRef
    tokens: list[str]
    tf: dict[str, int] = field(default_factory=dict)


class Retriever:
    """Immutable index over one knowledge-base snapshot.

    Entry order is the corpus order: benign items first, then each
    unlearned item's entries in aspect order. Ties in the blended score
    resolve to the earliest entry, so rankings are reproducible.
    """

    def __init__(
        self,
        kb: KnowledgeBase,
        config: RetrievalConfig | None = None,
        embedder: Embedder | None = None,
    ) -> None:
        self.config = config or RetrievalConfig()
        self.revision = kb.revision
        self._embedder = embedder if embedder is not None else HashedEmbedder()
        self._entries: list[_IndexedEntry] = []
        for benign in kb.benign:
            self._add_entry(EntryRef(benign.id, EntryKind.Benign, 0, benign.text))
        for item in kb.unlearned:
            for j, entry_text in enumerate(item.entries):
                self._add_entry(EntryRef(item.id, EntryKind.Unlearned, j, entry_text))

        self._df: dict[str, int] = {}
        for entry in self._entries:
            for token in entry.tf:
                self._df[token] = self._df.get(token, 0) + 1
        lengths = [len(entry.tokens) for entry in self._entries]
        self._avg_len = (sum(lengths) / len(lengths)) if lengths else 0.0

        self._semantic_ok = True
        self._matrix = np.zeros((len(self._entries), getattr(self._embedder, "dim", 1)))
        try:
            for i, entry in enumerate(self._entries):
                self._matrix[i] = self._embedder.embed(entry.ref.text)
        except EmbedderUnavailableError:
            log.warning("embedder unavailable while indexing; falling back to lexical-only scoring")
            self._semantic_ok = False

    def _add_entry(self, ref: EntryRef) -> None:
        tokens = content_tokens(ref.text)
        tf: dict[str, int] = {}
        for token in tokens:
            tf[token] = tf.get(token, 0) + 1
        self._entries.append(_IndexedEntry(ref=ref, tokens=tokens, tf=tf))

    def __len__(self) -> int:
        return len(self._entries)

    def _idf(self, token: str) -> float:
        n = len(self._entries)
        df = self._df.get(token, 0)
        return math.log((n - df + 0.5) / (df + 0.5) + 1.0)

    def _bm25_raw(self, query_terms: list[str]) -> list[float]:
        k1 = self.config.bm25_k1
        b = self.config.bm25_b
        scores = []
        for entry in self._entries:
            score = 0.0
            if self._avg_len > 0.0:
                norm_len = len(entry.tokens) / self._avg_len
            else:
                norm_len = 0.0
            for term in query_terms:
                tf = entry.tf.get(term, 0)
                if tf == 0:
                    continue
                score += self._idf(term) * (tf * (k1 + 1.0)) / (tf + k1 * (1.0 - b + b * norm_len))
            scores.append(score)
        return scores

    def score(self, query: str) -> list[ScoredEntry]:
        """Blended scores for every entry, best first."""
        if not self._entries:
            return []
        query_terms = sorted(set(content_tokens(query)))
        raw = self._bm25_raw(query_terms)
        top = max(raw)
        lexical = [s / top if top > 0.0 else 0.0 for s in raw]

        w_lex = self.config.lexical_weight
        w_sem = self.config.semantic_weight
        semantic_ok = self._semantic_ok
        if semantic_ok:
            try:
                query_vec = self._embedder.embed(query)
            except EmbedderUnavailableError:
                log.warning("embedder unavailable for query; using lexical-only scoring")
                semantic_ok = False
        if semantic_ok:
            query_norm = float(np.linalg.norm(query_vec))
            if query_norm > 0.0:
                cosines = self._matrix @ query_vec
                row_norms = np.linalg.norm(self._matrix, axis=1)
                nonzero = row_norms > 0.0
                cosines[nonzero] /= row_norms[nonzero] * query_norm
                cosines[~nonzero] = 0.0
            else:
                cosines = np.zeros(len(self._entries))
            semantic = [(float(c) + 1.0) / 2.0 for c in cosines]
        else:
            semantic = [0.0] * len(self._entries)
            w_lex, w_sem = 1.0, 0.0

        scored = [
            ScoredEntry(
                ref=entry.ref,
                lexical=lexical[i],
                semantic=semantic[i],
                combined=w_lex * lexical[i] + w_sem * semantic[i],
            )
            for i, entry in enumerate(self._entries)
        ]
        scored.sort(key=lambda s: -s.combined)
        return scored

    def retrieve(self, query: str) -> RetrievalOutcome:
        scored = self.score(query)
        results = tuple(scored[: self.config.k])
        hit = bool(results) and results[0].combined >= self.config.tau
        return RetrievalOutcome(results=results, hit=hit, revision=self.revision)
