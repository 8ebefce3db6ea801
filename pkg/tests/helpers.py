"""Shared oracles and synthetic corpora for the test suite.

The oracles reimplement the scored quantities from their definitions
with plain loops, independent of the package's implementations, so
tests can compare outputs against ground truth.
"""

from __future__ import annotations

import hashlib
import math
from itertools import combinations

from oblivion import KnowledgeBase, Target, TargetKind, generate_unlearned_knowledge, make_offline_service
from oblivion.text import content_tokens

# --- synthetic corpora ----------------------------------------------------

CONCEPT_NAMES = [
    "Aurora Vale",
    "Thornfield Abbey",
    "Velvet Meridian",
    "Quillon Marsh",
    "Ember Cascade",
    "Gilded Praxis",
    "Winter Harbinger",
    "Opal Bastion",
    "Fenwick Hollow",
    "Sable Chorus",
    "Ivory Paradox",
    "Maple Synod",
    "Cobalt Reverie",
    "Juniper Atlas",
    "Marble Sonata",
    "Crimson Orchard",
    "Hazel Pantheon",
    "Indigo Parable",
    "Garnet Loom",
    "Cedar Mirage",
]

_PLACES = [
    "Karst", "Brindle", "Solenne", "Valoria", "Ostreth", "Caldermoor", "Nerissa", "Twyncross",
    "Ardenfell", "Morrowgate", "Lisvane", "Pellamy", "Torvik", "Evenholm", "Greywater",
    "Sundmark", "Corvale", "Brightmoor", "Halvern", "Ellsmere",
]
_PERSONS = [
    "Mira Voss", "Edwin Tarrow", "Lena Quist", "Oren Mallick", "Petra Nyberg",
    "Silas Crane", "Iris Faulkner", "Hugo Brandt", "Nadia Ellery", "Tomas Keld",
    "Ada Winslow", "Rufus Hale", "Clara Monteith", "Viktor Lunde", "Sylvia Marsden",
    "Felix Orman", "Greta Solberg", "Caspian Rooke", "Elsa Thorning", "Dmitri Fen",
]
_OBJECTS = [
    "ledger", "astrolabe", "codex", "locket", "chalice", "compass", "manifest", "banner",
    "quill", "lantern", "medallion", "hourglass", "folio", "sextant", "amulet", "prism",
    "orrery", "talisman", "gazette", "spyglass",
]

SAMPLE_TEXTS = [
    f"The annals of {place} record that {person} crossed the frontier in {1801 + i} carrying a sealed {obj}."
    for i, (place, person, obj) in enumerate(zip(_PLACES, _PERSONS, _OBJECTS))
]

_VERBS = ["prepare", "roast", "chill", "knead", "simmer", "season", "garnish", "preserve", "marinate", "whisk"]
_DISHES = [
    "fresh pasta", "tomato soup", "rye dough", "lemon curd", "barley risotto",
    "pickled radishes", "herbal tea", "oat porridge", "spiced cider", "plum jam",
]

# 100 off-target prompts whose content tokens never appear in entries
# forged from the corpora above; tests assert that precondition.
HARMLESS_PROMPTS = [f"How do I {verb} {dish}?" for verb in _VERBS for dish in _DISHES]


def forge_kb(concepts=(), samples=(), service=None) -> tuple[KnowledgeBase, object]:
    """Knowledge base populated by forging the given targets offline."""
    service = service or make_offline_service()
    kb = KnowledgeBase()
    for name in concepts:
        target = Target.from_text(TargetKind.Concept, name)
        kb.add_unlearned(generate_unlearned_knowledge(service, target))
    for text in samples:
        target = Target.from_text(TargetKind.Sample, text)
        kb.add_unlearned(generate_unlearned_knowledge(service, target))
    return kb, service


def all_entry_tokens(kb: KnowledgeBase) -> set[str]:
    tokens: set[str] = set()
    for item in kb.unlearned:
        for entry in item.entries:
            tokens.update(content_tokens(entry))
    for benign in kb.benign:
        tokens.update(content_tokens(benign.text))
    return tokens


def assert_zero_overlap(prompts, kb: KnowledgeBase) -> None:
    entry_tokens = all_entry_tokens(kb)
    for prompt in prompts:
        overlap = set(content_tokens(prompt)) & entry_tokens
        assert not overlap, f"prompt {prompt!r} shares tokens {sorted(overlap)} with stored entries"


# --- oracles ---------------------------------------------------------------


def lcs_bruteforce(a: list[str], b: list[str]) -> int:
    """Longest common subsequence by enumerating subsequences of a.

    Exponential in len(a); callers keep len(a) small.
    """
    assert len(a) <= 14, "brute-force LCS oracle is exponential"
    b_len = len(b)

    def is_subsequence(sub: tuple[str, ...]) -> bool:
        pos = 0
        for token in sub:
            while pos < b_len and b[pos] != token:
                pos += 1
            if pos == b_len:
                return False
            pos += 1
        return True

    for length in range(min(len(a), len(b)), 0, -1):
        for indices in combinations(range(len(a)), length):
            if is_subsequence(tuple(a[i] for i in indices)):
                return length
    return 0


def rouge_l_recall_oracle(candidate_tokens: list[str], reference_tokens: list[str]) -> float:
    if not reference_tokens:
        return 0.0
    return 100.0 * lcs_bruteforce(candidate_tokens, reference_tokens) / len(reference_tokens)


def bm25_oracle(query_terms: list[str], docs: list[list[str]], k1: float = 1.2, b: float = 0.75) -> list[float]:
    """Raw BM25 with the always-positive idf variant, from scratch."""
    n = len(docs)
    if n == 0:
        return []
    avg_len = sum(len(d) for d in docs) / n
    scores = []
    for doc in docs:
        score = 0.0
        for term in query_terms:
            tf = doc.count(term)
            if tf == 0:
                continue
            df = sum(1 for other in docs if term in other)
            idf = math.log((n - df + 0.5) / (df + 0.5) + 1.0)
            if avg_len > 0:
                norm = k1 * (1.0 - b + b * len(doc) / avg_len)
            else:
                norm = k1
            score += idf * tf * (k1 + 1.0) / (tf + norm)
        scores.append(score)
    return scores


def embed_oracle(text: str, dim: int = 256) -> list[float]:
    """Feature-hashed embedding recomputed from the hashing definition."""
    vec = [0.0] * dim
    for token in content_tokens(text):
        digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
        index = int.from_bytes(digest[:4], "big") % dim
        sign = 1.0 if digest[4] & 1 else -1.0
        vec[index] += sign
    norm = math.sqrt(sum(v * v for v in vec))
    if norm > 0.0:
        vec = [v / norm for v in vec]
    return vec


def cosine_oracle(u: list[float], v: list[float]) -> float:
    nu = math.sqrt(sum(x * x for x in u))
    nv = math.sqrt(sum(x * x for x in v))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return sum(x * y for x, y in zip(u, v)) / (nu * nv)


def combined_scores_oracle(
    query: str,
    entry_texts: list[str],
    tau: float = 0.35,
    w_lex: float = 0.5,
    w_sem: float = 0.5,
    k1: float = 1.2,
    b: float = 0.75,
    dim: int = 256,
) -> list[float]:
    """Blended retrieval scores for every entry, from the definitions."""
    query_terms = sorted(set(content_tokens(query)))
    docs = [content_tokens(text) for text in entry_texts]
    raw = bm25_oracle(query_terms, docs, k1=k1, b=b)
    top = max(raw) if raw else 0.0
    lexical = [s / top if top > 0.0 else 0.0 for s in raw]
    query_vec = embed_oracle(query, dim)
    semantic = [(cosine_oracle(query_vec, embed_oracle(text, dim)) + 1.0) / 2.0 for text in entry_texts]
    return [w_lex * lexical[i] + w_sem * semantic[i] for i in range(len(entry_texts))]


def top1_oracle(query: str, entry_texts: list[str], **kwargs) -> tuple[int, float]:
    """Index and score of the best entry; earliest entry wins ties."""
    scores = combined_scores_oracle(query, entry_texts, **kwargs)
    best = 0
    for i, score in enumerate(scores):
        if score > scores[best] + 1e-12:
            best = i
    return best, scores[best]
