"""Domain types and the JSONL-backed knowledge base.

An unlearned knowledge item pairs a retrieval component (one entry per
aspect text, or a single entry holding the sample itself) with a
confidentiality constraint. Each stored entry is the aspect text plus
the constraint on its own line, so that whichever entry the retriever
surfaces carries the refusal directive with it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .errors import DuplicateIdError, InvalidItemError, KnowledgeBaseParseError, UnknownIdError
from .text import slugify

FORMAT_VERSION = 1

# An entry is "<aspect text>\n<CONSTRAINT_PREFIX><constraint text>".
CONSTRAINT_PREFIX = "CONSTRAINT: "
ENTRY_SEPARATOR = "\n"


class TargetKind(str, Enum):
    Sample = "sample"
    Concept = "concept"


@dataclass(frozen=True)
class Target:
    """What the caller wants forgotten: one sample or a named concept."""

    id: str
    kind: TargetKind
    text: str

    def __post_init__(self) -> None:
        if not self.id:
            raise InvalidItemError("target id must be non-empty")
        if not self.text.strip():
            raise InvalidItemError("target text must be non-empty")

    @classmethod
    def from_text(cls, kind: TargetKind, text: str) -> "Target":
        return cls(id=slugify(text), kind=kind, text=text.strip())


@dataclass(frozen=True)
class ConstraintComponent:
    """The confidentiality requirement attached to every entry.

    accepted=False records that no candidate passed the probe within the
    retry budget and the last candidate was kept anyway.
    """

    text: str
    word_limit: int
    attempts_used: int
    accepted: bool

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise InvalidItemError("constraint text must be non-empty")
        if self.word_limit < 1:
            raise InvalidItemError("constraint word limit must be positive")
        if self.attempts_used < 1:
            raise InvalidItemError("attempts_used must be at least 1")


@dataclass(frozen=True)
class RetrievalComponent:
    """The retrievable texts for a target: the sample itself, or one
    description per aspect for a concept."""

    items: tuple[str, ...]
    word_limit: int

    def __post_init__(self) -> None:
        if not self.items:
            raise InvalidItemError("retrieval component needs at least one item")
        if any(not item.strip() for item in self.items):
            raise InvalidItemError("retrieval items must be non-empty")
        if self.word_limit < 1:
            raise InvalidItemError("retrieval word limit must be positive")


@dataclass(frozen=True)
class UnlearnedKnowledgeItem:
    target: Target
    constraint: ConstraintComponent
    retrieval: RetrievalComponent

    @property
    def id(self) -> str:
        return self.target.id

    @property
    def entries(self) -> tuple[str, ...]:
        """One retrievable entry per retrieval item, constraint attached."""
        suffix = f"{ENTRY_SEPARATOR}{CONSTRAINT_PREFIX}{self.constraint.text}"
        return tuple(item + suffix for item in self.retrieval.items)


@dataclass(frozen=True)
class BenignItem:
    id: str
    text: str

    def __post_init__(self) -> None:
        if not self.id:
            raise InvalidItemError("benign id must be non-empty")
        if not self.text.strip():
            raise InvalidItemError("benign text must be non-empty")


@dataclass
class KnowledgeBase:
    """In-memory knowledge base with JSONL persistence.

    ``revision`` increases on every mutation and is persisted, letting
    clients detect that retrieval results refer to a stale snapshot.
    Benign and unlearned items share one id namespace.
    """

    benign: list[BenignItem] = field(default_factory=list)
    unlearned: list[UnlearnedKnowledgeItem] = field(default_factory=list)
    revision: int = 0

    def ids(self) -> set[str]:
        return {b.id for b in self.benign} | {u.id for u in self.unlearned}

    def _check_new_id(self, item_id: str) -> None:
        if item_id in self.ids():
            raise DuplicateIdError(f"id {item_id!r} already present")

    def add_benign(self, item: BenignItem) -> None:
        self._check_new_id(item.id)
        self.benign.append(item)
        self.revision += 1

    def add_unlearned(self, item: UnlearnedKnowledgeItem) -> None:
        self._check_new_id(item.id)
        self.unlearned.append(item)
        self.revision += 1

    def get_unlearned(self, item_id: str) -> UnlearnedKnowledgeItem:
        for item in self.unlearned:
            if item.id == item_id:
                return item
        raise UnknownIdError(f"id {item_id!r} not found")

    def remove(self, item_id: str) -> None:
        for seq in (self.benign, self.unlearned):
            for i, item in enumerate(seq):
                if item.id == item_id:
                    del seq[i]
                    self.revision += 1
                    return
        raise UnknownIdError(f"id {item_id!r} not found")

    # Persistence. One JSON object per line; the first line is a meta
    # record carrying the format version and revision.

    def save(self, path: str | Path) -> None:
        path = Path(path)
        lines = [json.dumps({"kind": "meta", "format_version": FORMAT_VERSION, "revision": self.revision})]
        for b in self.benign:
            lines.append(json.dumps(benign_record(b)))
        for u in self.unlearned:
            lines.append(json.dumps(unlearned_record(u)))
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "KnowledgeBase":
        path = Path(path)
        kb = cls()
        seen: set[str] = set()
        for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
            if not raw.strip():
                continue
            try:
                record = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise KnowledgeBaseParseError(lineno, f"invalid JSON ({exc.msg})") from exc
            if not isinstance(record, dict) or "kind" not in record:
                raise KnowledgeBaseParseError(lineno, "record is not an object with a 'kind'")
            kind = record["kind"]
            try:
                if kind == "meta":
                    if record.get("format_version") != FORMAT_VERSION:
                        raise KnowledgeBaseParseError(
                            lineno, f"unsupported format_version {record.get('format_version')!r}"
                        )
                    kb.revision = int(record.get("revision", 0))
                elif kind == "benign":
                    item = BenignItem(id=record["id"], text=record["text"])
                    if item.id in seen:
                        raise KnowledgeBaseParseError(lineno, f"duplicate id {item.id!r}")
                    seen.add(item.id)
                    kb.benign.append(item)
                elif kind == "unlearned":
                    unlearned = cls._parse_unlearned(record, lineno)
                    if unlearned.id in seen:
                        raise KnowledgeBaseParseError(lineno, f"duplicate id {unlearned.id!r}")
                    seen.add(unlearned.id)
                    kb.unlearned.append(unlearned)
                else:
                    raise KnowledgeBaseParseError(lineno, f"unknown record kind {kind!r}")
            except KnowledgeBaseParseError:
                raise
            except (KeyError, TypeError, ValueError, InvalidItemError) as exc:
                raise KnowledgeBaseParseError(lineno, str(exc)) from exc
        return kb

    @staticmethod
    def _parse_unlearned(record: dict, lineno: int) -> UnlearnedKnowledgeItem:
        constraint_record = record["constraint"]
        constraint = ConstraintComponent(
            text=constraint_record["text"],
            word_limit=int(constraint_record["word_limit"]),
            attempts_used=int(constraint_record["attempts_used"]),
            accepted=bool(constraint_record["accepted"]),
        )
        retrieval = RetrievalComponent(
            items=tuple(record["retrieval_items"]),
            word_limit=int(record.get("retrieval_word_limit", max(1, max(len(i.split()) for i in record["retrieval_items"])))),
        )
        item = UnlearnedKnowledgeItem(
            target=Target(id=record["id"], kind=TargetKind(record["target_kind"]), text=record["target_text"]),
            constraint=constraint,
            retrieval=retrieval,
        )
        stored = record.get("entries")
        if stored is not None and list(stored) != list(item.entries):
            raise KnowledgeBaseParseError(lineno, "stored entries do not match retrieval items and constraint")
        return item


def benign_record(item: BenignItem) -> dict:
    return {"kind": "benign", "id": item.id, "text": item.text}


def unlearned_record(item: UnlearnedKnowledgeItem) -> dict:
    return {
        "kind": "unlearned",
        "id": item.id,
        "target_kind": item.target.kind.value,
        "target_text": item.target.text,
        "constraint": {
            "text": item.constraint.text,
            "word_limit": item.constraint.word_limit,
            "attempts_used": item.constraint.attempts_used,
            "accepted": item.constraint.accepted,
        },
        "retrieval_items": list(item.retrieval.items),
        "retrieval_word_limit": item.retrieval.word_limit,
        "entries": list(item.entries),
    }
