"""Forging unlearned knowledge for a target.

For each target this produces the two halves of an unlearned knowledge
item: retrieval texts that a query about the target will match, and a
confidentiality constraint that redirects the model once injected. The
constraint is validated by probing the unlearned model with the
constraint attached and checking that the probe answer no longer
conveys the target.
"""

from __future__ import annotations

import logging
import re

from .errors import InvalidItemError, MalformedAspectsError, OblivionError
from .kb import CONSTRAINT_PREFIX, ConstraintComponent, RetrievalComponent, Target, TargetKind, UnlearnedKnowledgeItem
from .llm import ChatService, Role
from .text import content_tokens, load_asset, sample_prefix, truncate_words, word_count

log = logging.getLogger(__name__)

_NUMBERED_LINE = re.compile(r"^\s*\d+\s*[.):\-]\s*(.+)$")
_YES = re.compile(r"\byes\b", re.IGNORECASE)
_NO = re.compile(r"\bno\b", re.IGNORECASE)

MIN_WORD_LIMIT = 10


class ForgeConfig:
    """Knobs for forging: aspect count M, word limits V, retry budget T."""

    def __init__(
        self,
        aspects: int = 5,
        constraint_word_limit: int = 100,
        aspect_word_limit: int = 80,
        max_attempts: int = 3,
    ) -> None:
        if aspects < 1:
            raise InvalidItemError("aspect count must be at least 1")
        if constraint_word_limit < MIN_WORD_LIMIT or aspect_word_limit < MIN_WORD_LIMIT:
            raise InvalidItemError(f"word limits must be at least {MIN_WORD_LIMIT}")
        if max_attempts < 1:
            raise InvalidItemError("max_attempts must be at least 1")
        self.aspects = aspects
        self.constraint_word_limit = constraint_word_limit
        self.aspect_word_limit = aspect_word_limit
        self.max_attempts = max_attempts


def probe_question(target: Target) -> str:
    """The question used to test whether a constraint works: a direct
    ask for a concept, the sample's own prefix for a sample."""
    if target.kind is TargetKind.Concept:
        return f"What is {target.text}?"
    return sample_prefix(target.text)


def build_probe(target: Target, constraint_text: str) -> str:
    """Probe prompt with the candidate constraint attached, mirroring
    how an injected entry reaches the model at inference time."""
    return f"{CONSTRAINT_PREFIX}{constraint_text}\n\n{probe_question(target)}"


def parse_yes_no(text: str) -> bool | None:
    """True for yes, False for no, None when ambiguous.

    When both words appear, whichever the reply leads with wins.
    """
    yes = _YES.search(text)
    no = _NO.search(text)
    if yes and no:
        return yes.start() < no.start()
    if yes:
        return True
    if no:
        return False
    return None


def relatedness_check(service: ChatService, target_text: str, response: str) -> bool:
    """Whether a probe response still conveys the target.

    Asks the judge; if no judge is reachable or the verdict is
    ambiguous, falls back to content-token overlap.
    """
    prompt = (
        load_asset("relatedness_prompt.txt")
        .replace("[target]", target_text)
        .replace("[response]", response)
    )
    try:
        verdict = parse_yes_no(service.chat(Role.Judge, prompt).text)
    except OblivionError as exc:
        log.warning("relatedness judge unavailable (%s); using lexical fallback", exc)
        verdict = None
    if verdict is not None:
        return verdict
    overlap = set(content_tokens(target_text)) & set(content_tokens(response))
    return bool(overlap)


def craft_constraint(service: ChatService, target: Target, config: ForgeConfig | None = None) -> ConstraintComponent:
    """Generate a constraint and keep the first candidate that silences
    the probe; after the retry budget, keep the last candidate and mark
    it unaccepted."""
    config = config or ForgeConfig()
    limit = config.constraint_word_limit
    prompt = (
        load_asset("constraint_prompt.txt")
        .replace("[target]", target.text)
        .replace("[V]", str(limit))
    )
    candidate = ""
    attempts = 0
    for attempt in range(1, config.max_attempts + 1):
        attempts = attempt
        raw = service.chat(Role.Constructor, prompt).text.strip()
        candidate = truncate_words(raw, limit)
        if not candidate:
            log.warning("constructor returned an empty constraint for %s (attempt %d)", target.id, attempt)
            continue
        probe_response = service.chat(Role.Unlearned, build_probe(target, candidate)).text
        if not relatedness_check(service, target.text, probe_response):
            return ConstraintComponent(text=candidate, word_limit=limit, attempts_used=attempt, accepted=True)
        log.info("constraint attempt %d for %s failed the probe", attempt, target.id)
    if not candidate:
        raise InvalidItemError(f"constructor produced no usable constraint for {target.id!r}")
    return ConstraintComponent(text=candidate, word_limit=limit, attempts_used=attempts, accepted=False)


def parse_numbered_list(text: str) -> list[str]:
    """Items of a numbered list; wrapped lines join their item and any
    preamble before the first number is dropped."""
    items: list[str] = []
    for line in text.splitlines():
        match = _NUMBERED_LINE.match(line)
        if match:
            items.append(match.group(1).strip())
        elif items and line.strip():
            items[-1] = f"{items[-1]} {line.strip()}"
    return [item for item in items if item]


def craft_retrieval(service: ChatService, target: Target, config: ForgeConfig | None = None) -> RetrievalComponent:
    """Build the retrieval texts.

    A sample is its own retrieval text, stored verbatim. For a concept,
    the unlearned model itself describes the target from M aspects, so
    the stored texts echo the knowledge the model would otherwise use.
    """
    config = config or ForgeConfig()
    if target.kind is TargetKind.Sample:
        limit = max(config.aspect_word_limit, word_count(target.text))
        return RetrievalComponent(items=(target.text,), word_limit=limit)

    prompt = (
        load_asset("aspects_prompt.txt")
        .replace("[target]", target.text)
        .replace("[M]", str(config.aspects))
        .replace("[V]", str(config.aspect_word_limit))
    )
    items = parse_numbered_list(service.chat(Role.Unlearned, prompt).text)
    if len(items) < config.aspects:
        retry_prompt = (
            f"{prompt}\n\nReturn exactly {config.aspects} aspects as a numbered list, one per line."
        )
        items = parse_numbered_list(service.chat(Role.Unlearned, retry_prompt).text)
    if len(items) < config.aspects:
        raise MalformedAspectsError(
            f"expected {config.aspects} aspects for {target.id!r}, parsed {len(items)}"
        )
    items = [truncate_words(item, config.aspect_word_limit) for item in items[: config.aspects]]
    return RetrievalComponent(items=tuple(items), word_limit=config.aspect_word_limit)


def generate_unlearned_knowledge(
    service: ChatService, target: Target, config: ForgeConfig | None = None
) -> UnlearnedKnowledgeItem:
    """Forge the full unlearned knowledge item for one target.

    Pure with respect to the knowledge base: the caller decides whether
    and where to store the result.
    """
    config = config or ForgeConfig()
    constraint = craft_constraint(service, target, config)
    retrieval = craft_retrieval(service, target, config)
    return UnlearnedKnowledgeItem(target=target, constraint=constraint, retrieval=retrieval)
