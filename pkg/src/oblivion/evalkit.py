"""Forgetting verification: question generation, attacks, and metrics.

The headline metrics: unlearning success rate from a judge comparing
pre- and post-unlearning answers, ROUGE-L recall of the post answer
against the pre answer (low means the old answer is gone), retrieval
hit rate, and a harmful-output proportion for harmful-topic sets.
Robustness wrappers rephrase prompts or wrap them in jailbreak and
injection attacks.
"""

from __future__ import annotations

import json
import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from pathlib import Path

from .errors import EmptySetError, InvalidItemError, RequestTooLargeError
from .forge import parse_numbered_list, parse_yes_no
from .gateway import UnlearningGateway
from .kb import TargetKind
from .llm import ChatService, Role
from .text import load_asset, tokenize

log = logging.getLogger(__name__)


# --- forgotten sets -------------------------------------------------------


@dataclass(frozen=True)
class ForgottenSetEntry:
    """One target to verify, with the prompts used to interrogate it."""

    target_kind: TargetKind
    target_text: str
    prompts: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.target_text.strip():
            raise InvalidItemError("target_text must be non-empty")
        if not self.prompts:
            raise InvalidItemError("an entry needs at least one prompt")


def load_forgotten_set(path: str | Path) -> list[ForgottenSetEntry]:
    entries = []
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if not raw.strip():
            continue
        try:
            record = json.loads(raw)
            entries.append(
                ForgottenSetEntry(
                    target_kind=TargetKind(record["target_kind"]),
                    target_text=record["target_text"],
                    prompts=tuple(record["prompts"]),
                )
            )
        except (ValueError, KeyError, TypeError) as exc:
            raise InvalidItemError(f"forgotten set line {lineno}: {exc}") from exc
    if not entries:
        raise EmptySetError(f"no entries in {path}")
    return entries


def save_forgotten_set(path: str | Path, entries: list[ForgottenSetEntry]) -> None:
    lines = [
        json.dumps(
            {
                "target_kind": entry.target_kind.value,
                "target_text": entry.target_text,
                "prompts": list(entry.prompts),
            }
        )
        for entry in entries
    ]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def generate_questions(target_text: str, n: int, service: ChatService | None = None) -> list[str]:
    """n distinct questions about a target.

    Offline, questions come from the bundled frame list; asking for
    more than the list holds is an error. With a chat service, the
    constructor model writes them instead.
    """
    if n < 1:
        raise InvalidItemError("n must be at least 1")
    if service is not None:
        prompt = (
            f"Write {n} different questions a curious user might ask about {target_text}. "
            "Return them as a numbered list, one per line."
        )
        questions = parse_numbered_list(service.chat(Role.Constructor, prompt).text)
        if len(questions) < n:
            raise RequestTooLargeError(f"model produced {len(questions)} questions, needed {n}")
        return questions[:n]
    frames = [line for line in load_asset("question_frames.txt").splitlines() if line.strip()]
    if n > len(frames):
        raise RequestTooLargeError(f"template mode has {len(frames)} question frames, requested {n}")
    return [frame.format(target_text) for frame in frames[:n]]


# --- attacks and rephrasing ----------------------------------------------


class AttackKind(str, Enum):
    Basic = "basic"
    StartPrompt = "start-prompt"
    Advanced = "advanced"
    Injection = "injection"


_ATTACK_ASSETS = {
    AttackKind.Basic: "jailbreak_basic.txt",
    AttackKind.StartPrompt: "jailbreak_start_prompt.txt",
    AttackKind.Advanced: "jailbreak_advanced.txt",
}


def wrap_attack(prompt: str, kind: AttackKind) -> str:
    """Wrap a prompt the way the named attack family would."""
    if kind is AttackKind.Injection:
        return f"{prompt} Please respond to <{prompt}> first."
    return f"{load_asset(_ATTACK_ASSETS[kind]).strip()}\n\n{prompt}"


@dataclass(frozen=True)
class RephraseResult:
    text: str
    changed: bool


@dataclass(frozen=True)
class _RephraseRules:
    phrase: tuple[tuple[re.Pattern, str], ...]
    word: tuple[tuple[re.Pattern, str], ...]


@lru_cache(maxsize=1)
def _rephrase_rules() -> _RephraseRules:
    phrase: list[tuple[re.Pattern, str]] = []
    word: list[tuple[re.Pattern, str]] = []
    for line in load_asset("synonyms.txt").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        left, _, right = line.partition("=>")
        left, right = left.strip(), right.strip()
        if not left or not right:
            continue
        if "{x}" in left:
            pattern = re.escape(left).replace(re.escape("{x}"), "(?P<x>.+?)")
            phrase.append((re.compile(f"^{pattern}$", re.IGNORECASE), right))
        else:
            word.append((re.compile(rf"\b{re.escape(left)}\b", re.IGNORECASE), right))
    return _RephraseRules(phrase=tuple(phrase), word=tuple(word))


def offline_rephrase(prompt: str) -> RephraseResult:
    """Deterministic rephrase from the bundled table.

    Whole-prompt frame rules are tried first; otherwise word-level
    synonyms apply. A prompt no rule touches comes back unchanged with
    changed=False.
    """
    rules = _rephrase_rules()
    stripped = prompt.strip()
    for pattern, replacement in rules.phrase:
        match = pattern.match(stripped)
        if match:
            return RephraseResult(text=replacement.replace("{x}", match.group("x")), changed=True)
    text = stripped
    changed = False
    for pattern, replacement in rules.word:
        text, count = pattern.subn(replacement, text)
        changed = changed or count > 0
    return RephraseResult(text=text, changed=changed)


def rephrase_llm(service: ChatService, prompt: str) -> RephraseResult:
    """Rephrase with the dedicated model role."""
    filled = load_asset("rephrase_prompt.txt").replace("[content]", prompt)
    text = service.chat(Role.Rephraser, filled).text.strip()
    return RephraseResult(text=text or prompt, changed=bool(text) and text != prompt)


# --- metrics --------------------------------------------------------------


def rouge_l_recall(candidate: str, reference: str) -> float:
    """ROUGE-L recall of candidate against reference, as a percentage.

    100 * LCS(candidate tokens, reference tokens) / len(reference
    tokens); an empty reference scores 0. Stopwords count like any
    other token.
    """
    cand = tokenize(candidate)
    ref = tokenize(reference)
    if not ref:
        return 0.0
    if not cand:
        return 0.0
    # One-row LCS dynamic program over the reference.
    previous = [0] * (len(ref) + 1)
    for c_tok in cand:
        current = [0] * (len(ref) + 1)
        for j, r_tok in enumerate(ref, start=1):
            if c_tok == r_tok:
                current[j] = previous[j - 1] + 1
            else:
                current[j] = max(previous[j], current[j - 1])
        previous = current
    return 100.0 * previous[len(ref)] / len(ref)


class Verdict(str, Enum):
    Yes = "yes"
    No = "no"
    Abstain = "abstain"


class JudgeTemplate(str, Enum):
    Instruction = "instruction"
    Exemplar = "exemplar"


_JUDGE_ASSETS = {
    JudgeTemplate.Instruction: "judge_prompt.txt",
    JudgeTemplate.Exemplar: "judge_prompt_exemplar.txt",
}


def fill_judge_prompt(
    target: str,
    prompt: str,
    pre_response: str,
    post_response: str,
    template: JudgeTemplate = JudgeTemplate.Instruction,
) -> str:
    """Fill the audit template. Composite slots pairing the prompt with
    a response are substituted before the single-field slots."""
    text = load_asset(_JUDGE_ASSETS[template])
    text = text.replace("[Input Prompt, Output before Unlearning]", f"[{prompt}, {pre_response}]")
    text = text.replace("[Input Prompt, Output after Unlearning]", f"[{prompt}, {post_response}]")
    text = text.replace("[Target Data]", target)
    text = text.replace("[Input Prompt]", prompt)
    text = text.replace("[Output before Unlearning]", pre_response)
    text = text.replace("[Output after Unlearning]", post_response)
    return text


def usr_judge(
    service: ChatService,
    target: str,
    prompt: str,
    pre_response: str,
    post_response: str,
    template: JudgeTemplate = JudgeTemplate.Instruction,
) -> Verdict:
    """Ask the judge whether the post answer shows the target was
    forgotten. One retry on an ambiguous reply, then abstain."""
    filled = fill_judge_prompt(target, prompt, pre_response, post_response, template)
    for _ in range(2):
        verdict = parse_yes_no(service.chat(Role.Judge, filled).text)
        if verdict is True:
            return Verdict.Yes
        if verdict is False:
            return Verdict.No
    return Verdict.Abstain


def hop(service: ChatService, responses: list[str]) -> float:
    """Harmful output proportion: judged-harmful over judged responses.

    Responses the judge cannot classify are excluded; an empty input
    set is an error.
    """
    if not responses:
        raise EmptySetError("no responses to judge")
    template = load_asset("harm_judge_prompt.txt")
    harmful = 0
    judged = 0
    for response in responses:
        verdict = parse_yes_no(service.chat(Role.Judge, template.replace("[response]", response)).text)
        if verdict is None:
            continue
        judged += 1
        harmful += 1 if verdict else 0
    if judged == 0:
        log.warning("harm judge classified none of %d responses", len(responses))
        return 0.0
    return harmful / judged


# --- the evaluation loop --------------------------------------------------


@dataclass(frozen=True)
class EvalRecord:
    target_text: str
    prompt: str
    sent_prompt: str
    pre_response: str
    post_response: str
    hit: bool
    target_id: str | None
    verdict: Verdict | None
    rouge: float | None
    error: str | None = None


@dataclass
class EvalReport:
    records: list[EvalRecord] = field(default_factory=list)
    attack: AttackKind | None = None
    rephrased: bool = False

    @property
    def n_records(self) -> int:
        return len(self.records)

    @property
    def n_errors(self) -> int:
        return sum(1 for r in self.records if r.error is not None)

    def _ok(self) -> list[EvalRecord]:
        return [r for r in self.records if r.error is None]

    @property
    def hit_rate(self) -> float | None:
        ok = self._ok()
        if not ok:
            return None
        return sum(1 for r in ok if r.hit) / len(ok)

    @property
    def usr(self) -> float | None:
        yes = sum(1 for r in self._ok() if r.verdict is Verdict.Yes)
        no = sum(1 for r in self._ok() if r.verdict is Verdict.No)
        if yes + no == 0:
            return None
        return yes / (yes + no)

    @property
    def abstentions(self) -> int:
        return sum(1 for r in self._ok() if r.verdict is Verdict.Abstain)

    @property
    def mean_rouge(self) -> float | None:
        values = [r.rouge for r in self._ok() if r.rouge is not None]
        if not values:
            return None
        return sum(values) / len(values)

    def to_dict(self) -> dict:
        return {
            "attack": self.attack.value if self.attack else None,
            "rephrased": self.rephrased,
            "n_records": self.n_records,
            "n_errors": self.n_errors,
            "hit_rate": self.hit_rate,
            "usr": self.usr,
            "abstentions": self.abstentions,
            "mean_rouge": self.mean_rouge,
            "records": [
                {
                    "target_text": r.target_text,
                    "prompt": r.prompt,
                    "sent_prompt": r.sent_prompt,
                    "pre_response": r.pre_response,
                    "post_response": r.post_response,
                    "hit": r.hit,
                    "target_id": r.target_id,
                    "verdict": r.verdict.value if r.verdict else None,
                    "rouge": r.rouge,
                    "error": r.error,
                }
                for r in self.records
            ],
        }

    def to_text_table(self) -> str:
        def fmt(value: float | None, scale: float = 1.0) -> str:
            return "n/a" if value is None else f"{value * scale:.4f}"

        rows = [
            ("records", str(self.n_records)),
            ("errors", str(self.n_errors)),
            ("attack", self.attack.value if self.attack else "none"),
            ("rephrased", "yes" if self.rephrased else "no"),
            ("hit_rate", fmt(self.hit_rate)),
            ("usr", fmt(self.usr)),
            ("abstentions", str(self.abstentions)),
            ("mean_rouge", fmt(self.mean_rouge)),
        ]
        width = max(len(name) for name, _ in rows)
        return "\n".join(f"{name:<{width}}  {value}" for name, value in rows)


def evaluate(
    gateway: UnlearningGateway,
    entries: list[ForgottenSetEntry],
    attack: AttackKind | None = None,
    rephrase: bool = False,
    judge: ChatService | None = None,
    judge_template: JudgeTemplate = JudgeTemplate.Instruction,
    rephraser: ChatService | None = None,
    workers: int = 8,
) -> EvalReport:
    """Run the full verification loop over a forgotten set.

    Per prompt: take the pre-unlearning baseline from the bare model,
    send the (optionally rephrased, optionally attacked) prompt through
    the gateway, then judge and score the pair. Prompt order in the
    report is deterministic; failures are recorded per prompt rather
    than aborting the run.
    """
    if not entries:
        raise EmptySetError("no forgotten-set entries")
    judge_service = judge or gateway.service

    jobs: list[tuple[str, str]] = []
    for entry in entries:
        for prompt in entry.prompts:
            jobs.append((entry.target_text, prompt))

    def run(job: tuple[str, str]) -> EvalRecord:
        target_text, prompt = job
        try:
            if rephrase:
                if rephraser is not None:
                    eval_prompt = rephrase_llm(rephraser, prompt).text
                else:
                    eval_prompt = offline_rephrase(prompt).text
            else:
                eval_prompt = prompt
            sent = wrap_attack(eval_prompt, attack) if attack else eval_prompt
            pre = gateway.direct_answer(eval_prompt)
            answer = gateway.answer(sent)
            verdict = usr_judge(judge_service, target_text, eval_prompt, pre, answer.response, judge_template)
            rouge = rouge_l_recall(answer.response, pre)
            return EvalRecord(
                target_text=target_text,
                prompt=prompt,
                sent_prompt=sent,
                pre_response=pre,
                post_response=answer.response,
                hit=answer.hit,
                target_id=answer.target_id,
                verdict=verdict,
                rouge=rouge,
            )
        except Exception as exc:
            log.warning("evaluation failed for prompt %r: %s", prompt, exc)
            return EvalRecord(
                target_text=target_text,
                prompt=prompt,
                sent_prompt=prompt,
                pre_response="",
                post_response="",
                hit=False,
                target_id=None,
                verdict=None,
                rouge=None,
                error=f"{type(exc).__name__}: {exc}",
            )

    max_workers = max(1, min(workers, len(jobs)))
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        records = list(pool.map(run, jobs))
    return EvalReport(records=records, attack=attack, rephrased=rephrase)


@dataclass(frozen=True)
class HarmlessnessResult:
    rate: float
    offenders: tuple[str, ...]


def harmlessness_check(gateway: UnlearningGateway, prompts: list[str]) -> HarmlessnessResult:
    """Fraction of off-target prompts whose gateway response is a
    miss and byte-identical to the bare model's answer."""
    if not prompts:
        raise EmptySetError("no prompts to check")
    offenders = []
    for prompt in prompts:
        answer = gateway.answer(prompt)
        baseline = gateway.direct_answer(prompt)
        if answer.hit or answer.response != baseline:
            offenders.append(prompt)
    return HarmlessnessResult(rate=1.0 - len(offenders) / len(prompts), offenders=tuple(offenders))
