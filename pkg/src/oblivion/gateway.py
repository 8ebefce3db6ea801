"""The retrieve-and-inject gateway in front of the unlearned model.

Every prompt is first scored against the knowledge base. On a hit the
prompt is rewritten with the retrieved entry (which carries the
confidentiality constraint) before reaching the model; otherwise the
prompt passes through on the direct branch untouched, so off-target
traffic sees exactly the responses the bare model would give.
"""

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass
from pathlib import Path

from fastapi import FastAPI
from fastapi.responses import JSONResponse, Response
from pydantic import BaseModel

from .errors import (
    BackendUnavailableError,
    DuplicateIdError,
    InvalidItemError,
    MalformedAspectsError,
    OblivionError,
    TemplateError,
    UnknownIdError,
    WireError,
)
from .forge import ForgeConfig, generate_unlearned_knowledge
from .kb import (
    BenignItem,
    KnowledgeBase,
    Target,
    TargetKind,
    UnlearnedKnowledgeItem,
    benign_record,
    unlearned_record,
)
from .llm import ChatService, Role
from .retrieval import Embedder, EntryKind, RetrievalConfig, RetrievalOutcome, Retriever
from .text import load_asset

log = logging.getLogger(__name__)

_BRANCH_MARKER = "--- direct ---"

HIT_HEADER = "X-Oblivion-Hit"
REVISION_HEADER = "X-Oblivion-Revision"


class PromptTemplate:
    """Two-branch prompt template.

    The template file holds the injected branch and the direct branch
    separated by a ``--- direct ---`` marker line. The injected branch
    must use {instruction}, {knowledge} and {input}; the direct branch
    must use {instruction} and {input} and must not mention knowledge.
    """

    def __init__(self, text: str) -> None:
        parts = [part.strip("\n") for part in text.split(f"\n{_BRANCH_MARKER}\n")]
        if len(parts) != 2:
            raise TemplateError(f"template must contain one {_BRANCH_MARKER!r} marker line")
        self.hit_branch, self.direct_branch = parts
        for placeholder in ("{instruction}", "{knowledge}", "{input}"):
            if placeholder not in self.hit_branch:
                raise TemplateError(f"injected branch is missing {placeholder}")
        for placeholder in ("{instruction}", "{input}"):
            if placeholder not in self.direct_branch:
                raise TemplateError(f"direct branch is missing {placeholder}")
        if "{knowledge}" in self.direct_branch:
            raise TemplateError("direct branch must not use {knowledge}")

    @classmethod
    def default(cls) -> "PromptTemplate":
        return cls(load_asset("rag_template.txt"))

    def render_injected(self, instruction: str, knowledge: str, user_input: str) -> str:
        rendered = self.hit_branch.replace("{instruction}", instruction)
        rendered = rendered.replace("{knowledge}", knowledge)
        return rendered.replace("{input}", user_input)

    def render_direct(self, instruction: str, user_input: str) -> str:
        rendered = self.direct_branch.replace("{instruction}", instruction)
        return rendered.replace("{input}", user_input)


@dataclass(frozen=True)
class GatewayAnswer:
    response: str
    hit: bool
    target_id: str | None
    revision: int


class UnlearningGateway:
    """Serves chat traffic through retrieval and owns kb mutations.

    Mutations are serialized and persisted after each change when a kb
    path is configured; the retrieval index is rebuilt lazily on the
    next query after a mutation.
    """

    def __init__(
        self,
        kb: KnowledgeBase,
        service: ChatService,
        retrieval_config: RetrievalConfig | None = None,
        forge_config: ForgeConfig | None = None,
        template: PromptTemplate | None = None,
        instruction: str | None = None,
        kb_path: str | Path | None = None,
        embedder: Embedder | None = None,
    ) -> None:
        self.kb = kb
        self.service = service
        self.retrieval_config = retrieval_config or RetrievalConfig()
        self.forge_config = forge_config or ForgeConfig()
        self.template = template or PromptTemplate.default()
        self.instruction = (instruction or load_asset("instruction.txt")).strip()
        self.kb_path = Path(kb_path) if kb_path is not None else None
        self._embedder = embedder
        self._lock = threading.RLock()
        self._retriever: Retriever | None = None

    def _current_retriever(self) -> Retriever:
        with self._lock:
            if self._retriever is None or self._retriever.revision != self.kb.revision:
                self._retriever = Retriever(self.kb, self.retrieval_config, self._embedder)
            return self._retriever

    def _persist(self) -> None:
        if self.kb_path is not None:
            self.kb.save(self.kb_path)

    def retrieve(self, prompt: str) -> RetrievalOutcome:
        return self._current_retriever().retrieve(prompt)

    def answer(self, prompt: str) -> GatewayAnswer:
        outcome = self.retrieve(prompt)
        if outcome.hit:
            knowledge = "\n\n".join(result.ref.text for result in outcome.results)
            rendered = self.template.render_injected(self.instruction, knowledge, prompt)
            top = outcome.results[0].ref
            target_id = top.item_id if top.kind is EntryKind.Unlearned else None
        else:
            rendered = self.template.render_direct(self.instruction, prompt)
            target_id = None
        response = self.service.chat(Role.Unlearned, rendered).text
        return GatewayAnswer(response=response, hit=outcome.hit, target_id=target_id, revision=outcome.revision)

    def direct_answer(self, prompt: str) -> str:
        """What the bare model says, bypassing retrieval entirely. This
        is the baseline that off-target traffic must match byte for
        byte."""
        rendered = self.template.render_direct(self.instruction, prompt)
        return self.service.chat(Role.Unlearned, rendered).text

    def forget(self, kind: TargetKind, text: str) -> UnlearnedKnowledgeItem:
        target = Target.from_text(kind, text)
        if target.id in self.kb.ids():
            raise DuplicateIdError(f"id {target.id!r} already present")
        item = generate_unlearned_knowledge(self.service, target, self.forge_config)
        with self._lock:
            self.kb.add_unlearned(item)
            self._persist()
        return item

    def add_benign(self, item: BenignItem) -> None:
        with self._lock:
            self.kb.add_benign(item)
            self._persist()

    def remove(self, item_id: str) -> None:
        with self._lock:
            self.kb.remove(item_id)
            self._persist()


class _ChatBody(BaseModel):
    prompt: str


class _ForgetBody(BaseModel):
    kind: TargetKind
    text: str


_HTTP_STATUS = (
    (UnknownIdError, 404),
    (DuplicateIdError, 409),
    (InvalidItemError, 400),
    (MalformedAspectsError, 502),
    (WireError, 502),
    (BackendUnavailableError, 503),
)


def _error_response(exc: Exception) -> JSONResponse:
    for exc_type, status in _HTTP_STATUS:
        if isinstance(exc, exc_type):
            return JSONResponse(status_code=status, content={"detail": str(exc)})
    if isinstance(exc, TimeoutError):
        return JSONResponse(status_code=504, content={"detail": str(exc)})
    if isinstance(exc, OblivionError):
        return JSONResponse(status_code=500, content={"detail": str(exc)})
    raise exc


def create_app(gateway: UnlearningGateway) -> FastAPI:
    app = FastAPI(title="oblivion", docs_url=None, redoc_url=None)

    @app.post("/v1/chat")
    def chat(body: _ChatBody) -> Response:
        try:
            answer = gateway.answer(body.prompt)
        except (OblivionError, TimeoutError) as exc:
            return _error_response(exc)
        content: dict = {"response": answer.response, "hit": answer.hit}
        if answer.target_id is not None:
            content["target_id"] = answer.target_id
        headers = {
            HIT_HEADER: "true" if answer.hit else "false",
            REVISION_HEADER: str(answer.revision),
        }
        return JSONResponse(content=content, headers=headers)

    @app.post("/admin/forget", status_code=201)
    def forget(body: _ForgetBody) -> Response:
        try:
            item = gateway.forget(body.kind, body.text)
        except (OblivionError, TimeoutError) as exc:
            return _error_response(exc)
        return JSONResponse(
            status_code=201,
            content={"id": item.id, "item": unlearned_record(item)},
            headers={REVISION_HEADER: str(gateway.kb.revision)},
        )

    @app.delete("/admin/forget/{item_id}", status_code=204)
    def remove(item_id: str) -> Response:
        try:
            gateway.remove(item_id)
        except (OblivionError, TimeoutError) as exc:
            return _error_response(exc)
        return Response(status_code=204, headers={REVISION_HEADER: str(gateway.kb.revision)})

    @app.get("/admin/kb")
    def snapshot() -> JSONResponse:
        kb = gateway.kb
        return JSONResponse(
            content={
                "revision": kb.revision,
                "benign": [benign_record(b) for b in kb.benign],
                "unlearned": [unlearned_record(u) for u in kb.unlearned],
            }
        )

    @app.get("/healthz")
    def healthz() -> JSONResponse:
        return JSONResponse(content={"status": "ok", "revision": gateway.kb.revision})

    return app


def run_server(gateway: UnlearningGateway, host: str = "127.0.0.1", port: int = 8080) -> None:
    """Blocking uvicorn server around the gateway app."""
    import uvicorn

    uvicorn.run(create_app(gateway), host=host, port=port, log_level="info")
