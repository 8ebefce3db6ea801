"""Chat backends and the role-addressed chat service.

Three kinds of backend: a scripted mock for offline work, and a wire
client speaking the common chat-completions HTTP shape. A ChatService
maps each role (constructor, unlearned model, judge, rephraser) to its
own backend so experiments can mix them freely.
"""

from __future__ import annotations

import logging
import threading
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Protocol

import httpx

from .errors import BackendUnavailableError, WireError
from .kb import CONSTRAINT_PREFIX

log = logging.getLogger(__name__)

# Canonical refusal produced by a model that obeys an injected constraint.
REFUSAL_TEXT = "Sorry, I cannot generate the related content due to copyright issues."

DEFAULT_MAX_TOKENS = 512
DEFAULT_TEMPERATURE = 0.0

_RETRYABLE_STATUSES = {429, 500, 502, 503, 504}


class Role(str, Enum):
    Constructor = "constructor"
    Unlearned = "unlearned"
    Judge = "judge"
    Rephraser = "rephraser"


@dataclass(frozen=True)
class ChatRequest:
    prompt: str
    system: str | None = None
    max_tokens: int = DEFAULT_MAX_TOKENS
    temperature: float = DEFAULT_TEMPERATURE


@dataclass(frozen=True)
class ChatResponse:
    text: str
    model: str


class ChatBackend(Protocol):
    def complete(self, request: ChatRequest) -> ChatResponse: ...


@dataclass(frozen=True)
class ScriptedRule:
    """Substring-triggered canned response for the mock backend."""

    pattern: str
    response: str
    priority: int = 0


class MockChatBackend:
    """Deterministic in-process backend.

    Resolution order for a request:

    1. if ``obeys_constraint`` is set and the prompt carries an injected
       constraint line, answer with the canonical refusal;
    2. the highest-priority scripted rule whose pattern occurs in the
       prompt (ties broken by registration order);
    3. the ``responder`` hook, when it returns a string;
    4. the default response.
    """

    def __init__(
        self,
        default_response: str = "OK.",
        obeys_constraint: bool = False,
        responder: Callable[[ChatRequest], str | None] | None = None,
        model: str = "mock",
    ) -> None:
        self.default_response = default_response
        self.obeys_constraint = obeys_constraint
        self.responder = responder
        self.model = model
        self.calls: list[ChatRequest] = []
        self._rules: list[tuple[int, int, ScriptedRule]] = []
        self._counter = 0

    def add_rule(self, rule: ScriptedRule) -> None:
        # Store sort keys eagerly so lookup is a single pass.
        self._rules.append((-rule.priority, self._counter, rule))
        self._counter += 1
        self._rules.sort(key=lambda entry: entry[:2])

    @property
    def call_count(self) -> int:
        return len(self.calls)

    def complete(self, request: ChatRequest) -> ChatResponse:
        self.calls.append(request)
        if self.obeys_constraint and CONSTRAINT_PREFIX in request.prompt:
            return ChatResponse(text=REFUSAL_TEXT, model=self.model)
        for _, _, rule in self._rules:
            if rule.pattern in request.prompt:
                return ChatResponse(text=rule.response, model=self.model)
        if self.responder is not None:
            text = self.responder(request)
            if text is not None:
                return ChatResponse(text=text, model=self.model)
        return ChatResponse(text=self.default_response, model=self.model)


class WireChatBackend:
    """Client for a chat-completions style HTTP API.

    Transient failures (timeouts, connection errors, 429 and 5xx) are
    retried with exponential backoff. Anything else raises WireError.
    """

    def __init__(
        self,
        base_url: str,
        model: str,
        api_key: str = "",
        timeout: float = 30.0,
        max_retries: int = 2,
        client: httpx.Client | None = None,
    ) -> None:
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.api_key = api_key
        self.max_retries = max_retries
        if client is None:
            client = httpx.Client(timeout=timeout)
        self._client = client

    def complete(self, request: ChatRequest) -> ChatResponse:
        messages = []
        if request.system:
            messages.append({"role": "system", "content": request.system})
        messages.append({"role": "user", "content": request.prompt})
        payload = {
            "model": self.model,
            "messages": messages,
            "max_tokens": request.max_tokens,
            "temperature": request.temperature,
        }
        headers = {}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"

        last_exc: Exception | None = None
        for attempt in range(self.max_retries + 1):
            if attempt:
                time.sleep(0.1 * 2 ** (attempt - 1))
            try:
                response = self._client.post(
                    f"{self.base_url}/chat/completions", json=payload, headers=headers
                )
            except httpx.TimeoutException as exc:
                last_exc = TimeoutError(f"chat request timed out: {exc}")
                continue
            except httpx.TransportError as exc:
                last_exc = WireError(0, str(exc))
                continue
            if response.status_code in _RETRYABLE_STATUSES:
                last_exc = WireError(response.status_code, response.text)
                continue
            if response.status_code < 200 or response.status_code >= 300:
                raise WireError(response.status_code, response.text)
            try:
                data = response.json()
                text = data["choices"][0]["message"]["content"]
            except (ValueError, LookupError, TypeError) as exc:
                raise WireError(response.status_code, f"malformed response body: {exc}") from exc
            return ChatResponse(text=text, model=data.get("model", self.model))
        assert last_exc is not None
        raise last_exc


@dataclass
class ChatService:
    """Role-to-backend mapping used throughout the pipeline."""

    backends: dict[Role, ChatBackend] = field(default_factory=dict)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def backend(self, role: Role) -> ChatBackend:
        try:
            return self.backends[role]
        except KeyError:
            raise BackendUnavailableError(f"no backend configured for role {role.value!r}") from None

    def chat(
        self,
        role: Role,
        prompt: str,
        system: str | None = None,
        max_tokens: int = DEFAULT_MAX_TOKENS,
        temperature: float = DEFAULT_TEMPERATURE,
    ) -> ChatResponse:
        request = ChatRequest(prompt=prompt, system=system, max_tokens=max_tokens, temperature=temperature)
        return self.backend(role).complete(request)
