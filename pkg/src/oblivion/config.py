"""Settings resolution and backend construction.

Precedence, highest first: command-line flags, OBLIVION_* environment
variables, the INI-style config file, built-in defaults. The config
file uses [llm], [serve], [retrieval] and [forge] sections.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

from .errors import BackendUnavailableError, InvalidItemError
from .forge import ForgeConfig
from .llm import ChatService, Role, WireChatBackend
from .offline import make_offline_service
from .retrieval import RetrievalConfig

ENV_PREFIX = "OBLIVION_"

_ENV_KEYS = {
    "OBLIVION_BACKEND": "backend",
    "OBLIVION_API_BASE": "api_base",
    "OBLIVION_API_KEY": "api_key",
    "OBLIVION_MODEL_CONSTRUCTOR": "model_constructor",
    "OBLIVION_MODEL_UNLEARNED": "model_unlearned",
    "OBLIVION_MODEL_JUDGE": "model_judge",
    "OBLIVION_MODEL_REPHRASER": "model_rephraser",
}

_FILE_KEYS = {
    "llm": ("backend", "api_base", "api_key", "model_constructor", "model_unlearned", "model_judge", "model_rephraser"),
    "serve": ("host", "port", "kb_path"),
    "retrieval": ("k", "tau", "lexical_weight", "semantic_weight", "bm25_k1", "bm25_b"),
    "forge": ("aspects", "constraint_word_limit", "aspect_word_limit", "max_attempts"),
}

_INT_KEYS = {"port", "k", "aspects", "constraint_word_limit", "aspect_word_limit", "max_attempts"}
_FLOAT_KEYS = {"tau", "lexical_weight", "semantic_weight", "bm25_k1", "bm25_b"}

_DEFAULTS: dict[str, object] = {
    "backend": "mock",
    "api_base": "",
    "api_key": "",
    "model_constructor": "",
    "model_unlearned": "",
    "model_judge": "",
    "model_rephraser": "",
    "host": "127.0.0.1",
    "port": 8080,
    "kb_path": "kb.jsonl",
    "k": 1,
    "tau": 0.35,
    "lexical_weight": 0.5,
    "semantic_weight": 0.5,
    "bm25_k1": 1.2,
    "bm25_b": 0.75,
    "aspects": 5,
    "constraint_word_limit": 100,
    "aspect_word_limit": 80,
    "max_attempts": 3,
}

_ROLE_KEYS = {
    Role.Constructor: "model_constructor",
    Role.Unlearned: "model_unlearned",
    Role.Judge: "model_judge",
    Role.Rephraser: "model_rephraser",
}


@dataclass
class Settings:
    backend: str = "mock"
    api_base: str = ""
    api_key: str = ""
    models: dict[Role, str] = field(default_factory=dict)
    host: str = "127.0.0.1"
    port: int = 8080
    kb_path: str = "kb.jsonl"
    retrieval: RetrievalConfig = field(default_factory=RetrievalConfig)
    forge: ForgeConfig = field(default_factory=ForgeConfig)


def _coerce(key: str, value: object) -> object:
    if isinstance(value, str):
        try:
            if key in _INT_KEYS:
                return int(value)
            if key in _FLOAT_KEYS:
                return float(value)
        except ValueError:
            raise InvalidItemError(f"invalid value for {key}: {value!r}") from None
    return value


def _read_config_file(path: str | Path) -> dict[str, object]:
    parser = configparser.ConfigParser()
    try:
        with open(path, encoding="utf-8") as handle:
            parser.read_file(handle)
    except configparser.Error as exc:
        raise InvalidItemError(f"config file {path}: {exc}") from exc
    values: dict[str, object] = {}
    for section, keys in _FILE_KEYS.items():
        if not parser.has_section(section):
            continue
        for key in keys:
            if parser.has_option(section, key):
                values[key] = parser.get(section, key)
    return values


def load_settings(
    config_path: str | Path | None = None,
    overrides: Mapping[str, object] | None = None,
    env: Mapping[str, str] | None = None,
) -> Settings:
    """Merge defaults, config file, environment and explicit overrides
    (in rising precedence) into a Settings object."""
    env = os.environ if env is None else env
    merged = dict(_DEFAULTS)
    if config_path is not None:
        merged.update(_read_config_file(config_path))
    for env_key, key in _ENV_KEYS.items():
        if env_key in env and env[env_key] != "":
            merged[key] = env[env_key]
    for key, value in (overrides or {}).items():
        if value is not None:
            if key not in merged:
                raise InvalidItemError(f"unknown setting {key!r}")
            merged[key] = value
    merged = {key: _coerce(key, value) for key, value in merged.items()}

    backend = str(merged["backend"]).lower()
    if backend not in ("mock", "wire"):
        raise InvalidItemError(f"backend must be 'mock' or 'wire', got {backend!r}")
    models = {role: str(merged[key]) for role, key in _ROLE_KEYS.items() if merged[key]}
    return Settings(
        backend=backend,
        api_base=str(merged["api_base"]),
        api_key=str(merged["api_key"]),
        models=models,
        host=str(merged["host"]),
        port=int(merged["port"]),
        kb_path=str(merged["kb_path"]),
        retrieval=RetrievalConfig(
            k=int(merged["k"]),
            tau=float(merged["tau"]),
            lexical_weight=float(merged["lexical_weight"]),
            semantic_weight=float(merged["semantic_weight"]),
            bm25_k1=float(merged["bm25_k1"]),
            bm25_b=float(merged["bm25_b"]),
        ),
        forge=ForgeConfig(
            aspects=int(merged["aspects"]),
            constraint_word_limit=int(merged["constraint_word_limit"]),
            aspect_word_limit=int(merged["aspect_word_limit"]),
            max_attempts=int(merged["max_attempts"]),
        ),
    )


def build_service(settings: Settings) -> ChatService:
    """Chat service for the configured backend.

    Mock mode wires every role to the offline responders. Wire mode
    creates one HTTP client per role that has a model configured;
    unconfigured roles fail on first use.
    """
    if settings.backend == "mock":
        return make_offline_service()
    if not settings.api_base:
        raise BackendUnavailableError("wire backend requires api_base (OBLIVION_API_BASE)")
    backends = {
        role: WireChatBackend(settings.api_base, model, settings.api_key)
        for role, model in settings.models.items()
    }
    if Role.Unlearned not in backends:
        raise BackendUnavailableError("wire backend requires a model for the unlearned role")
    return ChatService(backends=backends)
