"""RAG-based machine unlearning for black-box chat models.

Forge unlearned knowledge for targets you want forgotten, serve chat
traffic through a retrieve-and-inject gateway so the model refuses on
target hits and passes everything else through untouched, and verify
the forgetting with judge-, overlap- and robustness-based metrics.
"""

from .errors import (
    BackendUnavailableError,
    DuplicateIdError,
    EmbedderUnavailableError,
    EmptySetError,
    InvalidItemError,
    KnowledgeBaseParseError,
    MalformedAspectsError,
    OblivionError,
    RequestTooLargeError,
    TemplateError,
    UnknownIdError,
    WireError,
)
from .evalkit import (
    AttackKind,
    EvalRecord,
    EvalReport,
    ForgottenSetEntry,
    HarmlessnessResult,
    JudgeTemplate,
    RephraseResult,
    Verdict,
    evaluate,
    generate_questions,
    harmlessness_check,
    hop,
    load_forgotten_set,
    offline_rephrase,
    rephrase_llm,
    rouge_l_recall,
    save_forgotten_set,
    usr_judge,
    wrap_attack,
)
from .forge import (
    ForgeConfig,
    craft_constraint,
    craft_retrieval,
    generate_unlearned_knowledge,
    probe_question,
    relatedness_check,
)
from .gateway import GatewayAnswer, PromptTemplate, UnlearningGateway, create_app, run_server
from .kb import (
    CONSTRAINT_PREFIX,
    BenignItem,
    ConstraintComponent,
    KnowledgeBase,
    RetrievalComponent,
    Target,
    TargetKind,
    UnlearnedKnowledgeItem,
)
from .llm import (
    REFUSAL_TEXT,
    ChatRequest,
    ChatResponse,
    ChatService,
    MockChatBackend,
    Role,
    ScriptedRule,
    WireChatBackend,
)
from .offline import make_offline_service
from .retrieval import (
    EntryKind,
    EntryRef,
    HashedEmbedder,
    RetrievalConfig,
    RetrievalOutcome,
    Retriever,
    ScoredEntry,
    cosine,
)

__version__ = "0.1.0"

__all__ = [
    "AttackKind",
    "BackendUnavailableError",
    "BenignItem",
    "CONSTRAINT_PREFIX",
    "ChatRequest",
    "ChatResponse",
    "ChatService",
    "ConstraintComponent",
    "DuplicateIdError",
    "EmbedderUnavailableError",
    "EmptySetError",
    "EntryKind",
    "EntryRef",
    "EvalRecord",
    "EvalReport",
    "ForgeConfig",
    "ForgottenSetEntry",
    "GatewayAnswer",
    "HarmlessnessResult",
    "HashedEmbedder",
    "InvalidItemError",
    "JudgeTemplate",
    "KnowledgeBase",
    "KnowledgeBaseParseError",
    "MalformedAspectsError",
    "MockChatBackend",
    "OblivionError",
    "PromptTemplate",
    "REFUSAL_TEXT",
    "RephraseResult",
    "RequestTooLargeError",
    "RetrievalComponent",
    "RetrievalConfig",
    "RetrievalOutcome",
    "Retriever",
    "Role",
    "ScoredEntry",
    "ScriptedRule",
    "Target",
    "TargetKind",
    "TemplateError",
    "UnknownIdError",
    "UnlearnedKnowledgeItem",
    "UnlearningGateway",
    "Verdict",
    "WireChatBackend",
    "WireError",
    "cosine",
    "craft_constraint",
    "craft_retrieval",
    "create_app",
    "evaluate",
    "generate_questions",
    "generate_unlearned_knowledge",
    "harmlessness_check",
    "hop",
    "load_forgotten_set",
    "make_offline_service",
    "offline_rephrase",
    "probe_question",
    "relatedness_check",
    "rephrase_llm",
    "rouge_l_recall",
    "run_server",
    "save_forgotten_set",
    "usr_judge",
    "wrap_attack",
]
