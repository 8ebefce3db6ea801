"""Exception types shared across the package.

Every error raised by this package derives from :class:`OblivionError`,
so callers can catch one type at the boundary. The CLI prints errors as
``<TypeName>: <message>`` and maps them to exit code 1; usage problems
surface as exit code 2 via argparse.
"""

from __future__ import annotations


class OblivionError(Exception):
    """Base class for all errors raised by this package."""


class DuplicateIdError(OblivionError):
    """An id already exists in the knowledge base."""


class UnknownIdError(OblivionError):
    """An id was not found in the knowledge base."""


class InvalidItemError(OblivionError):
    """A domain object failed validation."""


class KnowledgeBaseParseError(OblivionError):
    """A persisted knowledge-base file could not be parsed.

    Carries the 1-based line number and a short reason so operators can
    locate the corrupt record.
    """

    def __init__(self, line: int, reason: str) -> None:
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


class BackendUnavailableError(OblivionError):
    """A chat backend required for the operation is not configured."""


class WireError(OblivionError):
    """A remote chat API returned a non-retryable failure.

    ``status`` is the HTTP status code (0 for transport-level failures)
    and ``body`` holds a bounded excerpt of the response body.
    """

    def __init__(self, status: int, body: str) -> None:
        excerpt = body if len(body) <= 200 else body[:200] + "..."
        super().__init__(f"status {status}: {excerpt}")
        self.status = status
        self.body = excerpt


class MalformedAspectsError(OblivionError):
    """The aspect-generation model did not return a usable numbered list."""


class TemplateError(OblivionError):
    """A prompt template is missing required placeholders."""


class EmptySetError(OblivionError):
    """An evaluation was invoked on an empty prompt or record set."""


class RequestTooLargeError(OblivionError):
    """More items were requested than the generator can produce."""


class EmbedderUnavailableError(OblivionError):
    """The configured embedder cannot produce vectors."""
