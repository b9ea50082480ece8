"""Error types shared by the extraction and language-model clients."""

from __future__ import annotations

from typing import Any


class BackendError(Exception):
    """A remote call failed. ``retryable`` says whether another attempt may succeed.

    ``context`` collects where it happened (angle, tile, word id) as the error
    propagates.
    """

    retryable = False

    def __init__(self, message: str = "", **context: Any):
        super().__init__(message)
        self.context: dict[str, Any] = dict(context)

    def __str__(self) -> str:
        base = super().__str__()
        if not self.context:
            return base
        ctx = ", ".join(f"{k}={v}" for k, v in sorted(self.context.items()))
        return f"{base} [{ctx}]"


class BackendUnavailable(BackendError):
    retryable = True


class RateLimited(BackendError):
    retryable = True


class AuthFailed(BackendError):
    pass


class PayloadTooLarge(BackendError):
    """The request was too big for the service; tile the page and retry per tile."""


class LMUnavailable(BackendUnavailable):
    """The language-model service did not answer."""


class SummarizationFailed(Exception):
    """Summarization gave up; ``partial`` holds whatever chunk summaries succeeded."""

    def __init__(self, message: str, partial: list[str] | None = None):
        super().__init__(message)
        self.partial = list(partial or [])
