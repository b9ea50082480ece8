"""JSON-over-HTTP calls with retry, concurrency cap and rate limit."""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass
from typing import Any, Callable, TypeVar

import httpx
from tenacity import RetryError, Retrying, retry_if_exception, stop_after_attempt, wait_exponential_jitter

from .errors import AuthFailed, BackendError, BackendUnavailable, PayloadTooLarge, RateLimited

T = TypeVar("T")


@dataclass(frozen=True)
class RetryPolicy:
    """Exponential backoff: ``base * factor**(n-1)`` plus up to ``jitter`` seconds."""

    max_attempts: int = 5
    base_s: float = 1.0
    factor: float = 2.0
    jitter_s: float = 0.25
    max_wait_s: float = 60.0


def call_with_retry(
    fn: Callable[[], T],
    policy: RetryPolicy,
    sleep: Callable[[float], None] = time.sleep,
    on_attempt: Callable[[int], None] | None = None,
) -> T:
    """Run ``fn`` until it succeeds, raises a terminal error, or attempts run out."""
    retrying = Retrying(
        stop=stop_after_attempt(policy.max_attempts),
        wait=wait_exponential_jitter(
            initial=policy.base_s, exp_base=policy.factor, max=policy.max_wait_s, jitter=policy.jitter_s
        ),
        retry=retry_if_exception(lambda e: isinstance(e, BackendError) and e.retryable),
        sleep=sleep,
        reraise=True,
    )

    count = 0

    def attempt() -> T:
        nonlocal count
        count += 1
        if on_attempt is not None:
            on_attempt(count)
        return fn()

    try:
        return retrying(attempt)
    except RetryError as e:  # pragma: no cover - reraise=True surfaces the original
        raise e.last_attempt.exception() from None


class Throttle:
    """Caps in-flight calls and spaces call starts to at most ``rate_per_s`` per second."""

    def __init__(self, max_in_flight: int = 4, rate_per_s: float | None = None,
                 clock: Callable[[], float] = time.monotonic,
                 sleep: Callable[[float], None] = time.sleep):
        if max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")
        self._slots = threading.BoundedSemaphore(max_in_flight)
        self._interval = 1.0 / rate_per_s if rate_per_s else 0.0
        self._lock = threading.Lock()
        self._next_start = 0.0
        self._clock, self._sleep = clock, sleep

    def __enter__(self) -> "Throttle":
        self._slots.acquire()
        if self._interval:
            with self._lock:
                now = self._clock()
                start = max(now, self._next_start)
                self._next_start = start + self._interval
            if start > now:
                self._sleep(start - now)
        return self

    def __exit__(self, *exc: object) -> None:
        self._slots.release()


def post_json(client: httpx.Client, url: str, key: str, payload: dict[str, Any],
              unavailable: type[BackendError] = BackendUnavailable) -> dict[str, Any]:
    """POST ``payload`` and map transport and HTTP failures onto :class:`BackendError`."""
    try:
        resp = client.post(url, json=payload, headers={"Authorization": f"Bearer {key}"})
    except httpx.TransportError as e:
        raise unavailable(f"transport error: {e}") from e
    status = resp.status_code
    if status in (401, 403):
        raise AuthFailed(f"HTTP {status} from {url}")
    if status == 413:
        raise PayloadTooLarge(f"HTTP 413 from {url}")
    if status == 429:
        raise RateLimited(f"HTTP 429 from {url}")
    if status >= 500:
        raise unavailable(f"HTTP {status} from {url}")
    if status >= 400:
        raise BackendError(f"HTTP {status} from {url}")
    try:
        body = resp.json()
    except ValueError as e:
        raise BackendError(f"non-JSON response from {url}") from e
    if not isinstance(body, dict):
        raise BackendError(f"unexpected response shape from {url}")
    return body
