"""Sentence-aware chunking and map-reduce summarization."""

from __future__ import annotations

import os
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Mapping, Protocol

import httpx

from ._http import RetryPolicy, call_with_retry, post_json
from .errors import AuthFailed, BackendError, LMUnavailable, SummarizationFailed

DEFAULT_INSTRUCTION = (
    "Rewrite the following historical text in plain modern English and summarize it "
    "for a present-day reader. Replace archaic words and spellings with current ones."
)
MAX_REDUCE_DEPTH = 10

_SENTENCE_END = re.compile(r"[.?!]\s+")
_FIRST_SENTENCE = re.compile(r"^.*?[.?!](?=\s|$)", re.DOTALL)


@dataclass(frozen=True)
class SummaryConfig:
    max_chunk_chars: int = 12000
    max_summary_chars: int = 1500
    instruction: str = DEFAULT_INSTRUCTION
    reduce_threshold_chunks: int = 2
    workers: int = 1

    def __post_init__(self) -> None:
        if not self.max_chunk_chars > self.max_summary_chars > 0:
            raise ValueError("need max_chunk_chars > max_summary_chars > 0")
        if self.reduce_threshold_chunks < 1:
            raise ValueError("reduce_threshold_chunks must be >= 1")


class SummarizerClient(Protocol):
    def summarize(self, instruction: str, text: str, max_chars: int) -> str: ...


class FirstSentenceSummarizer:
    """Deterministic stand-in: the first sentence of the input, cut to ``max_chars``."""

    def __init__(self) -> None:
        self.calls: list[str] = []

    def summarize(self, instruction: str, text: str, max_chars: int) -> str:
        self.calls.append(text)
        stripped = text.strip()
        m = _FIRST_SENTENCE.match(stripped)
        first = m.group(0) if m else stripped
        return first[:max_chars]


class HttpSummarizer:
    """Generative LM service: ``{"instruction", "text", "max_chars"}`` in, ``{"summary"}`` out."""

    def __init__(self, endpoint: str, key: str, *, client: httpx.Client | None = None,
                 policy: RetryPolicy = RetryPolicy(), sleep=None):
        if not endpoint or not key:
            raise AuthFailed("summarizer endpoint and key are required")
        self.endpoint, self._key = endpoint, key
        self.client = client or httpx.Client(timeout=300.0)
        self.policy = policy
        self._sleep = sleep

    @classmethod
    def from_env(cls, env: Mapping[str, str] = os.environ, **kw: Any) -> "HttpSummarizer":
        base = env.get("LM_ENDPOINT", "")
        if not base or not env.get("LM_KEY"):
            raise AuthFailed("set LM_ENDPOINT and LM_KEY to use the remote language model")
        return cls(base.rstrip("/") + "/summarize", env["LM_KEY"], **kw)

    def summarize(self, instruction: str, text: str, max_chars: int) -> str:
        payload = {"instruction": instruction, "text": text, "max_chars": max_chars}

        def once() -> dict[str, Any]:
            return post_json(self.client, self.endpoint, self._key, payload, unavailable=LMUnavailable)

        kw = {"sleep": self._sleep} if self._sleep else {}
        body = call_with_retry(once, self.policy, **kw)
        summary = body.get("summary")
        if not isinstance(summary, str):
            raise BackendError("summarizer response has no 'summary' string")
        return summary


def chunk_text(text: str, max_chunk_chars: int) -> list[str]:
    """Greedy sentence packing; ``"".join(chunks) == text`` always.

    A sentence keeps the whitespace that follows it, so boundaries fall right
    after that whitespace. A sentence longer than the limit is cut into
    limit-sized pieces.
    """
    if max_chunk_chars < 1:
        raise ValueError("max_chunk_chars must be >= 1")
    if not text:
        return []
    units, start = [], 0
    for m in _SENTENCE_END.finditer(text):
        units.append(text[start:m.end()])
        start = m.end()
    if start < len(text):
        units.append(text[start:])

    chunks: list[str] = []
    cur = ""
    for unit in units:
        if len(cur) + len(unit) <= max_chunk_chars:
            cur += unit
            continue
        if cur:
            chunks.append(cur)
            cur = ""
        while len(unit) > max_chunk_chars:
            chunks.append(unit[:max_chunk_chars])
            unit = unit[max_chunk_chars:]
        cur = unit
    if cur:
        chunks.append(cur)
    return chunks


def _map(chunks: list[str], config: SummaryConfig, client: SummarizerClient, done: list[str]) -> list[str]:
    def one(chunk: str) -> str:
        return client.summarize(config.instruction, chunk, config.max_summary_chars).strip()

    if config.workers == 1:
        for c in chunks:
            done.append(one(c))
        return done
    with ThreadPoolExecutor(max_workers=config.workers) as pool:
        done.extend(pool.map(one, chunks))
    return done


def summarize(text: str, config: SummaryConfig, lm_client: SummarizerClient) -> str:
    """Summarize each chunk, then summarize the joined summaries until one short summary remains.

    A reduce pass runs when there are more than ``reduce_threshold_chunks``
    chunk summaries or when their joined text is still too long.
    """
    if not text.strip():
        raise ValueError("nothing to summarize")
    current = text
    prev_chunks: int | None = None
    for _ in range(MAX_REDUCE_DEPTH):
        chunks = chunk_text(current, config.max_chunk_chars)
        if prev_chunks is not None and len(chunks) >= prev_chunks and prev_chunks > 1:
            raise SummarizationFailed("reduce pass did not shrink the text", [current])
        partial: list[str] = []
        try:
            _map(chunks, config, lm_client, partial)
        except BackendError as e:
            raise SummarizationFailed(f"language model failed: {e}", partial) from e
        joined = " ".join(s for s in partial if s)
        if not joined:
            raise SummarizationFailed("language model returned empty summaries", partial)
        if len(partial) <= config.reduce_threshold_chunks and len(joined) <= config.max_summary_chars:
            return joined
        prev_chunks, current = len(chunks), joined
    raise SummarizationFailed(f"no summary within {MAX_REDUCE_DEPTH} reduce passes", [current])
