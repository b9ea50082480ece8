"""Confidence-threshold flagging and masked-LM word correction."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Mapping, Protocol, Sequence

import httpx

from ._http import RetryPolicy, call_with_retry, post_json
from .document import Candidate, CorrectionRecord, Document
from .errors import AuthFailed, BackendError, LMUnavailable

MASK = "[MASK]"


@dataclass(frozen=True)
class CorrectionConfig:
    confidence_threshold: float = 0.90
    k: int = 3
    lm_weight_lambda: float = 0.7
    accept_floor_kappa: float = 0.5
    context_window_words: int = 25

    def __post_init__(self) -> None:
        for name in ("confidence_threshold", "lm_weight_lambda", "accept_floor_kappa"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.context_window_words < 0:
            raise ValueError("context_window_words must be >= 0")


class MaskedLMClient(Protocol):
    def predict(self, text: str, k: int) -> list[Candidate]: ...


class MockMaskedLM:
    """Fixed lookup from masked sentence to ranked candidates.

    Table files are JSON objects mapping the sentence (with one ``[MASK]``) to
    a list of ``{"token": str, "p": float}``.
    """

    def __init__(self, table: Mapping[str, Sequence[Any]] | None = None):
        self.table: dict[str, list[Candidate]] = {}
        for sentence, cands in (table or {}).items():
            self.table[sentence] = [_candidate(c) for c in cands]
        self.calls: list[str] = []

    @classmethod
    def from_file(cls, path: str | Path) -> "MockMaskedLM":
        return cls(json.loads(Path(path).read_text(encoding="utf-8")))

    def to_json(self) -> dict[str, list[dict[str, Any]]]:
        return {s: [{"token": c.token, "p": c.lm_probability} for c in cs] for s, cs in sorted(self.table.items())}

    def predict(self, text: str, k: int) -> list[Candidate]:
        self.calls.append(text)
        ranked = sorted(self.table.get(text, []), key=lambda c: -c.lm_probability)
        return ranked[:k]


def _candidate(c: Any) -> Candidate:
    if isinstance(c, Candidate):
        return c
    if isinstance(c, Mapping):
        return Candidate(str(c["token"]), float(c["p"]))
    token, p = c
    return Candidate(str(token), float(p))


class HttpMaskedLM:
    """Fill-mask service: ``{"text", "k"}`` in, ``{"candidates": [{"token", "p"}]}`` out."""

    def __init__(self, endpoint: str, key: str, *, client: httpx.Client | None = None,
                 policy: RetryPolicy = RetryPolicy(), sleep=None):
        if not endpoint or not key:
            raise AuthFailed("masked-LM endpoint and key are required")
        self.endpoint, self._key = endpoint, key
        self.client = client or httpx.Client(timeout=60.0)
        self.policy = policy
        self._sleep = sleep

    @classmethod
    def from_env(cls, env: Mapping[str, str] = os.environ, **kw: Any) -> "HttpMaskedLM":
        base = env.get("LM_ENDPOINT", "")
        if not base or not env.get("LM_KEY"):
            raise AuthFailed("set LM_ENDPOINT and LM_KEY to use the remote language model")
        return cls(base.rstrip("/") + "/fill-mask", env["LM_KEY"], **kw)

    def predict(self, text: str, k: int) -> list[Candidate]:
        def once() -> dict[str, Any]:
            return post_json(self.client, self.endpoint, self._key, {"text": text, "k": k}, unavailable=LMUnavailable)

        kw = {"sleep": self._sleep} if self._sleep else {}
        body = call_with_retry(once, self.policy, **kw)
        try:
            return [Candidate(str(c["token"]), float(c["p"])) for c in body["candidates"]]
        except (KeyError, TypeError, ValueError) as e:
            raise BackendError(f"malformed fill-mask response: {e}") from None


def levenshtein(a: str, b: str) -> int:
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def char_sim(a: str, b: str) -> float:
    longest = max(len(a), len(b))
    if longest == 0:
        return 1.0
    return 1.0 - levenshtein(a, b) / longest


def masked_context(tokens: Sequence[str], index: int, window: int) -> str:
    """The ``window`` tokens either side of ``tokens[index]``, with that token masked."""
    lo, hi = max(0, index - window), min(len(tokens), index + window + 1)
    return " ".join(MASK if i == index else tokens[i] for i in range(lo, hi))


def flag_low_confidence(doc: Document, threshold: float) -> list[str]:
    """Ids of words whose confidence is below ``threshold``, in reading order."""
    return [w.id for w in doc.words_in_reading_order() if w.confidence < threshold]


def propose_candidates(masked_text: str, k: int, lm_client: MaskedLMClient) -> list[Candidate]:
    if masked_text.count(MASK) != 1:
        raise ValueError(f"expected exactly one {MASK} in {masked_text!r}")
    if k < 1:
        raise ValueError("k must be >= 1")
    cands = lm_client.predict(masked_text, k)
    return sorted(cands, key=lambda c: -c.lm_probability)[:k]


def select_replacement(
    original: str,
    original_confidence: float,
    candidates: Sequence[Candidate],
    config: CorrectionConfig = CorrectionConfig(),
    word_id: str = "",
) -> CorrectionRecord:
    """Score each candidate by LM probability blended with spelling similarity to the OCR token.

    ``score = lambda * p + (1 - lambda) * char_sim(original, token)``. The best
    candidate replaces the original only if it scores at least ``kappa`` and
    differs from it.
    """
    if not candidates:
        return CorrectionRecord(word_id, original, original_confidence, (), original, 0.0, "kept", "no candidates")
    lam = config.lm_weight_lambda
    scored = [
        (lam * c.lm_probability + (1 - lam) * char_sim(original, c.token), c)
        for c in candidates
    ]
    score, best = min(scored, key=lambda sc: (-sc[0], -sc[1].lm_probability, sc[1].token))
    cands = tuple(candidates)
    if best.token == original:
        return CorrectionRecord(word_id, original, original_confidence, cands, original, score, "kept", "original is best")
    if score < config.accept_floor_kappa:
        return CorrectionRecord(word_id, original, original_confidence, cands, original, score, "kept", "below acceptance floor")
    return CorrectionRecord(word_id, original, original_confidence, cands, best.token, score, "replaced")


def apply_corrections(doc: Document, config: CorrectionConfig, lm_client: MaskedLMClient) -> Document:
    """Return a copy of ``doc`` with low-confidence words corrected.

    Words are visited in reading order and each query sees the corrections
    made before it. Every flagged word gets a record, including words kept
    because the LM had nothing better or failed. A replaced word takes the
    combined score as its new confidence.
    """
    order = doc.words_in_reading_order()
    tokens = [w.text for w in order]
    words = dict(doc.words)
    records = []
    for i, w in enumerate(order):
        if w.confidence >= config.confidence_threshold:
            continue
        context = masked_context(tokens, i, config.context_window_words)
        try:
            cands = propose_candidates(context, config.k, lm_client)
        except BackendError as e:
            records.append(CorrectionRecord(w.id, w.text, w.confidence, (), w.text, 0.0, "kept", f"lm error: {e}"))
            continue
        rec = select_replacement(w.text, w.confidence, cands, config, word_id=w.id)
        records.append(rec)
        if rec.action == "replaced":
            ocr_token = w.corrected_from or w.text
            words[w.id] = replace(
                w,
                text=rec.chosen,
                confidence=min(1.0, max(0.0, rec.combined_score)),
                corrected_from=None if ocr_token == rec.chosen else ocr_token,
            )
            tokens[i] = rec.chosen
    return replace(doc, words=words, corrections=tuple(records))
