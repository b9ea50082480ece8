"""Client for a hosted text-detection service.

Wire contract, version 1::

    POST $REMOTE_OCR_ENDPOINT
    Authorization: Bearer $REMOTE_OCR_KEY
    {"image": "<base64 PNG>", "features": ["TEXT"]}

    200 {"blocks": [{"type": "WORD" | "LINE" | "PAGE", "text": str,
                     "bbox": {"l": f, "t": f, "r": f, "b": f},   # 0..1 of the sent image
                     "confidence": 0..100}]}

Only WORD blocks become detections. Confidences are divided by 100 here and
nowhere else.
"""

from __future__ import annotations

import base64
import os
import time
from typing import Any, Callable, Mapping

import httpx

from .._http import RetryPolicy, Throttle, call_with_retry, post_json
from ..errors import AuthFailed, BackendError, PayloadTooLarge
from ..geometry import BBox, Dims
from .base import ExtractionRequest, ExtractionResponse, RawDetection
from .raster import encode_png

ENDPOINT_ENV = "REMOTE_OCR_ENDPOINT"
KEY_ENV = "REMOTE_OCR_KEY"
DEFAULT_MAX_PAYLOAD = 10 * 1024 * 1024


def parse_blocks(payload: Mapping[str, Any], frame: Dims, backend_id: str = "remote") -> ExtractionResponse:
    """Translate a service response into detections in the request frame."""
    blocks = payload.get("blocks")
    if not isinstance(blocks, list):
        raise BackendError("response has no 'blocks' list")
    out = []
    for i, blk in enumerate(blocks):
        if not isinstance(blk, dict) or blk.get("type") != "WORD":
            continue
        try:
            text = str(blk["text"])
            bb = blk["bbox"]
            conf = float(blk["confidence"]) / 100.0
            l, t, r, b = (float(bb[k]) for k in ("l", "t", "r", "b"))
        except (KeyError, TypeError, ValueError) as e:
            raise BackendError(f"malformed block {i}: {e}") from None
        if not text:
            continue
        l, r = max(0.0, l) * frame.width, min(1.0, r) * frame.width
        t, b = max(0.0, t) * frame.height, min(1.0, b) * frame.height
        if not (l < r and t < b):
            continue
        out.append(RawDetection(text, BBox(l, t, r, b), min(1.0, max(0.0, conf))))
    return ExtractionResponse(tuple(out), backend_id)


class RemoteOCRBackend:
    def __init__(
        self,
        endpoint: str,
        key: str,
        *,
        client: httpx.Client | None = None,
        policy: RetryPolicy = RetryPolicy(),
        max_in_flight: int = 4,
        rate_per_s: float | None = None,
        max_payload_bytes: int = DEFAULT_MAX_PAYLOAD,
        sleep: Callable[[float], None] = time.sleep,
        backend_id: str = "remote",
    ):
        if not endpoint or not key:
            raise AuthFailed("remote OCR endpoint and key are required")
        self.endpoint, self._key = endpoint, key
        self.client = client or httpx.Client(timeout=60.0)
        self.policy = policy
        self.max_payload_bytes = max_payload_bytes
        self.backend_id = backend_id
        self.last_attempts = 0
        self._sleep = sleep
        self._throttle = Throttle(max_in_flight, rate_per_s, sleep=sleep)

    @classmethod
    def from_env(cls, env: Mapping[str, str] = os.environ, **kw: Any) -> "RemoteOCRBackend":
        endpoint, key = env.get(ENDPOINT_ENV, ""), env.get(KEY_ENV, "")
        if not endpoint or not key:
            raise AuthFailed(f"set {ENDPOINT_ENV} and {KEY_ENV} to use the remote backend")
        return cls(endpoint, key, **kw)

    def _encode(self, content: Any) -> bytes:
        if isinstance(content, (bytes, bytearray)):
            return bytes(content)
        if hasattr(content, "save"):
            return encode_png(content)
        raise TypeError(f"cannot send {type(content).__name__} to the remote service")

    def extract(self, request: ExtractionRequest) -> ExtractionResponse:
        raw = self._encode(request.content)
        if len(raw) > self.max_payload_bytes:
            self.last_attempts = 0
            raise PayloadTooLarge(f"{len(raw)} bytes exceeds {self.max_payload_bytes}")
        body = {"image": base64.b64encode(raw).decode("ascii"), "features": ["TEXT"]}

        attempts = 0

        def count(n: int) -> None:
            nonlocal attempts
            attempts = n

        def once() -> dict[str, Any]:
            with self._throttle:
                return post_json(self.client, self.endpoint, self._key, body)

        try:
            payload = call_with_retry(once, self.policy, self._sleep, count)
        finally:
            self.last_attempts = attempts
        return parse_blocks(payload, request.frame_dims, self.backend_id)


def remote_extract(request: ExtractionRequest, backend: RemoteOCRBackend | None = None) -> ExtractionResponse:
    return (backend or RemoteOCRBackend.from_env()).extract(request)
