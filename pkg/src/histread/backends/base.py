"""Backend-agnostic extraction contract."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Protocol, Sequence, runtime_checkable

from ..errors import AuthFailed, BackendError, BackendUnavailable, PayloadTooLarge, RateLimited  # noqa: F401
from ..geometry import BBox, Dims, TileRect


@dataclass(frozen=True)
class RawDetection:
    text: str
    bbox: BBox  # in the request frame
    confidence: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")


@dataclass(frozen=True)
class ExtractionRequest:
    """One extraction pass: content already rotated by ``scan_angle_deg``."""

    content: Any
    frame_dims: Dims
    scan_angle_deg: float


@dataclass(frozen=True)
class ExtractionResponse:
    detections: tuple[RawDetection, ...]
    backend_id: str
    meta: dict[str, Any] = field(default_factory=dict, compare=False)


@runtime_checkable
class ExtractionBackend(Protocol):
    backend_id: str

    def extract(self, request: ExtractionRequest) -> ExtractionResponse: ...


class PageSource(Protocol):
    """Something the ensemble can rotate, crop, and hand to a backend."""

    dims: Dims

    def request(self, scan_angle_deg: float) -> ExtractionRequest: ...

    def crop(self, rect: BBox) -> "PageSource": ...

    def boundary_loss(self, tiles: Sequence[TileRect]) -> int: ...


def extract(request: ExtractionRequest, backend: ExtractionBackend) -> ExtractionResponse:
    return backend.extract(request)
