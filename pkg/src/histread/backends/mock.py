"""Deterministic extraction backend driven by a :class:`SceneSpec`.

It reads a word only when the page has been rotated to within
``alignment_tolerance_deg`` of the word's baseline, the way an engine built
for horizontal text behaves, and it garbles words flagged corrupt through a
confusion table at a fixed confidence of 0.6679.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..geometry import forward_project_quad, rotated_canvas_dims, wrap180
from .base import ExtractionRequest, ExtractionResponse, RawDetection
from .scene import SceneSpec, SceneWord

CORRUPT_CONFIDENCE = 0.6679


@dataclass(frozen=True)
class ConfusionTable:
    """Ordered ``(pattern, replacement)`` rewrites; the first pattern found in a word wins."""

    pairs: tuple[tuple[str, str], ...]

    def __post_init__(self) -> None:
        for pattern, replacement in self.pairs:
            if not pattern or pattern == replacement:
                raise ValueError(f"bad confusion pair ({pattern!r}, {replacement!r})")

    def apply(self, text: str) -> str:
        for pattern, replacement in self.pairs:
            if pattern in text:
                return text.replace(pattern, replacement, 1)
        return text


DEFAULT_CONFUSION = ConfusionTable((
    ("hand", "fund"),
    ("home", "horne"),
    ("dear", "clear"),
    ("camp", "carnp"),
    ("well", "weil"),
    ("write", "wnte"),
    ("mother", "rnother"),
    ("little", "httle"),
    ("army", "arrny"),
    ("time", "tirne"),
))


def alignment_offset(orientation_deg: float, scan_angle_deg: float, flip_readable: bool = False) -> float:
    """Residual rotation of a word after scanning at ``scan_angle_deg``."""
    delta = wrap180(orientation_deg - scan_angle_deg)
    if flip_readable:
        flipped = wrap180(delta - 180.0)
        if abs(flipped) < abs(delta):
            delta = flipped
    return delta


def is_detected(word: SceneWord, scan_angle_deg: float, tolerance_deg: float, flip_readable: bool = False) -> bool:
    return abs(alignment_offset(word.orientation_deg, scan_angle_deg, flip_readable)) <= tolerance_deg


def mock_extract(
    scene: SceneSpec,
    scan_angle_deg: float,
    alignment_tolerance_deg: float = 15.0,
    confusion: ConfusionTable = DEFAULT_CONFUSION,
    *,
    flip_readable: bool = False,
    backend_id: str = "mock",
) -> ExtractionResponse:
    if not 0.0 < alignment_tolerance_deg <= 90.0:
        raise ValueError("alignment_tolerance_deg must lie in (0, 90]")
    frame = rotated_canvas_dims(scene.dims, scan_angle_deg)
    out = []
    for word in scene.words:
        delta = alignment_offset(word.orientation_deg, scan_angle_deg, flip_readable)
        if abs(delta) > alignment_tolerance_deg:
            continue
        if word.corrupt:
            text, conf = confusion.apply(word.true_text), CORRUPT_CONFIDENCE
        else:
            text, conf = word.true_text, 1.0 - abs(delta) / 90.0
        box = forward_project_quad(word.quad(), scan_angle_deg, scene.dims, frame)
        out.append(RawDetection(text, box.clamp(frame.width, frame.height), conf))
    return ExtractionResponse(tuple(out), backend_id)


class MockBackend:
    """Scene-driven stand-in for a real extraction service."""

    def __init__(
        self,
        alignment_tolerance_deg: float = 15.0,
        confusion: ConfusionTable = DEFAULT_CONFUSION,
        *,
        flip_readable: bool = False,
        backend_id: str = "mock",
    ):
        if not 0.0 < alignment_tolerance_deg <= 90.0:
            raise ValueError("alignment_tolerance_deg must lie in (0, 90]")
        self.alignment_tolerance_deg = alignment_tolerance_deg
        self.confusion = confusion
        self.flip_readable = flip_readable
        self.backend_id = backend_id

    def extract(self, request: ExtractionRequest) -> ExtractionResponse:
        if not isinstance(request.content, SceneSpec):
            raise TypeError("MockBackend only reads SceneSpec content")
        return mock_extract(
            request.content,
            request.scan_angle_deg,
            self.alignment_tolerance_deg,
            self.confusion,
            flip_readable=self.flip_readable,
            backend_id=self.backend_id,
        )

