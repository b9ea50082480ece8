from .base import (
    AuthFailed,
    BackendError,
    BackendUnavailable,
    ExtractionBackend,
    ExtractionRequest,
    ExtractionResponse,
    PageSource,
    PayloadTooLarge,
    RateLimited,
    RawDetection,
    extract,
)
from .mock import CORRUPT_CONFIDENCE, DEFAULT_CONFUSION, ConfusionTable, MockBackend, alignment_offset, is_detected, mock_extract
from .raster import RasterPage
from .remote import RemoteOCRBackend, parse_blocks, remote_extract
from .scene import CapacityError, SceneSpec, SceneWord, synth_scene

__all__ = [
    "AuthFailed", "BackendError", "BackendUnavailable", "CORRUPT_CONFIDENCE", "CapacityError",
    "ConfusionTable", "DEFAULT_CONFUSION", "ExtractionBackend", "ExtractionRequest",
    "ExtractionResponse", "MockBackend", "PageSource", "PayloadTooLarge", "RasterPage",
    "RateLimited", "RawDetection", "RemoteOCRBackend", "SceneSpec", "SceneWord",
    "alignment_offset", "extract", "is_detected", "mock_extract", "parse_blocks",
    "remote_extract", "synth_scene",
]
