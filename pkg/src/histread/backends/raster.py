"""Scanned-image page source for real extraction services."""

from __future__ import annotations

import io
import math
from pathlib import Path
from typing import Sequence

from PIL import Image

from ..geometry import BBox, Dims, TileRect
from .base import ExtractionRequest


class RasterPage:
    """A page image that can be rotated onto an expanded canvas and cropped.

    Rotation uses ``Image.rotate(theta, expand=True)``, which matches the
    page-rotation convention of :mod:`histread.geometry`. The rotated canvas
    size is whatever Pillow produces, and that size is what back-projection
    must use.
    """

    def __init__(self, image: Image.Image, uri: str = ""):
        self.image = image.convert("RGB") if image.mode not in ("RGB", "L") else image
        self.uri = uri
        self.dims = Dims(float(image.width), float(image.height))

    @classmethod
    def open(cls, path: str | Path) -> "RasterPage":
        with Image.open(path) as im:
            im.load()
            return cls(im.copy(), str(path))

    def request(self, scan_angle_deg: float) -> ExtractionRequest:
        if scan_angle_deg % 360.0 == 0.0:
            rotated = self.image
        else:
            rotated = self.image.rotate(scan_angle_deg, resample=Image.BICUBIC, expand=True, fillcolor="white")
        return ExtractionRequest(rotated, Dims(float(rotated.width), float(rotated.height)), scan_angle_deg)

    def crop(self, rect: BBox) -> "RasterPage":
        box = (math.floor(rect.left), math.floor(rect.top), math.ceil(rect.right), math.ceil(rect.bottom))
        return RasterPage(self.image.crop(box), self.uri)

    def boundary_loss(self, tiles: Sequence[TileRect]) -> int:
        return 0  # unknowable without ground truth


def encode_png(image: Image.Image) -> bytes:
    buf = io.BytesIO()
    image.save(buf, format="PNG")
    return buf.getvalue()
