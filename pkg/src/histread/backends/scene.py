"""Synthetic pages with known ground truth.

A scene lists words with their true text, their page box, and the baseline
orientation. ``orientation_deg`` is the direction of the baseline in page
coordinates (``atan2(dy, dx)`` with y down), which is also the page rotation
that makes the word horizontal.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Sequence

from ..geometry import BBox, Dims, Point, TileRect, rotated_canvas_dims
from .base import ExtractionRequest

SCENE_SCHEMA_VERSION = "1"

# glyph geometry for generated words, as fractions of the page height
_GLYPH_HEIGHT = 0.014
_GLYPH_WIDTH = 0.008

VOCABULARY = (
    "dear", "wife", "letter", "received", "yesterday", "health", "regiment",
    "march", "river", "orders", "father", "brother", "weather", "rain",
    "cold", "pay", "money", "send", "news", "friends", "corn", "horses",
    "captain", "soon", "love", "children", "kiss", "church", "sunday",
    "battle", "rebels", "picket", "tent", "bread", "coffee", "winter",
    "spring", "county", "neighbors", "farm", "wheat", "mill", "road",
    "bridge", "mountain", "valley", "creek", "station", "town", "court",
)


class CapacityError(ValueError):
    """The requested words do not fit on the page."""


@dataclass(frozen=True)
class SceneWord:
    true_text: str
    bbox: BBox
    orientation_deg: float = 0.0
    corrupt: bool = False
    extent: tuple[float, float] | None = None  # (length, height) of the unrotated text box
    reading_order: int | None = None

    def __post_init__(self) -> None:
        if not self.true_text:
            raise ValueError("scene word needs text")
        if not 0.0 <= self.orientation_deg < 360.0:
            raise ValueError(f"orientation {self.orientation_deg} outside [0, 360)")

    @classmethod
    def oriented(cls, text: str, center: Point, length: float, height: float,
                 orientation_deg: float, **kw: Any) -> "SceneWord":
        quad = _text_quad(center, length, height, orientation_deg)
        return cls(text, BBox.from_points(quad), orientation_deg, extent=(length, height), **kw)

    def quad(self) -> tuple[Point, ...]:
        """Outline of the word's text; falls back to the box when no extent is known."""
        if self.extent is None:
            return self.bbox.corners()
        return _text_quad(self.bbox.center, *self.extent, self.orientation_deg)

    def translate(self, dx: float, dy: float) -> "SceneWord":
        return replace(self, bbox=self.bbox.translate(dx, dy))


def _text_quad(center: Point, length: float, height: float, orientation_deg: float) -> tuple[Point, ...]:
    rad = math.radians(orientation_deg)
    ux, uy = math.cos(rad) * length / 2, math.sin(rad) * length / 2
    nx, ny = -math.sin(rad) * height / 2, math.cos(rad) * height / 2
    cx, cy = center.x, center.y
    return (
        Point(cx - ux - nx, cy - uy - ny),
        Point(cx + ux - nx, cy + uy - ny),
        Point(cx + ux + nx, cy + uy + ny),
        Point(cx - ux + nx, cy - uy + ny),
    )


@dataclass(frozen=True)
class SceneSpec:
    dims: Dims
    words: tuple[SceneWord, ...]
    seed: int = 0
    blockers: tuple[BBox, ...] = field(default=())

    def __post_init__(self) -> None:
        page = BBox(0.0, 0.0, self.dims.width, self.dims.height)
        for i, w in enumerate(self.words):
            if not page.contains(w.bbox, 1e-9):
                raise ValueError(f"scene word {i} ({w.true_text!r}) lies outside the page")

    # -- PageSource ---------------------------------------------------------

    def request(self, scan_angle_deg: float) -> ExtractionRequest:
        return ExtractionRequest(self, rotated_canvas_dims(self.dims, scan_angle_deg), scan_angle_deg)

    def crop(self, rect: BBox) -> "SceneSpec":
        """Sub-scene in ``rect``'s own frame; words not wholly inside are dropped."""
        words = tuple(
            w.translate(-rect.left, -rect.top)
            for w in self.words
            if rect.contains(w.bbox, 1e-9)
        )
        blockers = []
        for b in self.blockers:
            l, t = max(b.left, rect.left), max(b.top, rect.top)
            r, bt = min(b.right, rect.right), min(b.bottom, rect.bottom)
            if l < r and t < bt:
                blockers.append(BBox(l - rect.left, t - rect.top, r - rect.left, bt - rect.top))
        # clamp guards against tiny float overshoot after translation
        words = tuple(
            replace(w, bbox=w.bbox.clamp(rect.width, rect.height)) for w in words
        )
        return SceneSpec(Dims(rect.width, rect.height), words, self.seed, tuple(blockers))

    def boundary_loss(self, tiles: Sequence[TileRect]) -> int:
        """Words that no tile contains whole, so tiling cannot recover them."""
        return sum(
            1 for w in self.words
            if not any(t.bbox.contains(w.bbox, 1e-9) for t in tiles)
        )

    # -- serialization ------------------------------------------------------

    def to_json(self) -> dict[str, Any]:
        return {
            "schema_version": SCENE_SCHEMA_VERSION,
            "kind": "scene",
            "seed": self.seed,
            "dims": {"width": self.dims.width, "height": self.dims.height},
            "words": [
                {
                    "true_text": w.true_text,
                    "bbox": _bbox_json(w.bbox),
                    "orientation_deg": w.orientation_deg,
                    "corrupt": w.corrupt,
                    "extent": list(w.extent) if w.extent else None,
                    "reading_order": w.reading_order,
                }
                for w in self.words
            ],
            "blockers": [_bbox_json(b) for b in self.blockers],
        }

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "SceneSpec":
        if obj.get("kind") != "scene" or obj.get("schema_version") != SCENE_SCHEMA_VERSION:
            raise ValueError("not a version-1 scene file")
        words = tuple(
            SceneWord(
                true_text=w["true_text"],
                bbox=_bbox_from(w["bbox"]),
                orientation_deg=float(w.get("orientation_deg", 0.0)),
                corrupt=bool(w.get("corrupt", False)),
                extent=tuple(w["extent"]) if w.get("extent") else None,
                reading_order=w.get("reading_order"),
            )
            for w in obj["words"]
        )
        dims = Dims(float(obj["dims"]["width"]), float(obj["dims"]["height"]))
        blockers = tuple(_bbox_from(b) for b in obj.get("blockers", []))
        return cls(dims, words, int(obj.get("seed", 0)), blockers)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "SceneSpec":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def _bbox_json(b: BBox) -> dict[str, float]:
    return {"l": b.left, "t": b.top, "r": b.right, "b": b.bottom}


def _bbox_from(d: dict[str, float]) -> BBox:
    return BBox(float(d["l"]), float(d["t"]), float(d["r"]), float(d["b"]))


def _word_size(text: str, dims: Dims) -> tuple[float, float]:
    return len(text) * _GLYPH_WIDTH * dims.height, _GLYPH_HEIGHT * dims.height


def _hull_size(length: float, height: float, orientation_deg: float) -> tuple[float, float]:
    c, s = abs(math.cos(math.radians(orientation_deg))), abs(math.sin(math.radians(orientation_deg)))
    return length * c + height * s, length * s + height * c


def synth_scene(
    seed: int,
    word_count: int,
    orientation_set: Sequence[float],
    corrupt_fraction: float = 0.0,
    *,
    columns: int = 0,
    dims: Dims = Dims(1000.0, 1000.0),
    corrupt_vocabulary: Sequence[str] | None = None,
    max_attempts: int = 500,
) -> SceneSpec:
    """Generate a deterministic page of ``word_count`` non-overlapping words.

    ``columns=0`` scatters words anywhere on the page, like map labels.
    ``columns>=1`` flows them into that many text columns, left to right and
    top to bottom, and records the flow position as ``reading_order``.
    Corrupt words take their text from ``corrupt_vocabulary`` (by default the
    patterns of the default confusion table) so the mock backend can garble them.
    """
    if word_count < 0:
        raise ValueError("word_count must be >= 0")
    if not orientation_set:
        raise ValueError("orientation_set must not be empty")
    if not 0.0 <= corrupt_fraction <= 1.0:
        raise ValueError("corrupt_fraction must lie in [0, 1]")
    if columns < 0:
        raise ValueError("columns must be >= 0")
    if corrupt_vocabulary is None:
        from .mock import DEFAULT_CONFUSION
        corrupt_vocabulary = [p for p, _ in DEFAULT_CONFUSION.pairs]

    rng = random.Random(seed)
    orientations = [float(o) % 360.0 for o in orientation_set]
    n_corrupt = math.floor(corrupt_fraction * word_count)
    corrupt_idx = set(rng.sample(range(word_count), n_corrupt))
    specs = []
    for i in range(word_count):
        corrupt = i in corrupt_idx
        text = rng.choice(corrupt_vocabulary if corrupt else VOCABULARY)
        specs.append((text, rng.choice(orientations), corrupt))

    if columns == 0:
        words = _scatter(specs, dims, rng, max_attempts)
    else:
        words = _flow(specs, dims, columns)
    return SceneSpec(dims, tuple(words), seed)


def _scatter(specs, dims: Dims, rng: random.Random, max_attempts: int) -> list[SceneWord]:
    margin = 0.02 * min(dims.width, dims.height)
    pad = 0.005 * min(dims.width, dims.height)
    placed: list[SceneWord] = []
    for text, orient, corrupt in specs:
        length, height = _word_size(text, dims)
        hw, hh = _hull_size(length, height, orient)
        if hw + 2 * margin > dims.width or hh + 2 * margin > dims.height:
            raise CapacityError(f"word {text!r} does not fit on a {dims.width}x{dims.height} page")
        for _ in range(max_attempts):
            cx = rng.uniform(margin + hw / 2, dims.width - margin - hw / 2)
            cy = rng.uniform(margin + hh / 2, dims.height - margin - hh / 2)
            cand = SceneWord.oriented(text, Point(cx, cy), length, height, orient, corrupt=corrupt)
            grown = BBox(cand.bbox.left - pad, cand.bbox.top - pad, cand.bbox.right + pad, cand.bbox.bottom + pad)
            if all(_disjoint(grown, w.bbox) for w in placed):
                placed.append(cand)
                break
        else:
            raise CapacityError(f"could not place word {len(placed) + 1} of {len(specs)}")
    return placed


def _disjoint(a: BBox, b: BBox) -> bool:
    return a.right <= b.left or b.right <= a.left or a.bottom <= b.top or b.bottom <= a.top


def _flow(specs, dims: Dims, columns: int) -> list[SceneWord]:
    margin = 0.05 * dims.width
    col_gap = 0.06 * dims.width
    word_gap = 0.01 * dims.width
    row_gap = 0.02 * dims.height
    col_width = (dims.width - 2 * margin - (columns - 1) * col_gap) / columns
    if col_width <= 0:
        raise CapacityError(f"{columns} columns do not fit on the page")

    # break into lines first so each line's height is known before placement
    lines: list[list[tuple]] = []
    cur: list[tuple] = []
    used = 0.0
    for text, orient, corrupt in specs:
        length, height = _word_size(text, dims)
        hw, hh = _hull_size(length, height, orient)
        if hw > col_width:
            raise CapacityError(f"word {text!r} is wider than a column")
        need = hw if not cur else used + word_gap + hw
        if cur and need > col_width:
            lines.append(cur)
            cur, need = [], hw
        cur.append((text, orient, corrupt, length, height, hw, hh))
        used = need
    if cur:
        lines.append(cur)

    # balance lines across the columns, filling each top to bottom
    per_col = math.ceil(len(lines) / columns) if lines else 0
    words: list[SceneWord] = []
    for col in range(columns):
        top = margin
        x0 = margin + col * (col_width + col_gap)
        for line in lines[col * per_col:(col + 1) * per_col]:
            lh = max(item[6] for item in line)
            if top + lh > dims.height - margin:
                raise CapacityError(f"{len(specs)} words overflow {columns} column(s)")
            x, cy = x0, top + lh / 2
            for text, orient, corrupt, length, height, hw, hh in line:
                words.append(SceneWord.oriented(
                    text, Point(x + hw / 2, cy), length, height, orient,
                    corrupt=corrupt, reading_order=len(words),
                ))
                x += hw + word_gap
            top += lh + row_gap
    return words
