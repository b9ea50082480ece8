"""Page / line / word block hierarchy and the ``.manifest.json`` format."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

from .geometry import BBox, Dims

SCHEMA_VERSION = "1"
LINE_CONTAINMENT_TOL = 0.005
_BOUNDS_EPS = 1e-9

MANIFEST_KEYS = (
    "schema_version", "document", "pages", "lines", "words",
    "corrections", "summary", "config_snapshot", "stats",
)


def make_id(seed: int, kind: str, *position: int) -> str:
    """Opaque block id derived only from the run seed and the block's position."""
    key = ":".join(str(v) for v in (seed, kind, *position))
    return f"{kind}-{hashlib.sha1(key.encode()).hexdigest()[:12]}"


@dataclass(frozen=True)
class Provenance:
    """Which extraction pass produced a detection."""

    scan_angle_deg: float
    tile_row: int = 0
    tile_col: int = 0
    backend_id: str = ""


@dataclass(frozen=True)
class WordBlock:
    id: str
    text: str
    bbox: BBox
    confidence: float
    provenance: Provenance
    corrected_from: str | None = None


@dataclass(frozen=True)
class LineBlock:
    id: str
    bbox: BBox
    word_ids: tuple[str, ...]
    reading_index: int | None = None


@dataclass(frozen=True)
class PageBlock:
    id: str
    page_number: int
    dims: Dims
    line_ids: tuple[str, ...]


@dataclass(frozen=True)
class Candidate:
    token: str
    lm_probability: float


@dataclass(frozen=True)
class CorrectionRecord:
    word_id: str
    original: str
    original_confidence: float
    candidates: tuple[Candidate, ...]
    chosen: str
    combined_score: float
    action: str  # "replaced" | "kept"
    reason: str | None = None


@dataclass(frozen=True)
class Document:
    id: str
    source_uri: str
    pages: tuple[PageBlock, ...]
    lines: Mapping[str, LineBlock]
    words: Mapping[str, WordBlock]
    summary: str | None = None
    corrections: tuple[CorrectionRecord, ...] = ()
    config_snapshot: Mapping[str, Any] = field(default_factory=dict)
    stats: Mapping[str, Any] = field(default_factory=dict)

    def page_lines(self, page: PageBlock) -> list[LineBlock]:
        return [self.lines[lid] for lid in page.line_ids]

    def ordered_lines(self, page: PageBlock) -> list[LineBlock]:
        """Lines of ``page`` sorted by reading index; raises if any is unassigned."""
        lines = self.page_lines(page)
        missing = [ln.id for ln in lines if ln.reading_index is None]
        if missing:
            raise OrderingIncompleteError(f"page {page.page_number}: no reading_index on {missing[0]}")
        return sorted(lines, key=lambda ln: ln.reading_index)

    def words_in_reading_order(self) -> list[WordBlock]:
        return [
            self.words[wid]
            for page in self.pages
            for line in self.ordered_lines(page)
            for wid in line.word_ids
        ]


class OrderingIncompleteError(ValueError):
    """A line is missing its reading index."""


class ManifestError(ValueError):
    """Malformed, unsupported, or inconsistent manifest; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


def validate_document(doc: Document) -> list[str]:
    """Return one description per broken invariant; empty means valid."""
    out: list[str] = []

    for wid, w in doc.words.items():
        if w.id != wid:
            out.append(f"word {wid}: stored under mismatched key (id {w.id})")
        if not w.text:
            out.append(f"word {wid}: empty text")
        if not (0.0 <= w.confidence <= 1.0) or math.isnan(w.confidence):
            out.append(f"word {wid}: confidence out of range ({w.confidence})")
        b = w.bbox
        if b.left < -_BOUNDS_EPS or b.top < -_BOUNDS_EPS or b.right > 1 + _BOUNDS_EPS or b.bottom > 1 + _BOUNDS_EPS:
            out.append(f"word {wid}: bbox outside the unit page {b.as_tuple()}")
        if w.corrected_from is not None and w.corrected_from == w.text:
            out.append(f"word {wid}: corrected_from equals text")
        p = w.provenance
        if not (0.0 <= p.scan_angle_deg < 360.0):
            out.append(f"word {wid}: provenance angle out of range ({p.scan_angle_deg})")
        if p.tile_row < 0 or p.tile_col < 0:
            out.append(f"word {wid}: negative tile index")

    word_refs: dict[str, int] = {}
    for lid, ln in doc.lines.items():
        if ln.id != lid:
            out.append(f"line {lid}: stored under mismatched key (id {ln.id})")
        if not ln.word_ids:
            out.append(f"line {lid}: no words")
        for wid in ln.word_ids:
            word_refs[wid] = word_refs.get(wid, 0) + 1
            w = doc.words.get(wid)
            if w is None:
                out.append(f"line {lid}: references missing word {wid}")
            elif not ln.bbox.contains(w.bbox, LINE_CONTAINMENT_TOL):
                out.append(f"line {lid}: bbox does not contain word {wid}")
        if ln.reading_index is not None and ln.reading_index < 0:
            out.append(f"line {lid}: negative reading_index")

    line_refs: dict[str, int] = {}
    for i, page in enumerate(doc.pages):
        if page.page_number != i + 1:
            out.append(f"page {page.id}: page_number {page.page_number}, expected {i + 1}")
        seen: dict[int, str] = {}
        for lid in page.line_ids:
            line_refs[lid] = line_refs.get(lid, 0) + 1
            ln = doc.lines.get(lid)
            if ln is None:
                out.append(f"page {page.id}: references missing line {lid}")
                continue
            if ln.reading_index is not None:
                if ln.reading_index in seen:
                    out.append(f"line {lid}: reading_index {ln.reading_index} duplicates line {seen[ln.reading_index]}")
                seen[ln.reading_index] = lid

    for wid in doc.words:
        n = word_refs.get(wid, 0)
        if n != 1:
            out.append(f"word {wid}: referenced by {n} lines, expected 1")
    for lid in doc.lines:
        n = line_refs.get(lid, 0)
        if n != 1:
            out.append(f"line {lid}: referenced by {n} pages, expected 1")

    for rec in doc.corrections:
        if rec.word_id not in doc.words:
            out.append(f"correction {rec.word_id}: references missing word")
        if rec.action not in ("replaced", "kept"):
            out.append(f"correction {rec.word_id}: unknown action {rec.action!r}")
        elif rec.action == "replaced" and rec.chosen not in {c.token for c in rec.candidates}:
            out.append(f"correction {rec.word_id}: chosen token not among candidates")
        elif rec.action == "kept" and rec.chosen != rec.original:
            out.append(f"correction {rec.word_id}: kept but chosen differs from original")
    return out


# -- serialization -----------------------------------------------------------

def _bbox_json(b: BBox) -> dict[str, float]:
    return {"l": float(b.left), "t": float(b.top), "r": float(b.right), "b": float(b.bottom)}


def _word_json(w: WordBlock) -> dict[str, Any]:
    p = w.provenance
    return {
        "id": w.id,
        "text": w.text,
        "bbox": _bbox_json(w.bbox),
        "confidence": float(w.confidence),
        "provenance": {
            "scan_angle_deg": float(p.scan_angle_deg),
            "tile_row": p.tile_row,
            "tile_col": p.tile_col,
            "backend_id": p.backend_id,
        },
        "corrected_from": w.corrected_from,
    }


def correction_json(rec: CorrectionRecord) -> dict[str, Any]:
    return {
        "word_id": rec.word_id,
        "original": rec.original,
        "original_confidence": float(rec.original_confidence),
        "candidates": [{"token": c.token, "p": float(c.lm_probability)} for c in rec.candidates],
        "chosen": rec.chosen,
        "combined_score": float(rec.combined_score),
        "action": rec.action,
        "reason": rec.reason,
    }


def document_to_json(doc: Document) -> dict[str, Any]:
    return {
        "schema_version": SCHEMA_VERSION,
        "document": {"id": doc.id, "source_uri": doc.source_uri},
        "pages": [
            {
                "id": p.id,
                "page_number": p.page_number,
                "dims": {"width": float(p.dims.width), "height": float(p.dims.height)},
                "line_ids": list(p.line_ids),
            }
            for p in doc.pages
        ],
        "lines": [
            {
                "id": ln.id,
                "bbox": _bbox_json(ln.bbox),
                "word_ids": list(ln.word_ids),
                "reading_index": ln.reading_index,
            }
            for ln in doc.lines.values()
        ],
        "words": [_word_json(w) for w in doc.words.values()],
        "corrections": [correction_json(r) for r in doc.corrections],
        "summary": doc.summary,
        "config_snapshot": doc.config_snapshot,
        "stats": doc.stats,
    }


def dumps_json(obj: Any) -> bytes:
    """Canonical UTF-8 JSON: sorted keys, fixed indentation, trailing newline."""
    return (json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False, allow_nan=False) + "\n").encode("utf-8")


def serialize_manifest(doc: Document) -> bytes:
    problems = validate_document(doc)
    if problems:
        raise ValueError(f"refusing to serialize invalid document: {problems[0]}")
    return dumps_json(document_to_json(doc))


class _Reader:
    """Typed field access that reports the JSON path of the first bad value."""

    def __init__(self, path: str, obj: Any):
        if not isinstance(obj, dict):
            raise ManifestError(path, "expected an object")
        self.path, self.obj = path, obj

    def _get(self, key: str, types: type | tuple[type, ...], optional: bool = False) -> Any:
        if key not in self.obj:
            raise ManifestError(f"{self.path}.{key}", "missing")
        v = self.obj[key]
        if v is None and optional:
            return None
        if isinstance(v, bool) and bool not in (types if isinstance(types, tuple) else (types,)):
            raise ManifestError(f"{self.path}.{key}", f"unexpected boolean {v!r}")
        if not isinstance(v, types):
            raise ManifestError(f"{self.path}.{key}", f"unexpected value {v!r}")
        return v

    def str(self, key: str, optional: bool = False) -> Any:
        return self._get(key, str, optional)

    def num(self, key: str) -> float:
        return float(self._get(key, (int, float)))

    def int(self, key: str, optional: bool = False) -> Any:
        return self._get(key, int, optional)

    def list(self, key: str) -> list:
        return self._get(key, list)

    def sub(self, key: str) -> "_Reader":
        return _Reader(f"{self.path}.{key}", self._get(key, dict))

    def bbox(self, key: str) -> BBox:
        r = self.sub(key)
        try:
            return BBox(r.num("l"), r.num("t"), r.num("r"), r.num("b"))
        except ManifestError:
            raise
        except ValueError as e:
            raise ManifestError(r.path, str(e)) from None


def _parse_str_list(path: str, items: list) -> tuple[str, ...]:
    for i, v in enumerate(items):
        if not isinstance(v, str):
            raise ManifestError(f"{path}[{i}]", f"expected an id string, got {v!r}")
    return tuple(items)


def parse_manifest(data: bytes | str) -> Document:
    """Inverse of :func:`serialize_manifest`; raises :class:`ManifestError`."""
    try:
        raw = json.loads(data)
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise ManifestError("$", f"not valid JSON ({e})") from None
    top = _Reader("$", raw)
    version = top.obj.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ManifestError("$.schema_version", f"unsupported schema version {version!r}")
    for key in MANIFEST_KEYS:
        if key not in top.obj:
            raise ManifestError(f"$.{key}", "missing")

    meta = top.sub("document")

    words: dict[str, WordBlock] = {}
    for i, item in enumerate(top.list("words")):
        r = _Reader(f"$.words[{i}]", item)
        pr = r.sub("provenance")
        w = WordBlock(
            id=r.str("id"),
            text=r.str("text"),
            bbox=r.bbox("bbox"),
            confidence=r.num("confidence"),
            provenance=Provenance(pr.num("scan_angle_deg"), pr.int("tile_row"), pr.int("tile_col"), pr.str("backend_id")),
            corrected_from=r.str("corrected_from", optional=True),
        )
        if w.id in words:
            raise ManifestError(f"$.words[{i}].id", f"duplicate id {w.id!r}")
        words[w.id] = w

    lines: dict[str, LineBlock] = {}
    for i, item in enumerate(top.list("lines")):
        r = _Reader(f"$.lines[{i}]", item)
        wids = _parse_str_list(f"{r.path}.word_ids", r.list("word_ids"))
        for j, wid in enumerate(wids):
            if wid not in words:
                raise ManifestError(f"{r.path}.word_ids[{j}]", f"unknown word id {wid!r}")
        ln = LineBlock(r.str("id"), r.bbox("bbox"), wids, r.int("reading_index", optional=True))
        if ln.id in lines:
            raise ManifestError(f"{r.path}.id", f"duplicate id {ln.id!r}")
        lines[ln.id] = ln

    pages = []
    for i, item in enumerate(top.list("pages")):
        r = _Reader(f"$.pages[{i}]", item)
        lids = _parse_str_list(f"{r.path}.line_ids", r.list("line_ids"))
        for j, lid in enumerate(lids):
            if lid not in lines:
                raise ManifestError(f"{r.path}.line_ids[{j}]", f"unknown line id {lid!r}")
        d = r.sub("dims")
        try:
            dims = Dims(d.num("width"), d.num("height"))
        except ManifestError:
            raise
        except ValueError as e:
            raise ManifestError(d.path, str(e)) from None
        pages.append(PageBlock(r.str("id"), r.int("page_number"), dims, lids))

    corrections = []
    for i, item in enumerate(top.list("corrections")):
        r = _Reader(f"$.corrections[{i}]", item)
        cands = []
        for j, c in enumerate(r.list("candidates")):
            cr = _Reader(f"{r.path}.candidates[{j}]", c)
            cands.append(Candidate(cr.str("token"), cr.num("p")))
        rec = CorrectionRecord(
            word_id=r.str("word_id"),
            original=r.str("original"),
            original_confidence=r.num("original_confidence"),
            candidates=tuple(cands),
            chosen=r.str("chosen"),
            combined_score=r.num("combined_score"),
            action=r.str("action"),
            reason=r.str("reason", optional=True),
        )
        if rec.word_id not in words:
            raise ManifestError(f"{r.path}.word_id", f"unknown word id {rec.word_id!r}")
        corrections.append(rec)

    doc = Document(
        id=meta.str("id"),
        source_uri=meta.str("source_uri"),
        pages=tuple(pages),
        lines=lines,
        words=words,
        summary=top.str("summary", optional=True),
        corrections=tuple(corrections),
        config_snapshot=top.sub("config_snapshot").obj,
        stats=top.sub("stats").obj,
    )
    problems = validate_document(doc)
    if problems:
        raise ManifestError("$", f"integrity violation: {problems[0]}")
    return doc


def build_page_document(
    doc_id: str,
    source_uri: str,
    dims: Dims,
    words: Sequence[WordBlock],
    lines: Sequence[LineBlock],
    page_id: str,
    **extra: Any,
) -> Document:
    """Single-page document whose page lists ``lines`` in reading order when assigned."""
    ordered = sorted(lines, key=lambda ln: (ln.reading_index is None, ln.reading_index or 0))
    page = PageBlock(page_id, 1, dims, tuple(ln.id for ln in ordered))
    return Document(
        id=doc_id,
        source_uri=source_uri,
        pages=(page,),
        lines={ln.id: ln for ln in ordered},
        words={w.id: w for w in words},
        **extra,
    )
