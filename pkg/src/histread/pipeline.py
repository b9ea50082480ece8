"""End-to-end runs, run configuration, and scoring against synthetic truth."""

from __future__ import annotations

import json
import os
import tempfile
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping, Sequence

from scipy.stats import kendalltau

from .backends import ConfusionTable, DEFAULT_CONFUSION, MockBackend, RasterPage, RemoteOCRBackend, SceneSpec
from .backends.base import ExtractionBackend, PageSource
from .correction import CorrectionConfig, HttpMaskedLM, MaskedLMClient, MockMaskedLM, apply_corrections
from .document import (
    Document, Provenance, WordBlock, build_page_document, dumps_json, make_id,
    parse_manifest, serialize_manifest, validate_document,
)
from .ensemble import Detection, EnsembleConfig, EnsembleStats, TileConfig, run_ensemble
from .errors import BackendError, SummarizationFailed
from .geometry import BBox, Dims, iou
from .layout import LayoutParams, LayoutStats, group_words_into_lines, linearize_text, xy_cut
from .summarization import FirstSentenceSummarizer, HttpSummarizer, SummarizerClient, SummaryConfig, summarize

STAGE_ORDER = ("extract", "layout", "correct", "summarize")
DETECTIONS_SCHEMA_VERSION = "1"

# fixed offsets from the root seed, one per stage
_SEED_IDS = 1


class ConfigError(ValueError):
    pass


class StageError(Exception):
    """A pipeline stage failed; ``stage`` names it and ``__cause__`` holds the original error."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"{stage} stage failed: {cause}")
        self.stage = stage
        self.cause = cause


class ValidationFailed(Exception):
    def __init__(self, problems: list[str]):
        super().__init__(f"document failed validation: {problems[0]}")
        self.problems = problems


@dataclass(frozen=True)
class MockConfig:
    alignment_tolerance_deg: float = 15.0
    flip_readable: bool = False
    confusion: tuple[tuple[str, str], ...] = DEFAULT_CONFUSION.pairs


@dataclass(frozen=True)
class PipelineConfig:
    backend: str = "mock"
    ensemble: EnsembleConfig = EnsembleConfig()
    layout: LayoutParams = LayoutParams()
    correction: CorrectionConfig = CorrectionConfig()
    summary: SummaryConfig = SummaryConfig()
    seed: int = 0
    output_dir: str = "out"
    mock: MockConfig = MockConfig()
    masked_lm: str = "mock"
    masked_lm_table: str | None = None
    summarizer: str = "mock"

    def __post_init__(self) -> None:
        if self.backend not in ("mock", "remote"):
            raise ConfigError(f"backend must be 'mock' or 'remote', got {self.backend!r}")
        if self.masked_lm not in ("mock", "remote"):
            raise ConfigError(f"masked_lm must be 'mock' or 'remote', got {self.masked_lm!r}")
        if self.summarizer not in ("mock", "remote"):
            raise ConfigError(f"summarizer must be 'mock' or 'remote', got {self.summarizer!r}")

    def to_json(self) -> dict[str, Any]:
        d = asdict(self)
        d["ensemble"]["angles_deg"] = list(self.ensemble.angles_deg)
        tile = self.ensemble.tile
        d["ensemble"]["tile"] = None if tile is None else {
            "tile_w": tile.tile_dims.width, "tile_h": tile.tile_dims.height, "overlap": tile.overlap,
        }
        d["mock"]["confusion"] = [list(p) for p in self.mock.confusion]
        d["stage_order"] = list(STAGE_ORDER)
        return d

    @classmethod
    def from_json(cls, obj: Mapping[str, Any]) -> "PipelineConfig":
        """Build from a (possibly partial) JSON object; missing fields take defaults."""
        try:
            obj = dict(obj)
            obj.pop("stage_order", None)
            ens = dict(obj.pop("ensemble", {}) or {})
            tile = ens.pop("tile", None)
            if "angles_deg" in ens:
                ens["angles_deg"] = tuple(float(a) for a in ens["angles_deg"])
            if tile:
                ens["tile"] = TileConfig(Dims(float(tile["tile_w"]), float(tile["tile_h"])), float(tile.get("overlap", 0.0)))
            mock = dict(obj.pop("mock", {}) or {})
            if "confusion" in mock:
                mock["confusion"] = tuple(tuple(p) for p in mock["confusion"])
            return cls(
                ensemble=EnsembleConfig(**ens),
                layout=LayoutParams(**(obj.pop("layout", {}) or {})),
                correction=CorrectionConfig(**(obj.pop("correction", {}) or {})),
                summary=SummaryConfig(**(obj.pop("summary", {}) or {})),
                mock=MockConfig(**mock),
                **obj,
            )
        except ConfigError:
            raise
        except (TypeError, ValueError, KeyError) as e:
            raise ConfigError(f"invalid pipeline config: {e}") from None

    @classmethod
    def load(cls, path: str | Path) -> "PipelineConfig":
        try:
            obj = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config {path}: {e}") from None
        return cls.from_json(obj)


@dataclass
class RunStats:
    words_detected: int = 0
    words_merged_away: int = 0
    words_flagged: int = 0
    words_replaced: int = 0
    boundary_loss: int = 0
    per_angle_detection_counts: dict[str, int] = field(default_factory=dict)
    layout_fallbacks: int = 0
    failed_passes: list[str] = field(default_factory=list)
    summary_error: str | None = None
    wall_time_ms: int = 0

    def manifest_json(self) -> dict[str, Any]:
        # wall time varies run to run and would break byte-identical manifests
        d = asdict(self)
        d.pop("wall_time_ms")
        return d


@dataclass(frozen=True)
class EvalReport:
    precision: float
    recall: float
    f1: float
    text_accuracy: float
    reading_order_kendall_tau: float | None
    matched: int
    detections: int
    truth: int

    def to_json(self) -> dict[str, Any]:
        return asdict(self)


# -- construction helpers ----------------------------------------------------

def make_backend(config: PipelineConfig, env: Mapping[str, str] = os.environ) -> ExtractionBackend:
    if config.backend == "mock":
        return MockBackend(
            config.mock.alignment_tolerance_deg,
            ConfusionTable(tuple(tuple(p) for p in config.mock.confusion)),
            flip_readable=config.mock.flip_readable,
        )
    return RemoteOCRBackend.from_env(env)


def make_masked_lm(config: PipelineConfig, env: Mapping[str, str] = os.environ) -> MaskedLMClient:
    if config.masked_lm == "remote":
        return HttpMaskedLM.from_env(env)
    if config.masked_lm_table:
        return MockMaskedLM.from_file(config.masked_lm_table)
    return MockMaskedLM()


def make_summarizer(config: PipelineConfig, env: Mapping[str, str] = os.environ) -> SummarizerClient:
    if config.summarizer == "remote":
        return HttpSummarizer.from_env(env)
    return FirstSentenceSummarizer()


def load_source(path: str | Path) -> PageSource:
    """Scene JSON files become scene sources; anything else is opened as an image."""
    p = Path(path)
    if p.suffix.lower() == ".json":
        return SceneSpec.load(p)
    return RasterPage.open(p)


# -- stages ------------------------------------------------------------------

def detections_to_json(detections: Sequence[Detection], dims: Dims, stats: EnsembleStats | None = None,
                       source_uri: str = "") -> dict[str, Any]:
    return {
        "schema_version": DETECTIONS_SCHEMA_VERSION,
        "kind": "detections",
        "source_uri": source_uri,
        "dims": {"width": dims.width, "height": dims.height},
        "detections": [
            {
                "text": d.text,
                "bbox": {"l": d.bbox.left, "t": d.bbox.top, "r": d.bbox.right, "b": d.bbox.bottom},
                "confidence": d.confidence,
                "provenance": asdict(d.provenance),
            }
            for d in detections
        ],
        "stats": asdict(stats) if stats else {},
    }


def detections_from_json(obj: Mapping[str, Any]) -> tuple[list[Detection], Dims, dict[str, Any]]:
    if obj.get("kind") != "detections" or obj.get("schema_version") != DETECTIONS_SCHEMA_VERSION:
        raise ValueError("not a version-1 detections file")
    dims = Dims(float(obj["dims"]["width"]), float(obj["dims"]["height"]))
    dets = [
        Detection(
            d["text"],
            BBox(d["bbox"]["l"], d["bbox"]["t"], d["bbox"]["r"], d["bbox"]["b"]),
            float(d["confidence"]),
            Provenance(**d["provenance"]),
        )
        for d in obj["detections"]
    ]
    return dets, dims, dict(obj.get("stats", {}))


def build_document(
    detections: Sequence[Detection],
    dims: Dims,
    config: PipelineConfig,
    source_uri: str = "",
    blockers: Sequence[BBox] = (),
    layout_stats: LayoutStats | None = None,
) -> Document:
    """Normalize detections to the unit page, group them into lines, and order the lines."""
    seed = config.seed + _SEED_IDS
    ordered = sorted(detections, key=lambda d: (d.bbox.top, d.bbox.left, d.text, d.bbox.bottom, d.bbox.right))
    sx, sy = 1.0 / dims.width, 1.0 / dims.height
    words = [
        WordBlock(
            make_id(seed, "w", 1, i),
            d.text,
            d.bbox.scale(sx, sy).clamp(1.0, 1.0),
            d.confidence,
            d.provenance,
        )
        for i, d in enumerate(ordered)
    ]
    lines = group_words_into_lines(words, config.layout, Dims(1.0, 1.0), line_id=lambda i: make_id(seed, "l", 1, i))
    norm_blockers = [b.scale(sx, sy) for b in blockers]
    lines = xy_cut(lines, Dims(1.0, 1.0), config.layout, norm_blockers, layout_stats)
    return build_page_document(
        make_id(seed, "d", 0),
        source_uri,
        dims,
        words,
        lines,
        make_id(seed, "p", 1),
        config_snapshot=config.to_json(),
    )


def summarize_document(doc: Document, config: PipelineConfig, client: SummarizerClient) -> tuple[str | None, str | None]:
    """Summary text, or ``None`` plus the reason when there is nothing to say or the LM fails."""
    text = linearize_text(doc)
    if not text.strip():
        return None, "empty document"
    try:
        return summarize(text, config.summary, client), None
    except SummarizationFailed as e:
        return None, str(e)


def write_atomic(path: Path, data: bytes) -> None:
    """Write via a temp file in the same directory and rename over ``path``."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def manifest_path_for(input_ref: str | Path, output_dir: str | Path) -> Path:
    stem = Path(str(input_ref)).name.split(".")[0] or "doc"
    return Path(output_dir) / f"{stem}.manifest.json"


def run_pipeline(
    config: PipelineConfig,
    input_ref: str | Path | PageSource,
    *,
    backend: ExtractionBackend | None = None,
    masked_lm: MaskedLMClient | None = None,
    summarizer: SummarizerClient | None = None,
    output_dir: str | Path | None = None,
    env: Mapping[str, str] = os.environ,
) -> tuple[Path, RunStats]:
    """Run extract, merge, layout, correction and summarization; write one manifest.

    ``input_ref`` is a scene JSON path, an image path, or a ready page source.
    Stage failures raise :class:`StageError` and leave no manifest behind.
    """
    t0 = time.perf_counter()
    stats = RunStats()
    out_dir = Path(output_dir if output_dir is not None else config.output_dir)

    if isinstance(input_ref, (str, Path)):
        source, uri = load_source(input_ref), str(input_ref)
        target = manifest_path_for(input_ref, out_dir)
    else:
        source, uri = input_ref, getattr(input_ref, "uri", "") or "memory:"
        target = out_dir / "doc.manifest.json"

    try:
        backend = backend or make_backend(config, env)
        ens_stats = EnsembleStats()
        detections = run_ensemble(source, config.ensemble, backend, ens_stats)
    except (BackendError, TypeError) as e:
        raise StageError("extract", e) from e
    stats.words_detected = ens_stats.raw_detections
    stats.words_merged_away = ens_stats.merged_away
    stats.boundary_loss = ens_stats.boundary_loss
    stats.per_angle_detection_counts = dict(sorted(ens_stats.per_angle.items(), key=lambda kv: float(kv[0])))
    stats.failed_passes = list(ens_stats.failed_passes)

    lstats = LayoutStats()
    blockers = getattr(source, "blockers", ())
    doc = build_document(detections, source.dims, config, uri, blockers, lstats)
    stats.layout_fallbacks = lstats.fallbacks

    try:
        masked_lm = masked_lm or make_masked_lm(config, env)
        doc = apply_corrections(doc, config.correction, masked_lm)
    except BackendError as e:
        raise StageError("correct", e) from e
    stats.words_flagged = len(doc.corrections)
    stats.words_replaced = sum(r.action == "replaced" for r in doc.corrections)

    try:
        summarizer = summarizer or make_summarizer(config, env)
    except BackendError as e:
        raise StageError("summarize", e) from e
    summary, stats.summary_error = summarize_document(doc, config, summarizer)

    doc = replace(doc, summary=summary, stats=stats.manifest_json())
    problems = validate_document(doc)
    if problems:
        raise ValidationFailed(problems)
    data = serialize_manifest(doc)
    write_atomic(target, data)
    stats.wall_time_ms = int((time.perf_counter() - t0) * 1000)
    return target, stats


# -- evaluation --------------------------------------------------------------

def match_detections(boxes: Sequence[BBox], truth: Sequence[BBox], iou_threshold: float = 0.5) -> list[tuple[int, int, float]]:
    """Greedy one-to-one matching by descending IoU; returns ``(box, truth, iou)`` triples.

    Ties are broken by box geometry, not list position, so reordering the
    inputs cannot change which pairs match.
    """
    pairs = []
    for i, b in enumerate(boxes):
        for j, t in enumerate(truth):
            v = iou(b, t)
            if v >= iou_threshold:
                pairs.append((v, b.as_tuple(), t.as_tuple(), i, j))
    pairs.sort(key=lambda p: (-p[0], p[1], p[2]))
    used_b, used_t, out = set(), set(), []
    for v, _, _, i, j in pairs:
        if i in used_b or j in used_t:
            continue
        used_b.add(i)
        used_t.add(j)
        out.append((i, j, v))
    return out


def evaluate(
    result: Sequence[Detection] | Document,
    truth: SceneSpec,
    iou_match_threshold: float = 0.5,
) -> EvalReport:
    """Precision, recall, text accuracy and reading-order agreement against a scene."""
    tol = 1e-6
    if isinstance(result, Document):
        if len(result.pages) != 1:
            raise ValueError("evaluation needs a single-page document")
        page = result.pages[0]
        if abs(page.dims.width - truth.dims.width) > tol or abs(page.dims.height - truth.dims.height) > tol:
            raise ValueError(f"frame mismatch: document page {page.dims} vs truth {truth.dims}")
        rank: dict[str, tuple[int, int]] = {}
        for ln in result.ordered_lines(page):
            for pos, wid in enumerate(ln.word_ids):
                rank[wid] = (ln.reading_index, pos)
        items = [
            (w.bbox.scale(truth.dims.width, truth.dims.height), w.text, rank.get(w.id))
            for w in result.words.values()
        ]
    else:
        page_box = BBox(0.0, 0.0, truth.dims.width, truth.dims.height)
        items = []
        for d in result:
            if not page_box.contains(d.bbox, tol * max(truth.dims.width, truth.dims.height)):
                raise ValueError(f"frame mismatch: detection {d.bbox.as_tuple()} outside truth page")
            items.append((d.bbox, d.text, None))

    matches = match_detections([it[0] for it in items], [w.bbox for w in truth.words], iou_match_threshold)
    n_det, n_truth, n_match = len(items), len(truth.words), len(matches)
    precision = n_match / n_det if n_det else 0.0
    recall = n_match / n_truth if n_truth else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    text_ok = sum(items[i][1] == truth.words[j].true_text for i, j, _ in matches)
    text_accuracy = text_ok / n_match if n_match else 0.0

    tau = None
    ordered = [
        (items[i][2], truth.words[j].reading_order)
        for i, j, _ in matches
        if items[i][2] is not None and truth.words[j].reading_order is not None
    ]
    if len(ordered) >= 2:
        predicted = sorted(range(len(ordered)), key=lambda k: ordered[k][0])
        pred_rank = [0] * len(ordered)
        for r, k in enumerate(predicted):
            pred_rank[k] = r
        # scipy can land one ulp short of +/-1 on identical orders
        tau = round(float(kendalltau(pred_rank, [o[1] for o in ordered]).statistic), 12)

    return EvalReport(precision, recall, f1, text_accuracy, tau, n_match, n_det, n_truth)


def load_manifest(path: str | Path) -> Document:
    return parse_manifest(Path(path).read_bytes())


def write_json(path: str | Path, obj: Any) -> None:
    write_atomic(Path(path), dumps_json(obj))
