"""Multi-angle and tiled extraction passes merged into one detection set."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

from .backends.base import ExtractionBackend, ExtractionResponse, PageSource
from .document import Provenance
from .errors import BackendError
from .geometry import BBox, Dims, TileRect, back_project_bbox, compute_tile_grid, iou

DEFAULT_ANGLES = (0.0, 30.0, 60.0, 90.0, 120.0, 150.0)


@dataclass(frozen=True)
class TileConfig:
    tile_dims: Dims
    overlap: float = 0.0


@dataclass(frozen=True)
class EnsembleConfig:
    angles_deg: tuple[float, ...] = DEFAULT_ANGLES
    iou_merge_threshold: float = 0.5
    tile: TileConfig | None = None
    allow_partial: bool = False
    workers: int = 1

    def __post_init__(self) -> None:
        if not self.angles_deg:
            raise ValueError("angles_deg must not be empty")
        folded = [a % 360.0 for a in self.angles_deg]
        if len(set(folded)) != len(folded):
            raise ValueError(f"angles must be distinct modulo 360: {self.angles_deg}")
        if not 0.0 < self.iou_merge_threshold <= 1.0:
            raise ValueError("iou_merge_threshold must lie in (0, 1]")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.tile is not None and self.tile.overlap < 0:
            raise ValueError("tile overlap must be >= 0")


@dataclass(frozen=True)
class Detection:
    text: str
    bbox: BBox  # original page frame
    confidence: float
    provenance: Provenance

    def sort_key(self) -> tuple:
        p = self.provenance
        return (-self.confidence, p.scan_angle_deg, self.bbox.top, self.bbox.left, self.text,
                p.tile_row, p.tile_col, self.bbox.bottom, self.bbox.right, p.backend_id)


@dataclass
class EnsembleStats:
    raw_detections: int = 0
    merged_away: int = 0
    boundary_loss: int = 0
    per_angle: dict[str, int] = field(default_factory=dict)
    failed_passes: list[str] = field(default_factory=list)


def angle_key(theta: float) -> str:
    return f"{theta % 360.0:g}"


def merge_detections(candidates: Sequence[Detection], iou_threshold: float) -> list[Detection]:
    """Greedy non-maximum suppression over a canonical total order.

    Candidates are ranked by confidence (high first), then scan angle, then
    position and text; a candidate survives when its IoU with every survivor
    so far is below ``iou_threshold``.
    """
    kept: list[Detection] = []
    for cand in sorted(candidates, key=Detection.sort_key):
        if all(iou(cand.bbox, k.bbox) < iou_threshold for k in kept):
            kept.append(cand)
    return kept


@dataclass(frozen=True)
class _Pass:
    source: PageSource
    angle: float
    tile: TileRect | None


def _execute(passes: Sequence[_Pass], backend: ExtractionBackend, workers: int,
             allow_partial: bool, stats: EnsembleStats) -> list[Detection]:
    def run(p: _Pass):
        req = p.source.request(p.angle)
        try:
            return req, backend.extract(req)
        except BackendError as e:
            e.context.setdefault("angle", p.angle)
            if p.tile is not None:
                e.context.setdefault("tile", (p.tile.row, p.tile.col))
            return req, e

    if workers == 1:
        results = [run(p) for p in passes]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, passes))  # map preserves submission order

    out: list[Detection] = []
    for p, (req, res) in zip(passes, results):
        if isinstance(res, BackendError):
            if not allow_partial:
                raise res
            where = angle_key(p.angle) if p.tile is None else f"{angle_key(p.angle)}@{p.tile.row},{p.tile.col}"
            stats.failed_passes.append(where)
            continue
        dets = _to_page_frame(res, p, req.frame_dims)
        stats.raw_detections += len(dets)
        key = angle_key(p.angle)
        stats.per_angle[key] = stats.per_angle.get(key, 0) + len(dets)
        out.extend(dets)
    return out


def _to_page_frame(res: ExtractionResponse, p: _Pass, frame: Dims) -> list[Detection]:
    dims = p.source.dims
    row, col = (p.tile.row, p.tile.col) if p.tile else (0, 0)
    prov = Provenance(p.angle % 360.0, row, col, res.backend_id)
    out = []
    for d in res.detections:
        box = back_project_bbox(d.bbox, p.angle, frame, dims)
        try:
            box = box.clamp(dims.width, dims.height)
        except ValueError:
            continue  # entirely off the page after back-projection
        if p.tile is not None:
            box = box.translate(p.tile.bbox.left, p.tile.bbox.top)
        out.append(Detection(d.text, box, d.confidence, prov))
    return out


def run_rotation_ensemble(source: PageSource, config: EnsembleConfig, backend: ExtractionBackend,
                          stats: EnsembleStats | None = None) -> list[Detection]:
    """Extract at every configured angle and merge the results in the page frame."""
    stats = stats if stats is not None else EnsembleStats()
    passes = [_Pass(source, a, None) for a in config.angles_deg]
    raw = _execute(passes, backend, config.workers, config.allow_partial, stats)
    merged = merge_detections(raw, config.iou_merge_threshold)
    stats.merged_away += len(raw) - len(merged)
    return merged


def run_tiling_ensemble(source: PageSource, config: EnsembleConfig, backend: ExtractionBackend,
                        stats: EnsembleStats | None = None) -> list[Detection]:
    """Rotation ensemble on each overlapping tile, translated home and merged globally.

    Words cut by every tile boundary cannot be recovered; their count (when
    the source knows its ground truth) lands in ``stats.boundary_loss``.
    """
    if config.tile is None:
        raise ValueError("run_tiling_ensemble needs config.tile")
    stats = stats if stats is not None else EnsembleStats()
    tiles = compute_tile_grid(source.dims, config.tile.tile_dims, config.tile.overlap)
    passes = [
        _Pass(source.crop(t.bbox), a, t)
        for t in tiles
        for a in config.angles_deg
    ]
    raw = _execute(passes, backend, config.workers, config.allow_partial, stats)
    merged = merge_detections(raw, config.iou_merge_threshold)
    stats.merged_away += len(raw) - len(merged)
    stats.boundary_loss += source.boundary_loss(tiles)
    return merged


def run_ensemble(source: PageSource, config: EnsembleConfig, backend: ExtractionBackend,
                 stats: EnsembleStats | None = None) -> list[Detection]:
    if config.tile is None:
        return run_rotation_ensemble(source, config, backend, stats)
    return run_tiling_ensemble(source, config, backend, stats)
