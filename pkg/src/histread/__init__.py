"""Reading-order, ensemble extraction and correction pipeline for scanned historical documents."""

from .backends import (
    ConfusionTable,
    DEFAULT_CONFUSION,
    MockBackend,
    RasterPage,
    RemoteOCRBackend,
    SceneSpec,
    SceneWord,
    mock_extract,
    synth_scene,
)
from .correction import CorrectionConfig, MockMaskedLM, apply_corrections, flag_low_confidence, select_replacement
from .document import Document, parse_manifest, serialize_manifest, validate_document
from .ensemble import Detection, EnsembleConfig, TileConfig, merge_detections, run_rotation_ensemble, run_tiling_ensemble
from .geometry import BBox, Dims, Point, back_project_bbox, compute_tile_grid, iou, rotate_point, rotated_canvas_dims
from .layout import LayoutParams, group_words_into_lines, linearize_text, xy_cut
from .pipeline import EvalReport, PipelineConfig, RunStats, evaluate, run_pipeline
from .summarization import FirstSentenceSummarizer, SummaryConfig, chunk_text, summarize

__version__ = "0.1.0"

__all__ = [
    "BBox", "ConfusionTable", "CorrectionConfig", "DEFAULT_CONFUSION", "Detection", "Dims", "Document",
    "EnsembleConfig", "EvalReport", "FirstSentenceSummarizer", "LayoutParams", "MockBackend", "MockMaskedLM",
    "PipelineConfig", "Point", "RasterPage", "RemoteOCRBackend", "RunStats", "SceneSpec", "SceneWord",
    "SummaryConfig", "TileConfig", "apply_corrections", "back_project_bbox", "chunk_text", "compute_tile_grid",
    "evaluate", "flag_low_confidence", "group_words_into_lines", "iou", "linearize_text", "merge_detections",
    "mock_extract", "parse_manifest", "rotate_point", "rotated_canvas_dims", "run_pipeline",
    "run_rotation_ensemble", "run_tiling_ensemble", "select_replacement", "serialize_manifest", "summarize",
    "synth_scene", "validate_document", "xy_cut",
]
