"""Command-line entry point: ``histread <subcommand>``.

Exit codes: 0 success, 2 bad arguments or config, 3 backend failure,
4 validation failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Sequence

from .backends import SceneSpec, synth_scene
from .backends.scene import CapacityError
from .correction import MockMaskedLM, apply_corrections
from .document import ManifestError, parse_manifest, serialize_manifest, validate_document
from .ensemble import EnsembleConfig, EnsembleStats, TileConfig, run_ensemble
from .errors import BackendError
from .geometry import Dims
from .pipeline import (
    ConfigError, PipelineConfig, StageError, ValidationFailed, build_document, detections_from_json,
    detections_to_json, evaluate, load_source, make_backend, make_masked_lm, make_summarizer, run_pipeline,
    summarize_document, write_atomic, write_json,
)

EXIT_OK, EXIT_USAGE, EXIT_BACKEND, EXIT_VALIDATION = 0, 2, 3, 4

log = logging.getLogger("histread")


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _config(path: str | None) -> PipelineConfig:
    return PipelineConfig.load(path) if path else PipelineConfig()


def _read_manifest(path: str):
    return parse_manifest(Path(path).read_bytes())


def _write_manifest(path: str, doc) -> None:
    problems = validate_document(doc)
    if problems:
        raise ValidationFailed(problems)
    write_atomic(Path(path), serialize_manifest(doc))


def cmd_synth(args: argparse.Namespace) -> int:
    scene = synth_scene(
        args.seed, args.words, args.orientations, args.corrupt_frac,
        columns=args.columns, dims=Dims(args.width, args.height),
    )
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    scene.save(out)
    return EXIT_OK


def cmd_extract(args: argparse.Namespace) -> int:
    config = _config(args.config)
    tile = None
    if args.tile_w or args.tile_h:
        if not (args.tile_w and args.tile_h):
            raise ConfigError("--tile-w and --tile-h go together")
        tile = TileConfig(Dims(args.tile_w, args.tile_h), args.overlap)
    ens = EnsembleConfig(
        angles_deg=args.angles or config.ensemble.angles_deg,
        iou_merge_threshold=args.iou if args.iou is not None else config.ensemble.iou_merge_threshold,
        tile=tile or config.ensemble.tile,
        allow_partial=args.allow_partial or config.ensemble.allow_partial,
        workers=args.workers or config.ensemble.workers,
    )
    config = replace(config, backend=args.backend or config.backend, ensemble=ens)
    source = load_source(args.input)
    stats = EnsembleStats()
    dets = run_ensemble(source, ens, make_backend(config), stats)
    write_json(args.output, detections_to_json(dets, source.dims, stats, args.input))
    return EXIT_OK


def cmd_pipeline(args: argparse.Namespace) -> int:
    config = _config(args.config)
    out = args.output or config.output_dir

    def one(ref: str):
        return run_pipeline(config, ref, output_dir=out)

    # documents share only the read-only config, so they can run side by side
    with ThreadPoolExecutor(max_workers=max(1, args.jobs)) as pool:
        results = list(pool.map(one, args.input))
    for path, stats in results:
        print(json.dumps({"manifest": str(path), "stats": stats.__dict__}, sort_keys=True))
    return EXIT_OK


def cmd_layout(args: argparse.Namespace) -> int:
    config = _config(args.config)
    dets, dims, ens_stats = detections_from_json(json.loads(Path(args.input).read_text(encoding="utf-8")))
    blockers = SceneSpec.load(args.scene).blockers if args.scene else ()
    doc = build_document(dets, dims, config, args.input, blockers)
    doc = replace(doc, stats={"extract": ens_stats})
    _write_manifest(args.output, doc)
    return EXIT_OK


def cmd_correct(args: argparse.Namespace) -> int:
    config = _config(args.config)
    doc = _read_manifest(args.input)
    client = MockMaskedLM.from_file(args.lm_table) if args.lm_table else make_masked_lm(config)
    doc = apply_corrections(doc, config.correction, client)
    stats = dict(doc.stats)
    stats["words_flagged"] = len(doc.corrections)
    stats["words_replaced"] = sum(r.action == "replaced" for r in doc.corrections)
    _write_manifest(args.output, replace(doc, stats=stats))
    return EXIT_OK


def cmd_summarize(args: argparse.Namespace) -> int:
    config = _config(args.config)
    doc = _read_manifest(args.input)
    summary, err = summarize_document(doc, config, make_summarizer(config))
    stats = dict(doc.stats)
    stats["summary_error"] = err
    _write_manifest(args.output, replace(doc, summary=summary, stats=stats))
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    truth = SceneSpec.load(args.truth)
    if args.manifest:
        result = _read_manifest(args.manifest)
    else:
        result, _, _ = detections_from_json(json.loads(Path(args.detections).read_text(encoding="utf-8")))
    report = evaluate(result, truth, args.iou)
    print(json.dumps(report.to_json(), indent=2, sort_keys=True))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="histread", description="Extract, order, correct and summarize scanned documents.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic scene with ground truth")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--words", type=int, default=40)
    p.add_argument("--orientations", type=_floats, default=(0.0,))
    p.add_argument("--corrupt-frac", type=float, default=0.0)
    p.add_argument("--columns", type=int, default=0, help="0 scatters words like map labels")
    p.add_argument("--width", type=float, default=1000.0)
    p.add_argument("--height", type=float, default=1000.0)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("extract", help="run the rotation (and optional tiling) ensemble")
    p.add_argument("--backend", choices=("mock", "remote"))
    p.add_argument("--angles", type=_floats)
    p.add_argument("--tile-w", type=float)
    p.add_argument("--tile-h", type=float)
    p.add_argument("--overlap", type=float, default=0.0)
    p.add_argument("--iou", type=float)
    p.add_argument("--workers", type=int)
    p.add_argument("--allow-partial", action="store_true")
    p.add_argument("-c", "--config")
    p.add_argument("-i", "--input", required=True)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("pipeline", help="full run: extract, layout, correct, summarize")
    p.add_argument("-c", "--config")
    p.add_argument("-i", "--input", required=True, nargs="+", help="one or more scene or image files")
    p.add_argument("-o", "--output", help="output directory")
    p.add_argument("-j", "--jobs", type=int, default=1, help="documents processed concurrently")
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("layout", help="detections file to an ordered manifest")
    p.add_argument("-c", "--config")
    p.add_argument("--scene", help="scene file supplying text-free regions")
    p.add_argument("-i", "--input", required=True)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_layout)

    p = sub.add_parser("correct", help="correct low-confidence words in a manifest")
    p.add_argument("-c", "--config")
    p.add_argument("--lm-table", help="mock fill-mask table (JSON)")
    p.add_argument("-i", "--input", required=True)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_correct)

    p = sub.add_parser("summarize", help="add a summary to a manifest")
    p.add_argument("-c", "--config")
    p.add_argument("-i", "--input", required=True)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_summarize)

    p = sub.add_parser("eval", help="score a manifest or detections file against a scene")
    p.add_argument("--truth", required=True)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--manifest")
    g.add_argument("--detections")
    p.add_argument("--iou", type=float, default=0.5)
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except StageError as e:
        log.error("%s", e)
        return EXIT_BACKEND if isinstance(e.cause, BackendError) else EXIT_USAGE
    except BackendError as e:
        log.error("backend error: %s", e)
        return EXIT_BACKEND
    except (ValidationFailed, ManifestError) as e:
        log.error("%s", e)
        return EXIT_VALIDATION
    except (ConfigError, CapacityError, ValueError, OSError) as e:
        log.error("%s", e)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
