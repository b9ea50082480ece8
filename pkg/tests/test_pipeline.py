import json
import random

import pytest

from histread.backends import SceneSpec, SceneWord, synth_scene
from histread.cli import main
from histread.document import Provenance
from histread.ensemble import Detection, EnsembleConfig, TileConfig
from histread.geometry import BBox, Dims, compute_tile_grid
from histread.pipeline import (
    ConfigError,
    PipelineConfig,
    StageError,
    evaluate,
    load_manifest,
    manifest_path_for,
    run_pipeline,
)


@pytest.fixture
def standard_scene(tmp_path):
    scene = synth_scene(7, 40, [0, 30, 60, 90], 0.25, columns=2)
    path = tmp_path / "letter.json"
    scene.save(path)
    return scene, path


def as_detections(scene, texts=None):
    texts = texts or [w.true_text for w in scene.words]
    return [Detection(t, w.bbox, 1.0, Provenance(0.0, 0, 0, "truth")) for t, w in zip(texts, scene.words)]


class TestRun:
    def test_standard_fixture(self, standard_scene, tmp_path):
        scene, path = standard_scene
        out, stats = run_pipeline(PipelineConfig(seed=7), path, output_dir=tmp_path / "out")
        assert out == tmp_path / "out" / "letter.manifest.json"
        assert stats.words_detected == 40
        doc = load_manifest(out)
        assert len(doc.words) == stats.words_detected - stats.words_merged_away
        assert stats.words_replaced <= stats.words_flagged <= stats.words_detected
        assert stats.words_flagged == 10  # the corrupt quarter, all at 0.6679
        assert doc.summary
        assert doc.config_snapshot["stage_order"] == ["extract", "layout", "correct", "summarize"]
        report = evaluate(doc, scene)
        assert (report.precision, report.recall, report.reading_order_kendall_tau) == (1.0, 1.0, 1.0)

    def test_byte_identical_reruns(self, standard_scene, tmp_path):
        _, path = standard_scene
        a, _ = run_pipeline(PipelineConfig(seed=7), path, output_dir=tmp_path / "a")
        b, _ = run_pipeline(PipelineConfig(seed=7, ensemble=EnsembleConfig(workers=6)), path, output_dir=tmp_path / "b")
        doc_a, doc_b = load_manifest(a), load_manifest(b)
        assert doc_a.words == doc_b.words and doc_a.lines == doc_b.lines
        c, _ = run_pipeline(PipelineConfig(seed=7), path, output_dir=tmp_path / "c")
        assert a.read_bytes() == c.read_bytes()

    def test_remote_without_credentials_leaves_nothing(self, standard_scene, tmp_path):
        _, path = standard_scene
        out = tmp_path / "out"
        with pytest.raises(StageError) as exc:
            run_pipeline(PipelineConfig(backend="remote"), path, output_dir=out, env={})
        assert exc.value.stage == "extract"
        assert not out.exists() or list(out.iterdir()) == []

    def test_tiled_run(self, tmp_path):
        scene = synth_scene(2, 30, [0, 90], dims=Dims(400, 400))
        cfg = PipelineConfig(ensemble=EnsembleConfig(tile=TileConfig(Dims(250, 250), 100)))
        out, stats = run_pipeline(cfg, scene, output_dir=tmp_path)
        doc = load_manifest(out)
        assert stats.boundary_loss == scene.boundary_loss(compute_tile_grid(scene.dims, Dims(250, 250), 100))
        assert len(doc.words) == 30 - stats.boundary_loss
        assert evaluate(doc, scene).recall == (30 - stats.boundary_loss) / 30

    def test_manifest_name(self):
        assert manifest_path_for("scans/p001.png", "out").as_posix() == "out/p001.manifest.json"


class TestConfig:
    def test_round_trip(self):
        cfg = PipelineConfig(seed=3, ensemble=EnsembleConfig(angles_deg=(0.0, 45.0), tile=TileConfig(Dims(60, 60), 20)))
        assert PipelineConfig.from_json(json.loads(json.dumps(cfg.to_json()))) == cfg

    def test_partial(self):
        assert PipelineConfig.from_json({"seed": 4}).seed == 4

    @pytest.mark.parametrize("obj", [
        {"backend": "cloud"},
        {"ensemble": {"angles_deg": []}},
        {"correction": {"k": 0}},
        {"bogus": 1},
    ])
    def test_invalid(self, obj):
        with pytest.raises(ConfigError):
            PipelineConfig.from_json(obj)


class TestEvaluate:
    scene = SceneSpec(Dims(100, 100), (
        SceneWord("dear", BBox(10, 10, 30, 15), reading_order=0),
        SceneWord("wife", BBox(40, 10, 60, 15), reading_order=1),
    ))

    def test_perfect(self):
        r = evaluate(as_detections(self.scene), self.scene)
        assert (r.precision, r.recall, r.f1, r.text_accuracy) == (1.0, 1.0, 1.0, 1.0)

    def test_half_recall(self):
        r = evaluate(as_detections(self.scene)[:1], self.scene)
        assert (r.precision, r.recall) == (1.0, 0.5)
        assert r.f1 == pytest.approx(2 / 3)

    def test_wrong_text(self):
        r = evaluate(as_detections(self.scene, ["dear", "wifc"]), self.scene)
        assert (r.precision, r.recall, r.text_accuracy) == (1.0, 1.0, 0.5)

    def test_nothing(self):
        r = evaluate([], self.scene)
        assert (r.precision, r.recall, r.f1) == (0.0, 0.0, 0.0)

    def test_frame_mismatch(self):
        far = [Detection("x", BBox(150, 150, 160, 160), 1.0, Provenance(0.0, 0, 0, "m"))]
        with pytest.raises(ValueError):
            evaluate(far, self.scene)

    def test_order_invariant(self):
        scene = synth_scene(5, 30, [0])
        dets = as_detections(scene)
        # jitter boxes so some matches compete
        rng = random.Random(0)
        dets = [Detection(d.text, d.bbox.translate(rng.uniform(-2, 2), 0), d.confidence, d.provenance) for d in dets]
        dets += dets[:5]
        base = evaluate(dets, scene)
        for seed in range(5):
            shuffled = list(dets)
            random.Random(seed).shuffle(shuffled)
            assert evaluate(shuffled, scene) == base


class TestCli:
    def run(self, *argv):
        return main([str(a) for a in argv])

    def test_stagewise_flow(self, tmp_path, capsys):
        scene = tmp_path / "scene.json"
        dets, laid, fixed, summ = (tmp_path / n for n in ("d.json", "l.json", "c.json", "s.json"))
        assert self.run("synth", "--seed", 7, "--words", 40, "--orientations", "0,30,60,90",
                        "--corrupt-frac", 0.25, "--columns", 2, "-o", scene) == 0
        assert self.run("extract", "--backend", "mock", "--angles", "0,30,60,90,120,150", "-i", scene, "-o", dets) == 0
        assert self.run("layout", "-i", dets, "-o", laid) == 0
        assert self.run("correct", "-i", laid, "-o", fixed) == 0
        assert self.run("summarize", "-i", fixed, "-o", summ) == 0
        capsys.readouterr()
        assert self.run("eval", "--truth", scene, "--manifest", summ) == 0
        report = json.loads(capsys.readouterr().out)
        assert report["recall"] == 1.0 and report["reading_order_kendall_tau"] == 1.0
        assert self.run("eval", "--truth", scene, "--detections", dets) == 0

    def test_pipeline_many_inputs(self, tmp_path, capsys):
        paths = []
        for seed in (1, 2, 3):
            p = tmp_path / f"s{seed}.json"
            synth_scene(seed, 10, [0, 30]).save(p)
            paths.append(p)
        assert self.run("pipeline", "-i", *paths, "-o", tmp_path / "out", "--jobs", 3) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert [json.loads(ln)["manifest"] for ln in lines] == [str(tmp_path / "out" / f"s{s}.manifest.json") for s in (1, 2, 3)]

    def test_exit_codes(self, tmp_path, standard_scene, monkeypatch):
        _, scene = standard_scene
        for var in ("REMOTE_OCR_ENDPOINT", "REMOTE_OCR_KEY"):
            monkeypatch.delenv(var, raising=False)
        assert self.run("extract", "--backend", "remote", "-i", scene, "-o", tmp_path / "d.json") == 3
        assert not (tmp_path / "d.json").exists()
        assert self.run("pipeline", "-i", tmp_path / "missing.json", "-o", tmp_path / "out") == 2
        bad_cfg = tmp_path / "cfg.json"
        bad_cfg.write_text('{"backend": "cloud"}')
        assert self.run("pipeline", "-c", bad_cfg, "-i", scene) == 2
        with pytest.raises(SystemExit) as exc:
            self.run("extract", "--angles", "a,b", "-i", scene, "-o", tmp_path / "x.json")
        assert exc.value.code == 2

        manifest, _ = run_pipeline(PipelineConfig(), scene, output_dir=tmp_path / "ok")
        top = json.loads(manifest.read_text())
        top["schema_version"] = "2"
        broken = tmp_path / "broken.json"
        broken.write_text(json.dumps(top))
        assert self.run("correct", "-i", broken, "-o", tmp_path / "c.json") == 4
