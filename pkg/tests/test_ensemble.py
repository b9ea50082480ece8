import random
import time

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from histread.backends import (
    BackendUnavailable,
    MockBackend,
    SceneSpec,
    SceneWord,
    synth_scene,
)
from histread.document import Provenance
from histread.ensemble import (
    Detection,
    EnsembleConfig,
    EnsembleStats,
    TileConfig,
    merge_detections,
    run_ensemble,
    run_rotation_ensemble,
    run_tiling_ensemble,
)
from histread.geometry import BBox, Dims, Point, iou

from test_backends import readable


def det(box, conf=0.9, angle=0.0, text="w"):
    return Detection(text, BBox(*box), conf, Provenance(angle, 0, 0, "mock"))


def owner(scene, d):
    """Index of the scene word whose box holds the detection's center."""
    c = d.bbox.center
    hits = [i for i, w in enumerate(scene.words) if w.bbox.contains_point(c)]
    assert len(hits) == 1
    return hits[0]


def nms_oracle(cands, thr):
    """Plain O(n^2) suppression written independently of the library's loop."""
    order = sorted(cands, key=lambda d: (-d.confidence, d.provenance.scan_angle_deg, d.bbox.top,
                                         d.bbox.left, d.text, d.provenance.tile_row,
                                         d.provenance.tile_col, d.bbox.bottom, d.bbox.right,
                                         d.provenance.backend_id))
    suppressed = [False] * len(order)
    out = []
    for i, a in enumerate(order):
        if suppressed[i]:
            continue
        out.append(a)
        for j in range(i + 1, len(order)):
            if iou(a.bbox, order[j].bbox) >= thr:
                suppressed[j] = True
    return out


class TestMerge:
    def test_duplicate_collapses_to_confident_one(self):
        a = det((0, 0, 1, 1), 0.9, 0.0)
        b = det((0, 0, 1, 1), 0.7, 30.0)
        assert merge_detections([b, a], 0.5) == [a]

    def test_disjoint_kept(self):
        a, b = det((0, 0, 1, 1)), det((2, 2, 3, 3), 0.8)
        assert merge_detections([b, a], 0.5) == [a, b]

    def test_iou_point_six_different_text(self):
        # overlap 0.75, union 1.25
        a = det((0, 0, 1, 1), 0.9, text="river")
        b = det((0.25, 0, 1.25, 1), 0.8, text="rover")
        assert iou(a.bbox, b.bbox) == pytest.approx(0.6)
        assert merge_detections([b, a], 0.5) == [a]
        assert merge_detections([b, a], 0.7) == [a, b]

    def test_equal_confidence_prefers_lower_angle(self):
        a = det((0, 0, 1, 1), 0.9, 60.0)
        b = det((0, 0, 1, 1), 0.9, 30.0)
        assert merge_detections([a, b], 0.5) == [b]

    def test_empty(self):
        assert merge_detections([], 0.5) == []


box_st = st.builds(
    lambda x, y, w, h: (x, y, x + w, y + h),
    st.floats(0, 10), st.floats(0, 10), st.floats(0.2, 3), st.floats(0.2, 3),
)
det_st = st.builds(
    det, box_st, st.sampled_from([0.5, 0.6679, 0.8, 0.9, 1.0]),
    st.sampled_from([0.0, 30.0, 60.0]), st.sampled_from(["a", "b"]),
)


@settings(max_examples=200)
@given(st.lists(det_st, max_size=25), st.sampled_from([0.3, 0.5, 0.8]))
def test_merge_properties(cands, thr):
    out = merge_detections(cands, thr)
    assert out == nms_oracle(cands, thr)
    assert merge_detections(out, thr) == out
    for i, a in enumerate(out):
        for b in out[i + 1:]:
            assert iou(a.bbox, b.bbox) < thr
    shuffled = list(cands)
    random.Random(0).shuffle(shuffled)
    assert merge_detections(shuffled, thr) == out


class TestRotationEnsemble:
    def test_empty_scene(self):
        scene = SceneSpec(Dims(100, 100), ())
        assert run_rotation_ensemble(scene, EnsembleConfig(), MockBackend()) == []

    def test_single_angle_recovers_aligned_subset(self):
        scene = synth_scene(21, 40, [0, 60])
        out = run_rotation_ensemble(scene, EnsembleConfig(angles_deg=(0.0,)), MockBackend())
        want = {i for i, w in enumerate(scene.words) if readable(w.orientation_deg, 0, 15)}
        assert {owner(scene, d) for d in out} == want
        assert len(out) == len(want)

    def test_two_angles_recover_everything_once(self):
        scene = synth_scene(21, 40, [0, 60])
        stats = EnsembleStats()
        out = run_rotation_ensemble(scene, EnsembleConfig(angles_deg=(0.0, 60.0)), MockBackend(), stats)
        assert sorted(owner(scene, d) for d in out) == list(range(40))
        assert stats.raw_detections == 40 and stats.merged_away == 0
        assert sum(stats.per_angle.values()) == 40

    def test_neighbouring_angles_merge_duplicates(self):
        # a 5 degree word is readable from both 0 and 10
        w = SceneWord.oriented("bridge", Point(50, 50), 30, 5, 5.0)
        scene = SceneSpec(Dims(100, 100), (w,))
        stats = EnsembleStats()
        out = run_rotation_ensemble(scene, EnsembleConfig(angles_deg=(0.0, 10.0)), MockBackend(), stats)
        assert len(out) == 1 and stats.raw_detections == 2 and stats.merged_away == 1
        assert out[0].provenance.scan_angle_deg == 0.0  # equal confidence, lower angle wins

    def test_workers_do_not_change_output(self):
        scene = synth_scene(3, 60, [0, 30, 60, 90, 120, 150], 0.2)
        backend = JitterBackend(MockBackend())
        one = run_rotation_ensemble(scene, EnsembleConfig(workers=1), backend)
        many = run_rotation_ensemble(scene, EnsembleConfig(workers=8), backend)
        assert one == many

    def test_terminal_failure_names_angle(self):
        scene = synth_scene(3, 10, [0])
        with pytest.raises(BackendUnavailable) as exc:
            run_rotation_ensemble(scene, EnsembleConfig(), FailingBackend(MockBackend(), {60.0}))
        assert exc.value.context["angle"] == 60.0

    def test_allow_partial_records_failed_pass(self):
        scene = synth_scene(3, 10, [0])
        stats = EnsembleStats()
        cfg = EnsembleConfig(allow_partial=True)
        out = run_rotation_ensemble(scene, cfg, FailingBackend(MockBackend(), {60.0}), stats)
        assert len(out) == 10
        assert stats.failed_passes == ["60"]

    @pytest.mark.parametrize("kw", [
        {"angles_deg": ()},
        {"angles_deg": (0.0, 360.0)},
        {"iou_merge_threshold": 0.0},
        {"workers": 0},
    ])
    def test_config_validation(self, kw):
        with pytest.raises(ValueError):
            EnsembleConfig(**kw)


class JitterBackend:
    """Delays each call by a random amount so threads finish out of order."""

    def __init__(self, inner):
        self.inner = inner
        self.rng = random.Random(1)

    def extract(self, request):
        time.sleep(self.rng.random() * 0.005)
        return self.inner.extract(request)


class FailingBackend:
    def __init__(self, inner, bad_angles):
        self.inner, self.bad = inner, bad_angles

    def extract(self, request):
        if request.scan_angle_deg in self.bad:
            raise BackendUnavailable("down")
        return self.inner.extract(request)


def word_at(x0, y0, w=6.0, h=3.0, text="word"):
    return SceneWord(text, BBox(x0, y0, x0 + w, y0 + h), 0.0)


class TestTiling:
    tile = TileConfig(Dims(60, 60), 20)

    def test_single_tile_matches_rotation_run(self):
        scene = synth_scene(5, 30, [0, 30, 60], dims=Dims(100, 100))
        whole = TileConfig(Dims(100, 100), 0)
        tiled = run_tiling_ensemble(scene, EnsembleConfig(tile=whole), MockBackend())
        plain = run_rotation_ensemble(scene, EnsembleConfig(), MockBackend())
        assert [(d.text, d.bbox, d.confidence) for d in tiled] == [(d.text, d.bbox, d.confidence) for d in plain]

    def test_overlap_word_found_once(self):
        scene = SceneSpec(Dims(100, 100), (word_at(45, 10, text="strip"),))
        stats = EnsembleStats()
        out = run_tiling_ensemble(scene, EnsembleConfig(angles_deg=(0.0,), tile=self.tile), MockBackend(), stats)
        assert [d.text for d in out] == ["strip"]
        assert stats.raw_detections == 2 and stats.merged_away == 1
        assert out[0].bbox.as_tuple() == pytest.approx((45, 10, 51, 13))

    def test_straddler_counted_as_boundary_loss(self):
        scene = SceneSpec(Dims(100, 100), (word_at(35, 10, w=30), word_at(10, 80)))
        stats = EnsembleStats()
        out = run_ensemble(scene, EnsembleConfig(angles_deg=(0.0,), tile=self.tile), MockBackend(), stats)
        assert len(out) == 1
        assert stats.boundary_loss == 1

    def test_tiling_requires_tile_config(self):
        with pytest.raises(ValueError):
            run_tiling_ensemble(SceneSpec(Dims(10, 10), ()), EnsembleConfig(), MockBackend())

    def test_failure_names_tile(self):
        scene = SceneSpec(Dims(100, 100), (word_at(10, 10),))
        with pytest.raises(BackendUnavailable) as exc:
            run_tiling_ensemble(scene, EnsembleConfig(tile=self.tile), FailingBackend(MockBackend(), {30.0}))
        assert exc.value.context["tile"] == (0, 0)
        assert exc.value.context["angle"] == 30.0

