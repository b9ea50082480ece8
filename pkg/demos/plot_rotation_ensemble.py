"""
Reading labels at every angle
=============================

Map labels run in all directions. A reader that only handles level text
misses most of them; reading the page again at a handful of rotations
and merging the results recovers them all.
"""

from histread.backends import MockBackend, synth_scene
from histread.ensemble import EnsembleConfig, EnsembleStats, run_rotation_ensemble
from histread.pipeline import evaluate

# fifty labels, each along one of six directions
scene = synth_scene(seed=3, word_count=50, orientation_set=[0, 30, 60, 90, 120, 150])
backend = MockBackend(alignment_tolerance_deg=15.0)

# a single level pass reads roughly one label in six
level = run_rotation_ensemble(scene, EnsembleConfig(angles_deg=(0.0,)), backend)
print("level only:", evaluate(level, scene).recall)

# six passes, 30 degrees apart, read every label exactly once
stats = EnsembleStats()
everything = run_rotation_ensemble(scene, EnsembleConfig(), backend, stats)
print("six angles:", evaluate(everything, scene).recall)
print("detections per angle:", stats.per_angle)

# each angle is an independent request, so threads can share the work
threaded = run_rotation_ensemble(scene, EnsembleConfig(workers=6), backend)
assert threaded == everything
