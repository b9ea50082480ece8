"""
Tiling a large sheet
====================

Services cap the image size they accept, so big sheets are cut into
overlapping tiles. Words in the overlap are read twice and merged back
to one; words cut by every tile edge are lost and reported.
"""

from histread.backends import MockBackend, synth_scene
from histread.ensemble import EnsembleConfig, EnsembleStats, TileConfig, run_tiling_ensemble
from histread.geometry import Dims, compute_tile_grid
from histread.pipeline import evaluate

scene = synth_scene(seed=11, word_count=120, orientation_set=[0, 90], dims=Dims(2000, 1500))

# a narrow overlap: labels longer than 40 units can fall on a seam
tile = TileConfig(tile_dims=Dims(800, 800), overlap=40)
for t in compute_tile_grid(scene.dims, tile.tile_dims, tile.overlap):
    print(t.row, t.col, t.bbox.as_tuple())

stats = EnsembleStats()
found = run_tiling_ensemble(scene, EnsembleConfig(angles_deg=(0.0, 90.0), tile=tile), MockBackend(), stats)

# duplicates from the overlap strips show up as merged_away
print("raw", stats.raw_detections, "merged away", stats.merged_away, "boundary loss", stats.boundary_loss)
print("recall", evaluate(found, scene).recall, "=", (120 - stats.boundary_loss) / 120)

# an overlap wider than the longest word leaves nothing stranded
wide = TileConfig(tile_dims=Dims(800, 800), overlap=150)
stats = EnsembleStats()
run_tiling_ensemble(scene, EnsembleConfig(angles_deg=(0.0, 90.0), tile=wide), MockBackend(), stats)
print("boundary loss with wider overlap:", stats.boundary_loss)
