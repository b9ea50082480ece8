"""
Column order on a newspaper page
================================

Plain top-to-bottom sorting interleaves the columns of a newspaper.
Cutting the page along its widest whitespace gaps, again and again,
recovers the order a reader follows.
"""

from dataclasses import replace

from histread.backends import MockBackend, synth_scene
from histread.ensemble import EnsembleConfig, run_rotation_ensemble
from histread.layout import linearize_text
from histread.pipeline import PipelineConfig, build_document, evaluate

page = synth_scene(seed=5, word_count=90, orientation_set=[0], columns=3)
found = run_rotation_ensemble(page, EnsembleConfig(angles_deg=(0.0,)), MockBackend())
doc = build_document(found, page.dims, PipelineConfig())

report = evaluate(doc, page)
print("kendall tau against the true order:", report.reading_order_kendall_tau)

# the first lines of the text come from the left column only
print(linearize_text(doc)[:200])

# for comparison, number the lines strictly by height and score that order
by_height = sorted(doc.lines.values(), key=lambda ln: (ln.bbox.top, ln.bbox.left))
naive = replace(doc, lines={ln.id: replace(ln, reading_index=i) for i, ln in enumerate(by_height)})
print("kendall tau, top to bottom:", evaluate(naive, page).reading_order_kendall_tau)
