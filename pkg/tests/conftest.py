import pytest

from histread.document import Document, LineBlock, PageBlock, Provenance, WordBlock
from histread.geometry import BBox, Dims


def word(wid, text, box, conf=0.99, angle=0.0):
    return WordBlock(wid, text, BBox(*box), conf, Provenance(angle, 0, 0, "mock"))


def one_line_doc(words, reading_index=0, line_box=None, **extra) -> Document:
    """Single page, single line holding ``words`` left to right."""
    box = line_box
    if box is None:
        box = words[0].bbox
        for w in words[1:]:
            box = box.union(w.bbox)
    line = LineBlock("l-1", box, tuple(w.id for w in words), reading_index)
    page = PageBlock("p-1", 1, Dims(1000, 1000), ("l-1",))
    return Document("d-1", "memory:test", (page,), {"l-1": line}, {w.id: w for w in words}, **extra)


@pytest.fixture
def two_word_doc():
    return one_line_doc([
        word("w-1", "old", (0.10, 0.10, 0.20, 0.12)),
        word("w-2", "dominion", (0.22, 0.10, 0.40, 0.12)),
    ])
