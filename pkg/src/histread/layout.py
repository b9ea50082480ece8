"""Line grouping and recursive XY-cut reading order."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Sequence

from .document import Document, LineBlock, WordBlock
from .geometry import BBox, Dims


@dataclass(frozen=True)
class LayoutParams:
    line_y_overlap_min: float = 0.5
    min_column_gap: float = 0.03
    min_row_gap: float = 0.015
    max_recursion: int = 12

    def __post_init__(self) -> None:
        if not 0.0 < self.line_y_overlap_min < 1.0 + 1e-12:
            raise ValueError("line_y_overlap_min must lie in (0, 1]")
        if self.min_column_gap <= 0 or self.min_row_gap <= 0:
            raise ValueError("gaps must be positive")
        if self.max_recursion < 1:
            raise ValueError("max_recursion must be >= 1")


@dataclass
class LayoutStats:
    fallbacks: int = 0


def _same_line(a: BBox, b: BBox, params: LayoutParams, max_gap: float) -> bool:
    overlap = min(a.bottom, b.bottom) - max(a.top, b.top)
    if overlap < params.line_y_overlap_min * min(a.height, b.height):
        return False
    gap = max(a.left, b.left) - min(a.right, b.right)
    return gap < max_gap


def group_words_into_lines(
    words: Sequence[WordBlock],
    params: LayoutParams = LayoutParams(),
    page: Dims = Dims(1.0, 1.0),
    line_id: Callable[[int], str] | None = None,
) -> list[LineBlock]:
    """Cluster words into lines.

    Two words are linked when their vertical extents overlap by at least
    ``line_y_overlap_min`` of the shorter height and the horizontal gap
    between them is narrower than a column gap; lines are the transitive
    closure of that relation. Words in a line run left to right; lines are
    returned top to bottom without a reading index.
    """
    n = len(words)
    parent = list(range(n))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    max_gap = params.min_column_gap * page.width
    for i in range(n):
        for j in range(i + 1, n):
            if _same_line(words[i].bbox, words[j].bbox, params, max_gap):
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[max(ri, rj)] = min(ri, rj)

    groups: dict[int, list[WordBlock]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(words[i])

    built = []
    for members in groups.values():
        members.sort(key=lambda w: (w.bbox.left, w.bbox.top, w.id))
        box = members[0].bbox
        for w in members[1:]:
            box = box.union(w.bbox)
        built.append((box, tuple(w.id for w in members)))
    built.sort(key=lambda item: (item[0].top, item[0].left, item[1]))

    make = line_id or (lambda i: f"line-{i:05d}")
    return [LineBlock(make(i), box, wids) for i, (box, wids) in enumerate(built)]


def _gaps(boxes: Sequence[BBox], horizontal: bool) -> list[tuple[float, float]]:
    """Whitespace intervals between the projections of ``boxes`` on one axis."""
    if horizontal:
        spans = sorted((b.top, b.bottom) for b in boxes)
    else:
        spans = sorted((b.left, b.right) for b in boxes)
    gaps = []
    _, end = spans[0]
    for lo, hi in spans[1:]:
        if lo > end:
            gaps.append((end, lo))
        end = max(end, hi)
    return gaps


def _reading_sort(lines: Sequence[LineBlock]) -> list[LineBlock]:
    return sorted(lines, key=lambda ln: (ln.bbox.top, ln.bbox.left, ln.id))


def xy_cut(
    lines: Sequence[LineBlock],
    page: Dims = Dims(1.0, 1.0),
    params: LayoutParams = LayoutParams(),
    blockers: Sequence[BBox] = (),
    stats: LayoutStats | None = None,
) -> list[LineBlock]:
    """Order lines by recursive XY-cut and assign ``reading_index`` 0..n-1.

    Each region is split once, at the widest whitespace gap that spans the
    whole region: a vertical gap of at least ``min_column_gap`` of the page
    width or a horizontal gap of at least ``min_row_gap`` of the page height,
    whichever is wider relative to its page extent (horizontal wins ties).
    Left precedes right and top precedes bottom; uncut regions read top to
    bottom. ``blockers`` are text-free rectangles such as pictures: they
    occupy space, narrowing gaps, but emit nothing.

    Depth counts changes of cut direction, since consecutive cuts along the
    same axis just slice one strip further. A region deeper than
    ``max_recursion`` falls back to top-to-bottom order and is counted in
    ``stats.fallbacks``.
    """
    stats = stats if stats is not None else LayoutStats()
    col_min = params.min_column_gap * page.width
    row_min = params.min_row_gap * page.height

    ordered: list[LineBlock] = []
    # (lines, blockers, depth, axis of the cut that produced this region)
    stack: list[tuple[list[LineBlock], list[BBox], int, bool | None]] = [(list(lines), list(blockers), 0, None)]
    while stack:
        region, blocks, depth, parent_axis = stack.pop()
        if len(region) <= 1:
            ordered.extend(region)
            continue
        boxes = [ln.bbox for ln in region] + blocks

        best: tuple[float, bool, tuple[float, float]] | None = None
        for horizontal, minimum, extent in ((True, row_min, page.height), (False, col_min, page.width)):
            for lo, hi in _gaps(boxes, horizontal):
                width = hi - lo
                if width < minimum:
                    continue
                score = width / extent
                if best is None or score > best[0]:
                    best = (score, horizontal, (lo, hi))
        if best is None:
            ordered.extend(_reading_sort(region))
            continue

        _, horizontal, (lo, _hi) = best
        next_depth = depth + (parent_axis is None or parent_axis != horizontal)
        if next_depth > params.max_recursion:
            stats.fallbacks += 1
            ordered.extend(_reading_sort(region))
            continue

        def first_side(b: BBox) -> bool:
            return (b.bottom if horizontal else b.right) <= lo

        head = [ln for ln in region if first_side(ln.bbox)]
        tail = [ln for ln in region if not first_side(ln.bbox)]
        head_b = [b for b in blocks if first_side(b)]
        tail_b = [b for b in blocks if not first_side(b)]
        stack.append((tail, tail_b, next_depth, horizontal))
        stack.append((head, head_b, next_depth, horizontal))

    return [replace(ln, reading_index=i) for i, ln in enumerate(ordered)]


def linearize_text(doc: Document) -> str:
    """Page text in reading order: words joined by spaces, lines by newlines, pages by blank lines."""
    pages = []
    for page in doc.pages:
        lines = doc.ordered_lines(page)
        pages.append("\n".join(" ".join(doc.words[w].text for w in ln.word_ids) for ln in lines))
    return "\n\n".join(pages)
