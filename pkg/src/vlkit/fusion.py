"""Token accounting for interleaved text and visual soft-token sequences.

Each image placeholder expands in place to a begin marker, the plan's visual
positions and an end marker. No embeddings are materialized; the layout only
records where visual spans land.
"""

from __future__ import annotations

import dataclasses
from typing import Iterable, NamedTuple, Sequence, Union

from .errors import InputError, LayoutReferenceError
from .tokenization import PatchPlan

DEFAULT_MARKER_OVERHEAD = 2


class TextToken(NamedTuple):
    id: int


class ImagePlaceholder(NamedTuple):
    index: int


StreamItem = Union[TextToken, ImagePlaceholder]


class VisualSpan(NamedTuple):
    start: int
    length: int
    image_index: int


@dataclasses.dataclass(frozen=True)
class FusedLayout:
    total_len: int
    visual_spans: tuple
    marker_overhead: int = DEFAULT_MARKER_OVERHEAD

    def to_dict(self) -> dict:
        return {
            "total_len": self.total_len,
            "marker_overhead": self.marker_overhead,
            "visual_spans": [list(s) for s in self.visual_spans],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FusedLayout":
        return cls(
            total_len=int(d["total_len"]),
            visual_spans=tuple(VisualSpan(*s) for s in d["visual_spans"]),
            marker_overhead=int(d.get("marker_overhead", DEFAULT_MARKER_OVERHEAD)),
        )


class Violation(NamedTuple):
    code: str
    message: str


def assemble_sequence(
    stream: Iterable[StreamItem],
    plans: Sequence[PatchPlan],
    marker_overhead: int = DEFAULT_MARKER_OVERHEAD,
) -> FusedLayout:
    """Lay out ``stream`` with every placeholder expanded to its plan's tokens.

    ``ImagePlaceholder(i)`` refers to ``plans[i]``. Every plan must be used
    exactly once.
    """
    if marker_overhead < 0:
        raise InputError("marker_overhead must be non-negative")
    begin = marker_overhead // 2 + marker_overhead % 2
    pos = 0
    seen = set()
    spans = []
    for item in stream:
        if isinstance(item, ImagePlaceholder):
            i = item.index
            if i in seen:
                raise InputError(f"image index {i} appears more than once")
            if not 0 <= i < len(plans):
                raise LayoutReferenceError(f"no plan supplied for image index {i}")
            seen.add(i)
            n = plans[i].token_count
            spans.append(VisualSpan(pos + begin, n, i))
            pos += n + marker_overhead
        elif isinstance(item, TextToken):
            pos += 1
        else:
            raise InputError(f"unexpected stream item {item!r}")
    unused = sorted(set(range(len(plans))) - seen)
    if unused:
        raise InputError(f"plans {unused} are not referenced by any placeholder")
    return FusedLayout(total_len=pos, visual_spans=tuple(spans), marker_overhead=marker_overhead)


def validate_layout(layout: FusedLayout, max_seq_len: int) -> list:
    """Return one ``Violation`` per breached rule; empty when the layout is valid."""
    out = []
    if layout.total_len > max_seq_len:
        out.append(
            Violation("length", f"total_len {layout.total_len} exceeds max_seq_len {max_seq_len}")
        )
    spans = layout.visual_spans
    if any(s.length < 0 or s.start < 0 or s.start + s.length > layout.total_len for s in spans):
        out.append(Violation("bounds", "a visual span falls outside [0, total_len)"))
    if any(b.start < a.start for a, b in zip(spans, spans[1:])):
        out.append(Violation("order", "visual spans are not sorted by start"))
    ordered = sorted(spans)
    if any(a.start + a.length > b.start for a, b in zip(ordered, ordered[1:])):
        out.append(Violation("overlap", "visual spans overlap"))
    indices = [s.image_index for s in spans]
    if len(set(indices)) != len(indices):
        out.append(Violation("duplicate_image", "an image index occurs in more than one span"))
    return out
