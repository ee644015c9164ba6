"""Sample records and their JSONL wire format.

One JSON object per line::

    {"id": str, "images": [str], "conversations": [{"role": "user"|"assistant", "text": str}],
     "mode": "reason"|"direct", "think": str?, "final": str,
     "annotations": [{"kind": "point"|"rect", "coords": [float], "label": str}]?,
     "meta": object?}

``conversations`` holds the turns that precede the final assistant response;
the final response itself is carried by ``mode``, ``think`` and ``final``.
"""

from __future__ import annotations

import dataclasses
import enum
import io
import json
from pathlib import Path
from typing import IO, Iterator, NamedTuple, Optional, Union

from .errors import InputError, RecordParseError

_TOP_KEYS = {"id", "images", "conversations", "mode", "think", "final", "annotations", "meta"}
_REQUIRED = {"id", "images", "conversations", "mode", "final"}


class Mode(str, enum.Enum):
    REASON = "reason"
    DIRECT = "direct"


@dataclasses.dataclass(frozen=True)
class Turn:
    role: str
    text: str


@dataclasses.dataclass(frozen=True)
class Annotation:
    kind: str
    coords: tuple
    label: str = ""

    def to_dict(self) -> dict:
        return {"kind": self.kind, "coords": list(self.coords), "label": self.label}


@dataclasses.dataclass(frozen=True)
class SampleRecord:
    id: str
    images: tuple
    turns: tuple
    mode: Mode
    final: str
    think: Optional[str] = None
    annotations: Optional[tuple] = None
    meta: Optional[dict] = None

    def validate(self) -> "SampleRecord":
        """Raise ``InputError`` unless the mode/think/final invariants hold."""
        if self.mode is Mode.REASON and self.think is None:
            raise InputError(f"record {self.id}: reasoning record without think text")
        if self.mode is Mode.DIRECT and self.think is not None:
            raise InputError(f"record {self.id}: direct record carries think text")
        if not self.final:
            raise InputError(f"record {self.id}: final answer is empty")
        return self

    @property
    def user_turns(self) -> list:
        return [t for t in self.turns if t.role == "user"]

    def replace(self, **changes) -> "SampleRecord":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = {
            "id": self.id,
            "images": list(self.images),
            "conversations": [{"role": t.role, "text": t.text} for t in self.turns],
            "mode": self.mode.value,
        }
        if self.think is not None:
            d["think"] = self.think
        d["final"] = self.final
        if self.annotations is not None:
            d["annotations"] = [a.to_dict() for a in self.annotations]
        if self.meta is not None:
            d["meta"] = self.meta
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False)

    @classmethod
    def from_dict(cls, d) -> "SampleRecord":
        if not isinstance(d, dict):
            raise InputError("record must be a JSON object")
        unknown = set(d) - _TOP_KEYS
        if unknown:
            raise InputError(f"unknown record fields: {sorted(unknown)}")
        missing = _REQUIRED - set(d)
        if missing:
            raise InputError(f"missing record fields: {sorted(missing)}")
        _expect_type(d["id"], str, "id")
        _expect_type(d["final"], str, "final")
        images = _expect_type(d["images"], list, "images")
        if not all(isinstance(i, str) for i in images):
            raise InputError("images must be a list of strings")
        turns = []
        for t in _expect_type(d["conversations"], list, "conversations"):
            if not isinstance(t, dict) or set(t) != {"role", "text"}:
                raise InputError("each conversation turn needs exactly 'role' and 'text'")
            if t["role"] not in ("user", "assistant") or not isinstance(t["text"], str):
                raise InputError(f"bad conversation turn {t!r}")
            turns.append(Turn(t["role"], t["text"]))
        try:
            mode = Mode(d["mode"])
        except ValueError:
            raise InputError(f"mode must be 'reason' or 'direct', got {d['mode']!r}") from None
        think = d.get("think")
        if think is not None:
            _expect_type(think, str, "think")
        annotations = None
        if d.get("annotations") is not None:
            annotations = tuple(_parse_annotation(a) for a in _expect_type(d["annotations"], list, "annotations"))
        meta = d.get("meta")
        if meta is not None:
            _expect_type(meta, dict, "meta")
        return cls(
            id=d["id"],
            images=tuple(images),
            turns=tuple(turns),
            mode=mode,
            final=d["final"],
            think=think,
            annotations=annotations,
            meta=meta,
        )

    @classmethod
    def from_json(cls, line: str) -> "SampleRecord":
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            raise InputError(f"invalid JSON: {e.msg}") from None
        return cls.from_dict(obj)


def _expect_type(v, typ, name):
    if not isinstance(v, typ) or isinstance(v, bool) and typ is not bool:
        raise InputError(f"field {name!r} must be {typ.__name__}")
    return v


def _parse_annotation(a) -> Annotation:
    if not isinstance(a, dict) or not {"kind", "coords"} <= set(a) or set(a) - {"kind", "coords", "label"}:
        raise InputError(f"bad annotation {a!r}")
    kind = a["kind"]
    coords = a["coords"]
    want = {"point": 2, "rect": 4}.get(kind)
    if want is None:
        raise InputError(f"annotation kind must be 'point' or 'rect', got {kind!r}")
    if (
        not isinstance(coords, list)
        or len(coords) != want
        or not all(isinstance(c, (int, float)) and not isinstance(c, bool) for c in coords)
    ):
        raise InputError(f"{kind} annotation needs {want} numeric coords")
    return Annotation(kind, tuple(coords), a.get("label", ""))


class JsonlLine(NamedTuple):
    line_no: int
    offset: int
    record: Optional[SampleRecord]
    error: Optional[RecordParseError]


def iter_jsonl(source: Union[str, Path, IO[bytes]]) -> Iterator[JsonlLine]:
    """Stream records line by line, reporting parse failures instead of raising.

    Blank lines are skipped. ``offset`` is the byte offset of the line start.
    """
    close = False
    if isinstance(source, (str, Path)):
        fp = open(source, "rb")
        close = True
    else:
        fp = source
    try:
        offset = 0
        for line_no, raw in enumerate(fp, start=1):
            start = offset
            if isinstance(raw, str):
                text = raw
                offset += len(raw.encode("utf-8"))
            else:
                offset += len(raw)
                try:
                    text = raw.decode("utf-8")
                except UnicodeDecodeError as e:
                    yield JsonlLine(line_no, start, None, RecordParseError(f"line {line_no}: {e}", start, line_no))
                    continue
            if not text.strip():
                continue
            try:
                yield JsonlLine(line_no, start, SampleRecord.from_json(text), None)
            except InputError as e:
                yield JsonlLine(line_no, start, None, RecordParseError(f"line {line_no}: {e}", start, line_no))
    finally:
        if close:
            fp.close()


def read_records(source) -> Iterator[SampleRecord]:
    """Yield records, raising ``RecordParseError`` at the first bad line."""
    for item in iter_jsonl(source):
        if item.error is not None:
            raise item.error
        yield item.record


def write_records(records, dest: Union[str, Path, IO[str]]) -> int:
    n = 0
    fp = open(dest, "w", encoding="utf-8") if isinstance(dest, (str, Path)) else dest
    try:
        for rec in records:
            fp.write(rec.to_json())
            fp.write("\n")
            n += 1
    finally:
        if isinstance(dest, (str, Path)):
            fp.close()
    return n


def loads_records(text: str) -> list:
    return list(read_records(io.BytesIO(text.encode("utf-8"))))
