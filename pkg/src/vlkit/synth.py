"""Synthetic multi-image records: scrambled captions, caption matching and
"what's changed?" questions over sequential frames.

Randomness comes from ``numpy.random.default_rng`` seeded with the config
seed plus a CRC32 of the input references, so the same inputs and seed always
give the same record and different groups under one seed are independent.
"""

from __future__ import annotations

import dataclasses
import zlib
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .curation import JudgeClient, image_tags, normalize_answer
from .errors import ConfigError, InputError, TransportError
from .records import Annotation, Mode, SampleRecord, Turn
from .tokenization import NormRect

_MASK64 = (1 << 64) - 1


@dataclasses.dataclass(frozen=True)
class SynthConfig:
    group_size: int = 5
    insert_prob: float = 0.2
    seed: int = 0
    diff_threshold: float = 16 / 255
    fallback: bool = True  # use the pixel diff when the describer fails

    def __post_init__(self):
        if self.group_size < 2:
            raise ConfigError("group_size must be at least 2")
        if not 0.0 <= self.insert_prob <= 1.0:
            raise ConfigError("insert_prob must lie in [0, 1]")
        if not 0.0 <= self.diff_threshold < 1.0:
            raise ConfigError("diff_threshold must lie in [0, 1)")


@dataclasses.dataclass(frozen=True)
class CaptionedImage:
    image: str
    caption: str

    def __post_init__(self):
        if not self.caption.strip():
            raise InputError(f"empty caption for {self.image}")


@dataclasses.dataclass(frozen=True)
class FrameSequence:
    frames: tuple
    timestamps: Optional[tuple] = None

    def __post_init__(self):
        object.__setattr__(self, "frames", tuple(self.frames))
        if len(self.frames) not in (2, 3):
            raise InputError(f"a frame sequence has 2 or 3 frames, got {len(self.frames)}")
        if self.timestamps is not None:
            ts = tuple(self.timestamps)
            if len(ts) != len(self.frames) or any(b < a for a, b in zip(ts, ts[1:])):
                raise InputError("timestamps must match frames and be non-decreasing")
            object.__setattr__(self, "timestamps", ts)


def _rng(cfg: SynthConfig, key: Sequence[str]) -> np.random.Generator:
    digest = zlib.crc32("\x00".join(key).encode("utf-8"))
    return np.random.default_rng([cfg.seed & _MASK64, digest])


def _group_id(kind: str, refs: Sequence[str], seed: int) -> str:
    return f"{kind}-{zlib.crc32(chr(0).join(refs).encode('utf-8')):08x}-s{seed}"


def _provenance(kind, refs, cfg, **extra):
    meta = {"provenance": [{"source_id": list(refs), "transform": kind, "seed": cfg.seed}]}
    meta.update(extra)
    return meta


def synth_scrambled(items: Sequence[CaptionedImage], cfg: SynthConfig = SynthConfig()) -> SampleRecord:
    """Show up to ``group_size`` images, then ask for their captions in a random order.

    With probability ``insert_prob`` (and only when ``items`` holds an image
    beyond the group) one more image is shown after the first round and its
    caption requested. ``meta["request_order"]`` lists the requested image
    numbers (1-based); ``meta["gold"]`` the matching captions.
    """
    if len(items) < 2:
        raise InputError("scrambled captions need at least 2 images")
    group = list(items[: cfg.group_size])
    n = len(group)
    rng = _rng(cfg, [it.image for it in items])
    order = [int(i) + 1 for i in rng.permutation(n)]
    insert = rng.random() < cfg.insert_prob and len(items) > n

    images = [it.image for it in group]
    captions = [it.caption for it in group]
    intro = "".join(image_tags(n)) + f"\nHere are {n} images."
    turns = []
    for k, idx in enumerate(order):
        prompt = f"Caption image {idx}."
        turns.append(Turn("user", f"{intro}\n{prompt}" if k == 0 else prompt))
        turns.append(Turn("assistant", captions[idx - 1]))
    if insert:
        extra = items[n]
        images.append(extra.image)
        captions.append(extra.caption)
        order.append(n + 1)
        turns.append(Turn("user", f"<image_{n + 1}>\nHere is one more image. Caption image {n + 1}."))
        turns.append(Turn("assistant", extra.caption))
    final = turns.pop().text
    gold = [captions[i - 1] for i in order]
    meta = _provenance("scrambled_captions", images, cfg, request_order=order, gold=gold)
    return SampleRecord(
        id=_group_id("scr", images, cfg.seed),
        images=tuple(images),
        turns=tuple(turns),
        mode=Mode.DIRECT,
        final=final,
        meta=meta,
    )


def synth_caption_match(items: Sequence[CaptionedImage], cfg: SynthConfig = SynthConfig()) -> SampleRecord:
    """Show up to ``group_size`` images and a shuffled caption list; ask which caption fits which image.

    ``meta["gold"][j]`` is the 1-based image number for caption ``j + 1``.
    """
    if len(items) < 2:
        raise InputError("caption matching needs at least 2 images")
    group = list(items[: cfg.group_size])
    n = len(group)
    seen = {}
    for it in group:
        key = normalize_answer(it.caption)
        if key in seen:
            raise InputError(f"duplicate caption {it.caption!r} makes the matching ambiguous")
        seen[key] = it.image
    rng = _rng(cfg, [it.image for it in items])
    perm = [int(i) for i in rng.permutation(n)]
    shuffled = [group[p].caption for p in perm]
    gold = [p + 1 for p in perm]

    listing = "\n".join(f"{j + 1}. {c}" for j, c in enumerate(shuffled))
    prompt = (
        "".join(image_tags(n))
        + f"\nMatch each caption to its image.\n{listing}\nAnswer as 'caption -> image' lines."
    )
    final = "\n".join(f"{j + 1} -> image {g}" for j, g in enumerate(gold))
    images = [it.image for it in group]
    return SampleRecord(
        id=_group_id("match", images, cfg.seed),
        images=tuple(images),
        turns=(Turn("user", prompt),),
        mode=Mode.DIRECT,
        final=final,
        meta=_provenance("caption_match", images, cfg, captions=shuffled, gold=gold),
    )


ImageLike = Union[str, Path, np.ndarray]


def load_image(img: ImageLike, root: Optional[str] = None) -> np.ndarray:
    """Load a raster file as an RGB uint8 array; arrays pass through."""
    if isinstance(img, np.ndarray):
        return img
    from PIL import Image

    path = Path(root, img) if root else Path(img)
    try:
        with Image.open(path) as im:
            return np.asarray(im.convert("RGB"))
    except OSError as e:
        raise InputError(f"cannot read image {path}: {e}") from e


def diff_region(a: ImageLike, b: ImageLike, cfg: SynthConfig = SynthConfig(), root=None) -> Optional[NormRect]:
    """Tightest normalized rect around pixels whose max-channel delta exceeds the threshold.

    Integer images are compared on the 0..255 scale, float images on 0..1.
    Returns ``None`` when nothing changed.
    """
    a, b = load_image(a, root), load_image(b, root)
    if a.shape != b.shape:
        raise InputError(f"image shapes differ: {a.shape} vs {b.shape}")
    if a.ndim not in (2, 3):
        raise InputError("images must be 2-D or 3-D arrays")
    if np.issubdtype(a.dtype, np.integer):
        delta = np.abs(a.astype(np.int32) - b.astype(np.int32))
        thr = round(cfg.diff_threshold * 255, 9)
    else:
        delta = np.abs(a.astype(np.float64) - b.astype(np.float64))
        thr = cfg.diff_threshold
    if delta.ndim == 3:
        delta = delta.max(axis=2)
    mask = delta > thr
    rows = np.flatnonzero(mask.any(axis=1))
    if rows.size == 0:
        return None
    cols = np.flatnonzero(mask.any(axis=0))
    H, W = mask.shape
    y0, y1 = int(rows[0]), int(rows[-1])
    x0, x1 = int(cols[0]), int(cols[-1])
    return NormRect(x0 / W, y0 / H, (x1 - x0 + 1) / W, (y1 - y0 + 1) / H)


NO_CHANGE = "No visible change."


def describe_rect(rect: Optional[NormRect]) -> str:
    if rect is None:
        return NO_CHANGE
    x, y, w, h = rect
    return (
        f"The region at x={x:.4f}, y={y:.4f} with width {w:.4f} and height {h:.4f} "
        "(normalized coordinates) changed."
    )


CHANGE_PROMPT = "What changed between these two frames?"


def synth_whats_changed(
    seq: FrameSequence,
    describer: Optional[JudgeClient] = None,
    cfg: SynthConfig = SynthConfig(),
    root: Optional[str] = None,
) -> SampleRecord:
    """Ask what changed between consecutive frames; a triple gives two rounds.

    Answers come from ``describer`` when given; otherwise (or when it fails
    and ``cfg.fallback`` is set) from the pixel diff, in which case the
    changed rect is also attached as an annotation.
    """
    frames = seq.frames
    turns = []
    annotations = []
    sources = []
    for i in range(len(frames) - 1):
        prompt = f"<image_{i + 1}><image_{i + 2}>\n{CHANGE_PROMPT}" if i == 0 else f"<image_{i + 2}>\n{CHANGE_PROMPT}"
        answer = None
        if describer is not None:
            try:
                answer = describer.generate(CHANGE_PROMPT, [frames[i], frames[i + 1]]).strip() or None
            except TransportError:
                if not cfg.fallback:
                    raise
        if answer is None:
            rect = diff_region(frames[i], frames[i + 1], cfg, root)
            answer = describe_rect(rect)
            sources.append("diff")
            if rect is not None:
                annotations.append(Annotation("rect", tuple(rect), f"changed_region_{i + 1}"))
        else:
            sources.append("describer")
        turns.append(Turn("user", prompt))
        turns.append(Turn("assistant", answer))
    final = turns.pop().text
    meta = _provenance("whats_changed", frames, cfg, answer_sources=sources)
    if seq.timestamps is not None:
        meta["timestamps"] = list(seq.timestamps)
    return SampleRecord(
        id=_group_id("chg", frames, cfg.seed),
        images=frames,
        turns=tuple(turns),
        mode=Mode.DIRECT,
        final=final,
        annotations=tuple(annotations) or None,
        meta=meta,
    )
