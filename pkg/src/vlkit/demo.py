"""Toy corpus and the end-to-end demo pipeline.

``build_toy_corpus`` regenerates the bundled ``data/toy_corpus.jsonl``
exactly. ``run_demo`` pushes it through lint, repair, double-duty
reformatting, synthesis, mixing, a mock-model evaluation and the Pareto
report, writing everything under one work directory.
"""

from __future__ import annotations

import dataclasses
import importlib.resources
import io
import json
import random
import time
import zlib
from pathlib import Path

import numpy as np

from .curation import fix_record, lint_record, reformat_double_duty, summarize_dataset
from .errors import SkipRecord
from .evaluation import (
    EvalSample,
    GenConfig,
    MockModelClient,
    TaskKind,
    aggregate,
    compute_pareto,
    emit_report,
    points_from_summaries,
    render_svg,
    run_benchmark,
)
from .mixture import CategorySpec, check_reasoning_share, plan_mixture
from .records import Annotation, Mode, SampleRecord, Turn, read_records, write_records
from .synth import CaptionedImage, FrameSequence, SynthConfig, synth_caption_match, synth_scrambled, synth_whats_changed

N_IMAGES = 60
BENCHMARKS = (
    ("toy-mc", TaskKind.MULTIPLE_CHOICE),
    ("toy-numeric", TaskKind.RELAXED_NUMERIC),
    ("toy-ground", TaskKind.POINT_IN_BOX),
    ("toy-vqa", TaskKind.EXACT_MATCH),
)
PER_BENCHMARK = 105
COLOURS = ("red", "green", "blue", "yellow", "purple", "orange", "black", "white")
SHAPES = ("circle", "square", "triangle", "star", "ring")
PLACES = ("top left", "top right", "bottom left", "bottom right", "centre")


def _image_ref(i: int) -> str:
    return f"images/toy_{i % N_IMAGES:02d}.png"


def _qa_record(i: int, bench: str, kind: TaskKind, rng: random.Random) -> SampleRecord:
    img = _image_ref(i)
    colour, shape = rng.choice(COLOURS), rng.choice(SHAPES)
    meta = {"benchmark": bench, "task_kind": kind.value}
    annotations = None
    think = None
    if kind is TaskKind.MULTIPLE_CHOICE:
        options = rng.sample(COLOURS, 4)
        if colour not in options:
            options[rng.randrange(4)] = colour
        letter = "ABCD"[options.index(colour)]
        listing = " ".join(f"({l}) {o}" for l, o in zip("ABCD", options))
        q = f"<image_1> Q{i}: What colour is the {shape}? {listing}"
        final = letter
        if rng.random() < 0.4:
            think = f"The {shape} looks {colour}, which is option {letter}."
            final = f"Answer: {letter}"
    elif kind is TaskKind.RELAXED_NUMERIC:
        n = rng.randint(2, 40)
        q = f"<image_1> Q{i}: How many {colour} {shape}s are there?"
        final = str(n)
        if rng.random() < 0.4:
            think = f"Counting row by row gives {n}."
            final = f"Final answer: {n}"
    elif kind is TaskKind.POINT_IN_BOX:
        w, h = rng.choice((0.1, 0.15, 0.2)), rng.choice((0.1, 0.15, 0.2))
        x, y = round(rng.uniform(0, 0.99 - w), 3), round(rng.uniform(0, 0.99 - h), 3)
        q = f"<image_1> Q{i}: Click the {colour} {shape}."
        final = f"({x + w / 2:.3f}, {y + h / 2:.3f})"
        annotations = (Annotation("rect", (x, y, w, h), f"{colour} {shape}"),)
    else:
        q = f"<image_1> Q{i}: Which shape is {colour}?"
        final = shape
        if rng.random() < 0.15:
            q += " Respond in capital letters only."
            final = shape.upper()
    return SampleRecord(
        id=f"toy-{i:04d}",
        images=(img,),
        turns=(Turn("user", q),),
        mode=Mode.REASON if think is not None else Mode.DIRECT,
        final=final,
        think=think,
        annotations=annotations,
        meta=meta,
    )


def _inject_defects(rec: SampleRecord, rng: random.Random) -> SampleRecord:
    u = rng.random()
    if u < 0.06:
        q = rec.turns[0].text.replace("<image_1>", rng.choice(("<imgae_1>", "<image1>", "<Image_1>")), 1)
        return rec.replace(turns=(Turn("user", q),))
    if u < 0.10 and rec.mode is Mode.REASON:
        return rec.replace(think=f"{rec.think} {rec.final}", final="")
    if u < 0.12 and rec.final.isupper() and rec.final.isalpha():
        return rec.replace(final=rec.final.lower())
    if u < 0.14 and rec.annotations:
        x, y, w, h = rec.annotations[0].coords
        return rec.replace(annotations=(Annotation("rect", (x, y, w + 1.0, h), rec.annotations[0].label),))
    return rec


def build_toy_corpus(seed: int = 0) -> list:
    rng = random.Random(seed)
    out = []
    i = 0
    for bench, kind in BENCHMARKS:
        for _ in range(PER_BENCHMARK):
            out.append(_inject_defects(_qa_record(i, bench, kind, rng), rng))
            i += 1
    combos = [(c, s, p) for c in COLOURS for s in SHAPES for p in PLACES]
    rng.shuffle(combos)
    for k in range(500 - i):
        c, s, p = combos[k]
        out.append(
            SampleRecord(
                id=f"toy-{i:04d}",
                images=(f"images/cap_{k:02d}.png",),
                turns=(Turn("user", "<image_1> Describe the image."),),
                mode=Mode.DIRECT,
                final=f"A {c} {s} in the {p}.",
                meta={"kind": "caption"},
            )
        )
        i += 1
    return out


def corpus_text(records) -> str:
    buf = io.StringIO()
    write_records(records, buf)
    return buf.getvalue()


def load_toy_corpus() -> list:
    data = importlib.resources.files("vlkit").joinpath("data/toy_corpus.jsonl").read_bytes()
    return list(read_records(io.BytesIO(data)))


def _write_png(path: Path, arr: np.ndarray) -> None:
    from PIL import Image

    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(arr).save(path)


def render_toy_images(root: Path) -> None:
    """Small synthetic PNGs for every image the corpus and the demo frames reference."""
    for k in range(N_IMAGES):
        # the last two images repeat the first two, exercising the duplicate hints
        v = k % (N_IMAGES - 2)
        arr = np.zeros((64, 64, 3), np.uint8)
        arr[..., 0] = (v * 37) % 256
        arr[..., 1] = (v * 91) % 256
        arr[16:48, 16:48, 2] = 255
        _write_png(root / f"images/toy_{k:02d}.png", arr)
    for k in range(80):
        arr = np.full((64, 64, 3), (k * 53) % 256, np.uint8)
        _write_png(root / f"images/cap_{k:02d}.png", arr)
    for s in range(3):
        for f in range(3):
            arr = np.full((96, 128, 3), 240, np.uint8)
            x = 10 + 20 * f + 5 * s
            arr[30:50, x : x + 16] = (200, 30, 30)
            _write_png(root / f"frames/seq{s}_f{f}.png", arr)


MOCK_MODELS = (
    # name, delay ms, accuracy, tokens per answer word
    ("toy-small", 1.0, 0.55, 1),
    ("toy-medium", 3.0, 0.70, 4),
    ("toy-reasoner", 6.0, 0.85, 40),
    ("toy-laggard", 5.0, 0.50, 8),
)


def _gold_text(s: EvalSample) -> str:
    if s.task_kind is TaskKind.POINT_IN_BOX:
        x, y, w, h = s.reference
        return f"({x + w / 2:.3f}, {y + h / 2:.3f})"
    return str(s.reference)


def mock_client(name: str, delay: float, acc: float, tok: int, samples) -> MockModelClient:
    gold = {s.prompt: _gold_text(s) for s in samples}

    def respond(prompt):
        hit = zlib.crc32(f"{name}:{prompt}".encode()) % 1000 < acc * 1000
        return gold[prompt] if hit else "not sure"

    return MockModelClient(respond, delay_ms=delay, output_tokens=lambda text: tok * len(text.split()))


@dataclasses.dataclass
class DemoResult:
    workdir: str
    stats: dict
    csv_path: str
    svg_path: str
    seconds: float


def run_demo(workdir, seed: int = 0, subset_size: int = 100, records=None) -> DemoResult:
    t0 = time.perf_counter()
    root = Path(workdir)
    root.mkdir(parents=True, exist_ok=True)
    render_toy_images(root)
    records = list(records) if records is not None else load_toy_corpus()
    stats = {}

    # lint + report
    report = summarize_dataset(records, image_root=str(root))
    (root / "lint_report.json").write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    stats["lint"] = report.to_dict()

    # repair
    repaired, excluded = [], []
    for rec in records:
        fixed, _ = fix_record(rec)
        remaining = lint_record(fixed)
        (excluded if any(i.severity.value == "error" for i in remaining) else repaired).append(fixed)
    stats["repaired_records"] = len(repaired)
    stats["excluded_records"] = len(excluded)

    # double duty on the visual QA records
    dd = []
    for rec in repaired:
        if (rec.meta or {}).get("benchmark") == "toy-vqa":
            try:
                dd.append(reformat_double_duty(rec, seed=seed))
            except SkipRecord:
                pass
    stats["double_duty_records"] = len(dd)

    # synthesis
    cfg = SynthConfig(seed=seed)
    caps = [CaptionedImage(r.images[0], r.final) for r in repaired if (r.meta or {}).get("kind") == "caption"]
    synth = []
    for g in range(0, len(caps) - 1, cfg.group_size):
        chunk = caps[g : g + cfg.group_size + 1]
        synth.append(synth_scrambled(chunk, cfg))
        synth.append(synth_caption_match(chunk[: cfg.group_size], cfg))
    for s in range(3):
        frames = [f"frames/seq{s}_f{f}.png" for f in range(2 + s % 2)]
        synth.append(synth_whats_changed(FrameSequence(frames), None, cfg, root=str(root)))
    stats["synth_records"] = len(synth)
    write_records(repaired + dd + synth, root / "train.jsonl")

    # mixture
    reasoning = sum(r.mode is Mode.REASON for r in repaired)
    specs = [
        CategorySpec("general", len(repaired) - reasoning),
        CategorySpec("reasoning", reasoning, reasoning=True),
        CategorySpec("double_duty", len(dd)),
        CategorySpec("synth", len(synth), duplication=2),
    ]
    manifest = plan_mixture(specs, default_avg_tokens=200.0)
    share = check_reasoning_share(manifest)
    (root / "manifest.json").write_text(manifest.to_json())
    stats["mixture"] = {"total_samples": manifest.total_samples, "reasoning_share": share.share,
                        "within_target": share.within}

    # evaluation against mock models
    eval_samples = [EvalSample.from_record(r) for r in repaired if (r.meta or {}).get("benchmark")]
    by_bench = {}
    for s in eval_samples:
        by_bench.setdefault(s.benchmark, []).append(s)
    summaries = {}
    for name, delay, acc, tok in MOCK_MODELS:
        client = mock_client(name, delay, acc, tok, eval_samples)
        results = []
        for bench in sorted(by_bench):
            group = by_bench[bench]
            results += run_benchmark(client, group, GenConfig(), min(subset_size, len(group)), seed)
        summaries[name] = aggregate(results)
        stats.setdefault("max_in_flight", {})[name] = client.max_in_flight

    points = points_from_summaries(summaries, "latency")
    frontier = compute_pareto(points)
    csv_path, svg_path = root / "report.csv", root / "pareto_latency.svg"
    emit_report(summaries, points, frontier, csv_path, svg_path)
    tok_points = points_from_summaries(summaries, "tokens")
    (root / "pareto_tokens.svg").write_text(
        render_svg(tok_points, compute_pareto(tok_points), "mean output tokens") + "\n"
    )
    stats["frontier"] = [points[i].label for i in frontier]
    stats["accuracy"] = {m: s.accuracy for m, s in summaries.items()}
    return DemoResult(str(root), stats, str(csv_path), str(svg_path), time.perf_counter() - t0)
