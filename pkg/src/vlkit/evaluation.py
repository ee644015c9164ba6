"""Benchmark runner, scorers, aggregation, Pareto frontier and reports.

Timed runs are strictly sequential: one request in flight, latency taken with
``time.perf_counter_ns`` around the full client call.
"""

from __future__ import annotations

import collections
import csv
import dataclasses
import enum
import logging
import math
import os
import re
import threading
import time
import xml.etree.ElementTree as ET
from concurrent.futures import ThreadPoolExecutor
from decimal import Decimal, InvalidOperation
from typing import Callable, Optional, Protocol, Sequence, Union

import numpy as np

from .curation import encode_images, post_json
from .errors import ConfigError, InputError, TransportError
from .records import SampleRecord
from .tokenization import NormRect

log = logging.getLogger(__name__)


class TaskKind(str, enum.Enum):
    EXACT_MATCH = "exact_match"
    MULTIPLE_CHOICE = "multiple_choice"
    RELAXED_NUMERIC = "relaxed_numeric"
    POINT_IN_BOX = "point_in_box"


@dataclasses.dataclass(frozen=True)
class GenConfig:
    temperature: float = 0.0
    decoding: str = "greedy"
    max_output_tokens: int = 4096

    def __post_init__(self):
        if self.temperature < 0:
            raise ConfigError("temperature must be >= 0")
        if self.decoding != "greedy":
            raise ConfigError("only greedy decoding is supported")
        if self.max_output_tokens < 1:
            raise ConfigError("max_output_tokens must be >= 1")


@dataclasses.dataclass(frozen=True)
class EvalSample:
    id: str
    benchmark: str
    task_kind: TaskKind
    prompt: str
    images: tuple = ()
    reference: Union[str, NormRect] = ""

    def __post_init__(self):
        object.__setattr__(self, "task_kind", TaskKind(self.task_kind))
        if (self.task_kind is TaskKind.POINT_IN_BOX) != isinstance(self.reference, NormRect):
            raise InputError(f"sample {self.id}: point_in_box needs a NormRect reference (and only it)")

    @classmethod
    def from_record(cls, rec: SampleRecord) -> "EvalSample":
        """Build from a JSONL record with ``benchmark`` and ``task_kind`` in ``meta``.

        Point-in-box references come from the record's first rect annotation.
        """
        meta = rec.meta or {}
        try:
            kind = TaskKind(meta["task_kind"])
            bench = meta["benchmark"]
        except (KeyError, ValueError) as e:
            raise InputError(f"record {rec.id}: meta needs valid 'benchmark' and 'task_kind'") from e
        users = rec.user_turns
        if not users:
            raise InputError(f"record {rec.id}: no user turn")
        if kind is TaskKind.POINT_IN_BOX:
            rects = [a for a in rec.annotations or () if a.kind == "rect"]
            if not rects:
                raise InputError(f"record {rec.id}: point_in_box needs a rect annotation")
            reference = NormRect(*rects[0].coords)
        else:
            reference = rec.final
        return cls(rec.id, bench, kind, users[-1].text, tuple(rec.images), reference)


@dataclasses.dataclass(frozen=True)
class Generation:
    text: str
    output_tokens: Optional[int] = None


@dataclasses.dataclass(frozen=True)
class EvalResult:
    sample_id: str
    benchmark: str
    prediction: str
    score: int
    latency_ms: float
    output_tokens: int
    token_source: str = "server"
    parse_failed: bool = False
    error: Optional[str] = None

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


class ModelClient(Protocol):
    def generate(self, prompt: str, images: Sequence[str], gen: GenConfig) -> Generation: ...


class MockModelClient:
    """Deterministic stand-in for a model endpoint.

    ``respond(sample_prompt) -> text`` defaults to echoing nothing useful;
    ``delay_ms`` is a number or ``prompt -> ms``. Tracks the peak number of
    concurrent calls in ``max_in_flight`` so tests can check sequencing.
    """

    def __init__(self, respond=None, delay_ms=0.0, output_tokens=None, fail_on=None):
        self.respond = respond or (lambda prompt: "")
        self.delay_ms = delay_ms
        self.output_tokens = output_tokens
        self.fail_on = fail_on or (lambda prompt: False)
        self.calls = 0
        self.in_flight = 0
        self.max_in_flight = 0
        self._lock = threading.Lock()

    def generate(self, prompt, images, gen):
        with self._lock:
            self.calls += 1
            self.in_flight += 1
            self.max_in_flight = max(self.max_in_flight, self.in_flight)
        try:
            delay = self.delay_ms(prompt) if callable(self.delay_ms) else self.delay_ms
            if delay:
                time.sleep(delay / 1000.0)
            if self.fail_on(prompt):
                raise TransportError("mock endpoint failure")
            text = self.respond(prompt)
            n = self.output_tokens(text) if callable(self.output_tokens) else self.output_tokens
            return Generation(text, n)
        finally:
            with self._lock:
                self.in_flight -= 1


class HttpModelClient:
    """``{"prompt", "images", "max_output_tokens", "temperature"}`` -> ``{"text", "output_tokens"?}``."""

    def __init__(self, endpoint, api_key=None, image_root=None, timeout=600.0):
        self.endpoint = endpoint
        self.api_key = api_key
        self.image_root = image_root
        self.timeout = timeout

    @classmethod
    def from_env(cls, **kw):
        endpoint = os.environ.get("VLKIT_ENDPOINT")
        if not endpoint:
            raise ConfigError("VLKIT_ENDPOINT is not set")
        return cls(endpoint, api_key=os.environ.get("VLKIT_API_KEY"), **kw)

    def generate(self, prompt, images, gen):
        payload = {
            "prompt": prompt,
            "images": encode_images(images, self.image_root),
            "max_output_tokens": gen.max_output_tokens,
            "temperature": gen.temperature,
        }
        resp = post_json(self.endpoint, payload, self.api_key, self.timeout)
        if not isinstance(resp.get("text"), str):
            raise TransportError("model response lacks a 'text' string")
        n = resp.get("output_tokens")
        return Generation(resp["text"], int(n) if n is not None else None)


def whitespace_tokens(text: str) -> int:
    return len(text.split())


def draw_subset(n: int, subset_size: int, seed: int) -> np.ndarray:
    """Sorted distinct indices; the same (n, size, seed) always gives the same set."""
    if not 0 <= subset_size <= n:
        raise InputError(f"subset_size {subset_size} not in [0, {n}]")
    rng = np.random.default_rng(seed)
    return np.sort(rng.choice(n, size=subset_size, replace=False))


def run_benchmark(
    client: ModelClient,
    samples: Sequence[EvalSample],
    gen: GenConfig = GenConfig(),
    subset_size: Optional[int] = None,
    seed: int = 0,
    tokenizer: Callable[[str], int] = whitespace_tokens,
    fail_fast: bool = False,
    workers: int = 1,
    timed: bool = True,
) -> list:
    """Score a seeded random subset of ``samples``.

    Timed runs use exactly one worker. A transport failure yields a result
    scored 0 with ``error`` set, unless ``fail_fast`` is on. When the client
    reports no token count, ``tokenizer`` counts the text and the result is
    labeled ``token_source="fallback"``.
    """
    if timed and workers != 1:
        raise ConfigError("timed runs must use a single worker")
    size = len(samples) if subset_size is None else subset_size
    chosen = [samples[i] for i in draw_subset(len(samples), size, seed)]

    def one(s: EvalSample) -> EvalResult:
        t0 = time.perf_counter_ns()
        try:
            out = client.generate(s.prompt, list(s.images), gen)
        except TransportError as e:
            latency = (time.perf_counter_ns() - t0) / 1e6
            if fail_fast:
                raise
            log.warning("sample %s failed: %s", s.id, e)
            return EvalResult(s.id, s.benchmark, "", 0, latency, 0, "none", False, str(e))
        latency = (time.perf_counter_ns() - t0) / 1e6
        if out.output_tokens is not None:
            tokens, source = out.output_tokens, "server"
        else:
            tokens, source = tokenizer(out.text), "fallback"
        sc = score_sample(s.task_kind, out.text, s.reference)
        return EvalResult(s.id, s.benchmark, out.text, sc.value, latency, tokens, source, sc.parse_failed)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(one, chosen))
    return [one(s) for s in chosen]


# ---------------------------------------------------------------- scoring


@dataclasses.dataclass(frozen=True)
class Score:
    value: int
    parse_failed: bool = False


_NUM_RE = re.compile(r"[-+]?(?:\d{1,3}(?:,\d{3})+|\d+)(?:\.\d+)?|[-+]?\.\d+")
_PAREN_LETTER = re.compile(r"\(([A-J])\)")
_ANSWER_LETTER = re.compile(r"answer\s*(?:is|:)?\s*\(?([A-J])\b(?!')", re.IGNORECASE)
_BARE_LETTER = re.compile(r"(?<![\w'])([A-J])(?![\w'])")


def extract_choice(text: str) -> Optional[str]:
    """Option letter from free text: last ``(X)``, else "answer is X", else the last standalone A-J."""
    for rx in (_PAREN_LETTER, _ANSWER_LETTER, _BARE_LETTER):
        found = rx.findall(text)
        if found:
            return found[-1].upper()
    return None


def _last_number(text: str) -> Optional[Decimal]:
    found = _NUM_RE.findall(text)
    if not found:
        return None
    try:
        return Decimal(found[-1].replace(",", ""))
    except InvalidOperation:
        return None


def score_sample(kind: TaskKind, prediction: str, reference, rel_tol: float = 0.05) -> Score:
    """Return 0 or 1; unparseable predictions score 0 with ``parse_failed`` set."""
    kind = TaskKind(kind)
    if kind is TaskKind.EXACT_MATCH:
        norm = lambda s: " ".join(s.split()).casefold()
        return Score(int(norm(prediction) == norm(str(reference))))
    if kind is TaskKind.MULTIPLE_CHOICE:
        got = extract_choice(prediction)
        want = extract_choice(str(reference)) or str(reference).strip().upper()
        if got is None:
            return Score(0, True)
        return Score(int(got == want))
    if kind is TaskKind.RELAXED_NUMERIC:
        got = _last_number(prediction)
        want = _last_number(str(reference))
        if want is None:
            raise InputError(f"numeric reference {reference!r} has no number")
        if got is None:
            return Score(0, True)
        return Score(int(abs(got - want) <= Decimal(str(rel_tol)) * abs(want)))
    if not isinstance(reference, NormRect):
        raise InputError("point_in_box needs a NormRect reference")
    nums = _NUM_RE.findall(prediction)
    if len(nums) < 2:
        return Score(0, True)
    x, y = (float(n.replace(",", "")) for n in nums[:2])
    return Score(int(reference.contains(x, y)))


# ---------------------------------------------------------------- aggregation


@dataclasses.dataclass(frozen=True)
class BenchmarkStats:
    benchmark: str
    n: int
    accuracy: float  # percent
    mean_latency_ms: float
    mean_output_tokens: float
    errors: int = 0
    token_source: str = "server"


@dataclasses.dataclass(frozen=True)
class Summary:
    per_benchmark: tuple
    accuracy: float
    mean_latency_ms: float
    mean_output_tokens: float

    def to_dict(self, model: str = "") -> dict:
        return {
            "model": model,
            "accuracy": self.accuracy,
            "mean_latency_ms": self.mean_latency_ms,
            "mean_output_tokens": self.mean_output_tokens,
            "benchmarks": [dataclasses.asdict(b) for b in self.per_benchmark],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Summary":
        try:
            return cls(
                tuple(BenchmarkStats(**b) for b in d["benchmarks"]),
                float(d["accuracy"]),
                float(d["mean_latency_ms"]),
                float(d["mean_output_tokens"]),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise InputError(f"malformed summary: {e}") from e


def aggregate(results) -> Summary:
    """Per-benchmark means first, then the unweighted mean across benchmarks.

    ``results`` is a flat list of ``EvalResult`` or a mapping
    ``benchmark -> results``; empty groups are skipped with a warning.
    """
    if isinstance(results, dict):
        groups = dict(results)
    else:
        groups = collections.defaultdict(list)
        for r in results:
            groups[r.benchmark].append(r)
    stats = []
    for name in sorted(groups):
        rs = groups[name]
        if not rs:
            log.warning("benchmark %s has no results; excluded", name)
            continue
        sources = sorted({r.token_source for r in rs if r.error is None}) or ["none"]
        stats.append(
            BenchmarkStats(
                name,
                len(rs),
                100.0 * sum(r.score for r in rs) / len(rs),
                sum(r.latency_ms for r in rs) / len(rs),
                sum(r.output_tokens for r in rs) / len(rs),
                sum(r.error is not None for r in rs),
                "+".join(sources),
            )
        )
    if not stats:
        return Summary((), float("nan"), float("nan"), float("nan"))
    k = len(stats)
    return Summary(
        tuple(stats),
        sum(s.accuracy for s in stats) / k,
        sum(s.mean_latency_ms for s in stats) / k,
        sum(s.mean_output_tokens for s in stats) / k,
    )


# ---------------------------------------------------------------- pareto


@dataclasses.dataclass(frozen=True)
class ParetoPoint:
    label: str
    cost: float
    accuracy: float

    def __post_init__(self):
        if not (math.isfinite(self.cost) and math.isfinite(self.accuracy)):
            raise InputError(f"{self.label}: cost and accuracy must be finite")
        if not 0.0 <= self.accuracy <= 100.0:
            raise InputError(f"{self.label}: accuracy must lie in [0, 100]")


def compute_pareto(points: Sequence[ParetoPoint]) -> list:
    """Indices of non-dominated points (lower cost, higher accuracy), sorted by cost then index.

    Equal points do not dominate each other, so duplicates are all kept.
    """
    order = sorted(range(len(points)), key=lambda i: (points[i].cost, i))
    frontier = []
    best_before = -math.inf  # best accuracy among strictly cheaper points
    j = 0
    while j < len(order):
        k = j
        cost = points[order[j]].cost
        while k < len(order) and points[order[k]].cost == cost:
            k += 1
        group = order[j:k]
        top = max(points[i].accuracy for i in group)
        if top > best_before:
            frontier.extend(i for i in group if points[i].accuracy == top)
        best_before = max(best_before, top)
        j = k
    return frontier


def points_from_summaries(summaries: dict, axis: str = "latency") -> list:
    if axis not in ("latency", "tokens"):
        raise ConfigError("cost axis must be 'latency' or 'tokens'")
    out = []
    for model in sorted(summaries):
        s = summaries[model]
        if not s.per_benchmark:
            continue
        cost = s.mean_latency_ms if axis == "latency" else s.mean_output_tokens
        out.append(ParetoPoint(model, cost, s.accuracy))
    return out


# ---------------------------------------------------------------- reports

CSV_COLUMNS = ("model", "benchmark", "accuracy", "mean_latency_ms", "mean_output_tokens", "token_source")


def write_csv(summaries: dict, path) -> int:
    rows = 0
    with open(path, "w", newline="", encoding="utf-8") as fp:
        w = csv.writer(fp, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for model in sorted(summaries):
            for b in summaries[model].per_benchmark:
                w.writerow([model, b.benchmark, f"{b.accuracy:.4f}", f"{b.mean_latency_ms:.4f}",
                            f"{b.mean_output_tokens:.4f}", b.token_source])
                rows += 1
    return rows


def render_svg(points: Sequence[ParetoPoint], frontier: Sequence[int], cost_label: str = "mean latency (ms)") -> str:
    """Accuracy-vs-cost scatter; frontier points carry ``class="point frontier"``."""
    W, H, pad = 640, 420, 60
    svg = ET.Element("svg", xmlns="http://www.w3.org/2000/svg", width=str(W), height=str(H),
                     viewBox=f"0 0 {W} {H}")
    ET.SubElement(svg, "rect", x="0", y="0", width=str(W), height=str(H), fill="white")
    ET.SubElement(svg, "line", x1=str(pad), y1=str(H - pad), x2=str(W - pad), y2=str(H - pad), stroke="black")
    ET.SubElement(svg, "line", x1=str(pad), y1=str(pad), x2=str(pad), y2=str(H - pad), stroke="black")
    xl = ET.SubElement(svg, "text", x=str(W // 2), y=str(H - 15), **{"text-anchor": "middle"})
    xl.text = cost_label
    yl = ET.SubElement(svg, "text", x="15", y=str(H // 2), transform=f"rotate(-90 15 {H // 2})",
                       **{"text-anchor": "middle"})
    yl.text = "accuracy (%)"
    if not points:
        t = ET.SubElement(svg, "text", x=str(W // 2), y=str(H // 2), **{"text-anchor": "middle"})
        t.text = "no data"
        return ET.tostring(svg, encoding="unicode")

    lo = min(p.cost for p in points)
    hi = max(p.cost for p in points)
    if hi == lo:
        lo, hi = lo - 1.0, hi + 1.0

    def sx(c):
        return pad + (c - lo) / (hi - lo) * (W - 2 * pad)

    def sy(a):
        return H - pad - a / 100.0 * (H - 2 * pad)

    for tick in (0, 25, 50, 75, 100):
        t = ET.SubElement(svg, "text", x=str(pad - 8), y=f"{sy(tick) + 4:.2f}", **{"text-anchor": "end"})
        t.text = str(tick)
    for c in (lo, hi):
        t = ET.SubElement(svg, "text", x=f"{sx(c):.2f}", y=str(H - pad + 18), **{"text-anchor": "middle"})
        t.text = f"{c:.4g}"
    on = set(frontier)
    if len(frontier) > 1:
        coords = " ".join(f"{sx(points[i].cost):.2f},{sy(points[i].accuracy):.2f}" for i in frontier)
        ET.SubElement(svg, "polyline", points=coords, fill="none", stroke="#d62728")
    for i, p in enumerate(points):
        cls = "point frontier" if i in on else "point"
        circ = ET.SubElement(svg, "circle", cx=f"{sx(p.cost):.2f}", cy=f"{sy(p.accuracy):.2f}", r="5",
                             fill="#d62728" if i in on else "#1f77b4", **{"class": cls})
        ET.SubElement(circ, "title").text = f"{p.label}: {p.accuracy:.2f}% at {p.cost:.4g}"
        lab = ET.SubElement(svg, "text", x=f"{sx(p.cost) + 7:.2f}", y=f"{sy(p.accuracy) - 7:.2f}",
                            **{"font-size": "11"})
        lab.text = p.label
    return ET.tostring(svg, encoding="unicode")


def emit_report(summaries: dict, points, frontier, csv_path, svg_path, cost_label="mean latency (ms)") -> None:
    """Write the per-model, per-benchmark CSV and the Pareto SVG."""
    write_csv(summaries, csv_path)
    with open(svg_path, "w", encoding="utf-8") as fp:
        fp.write(render_svg(points, frontier, cost_label))
        fp.write("\n")
