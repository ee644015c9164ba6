"""Dataset quality tooling: lint, repair, label suggestion, reformatting and
judge-based answer regeneration.

Nothing here mutates its inputs. Every derived record carries a provenance
entry (source id, transform name, seed) in ``meta["provenance"]``.
"""

from __future__ import annotations

import base64
import collections
import dataclasses
import enum
import hashlib
import json
import logging
import os
import random
import re
import urllib.error
import urllib.request
from concurrent.futures import ThreadPoolExecutor
from decimal import Decimal, InvalidOperation
from pathlib import Path
from typing import Callable, Iterable, Optional, Protocol, Sequence

from .errors import BudgetExceededError, ConfigError, InputError, SkipRecord, TransportError
from .issues import IssueCode, LintIssue, Location
from .records import Mode, SampleRecord, Turn
from .transcript import (
    DEFAULT_ANSWER_PATTERNS,
    PROTOCOL_TOKENS,
    Fix,
    ParsedMode,
    parse_transcript,
    render_response,
    repair_transcript,
)

log = logging.getLogger(__name__)

TAG_RE = re.compile(r"<[^<>\s]{1,40}>")
IMAGE_TAG_RE = re.compile(r"<image_(\d+)>")


def image_tags(n: int) -> list:
    return [f"<image_{i}>" for i in range(1, n + 1)]


def edit_distance(a: str, b: str) -> int:
    """Optimal string alignment distance (adjacent transpositions cost 1)."""
    prev2 = None
    prev = list(range(len(b) + 1))
    for i in range(1, len(a) + 1):
        cur = [i] + [0] * len(b)
        for j in range(1, len(b) + 1):
            cost = a[i - 1] != b[j - 1]
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + cost)
            if i > 1 and j > 1 and a[i - 1] == b[j - 2] and a[i - 2] == b[j - 1]:
                cur[j] = min(cur[j], prev2[j - 2] + 1)
        prev2, prev = prev, cur
    return prev[-1]


# ---------------------------------------------------------------- answers

_NUMERIC_RE = re.compile(
    r"^(?P<cur>[$€£¥])?\s*(?P<num>[-+]?(?:\d{1,3}(?:,\d{3})+|\d+)(?:\.\d*)?|[-+]?\.\d+)"
    r"\s*(?P<unit>[^\W\d_][\w/°%²³]{0,11}|%|°)?\.?$"
)


def canonical_number(text: str) -> Optional[str]:
    """Canonical decimal string for numeric answers, ignoring units and trailing zeros."""
    m = _NUMERIC_RE.match(text.strip())
    if not m:
        return None
    try:
        d = Decimal(m.group("num").replace(",", ""))
    except InvalidOperation:
        return None
    if d == 0:
        return "0"
    out = format(d.normalize(), "f")
    return out


def normalize_answer(text: str) -> str:
    """Trim, case-fold and canonicalize numbers before comparing answers."""
    t = " ".join(text.strip().split())
    num = canonical_number(t)
    if num is not None:
        return num
    return t.casefold().rstrip(".")


@dataclasses.dataclass(frozen=True)
class Verdict:
    verified: bool
    answer: Optional[str]
    share: float
    counts: tuple = ()

    def to_dict(self) -> dict:
        return {"verified": self.verified, "answer": self.answer, "share": self.share}


def majority_vote(
    candidates: Sequence[str],
    normalizer: Callable[[str], str] = normalize_answer,
    threshold: float = 0.5,
) -> Verdict:
    """Accept the answer whose share of the normalized votes strictly exceeds ``threshold``.

    The returned answer is the most frequent raw spelling in the winning group
    (lexicographically smallest on ties), so the result does not depend on
    candidate order.
    """
    if not candidates:
        raise InputError("majority_vote needs at least one candidate")
    if not 0.5 <= threshold <= 1.0:
        raise ConfigError(f"threshold must lie in [0.5, 1.0], got {threshold}")
    groups = collections.defaultdict(list)
    for c in candidates:
        groups[normalizer(c)].append(c.strip())
    counts = tuple(sorted(((k, len(v)) for k, v in groups.items()), key=lambda kv: (-kv[1], kv[0])))
    key, n = counts[0]
    share = n / len(candidates)
    if share <= threshold:
        return Verdict(False, None, share, counts)
    spellings = collections.Counter(groups[key])
    answer = min(spellings, key=lambda s: (-spellings[s], s))
    return Verdict(True, answer, share, counts)


# ---------------------------------------------------------------- templates


@dataclasses.dataclass(frozen=True)
class FormatTemplate:
    """An output-format instruction and the rewrite that makes an answer comply.

    ``apply`` raises ``SkipRecord`` when the answer cannot be expressed in the
    format; it is idempotent, so an answer complies iff ``apply(a) == a``.
    """

    name: str
    instruction: str
    apply: Callable[[str], str]

    def complies(self, answer: str) -> bool:
        try:
            return self.apply(answer) == answer
        except SkipRecord:
            return False


def _single_word(a: str) -> str:
    a = a.strip().rstrip(".!")
    if len(a.split()) != 1:
        raise SkipRecord("answer is not a single word")
    return a


def _as_json(a: str) -> str:
    try:
        obj = json.loads(a)
        if isinstance(obj, dict) and set(obj) == {"answer"}:
            return a
    except json.JSONDecodeError:
        pass
    return json.dumps({"answer": a.strip()}, ensure_ascii=False)


def _number_only(a: str) -> str:
    num = canonical_number(a)
    if num is None:
        raise SkipRecord("answer is not numeric")
    return num


def _short_phrase(a: str) -> str:
    a = a.strip()
    if not a or len(a.split()) > 5:
        raise SkipRecord("answer is longer than five words")
    return a


DEFAULT_TEMPLATES = (
    FormatTemplate("single_word", "Answer with a single word.", _single_word),
    FormatTemplate("json", 'Give the answer as JSON in the form {"answer": ...}.', _as_json),
    FormatTemplate("uppercase", "Respond in capital letters only.", lambda a: a.strip().upper()),
    FormatTemplate("number", "Answer with a number only.", _number_only),
    FormatTemplate("short_phrase", "Answer in at most five words.", _short_phrase),
)


def _requested_template(rec: SampleRecord, templates) -> Optional[FormatTemplate]:
    name = (rec.meta or {}).get("format_template")
    for t in templates:
        if t.name == name:
            return t
    users = rec.user_turns
    if users:
        last = users[-1].text.rstrip()
        for t in templates:
            if last.endswith(t.instruction):
                return t
    return None


def add_provenance(rec: SampleRecord, transform: str, seed=None, **extra) -> dict:
    meta = dict(rec.meta or {})
    entry = {"source_id": rec.id, "transform": transform, "seed": seed}
    entry.update(extra)
    meta["provenance"] = list(meta.get("provenance", [])) + [entry]
    return meta


# ---------------------------------------------------------------- lint


def _text_fields(rec: SampleRecord):
    for i, t in enumerate(rec.turns):
        yield f"conversations[{i}]", t.text
    if rec.think is not None:
        yield "think", rec.think
    yield "final", rec.final


def _nearest_tag(tag: str, known: Sequence[str]):
    best = min(known, key=lambda k: (edit_distance(tag, k), k), default=None)
    return best, (edit_distance(tag, best) if best is not None else None)


def lint_record(
    rec: SampleRecord,
    known_tags: Optional[Sequence[str]] = None,
    templates: Sequence[FormatTemplate] = DEFAULT_TEMPLATES,
    patterns: Sequence[str] = DEFAULT_ANSWER_PATTERNS,
) -> list:
    """Detect defects in one record; pure and deterministic.

    ``known_tags`` defaults to ``<image_1>`` ... ``<image_n>`` for the record's
    ``n`` images.
    """
    known = list(known_tags) if known_tags is not None else image_tags(len(rec.images))
    known_set = set(known)
    issues = []

    def add(code, field, span=None, detail="", fixable=None):
        issues.append(LintIssue(code, Location(rec.id, field, span), detail, fixable))

    for field, text in _text_fields(rec):
        for m in TAG_RE.finditer(text):
            tag = m.group(0)
            if tag in known_set or tag in PROTOCOL_TOKENS:
                continue
            if IMAGE_TAG_RE.fullmatch(tag):
                add(IssueCode.DANGLING_IMAGE_REF, field, m.span(), tag)
                continue
            near, d = _nearest_tag(tag, known)
            if near is not None and 1 <= d <= 2:
                add(IssueCode.MISSPELLED_IMAGE_TAG, field, m.span(), f"{tag} -> {near}")

    for i, ann in enumerate(rec.annotations or ()):
        c = ann.coords
        bad = any(not 0.0 <= v <= 1.0 for v in c)
        if ann.kind == "rect" and not bad:
            bad = c[0] + c[2] > 1.0 or c[1] + c[3] > 1.0
        if bad:
            add(IssueCode.COORD_OUT_OF_RANGE, f"annotations[{i}]", detail=str(list(c)))

    if (rec.mode is Mode.REASON) != (rec.think is not None):
        add(IssueCode.MODE_MISMATCH, "mode", detail=f"mode {rec.mode.value} with think={rec.think is not None}")
    parsed = parse_transcript(render_response(rec.mode, rec.think, rec.final), patterns, rec.id)
    for iss in parsed.issues:
        issues.append(dataclasses.replace(iss, location=Location(rec.id, "response", iss.location.span)))

    tmpl = _requested_template(rec, templates)
    if tmpl is not None and rec.final and not tmpl.complies(rec.final):
        try:
            tmpl.apply(rec.final)
            fixable = True
        except SkipRecord:
            fixable = False
        add(IssueCode.FORMAT_MISMATCH, "final", detail=tmpl.name, fixable=fixable)
    return issues


# ---------------------------------------------------------------- fixers


def _fix_tags(rec, issue, known, templates, patterns):
    field = issue.location.field

    def fix_text(text):
        def sub(m):
            tag = m.group(0)
            if tag in known or tag in PROTOCOL_TOKENS or IMAGE_TAG_RE.fullmatch(tag):
                return tag
            near, d = _nearest_tag(tag, known)
            return near if near is not None and 1 <= d <= 2 else tag

        return TAG_RE.sub(sub, text)

    if field.startswith("conversations["):
        i = int(field[len("conversations[") : -1])
        turns = list(rec.turns)
        turns[i] = Turn(turns[i].role, fix_text(turns[i].text))
        return rec.replace(turns=tuple(turns))
    if field == "think":
        return rec.replace(think=fix_text(rec.think))
    return rec.replace(final=fix_text(rec.final))


def _fix_answer_in_think(rec, issue, known, templates, patterns):
    parsed = parse_transcript(render_response(rec.mode, rec.think, rec.final), patterns)
    text, fixes = repair_transcript(parsed, patterns)
    if not fixes or fixes[0].action != "applied":
        raise SkipRecord("answer_in_think could not be repaired")
    again = parse_transcript(text, patterns)
    return rec.replace(think=again.think, final=again.final)


def _fix_format(rec, issue, known, templates, patterns):
    tmpl = _requested_template(rec, templates)
    return rec.replace(final=tmpl.apply(rec.final))


FIXERS = {
    IssueCode.MISSPELLED_IMAGE_TAG: _fix_tags,
    IssueCode.ANSWER_IN_THINK: _fix_answer_in_think,
    IssueCode.FORMAT_MISMATCH: _fix_format,
}


def fix_record(
    rec: SampleRecord,
    issues: Optional[Sequence[LintIssue]] = None,
    known_tags: Optional[Sequence[str]] = None,
    templates: Sequence[FormatTemplate] = DEFAULT_TEMPLATES,
    patterns: Sequence[str] = DEFAULT_ANSWER_PATTERNS,
) -> tuple:
    """Run the registered fixer for each fixable issue; returns ``(record, fixes)``."""
    if issues is None:
        issues = lint_record(rec, known_tags, templates, patterns)
    known = list(known_tags) if known_tags is not None else image_tags(len(rec.images))
    out = rec
    fixes = []
    done = set()
    for iss in issues:
        key = (iss.code, iss.location.field)
        if key in done:
            continue
        done.add(key)
        if not iss.fixable:
            fixes.append(Fix(iss.code, "skipped", "no automatic fix"))
            continue
        try:
            out = FIXERS[iss.code](out, iss, known, templates, patterns)
            fixes.append(Fix(iss.code, "applied", iss.location.field))
        except SkipRecord as e:
            fixes.append(Fix(iss.code, "skipped", e.reason))
    applied = [f.code.value for f in fixes if f.action == "applied"]
    if applied:
        out = out.replace(meta=add_provenance(rec, "repair", fixes=applied))
    return out, fixes


# ---------------------------------------------------------------- reports


class QualityCategory(str, enum.Enum):
    EXCELLENT = "excellent"
    GOOD_QUESTIONS_WRONG_ANSWERS = "good_questions_wrong_answers"
    LOW_QUALITY_QUESTIONS = "low_quality_questions"
    LOW_QUALITY_IMAGES = "low_quality_images"
    FORMAT_ERRORS = "format_errors"


@dataclasses.dataclass(frozen=True)
class JudgeVerdict:
    record_id: str
    agrees: bool


@dataclasses.dataclass(frozen=True)
class QualityLabel:
    value: QualityCategory
    evidence: tuple = ()

    def __post_init__(self):
        if self.value is QualityCategory.FORMAT_ERRORS and not any(
            isinstance(e, LintIssue) and e.fixable for e in self.evidence
        ):
            raise InputError("format_errors label needs at least one fixable issue as evidence")
        if self.value is QualityCategory.GOOD_QUESTIONS_WRONG_ANSWERS and not any(
            isinstance(e, JudgeVerdict) and not e.agrees for e in self.evidence
        ):
            raise InputError("good_questions_wrong_answers label needs a judge disagreement")


@dataclasses.dataclass(frozen=True)
class LabelThresholds:
    format_errors: float = 0.2
    disagreement: float = 0.2
    manual_review: float = 0.2


@dataclasses.dataclass
class DatasetReport:
    record_count: int = 0
    issue_histogram: dict = dataclasses.field(default_factory=dict)
    records_with_fixable: int = 0
    records_with_errors: int = 0
    disagreements: int = 0
    suggestion: Optional[QualityLabel] = None
    excerpts: list = dataclasses.field(default_factory=list)
    duplicate_images: list = dataclasses.field(default_factory=list)

    @property
    def total_issues(self) -> int:
        return sum(self.issue_histogram.values())

    def to_dict(self) -> dict:
        return {
            "record_count": self.record_count,
            "issue_histogram": dict(sorted(self.issue_histogram.items())),
            "total_issues": self.total_issues,
            "records_with_fixable": self.records_with_fixable,
            "records_with_errors": self.records_with_errors,
            "disagreements": self.disagreements,
            "suggestion": self.suggestion.value.value if self.suggestion else None,
            "excerpts": self.excerpts,
            "duplicate_images": self.duplicate_images,
        }


def _image_digest(ref: str, root: Optional[Path]) -> Optional[str]:
    path = Path(root, ref) if root else Path(ref)
    try:
        return hashlib.sha1(path.read_bytes()).hexdigest()
    except OSError:
        return None


def summarize_dataset(
    records: Iterable[SampleRecord],
    verdicts: Optional[Iterable[JudgeVerdict]] = None,
    known_tags: Optional[Sequence[str]] = None,
    thresholds: LabelThresholds = LabelThresholds(),
    max_excerpts: int = 5,
    image_root: Optional[str] = None,
) -> DatasetReport:
    """Aggregate lint results and judge verdicts and suggest a quality label.

    Rules, checked in order (fractions are of records):

    1. judge disagreement >= ``thresholds.disagreement`` -> good questions, wrong answers
    2. records with a fixable issue >= ``thresholds.format_errors`` -> format errors
    3. records with an unfixable error >= ``thresholds.manual_review`` -> no suggestion
    4. otherwise -> excellent

    The suggestion is advisory; records are never dropped. Images whose file
    contents hash identically under different references are listed in
    ``duplicate_images``.
    """
    report = DatasetReport()
    hist = collections.Counter()
    fixable_evidence = []
    digests = collections.defaultdict(set)
    seen_refs = set()
    root = Path(image_root) if image_root else None
    for rec in records:
        report.record_count += 1
        issues = lint_record(rec, known_tags)
        hist.update(i.code.value for i in issues)
        if any(i.fixable for i in issues):
            report.records_with_fixable += 1
            fixable_evidence.extend(i for i in issues if i.fixable)
        if any(not i.fixable and i.severity.value == "error" for i in issues):
            report.records_with_errors += 1
        if issues and len(report.excerpts) < max_excerpts:
            report.excerpts.append(
                {"id": rec.id, "codes": [i.code.value for i in issues], "final": rec.final[:120]}
            )
        for ref in rec.images:
            if ref not in seen_refs:
                seen_refs.add(ref)
                digest = _image_digest(ref, root)
                if digest is not None:
                    digests[digest].add(ref)
    report.issue_histogram = dict(hist)
    report.duplicate_images = sorted(sorted(refs) for refs in digests.values() if len(refs) > 1)

    disagreeing = [v for v in (verdicts or ()) if not v.agrees]
    report.disagreements = len(disagreeing)
    n = report.record_count
    if n == 0:
        return report
    if report.disagreements / n >= thresholds.disagreement:
        report.suggestion = QualityLabel(QualityCategory.GOOD_QUESTIONS_WRONG_ANSWERS, tuple(disagreeing))
    elif report.records_with_fixable / n >= thresholds.format_errors:
        report.suggestion = QualityLabel(QualityCategory.FORMAT_ERRORS, tuple(fixable_evidence[:50]))
    elif report.records_with_errors / n >= thresholds.manual_review:
        report.suggestion = None
    else:
        report.suggestion = QualityLabel(QualityCategory.EXCELLENT)
    return report


# ---------------------------------------------------------------- reformat


def reformat_double_duty(
    rec: SampleRecord,
    templates: Sequence[FormatTemplate] = DEFAULT_TEMPLATES,
    seed: int = 0,
) -> SampleRecord:
    """Append a format instruction to the last user turn and rewrite the answer to match.

    The template is chosen from ``seed`` and the record id only. Raises
    ``SkipRecord`` when the answer cannot be expressed in the chosen format.
    """
    if not templates:
        raise ConfigError("empty template pool")
    if not rec.final.strip():
        raise SkipRecord("record has no ground-truth answer")
    idx = [i for i, t in enumerate(rec.turns) if t.role == "user"]
    if not idx:
        raise SkipRecord("record has no user turn")
    tmpl = random.Random(f"{seed}:{rec.id}").choice(list(templates))
    answer = tmpl.apply(rec.final)
    turns = list(rec.turns)
    last = turns[idx[-1]]
    turns[idx[-1]] = Turn(last.role, f"{last.text.rstrip()} {tmpl.instruction}")
    meta = add_provenance(rec, "double_duty", seed, template=tmpl.name)
    meta["format_template"] = tmpl.name
    return rec.replace(id=f"{rec.id}:dd", turns=tuple(turns), final=answer, meta=meta)


# ---------------------------------------------------------------- judges


class JudgeClient(Protocol):
    """Anything that turns a prompt plus image references into text.

    Implementations must not modify records. ``call_budget`` of ``None`` means
    unlimited.
    """

    deterministic: bool
    call_budget: Optional[int]

    def generate(self, prompt: str, images: Sequence[str]) -> str: ...


class MockJudge:
    """Scripted judge for tests and dry runs.

    ``responses`` is a single string, a list cycled in order, or a callable
    ``(prompt, images, call_index) -> str``. The first ``failures`` calls
    raise ``TransportError``.
    """

    def __init__(self, responses, call_budget=None, failures=0, deterministic=True):
        self.responses = responses
        self.call_budget = call_budget
        self.failures = failures
        self.deterministic = deterministic
        self.calls = 0
        self.prompts = []

    def generate(self, prompt, images):
        if self.call_budget is not None and self.calls >= self.call_budget:
            raise BudgetExceededError(f"judge call budget of {self.call_budget} exhausted")
        i = self.calls
        self.calls += 1
        self.prompts.append(prompt)
        if i < self.failures:
            raise TransportError("mock transport failure")
        if callable(self.responses):
            return self.responses(prompt, images, i)
        if isinstance(self.responses, str):
            return self.responses
        return self.responses[i % len(self.responses)]


def encode_images(refs: Sequence[str], root: Optional[str] = None) -> list:
    out = []
    for ref in refs:
        path = Path(root, ref) if root else Path(ref)
        out.append(base64.b64encode(path.read_bytes()).decode("ascii"))
    return out


def post_json(endpoint: str, payload: dict, api_key: Optional[str] = None, timeout: float = 120.0) -> dict:
    req = urllib.request.Request(
        endpoint,
        data=json.dumps(payload).encode("utf-8"),
        headers={"Content-Type": "application/json"},
        method="POST",
    )
    if api_key:
        req.add_header("Authorization", f"Bearer {api_key}")
    try:
        with urllib.request.urlopen(req, timeout=timeout) as resp:
            return json.loads(resp.read().decode("utf-8"))
    except (urllib.error.URLError, OSError, json.JSONDecodeError) as e:
        raise TransportError(f"request to {endpoint} failed: {e}") from e


class HttpJudgeClient:
    """Judge over HTTP: ``{"prompt", "images": [base64]}`` -> ``{"text"}``."""

    deterministic = False

    def __init__(self, endpoint, api_key=None, call_budget=None, image_root=None, timeout=120.0):
        self.endpoint = endpoint
        self.api_key = api_key
        self.call_budget = call_budget
        self.image_root = image_root
        self.timeout = timeout
        self.calls = 0

    @classmethod
    def from_env(cls, **kw):
        endpoint = os.environ.get("VLKIT_JUDGE_ENDPOINT")
        if not endpoint:
            raise ConfigError("VLKIT_JUDGE_ENDPOINT is not set")
        return cls(endpoint, api_key=os.environ.get("VLKIT_API_KEY"), **kw)

    def generate(self, prompt, images):
        if self.call_budget is not None and self.calls >= self.call_budget:
            raise BudgetExceededError(f"judge call budget of {self.call_budget} exhausted")
        self.calls += 1
        payload = {"prompt": prompt, "images": encode_images(images, self.image_root)}
        resp = post_json(self.endpoint, payload, self.api_key, self.timeout)
        if not isinstance(resp.get("text"), str):
            raise TransportError("judge response lacks a 'text' string")
        return resp["text"]


DESCRIPTION_PROMPT = "Describe this image in detail, including any text, numbers and diagram elements."


def _call_with_retry(judge, prompt, images, attempts):
    last = None
    for _ in range(max(1, attempts)):
        try:
            return judge.generate(prompt, images)
        except TransportError as e:
            last = e
            log.warning("judge call failed, retrying: %s", e)
    raise TransportError(f"judge failed after {attempts} attempts: {last}")


def regenerate_answer(
    rec: SampleRecord,
    judge: JudgeClient,
    votes: int = 3,
    threshold: float = 0.5,
    attempts: int = 3,
    caption: bool = False,
    prompt: Optional[str] = None,
    max_in_flight: int = 1,
    normalizer: Callable[[str], str] = normalize_answer,
) -> tuple:
    """Ask ``judge`` for ``votes`` candidate answers and keep a verified majority.

    Returns ``(record, verdict)``. A verified answer replaces the record's
    final answer; an unverified record is returned with ``meta["excluded"]``
    set. With ``caption=True`` the judge is asked for an image description
    instead and the output is a new caption record sharing the images.
    Judge replies that are themselves transcripts (``<think>``/``<nothink>``)
    are voted on their final answer and keep their reasoning.
    """
    if votes < 1:
        raise ConfigError("votes must be at least 1")
    if caption:
        prompt = prompt or DESCRIPTION_PROMPT
    elif prompt is None:
        users = rec.user_turns
        if not users:
            raise InputError(f"record {rec.id} has no user turn to re-ask")
        prompt = users[-1].text

    def one(_):
        return _call_with_retry(judge, prompt, list(rec.images), attempts)

    if max_in_flight > 1:
        with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
            raw = list(pool.map(one, range(votes)))
    else:
        raw = [one(i) for i in range(votes)]

    parsed = [parse_transcript(r) for r in raw]
    answers = [p.final if p.mode is not ParsedMode.MALFORMED else r.strip() for p, r in zip(parsed, raw)]
    verdict = majority_vote(answers, normalizer, threshold)
    transform = "caption_seed" if caption else "regenerate"
    extra = {"votes": votes, "share": verdict.share}

    if not verdict.verified:
        meta = add_provenance(rec, transform, None, **extra)
        meta["excluded"] = True
        meta["exclusion_reason"] = "unverified"
        return rec.replace(meta=meta), verdict

    think = next(
        (p.think for p, a in zip(parsed, answers) if p.mode is ParsedMode.REASON and a.strip() == verdict.answer),
        None,
    )
    mode = Mode.REASON if think is not None else Mode.DIRECT
    meta = add_provenance(rec, transform, None, **extra)
    if caption:
        tags = "".join(image_tags(len(rec.images)))
        turns = (Turn("user", f"{tags}\n{prompt}" if tags else prompt),)
        return (
            rec.replace(id=f"{rec.id}:caption", turns=turns, mode=mode, think=think,
                        final=verdict.answer, annotations=None, meta=meta),
            verdict,
        )
    return rec.replace(mode=mode, think=think, final=verdict.answer, meta=meta), verdict
