"""Render, parse and repair mixed reasoning / direct-answer transcripts.

Reasoning responses are ``<think>...</think>`` followed by the final answer;
direct responses start with ``<nothink>`` and carry no closing tag.
"""

from __future__ import annotations

import dataclasses
import enum
import re
from typing import NamedTuple, Optional, Sequence

from .errors import InputError
from .issues import IssueCode, LintIssue, Location
from .records import Mode, SampleRecord

THINK_OPEN = "<think>"
THINK_CLOSE = "</think>"
NOTHINK = "<nothink>"
PROTOCOL_TOKENS = (THINK_OPEN, THINK_CLOSE, NOTHINK)

DEFAULT_ANSWER_PATTERNS = (
    r"final\s+answer\s*[:：]",
    r"\banswer\s*[:：]",
    r"\\boxed\{",
)


class ParsedMode(str, enum.Enum):
    REASON = "reason"
    DIRECT = "direct"
    MALFORMED = "malformed"


@dataclasses.dataclass(frozen=True)
class ParsedResponse:
    mode: ParsedMode
    think: Optional[str]
    final: str
    issues: tuple = ()
    text: str = ""


class Fix(NamedTuple):
    code: IssueCode
    action: str  # "applied" or "skipped"
    detail: str = ""


def _marker_regex(patterns: Sequence[str]) -> re.Pattern:
    # alternation tries patterns in order at each position, so list longer
    # markers ("final answer:") before their suffixes ("answer:")
    return re.compile("|".join(f"(?:{p})" for p in patterns), re.IGNORECASE)


def find_answer_marker(think: str, patterns: Sequence[str] = DEFAULT_ANSWER_PATTERNS):
    """Return the last answer-marker match inside ``think`` or ``None``."""
    last = None
    for m in _marker_regex(patterns).finditer(think):
        last = m
    return last


def render_response(mode: Mode, think: Optional[str], final: str) -> str:
    """Render without validation; see ``render_sample`` for the checked form."""
    if Mode(mode) is Mode.REASON:
        return f"{THINK_OPEN}{think or ''}{THINK_CLOSE}\n{final}"
    return f"{NOTHINK}{final}"


def render_sample(rec: SampleRecord) -> str:
    """Render the final assistant response of ``rec`` as transcript text.

    Raises ``InputError`` when the record breaks its invariants or contains
    text the protocol cannot represent (mode tokens inside ``think`` or
    ``final``, or a ``final`` starting with whitespace).
    """
    rec.validate()
    for name, value in (("think", rec.think or ""), ("final", rec.final)):
        for tok in PROTOCOL_TOKENS:
            if tok in value:
                raise InputError(f"record {rec.id}: {name} contains protocol token {tok}")
    if rec.final != rec.final.lstrip():
        raise InputError(f"record {rec.id}: final starts with whitespace")
    return render_response(rec.mode, rec.think, rec.final)


def parse_transcript(
    text: str,
    patterns: Sequence[str] = DEFAULT_ANSWER_PATTERNS,
    record_id: str = "",
) -> ParsedResponse:
    """Split transcript text into mode, think and final.

    Never raises: structural defects are reported as issues and the mode is
    then ``MALFORMED``. Any whitespace between ``</think>`` (or
    ``<nothink>``) and the final answer is accepted and dropped.
    """
    issues = []

    def issue(code, start, end, detail=""):
        issues.append(LintIssue(code, Location(record_id, "transcript", (start, end)), detail))

    i_think = text.find(THINK_OPEN)
    i_no = text.find(NOTHINK)
    if i_think < 0 and i_no < 0:
        issue(IssueCode.MISSING_MODE, 0, len(text))
        return ParsedResponse(ParsedMode.MALFORMED, None, text.strip(), tuple(issues), text)
    if i_think >= 0 and i_no >= 0:
        issue(IssueCode.CONFLICTING_MODES, min(i_think, i_no), max(i_think, i_no))

    reasoning = i_no < 0 or 0 <= i_think < i_no
    first = i_think if reasoning else i_no
    if text[:first].strip():
        issue(IssueCode.TEXT_BEFORE_MODE, 0, first)

    think = None
    if reasoning:
        body_start = first + len(THINK_OPEN)
        close = text.find(THINK_CLOSE, body_start)
        if close < 0:
            think = text[body_start:]
            final = ""
            issue(IssueCode.UNCLOSED_THINK, first, len(text))
        else:
            think = text[body_start:close]
            rest = close + len(THINK_CLOSE)
            final = text[rest:].lstrip()
            if THINK_OPEN in think:
                issue(IssueCode.STRAY_MODE_TOKEN, body_start, close, "nested <think>")
            if not final:
                if find_answer_marker(think, patterns) is not None:
                    issue(IssueCode.ANSWER_IN_THINK, body_start, close)
                else:
                    issue(IssueCode.EMPTY_ANSWER, rest, len(text))
    else:
        rest = first + len(NOTHINK)
        final = text[rest:].lstrip()
        if not final:
            issue(IssueCode.EMPTY_ANSWER, rest, len(text))

    if any(tok in final for tok in PROTOCOL_TOKENS) and not any(
        i.code is IssueCode.CONFLICTING_MODES for i in issues
    ):
        issue(IssueCode.STRAY_MODE_TOKEN, len(text) - len(final), len(text), "mode token in final")

    if issues:
        mode = ParsedMode.MALFORMED
    else:
        mode = ParsedMode.REASON if reasoning else ParsedMode.DIRECT
    return ParsedResponse(mode, think, final, tuple(issues), text)


def repair_transcript(
    parsed: ParsedResponse, patterns: Sequence[str] = DEFAULT_ANSWER_PATTERNS
) -> tuple:
    """Fix what can be fixed; returns ``(text, fixes)``.

    Only ``answer_in_think`` is repairable: the trailing answer clause is moved
    after ``</think>``. Any other defect leaves the text untouched and is
    listed as skipped.
    """
    codes = [i.code for i in parsed.issues]
    if not codes:
        return parsed.text, []
    unfixable = [c for c in codes if c is not IssueCode.ANSWER_IN_THINK]
    if unfixable:
        return parsed.text, [Fix(c, "skipped", "not automatically repairable") for c in codes]

    m = find_answer_marker(parsed.think, patterns)
    head = parsed.think[: m.start()].rstrip()
    tail = parsed.think[m.start() :].strip()
    prefix = parsed.text[: parsed.text.find(THINK_OPEN)]
    repaired = f"{prefix}{THINK_OPEN}{head}{THINK_CLOSE}\n{tail}"
    return repaired, [Fix(IssueCode.ANSWER_IN_THINK, "applied", tail)]
