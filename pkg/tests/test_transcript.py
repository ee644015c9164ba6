import pytest
from hypothesis import given, strategies as st

from vlkit.errors import InputError
from vlkit.issues import IssueCode
from vlkit.records import Mode, SampleRecord, Turn
from vlkit.transcript import (
    PROTOCOL_TOKENS,
    ParsedMode,
    parse_transcript,
    render_sample,
    repair_transcript,
)


def record(mode, final, think=None):
    return SampleRecord("r", (), (Turn("user", "q"),), Mode(mode), final, think)


def test_render_reason():
    assert render_sample(record("reason", "Answer: 42", "t")) == "<think>t</think>\nAnswer: 42"


def test_render_direct():
    assert render_sample(record("direct", "a red square")) == "<nothink>a red square"


@pytest.mark.parametrize(
    "rec",
    [
        record("reason", "", "t"),
        record("reason", "x"),
        record("direct", "x", "t"),
        record("direct", "<think>x"),
        record("direct", " leading"),
    ],
)
def test_render_rejects(rec):
    with pytest.raises(InputError):
        render_sample(rec)


def test_parse_direct():
    p = parse_transcript("<nothink>hello")
    assert (p.mode, p.think, p.final, p.issues) == (ParsedMode.DIRECT, None, "hello", ())


def test_parse_reason():
    p = parse_transcript("<think>r</think>\nx")
    assert (p.mode, p.think, p.final, p.issues) == (ParsedMode.REASON, "r", "x", ())


def test_parse_answer_in_think():
    p = parse_transcript("<think>r Final answer: 7</think>")
    assert p.mode is ParsedMode.MALFORMED
    assert p.think == "r Final answer: 7"
    assert p.final == ""
    assert [i.code for i in p.issues] == [IssueCode.ANSWER_IN_THINK]


def test_parse_any_whitespace_after_close():
    assert parse_transcript("<think>r</think>  \n\t x").final == "x"


@pytest.mark.parametrize(
    "text,code",
    [
        ("<think>r", IssueCode.UNCLOSED_THINK),
        ("hi <nothink>x", IssueCode.TEXT_BEFORE_MODE),
        ("<think>a</think><nothink>b", IssueCode.CONFLICTING_MODES),
        ("just text", IssueCode.MISSING_MODE),
        ("<nothink>", IssueCode.EMPTY_ANSWER),
        ("<think>no marker</think>", IssueCode.EMPTY_ANSWER),
        ("<think>a</think>\nb </think>", IssueCode.STRAY_MODE_TOKEN),
    ],
)
def test_parse_malformed(text, code):
    p = parse_transcript(text)
    assert p.mode is ParsedMode.MALFORMED
    assert code in [i.code for i in p.issues]


def test_repair_moves_answer():
    text, fixes = repair_transcript(parse_transcript("<think>r Final answer: 7</think>"))
    assert text == "<think>r</think>\nFinal answer: 7"
    assert [f.action for f in fixes] == ["applied"]
    again = parse_transcript(text)
    assert again.mode is ParsedMode.REASON and again.issues == ()


def test_repair_boxed():
    text, _ = repair_transcript(parse_transcript(r"<think>so x = 3, \boxed{3}</think>"))
    assert text == "<think>so x = 3,</think>\n\\boxed{3}"


def test_repair_noop():
    good = "<think>r</think>\nx"
    assert repair_transcript(parse_transcript(good)) == (good, [])


def test_repair_unclosed_skipped():
    text, fixes = repair_transcript(parse_transcript("<think>r"))
    assert text == "<think>r"
    assert [(f.code, f.action) for f in fixes] == [(IssueCode.UNCLOSED_THINK, "skipped")]


def test_custom_patterns():
    p = parse_transcript("<think>work. Result = 5</think>", patterns=[r"result\s*="])
    assert [i.code for i in p.issues] == [IssueCode.ANSWER_IN_THINK]


safe_text = st.text(min_size=0, max_size=40).filter(lambda s: not any(t in s for t in PROTOCOL_TOKENS))


@given(st.sampled_from(["reason", "direct"]), safe_text, safe_text.filter(lambda s: s.strip()))
def test_round_trip(mode, think, final):
    final = final.lstrip()
    rec = record(mode, final, think if mode == "reason" else None)
    p = parse_transcript(render_sample(rec))
    assert p.mode.value == mode
    assert (p.think, p.final) == (rec.think, rec.final)


@given(safe_text, st.sampled_from(["Final answer: ", "Answer: ", "\\boxed{"]), st.text(min_size=1, max_size=5, alphabet="0123456789"))
def test_repair_idempotent(think, marker, value):
    broken = f"<think>{think} {marker}{value}</think>"
    once, _ = repair_transcript(parse_transcript(broken))
    twice, fixes = repair_transcript(parse_transcript(once))
    assert once == twice
    assert parse_transcript(once).issues == ()
