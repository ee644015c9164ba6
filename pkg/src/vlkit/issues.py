"""Lint issue codes shared by the transcript parser and the curation linter."""

from __future__ import annotations

import dataclasses
import enum
from typing import Optional


class Severity(str, enum.Enum):
    ERROR = "error"
    WARNING = "warning"


class IssueCode(str, enum.Enum):
    MISSPELLED_IMAGE_TAG = "misspelled_image_tag"
    ANSWER_IN_THINK = "answer_in_think"
    COORD_OUT_OF_RANGE = "coord_out_of_range"
    FORMAT_MISMATCH = "format_mismatch"
    EMPTY_ANSWER = "empty_answer"
    DANGLING_IMAGE_REF = "dangling_image_ref"
    # structural transcript defects
    UNCLOSED_THINK = "unclosed_think"
    TEXT_BEFORE_MODE = "text_before_mode"
    CONFLICTING_MODES = "conflicting_modes"
    MISSING_MODE = "missing_mode"
    STRAY_MODE_TOKEN = "stray_mode_token"
    MODE_MISMATCH = "mode_mismatch"

    @property
    def severity(self) -> Severity:
        return _SEVERITY[self]

    @property
    def fixable(self) -> bool:
        return self in _FIXABLE


_SEVERITY = {code: Severity.ERROR for code in IssueCode}
_SEVERITY[IssueCode.MISSPELLED_IMAGE_TAG] = Severity.WARNING
_SEVERITY[IssueCode.FORMAT_MISMATCH] = Severity.WARNING

# every code here must have a fixer registered in vlkit.curation.FIXERS
_FIXABLE = frozenset(
    {IssueCode.MISSPELLED_IMAGE_TAG, IssueCode.ANSWER_IN_THINK, IssueCode.FORMAT_MISMATCH}
)


@dataclasses.dataclass(frozen=True)
class Location:
    record_id: str = ""
    field: str = ""
    span: Optional[tuple] = None


@dataclasses.dataclass(frozen=True)
class LintIssue:
    code: IssueCode
    location: Location = Location()
    detail: str = ""
    fixable: Optional[bool] = None

    def __post_init__(self):
        object.__setattr__(self, "code", IssueCode(self.code))
        if self.fixable is None:
            object.__setattr__(self, "fixable", self.code.fixable)

    @property
    def severity(self) -> Severity:
        return self.code.severity

    def to_dict(self) -> dict:
        return {
            "code": self.code.value,
            "severity": self.severity.value,
            "fixable": self.fixable,
            "record_id": self.location.record_id,
            "field": self.location.field,
            "span": list(self.location.span) if self.location.span else None,
            "detail": self.detail,
        }
