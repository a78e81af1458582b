"""Pseudonymization and layout rewriting of clinical note text.

Three rewrites, all idempotent: bracketed dates become relative "Day N"
(admission date is Day 1), name placeholders become "the patient", and
excessive line breaks collapse. Anything the rules cannot resolve is left
verbatim and reported, never deleted.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from datetime import date

# Both the plain and the asterisked bracket styles are accepted; rendered
# corpora differ only in whether the asterisks survived.
DATE_PH = re.compile(r"\[(?:\*\*)?\s*(\d{4})-(\d{1,2})-(\d{1,2})\s*(?:\*\*)?\]")
_NAME_INNER = r"[^\[\]]*(?:name|initial)[^\[\]]*"
NAME_PH = re.compile(
    r"(?:(?:Mr|Mrs|Ms|Mx|Miss|Dr|Prof)\.?\s+)?"
    r"\[" + _NAME_INNER + r"\](?:\s*\[" + _NAME_INNER + r"\])*",
    re.IGNORECASE,
)
LEFTOVER_PH = re.compile(r"\[\*\*[^\[\]]*\*\*\]")
_SENTENCE_END = re.compile(r"[.!?][\"')\]]*\s+$")

PRIOR_TO_ADMISSION = "prior to admission"


@dataclass
class RewriteReport:
    """Audit counts for one rewrite pass; serializes into pipeline logs."""

    dates_rewritten: int = 0
    names_rewritten: int = 0
    unresolved_placeholders: list[tuple[tuple[int, int], str]] = field(default_factory=list)

    def merge(self, other: "RewriteReport") -> "RewriteReport":
        return RewriteReport(
            self.dates_rewritten + other.dates_rewritten,
            self.names_rewritten + other.names_rewritten,
            self.unresolved_placeholders + other.unresolved_placeholders,
        )

    def as_dict(self) -> dict:
        return {
            "dates_rewritten": self.dates_rewritten,
            "names_rewritten": self.names_rewritten,
            "unresolved_placeholders": [
                {"span": list(span), "text": text} for span, text in self.unresolved_placeholders
            ],
        }


def rewrite_dates(text: str, admission_date: date) -> tuple[str, RewriteReport]:
    """Replace bracketed dates with "Day N" relative to the admission date.

    Day 1 is the admission date itself. Dates strictly before admission become
    the literal "prior to admission" and are recorded as unresolved; bracketed
    tokens that do not parse as real dates are left verbatim and recorded.
    """
    report = RewriteReport()

    def _sub(match: re.Match) -> str:
        try:
            d = date(int(match.group(1)), int(match.group(2)), int(match.group(3)))
        except ValueError:
            report.unresolved_placeholders.append((match.span(), match.group(0)))
            return match.group(0)
        offset = (d - admission_date).days
        if offset < 0:
            report.dates_rewritten += 1
            report.unresolved_placeholders.append((match.span(), match.group(0)))
            return PRIOR_TO_ADMISSION
        report.dates_rewritten += 1
        return f"Day {offset + 1}"

    return DATE_PH.sub(_sub, text), report


def rewrite_names(text: str) -> tuple[str, RewriteReport]:
    """Replace honorific+placeholder runs and bare name placeholders with
    "the patient"; adjacent placeholders collapse into one substitution.

    Capitalized to "The patient" when the run follows a sentence terminator.
    Non-name placeholders (hospitals, phone numbers, ...) are reported, not touched.
    """
    report = RewriteReport()

    def _sub(match: re.Match) -> str:
        report.names_rewritten += 1
        if _SENTENCE_END.search(text, 0, match.start()):
            return "The patient"
        return "the patient"

    rewritten = NAME_PH.sub(_sub, text)
    for leftover in LEFTOVER_PH.finditer(rewritten):
        if not DATE_PH.match(leftover.group(0)):
            report.unresolved_placeholders.append((leftover.span(), leftover.group(0)))
    return rewritten, report


def normalize_layout(text: str) -> str:
    """Strip trailing whitespace per line, collapse line-break runs to one,
    and end with exactly one line break. Whitespace-only input becomes empty."""
    lines = [line.rstrip() for line in text.split("\n")]
    collapsed = re.sub(r"\n{2,}", "\n", "\n".join(lines)).strip("\n")
    if not collapsed:
        return ""
    return collapsed + "\n"


def rewrite_document(text: str, admission_date: date) -> tuple[str, RewriteReport]:
    """Full cleaning pass used by the dataset builder: dates, names, layout."""
    out, date_report = rewrite_dates(text, admission_date)
    out, name_report = rewrite_names(out)
    return normalize_layout(out), date_report.merge(name_report)
