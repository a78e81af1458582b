"""Named-section extraction from clinical note text.

A registry of line-anchored header patterns drives extraction: a section body
runs from the end of its matched header to the next recognized header of any
kind, or end of text. The default registry covers common MIMIC-style header
spellings and can be replaced wholesale from a YAML config file.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional

import yaml

from .ingest import NoteCategory, NoteEvent

log = logging.getLogger(__name__)


class SectionKind(Enum):
    BRIEF_HOSPITAL_COURSE = "brief_hospital_course"
    CHIEF_COMPLAINT = "chief_complaint"
    MAJOR_PROCEDURE = "major_procedure"
    HISTORY_OF_PRESENT_ILLNESS = "history_of_present_illness"
    PHYSICAL_EXAM = "physical_exam"
    DISCHARGE_DIAGNOSIS = "discharge_diagnosis"
    DISCHARGE_DISPOSITION = "discharge_disposition"
    ASSESSMENT_AND_PLAN = "assessment_and_plan"


class RegistryError(ValueError):
    """Raised when a section registry fails to load or compile."""


# Backreference syntax is rejected to keep patterns in the linear-time-friendly
# subset (\1..\9, (?P=name), and the \g<..> replacement form).
_BACKREF = re.compile(r"\\[1-9]|\(\?P=\w+\)|\\g<")


@dataclass(frozen=True)
class SectionPattern:
    kind: SectionKind
    header_alternates: tuple[str, ...]
    terminators: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.header_alternates:
            raise RegistryError(f"{self.kind.value}: at least one header alternate required")


@dataclass(frozen=True)
class ExtractedSection:
    kind: SectionKind
    text: str
    span: tuple[int, int]
    source_row_id: int


DEFAULT_REGISTRY: list[SectionPattern] = [
    SectionPattern(
        SectionKind.BRIEF_HOSPITAL_COURSE,
        ("Brief Hospital Course", "Hospital Course", "Summary of Hospital Course"),
    ),
    SectionPattern(
        SectionKind.CHIEF_COMPLAINT,
        ("Chief Complaint", "Chief Complaints", "CC"),
    ),
    SectionPattern(
        SectionKind.MAJOR_PROCEDURE,
        (
            "Major Surgical or Invasive Procedure",
            "Major Procedure",
            "Major Procedures",
        ),
    ),
    SectionPattern(
        SectionKind.HISTORY_OF_PRESENT_ILLNESS,
        ("History of Present Illness", "History of the Present Illness", "HPI"),
    ),
    SectionPattern(
        SectionKind.PHYSICAL_EXAM,
        ("Physical Exam", "Physical Examination", "PE"),
    ),
    SectionPattern(
        SectionKind.DISCHARGE_DIAGNOSIS,
        ("Discharge Diagnosis", "Discharge Diagnoses", "Final Diagnosis"),
    ),
    SectionPattern(
        SectionKind.DISCHARGE_DISPOSITION,
        ("Discharge Disposition", "Disposition"),
    ),
    SectionPattern(
        SectionKind.ASSESSMENT_AND_PLAN,
        ("Assessment and Plan", "Assessment & Plan", "A&P", "Assessment/Plan"),
    ),
]

# Which kinds are looked up per note category. Radiology and unknown categories
# route to nothing under the defaults.
DEFAULT_ROUTING: dict[NoteCategory, tuple[SectionKind, ...]] = {
    NoteCategory.DISCHARGE_SUMMARY: (
        SectionKind.BRIEF_HOSPITAL_COURSE,
        SectionKind.CHIEF_COMPLAINT,
        SectionKind.MAJOR_PROCEDURE,
        SectionKind.HISTORY_OF_PRESENT_ILLNESS,
        SectionKind.PHYSICAL_EXAM,
        SectionKind.DISCHARGE_DIAGNOSIS,
        SectionKind.DISCHARGE_DISPOSITION,
    ),
    NoteCategory.NURSING_PROGRESS: (SectionKind.ASSESSMENT_AND_PLAN,),
    NoteCategory.PHYSICIAN_PROGRESS: (SectionKind.ASSESSMENT_AND_PLAN,),
    NoteCategory.RADIOLOGY: (),
    NoteCategory.OTHER: (),
}


def _check_pattern(pattern: str) -> str:
    if _BACKREF.search(pattern):
        raise RegistryError(f"pattern uses backreferences, rejected: {pattern!r}")
    try:
        re.compile(pattern)
    except re.error as exc:
        raise RegistryError(f"pattern does not compile: {pattern!r}: {exc}") from exc
    return pattern


class CompiledRegistry:
    """Registry with every header compiled line-anchored and case-insensitive.

    The terminator set for a section is the union of all headers of all kinds
    plus the pattern's own extra terminators. ``routing`` overrides the default
    category->kinds table when the registry file declares one.
    """

    routing: Optional[dict[NoteCategory, tuple[SectionKind, ...]]] = None

    def __init__(self, patterns: list[SectionPattern]):
        self.patterns = {p.kind: p for p in patterns}
        if len(self.patterns) != len(patterns):
            raise RegistryError("duplicate section kind in registry")
        self._headers: dict[SectionKind, re.Pattern] = {}
        all_alternates: list[str] = []
        for pat in patterns:
            alts = [_check_pattern(a) for a in pat.header_alternates]
            self._headers[pat.kind] = self._compile_header(alts)
            all_alternates.extend(alts)
            for term in pat.terminators:
                _check_pattern(term)
        self._terminators: dict[SectionKind, re.Pattern] = {}
        for pat in patterns:
            self._terminators[pat.kind] = self._compile_header(
                all_alternates + list(pat.terminators)
            )

    @staticmethod
    def _compile_header(alternates: list[str]) -> re.Pattern:
        # Header = line start + alternate + (colon | end of line). The colon form
        # allows body text on the header line; a bare alternate must fill its line.
        body = "|".join(f"(?:{a})" for a in alternates)
        return re.compile(rf"^[ \t]*(?:{body})[ \t]*(?::|$)", re.IGNORECASE | re.MULTILINE)

    def header_for(self, kind: SectionKind) -> re.Pattern:
        if kind not in self._headers:
            raise RegistryError(f"registry has no pattern for {kind.value}")
        return self._headers[kind]

    def terminator_for(self, kind: SectionKind) -> re.Pattern:
        return self._terminators[kind]


def compile_registry(patterns: Optional[list[SectionPattern]] = None) -> CompiledRegistry:
    return CompiledRegistry(patterns if patterns is not None else DEFAULT_REGISTRY)


def load_registry(path: str | Path) -> CompiledRegistry:
    """Load a registry from YAML.

    Accepts either a bare list of {kind, headers, terminators?} entries, or a
    mapping with ``sections:`` (same list) plus an optional ``routing:`` table
    of note category -> list of section kinds.
    """
    with open(path, encoding="utf-8") as fh:
        raw = yaml.safe_load(fh)
    routing_raw = None
    if isinstance(raw, dict):
        routing_raw = raw.get("routing")
        raw = raw.get("sections")
    if not isinstance(raw, list):
        raise RegistryError(f"{path}: registry file must hold a list of sections")
    patterns = []
    for entry in raw:
        try:
            kind = SectionKind(entry["kind"])
            headers = tuple(entry["headers"])
        except (KeyError, TypeError, ValueError) as exc:
            raise RegistryError(f"{path}: bad registry entry {entry!r}: {exc}") from exc
        patterns.append(
            SectionPattern(kind, headers, tuple(entry.get("terminators", ())))
        )
    registry = compile_registry(patterns)
    if routing_raw is not None:
        if not isinstance(routing_raw, dict):
            raise RegistryError(f"{path}: routing must map categories to kind lists")
        try:
            registry.routing = {
                NoteCategory(category): tuple(SectionKind(k) for k in kinds)
                for category, kinds in routing_raw.items()
            }
        except ValueError as exc:
            raise RegistryError(f"{path}: bad routing entry: {exc}") from exc
    return registry


def dump_default_registry(path: str | Path) -> None:
    """Write the default registry as an editable YAML starting point."""
    entries = [
        {
            "kind": p.kind.value,
            "headers": list(p.header_alternates),
            "terminators": list(p.terminators),
        }
        for p in DEFAULT_REGISTRY
    ]
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(entries, fh, sort_keys=False)


def extract_section(
    text: str,
    kind: SectionKind,
    registry: CompiledRegistry,
    source_row_id: int = -1,
) -> Optional[ExtractedSection]:
    """First match wins: body runs from the end of the matched header to the
    first terminator header or end of text (same-line text after a colon form
    belongs to the body). Returns None when no header matches; an empty body
    is a value, not an absence."""
    header = registry.header_for(kind)
    matches = list(header.finditer(text))
    if not matches:
        return None
    if len(matches) > 1:
        log.debug("duplicate %s header at offsets %s; first occurrence wins",
                  kind.value, [m.start() for m in matches[1:]])
    match = matches[0]
    body_start = match.end()
    if body_start < len(text) and text[body_start] == "\n":
        body_start += 1
    term = registry.terminator_for(kind).search(text, body_start)
    body_end = term.start() if term else len(text)
    return ExtractedSection(
        kind=kind,
        text=text[body_start:body_end].strip(),
        span=(body_start, body_end),
        source_row_id=source_row_id,
    )


def extract_all(
    note: NoteEvent,
    registry: CompiledRegistry,
    routing: Optional[dict[NoteCategory, tuple[SectionKind, ...]]] = None,
) -> list[ExtractedSection]:
    """Extract the kinds routed to the note's category, ordered by span start."""
    routing = routing if routing is not None else DEFAULT_ROUTING
    kinds = routing.get(note.category, ())
    found = []
    for kind in kinds:
        section = extract_section(note.text, kind, registry, source_row_id=note.row_id)
        if section is not None:
            found.append(section)
    found.sort(key=lambda s: s.span[0])
    return found
