"""Parse raw clinical-note CSV tables into validated, admission-grouped records.

Single-pass streaming over NOTEEVENTS-style exports. Malformed rows are never
silently dropped: every rejected row lands in the report with a reason, and the
partition property (every row -> exactly one note or one reject) is what the
tests enforce.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from datetime import date, datetime, time
from enum import Enum
from pathlib import Path
from typing import IO, Iterable, Iterator, Optional, Union


class SchemaError(ValueError):
    """A mapped column is missing from the CSV header."""


class NoteCategory(Enum):
    DISCHARGE_SUMMARY = "discharge_summary"
    NURSING_PROGRESS = "nursing_progress"
    PHYSICIAN_PROGRESS = "physician_progress"
    RADIOLOGY = "radiology"
    OTHER = "other"


# Case-insensitive normalization of free-text CATEGORY values; anything not
# listed maps to OTHER with the original preserved on the note.
_CATEGORY_ALIASES = {
    "discharge summary": NoteCategory.DISCHARGE_SUMMARY,
    "discharge summaries": NoteCategory.DISCHARGE_SUMMARY,
    "nursing": NoteCategory.NURSING_PROGRESS,
    "nursing/other": NoteCategory.NURSING_PROGRESS,
    "nursing progress": NoteCategory.NURSING_PROGRESS,
    "nursing progress note": NoteCategory.NURSING_PROGRESS,
    "physician": NoteCategory.PHYSICIAN_PROGRESS,
    "physician progress": NoteCategory.PHYSICIAN_PROGRESS,
    "physician progress note": NoteCategory.PHYSICIAN_PROGRESS,
    "radiology": NoteCategory.RADIOLOGY,
    "radiology report": NoteCategory.RADIOLOGY,
}


def normalize_category(raw: str) -> NoteCategory:
    return _CATEGORY_ALIASES.get(raw.strip().lower(), NoteCategory.OTHER)


@dataclass(frozen=True)
class NoteEvent:
    row_id: int
    subject_id: int
    hadm_id: Optional[int]
    chart_date: date
    chart_time: Optional[datetime]
    category: NoteCategory
    raw_category: str
    description: str
    text: str


@dataclass(frozen=True)
class AdmissionBundle:
    hadm_id: int
    subject_id: int
    admission_date: date
    notes: tuple[NoteEvent, ...]


@dataclass
class RowError:
    row_id: Optional[int]
    reason: str

    def as_dict(self) -> dict:
        return {"row_id": self.row_id, "reason": self.reason}


@dataclass
class IngestReport:
    rows_seen: int = 0
    notes_parsed: int = 0
    errors: list[RowError] = field(default_factory=list)

    def reject(self, row_id: Optional[int], reason: str) -> None:
        self.errors.append(RowError(row_id, reason))

    def write_rejects(self, path: Union[str, Path]) -> None:
        """Rejects report: JSON Lines of {row_id, reason}."""
        with open(path, "w", encoding="utf-8") as fh:
            for err in self.errors:
                fh.write(json.dumps(err.as_dict()) + "\n")


DEFAULT_MAPPING = {
    "row_id": "ROW_ID",
    "subject_id": "SUBJECT_ID",
    "hadm_id": "HADM_ID",
    "chart_date": "CHARTDATE",
    "chart_time": "CHARTTIME",
    "category": "CATEGORY",
    "description": "DESCRIPTION",
    "text": "TEXT",
}


def _parse_date(value: str) -> date:
    return datetime.strptime(value.strip(), "%Y-%m-%d").date()


def _parse_timestamp(value: str) -> datetime:
    value = value.strip()
    for fmt in ("%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M"):
        try:
            return datetime.strptime(value, fmt)
        except ValueError:
            continue
    raise ValueError(f"unparseable timestamp: {value!r}")


def parse_corpus(
    source: Union[str, Path, IO],
    mapping: Optional[dict[str, str]] = None,
    report: Optional[IngestReport] = None,
) -> Iterator[NoteEvent]:
    """Stream NoteEvents out of a CSV with a header row.

    Row-level problems (bad ids, unparseable dates, empty text) are recorded in
    the report and the row is skipped; a missing mapped column is fatal.
    """
    mapping = {**DEFAULT_MAPPING, **(mapping or {})}
    if report is None:
        report = IngestReport()

    close_after = False
    if isinstance(source, (str, Path)):
        fh: IO = open(source, newline="", encoding="utf-8")
        close_after = True
    elif isinstance(source, (bytes, bytearray)):
        fh = io.StringIO(source.decode("utf-8"))
    else:
        fh = source

    try:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise SchemaError("empty CSV: no header row")
        missing = [col for col in mapping.values() if col not in reader.fieldnames]
        if missing:
            raise SchemaError(f"mapped columns missing from header: {missing}")
        seen_row_ids: set[int] = set()
        for row in reader:
            report.rows_seen += 1
            note = _parse_row(row, mapping, report)
            if note is None:
                continue
            if note.row_id in seen_row_ids:
                report.reject(note.row_id, "duplicate row_id")
                continue
            seen_row_ids.add(note.row_id)
            report.notes_parsed += 1
            yield note
    finally:
        if close_after:
            fh.close()


def _parse_row(row: dict, mapping: dict[str, str], report: IngestReport) -> Optional[NoteEvent]:
    raw_row_id = (row.get(mapping["row_id"]) or "").strip()
    try:
        row_id = int(raw_row_id)
    except ValueError:
        report.reject(None, f"bad row_id: {raw_row_id!r}")
        return None
    try:
        subject_id = int((row.get(mapping["subject_id"]) or "").strip())
    except ValueError:
        report.reject(row_id, "bad subject_id")
        return None
    raw_hadm = (row.get(mapping["hadm_id"]) or "").strip()
    hadm_id: Optional[int] = None
    if raw_hadm:
        try:
            # MIMIC exports integer ids as floats ("145834.0")
            hadm_id = int(float(raw_hadm))
        except ValueError:
            report.reject(row_id, f"bad hadm_id: {raw_hadm!r}")
            return None
    try:
        chart_date = _parse_date(row.get(mapping["chart_date"]) or "")
    except ValueError:
        report.reject(row_id, f"unparseable chart date: {row.get(mapping['chart_date'])!r}")
        return None
    raw_time = (row.get(mapping["chart_time"]) or "").strip()
    chart_time: Optional[datetime] = None
    if raw_time:
        try:
            chart_time = _parse_timestamp(raw_time)
        except ValueError:
            report.reject(row_id, f"unparseable chart time: {raw_time!r}")
            return None
        if chart_time.date() != chart_date:
            report.reject(row_id, "chart_time does not fall on chart_date")
            return None
    text = row.get(mapping["text"]) or ""
    if not text.strip():
        report.reject(row_id, "empty text")
        return None
    raw_category = (row.get(mapping["category"]) or "").strip()
    return NoteEvent(
        row_id=row_id,
        subject_id=subject_id,
        hadm_id=hadm_id,
        chart_date=chart_date,
        chart_time=chart_time,
        category=normalize_category(raw_category),
        raw_category=raw_category,
        description=(row.get(mapping["description"]) or "").strip(),
        text=text,
    )


def _note_sort_key(note: NoteEvent):
    # Untimed notes order after timed ones within the same date; row_id breaks ties.
    return (
        note.chart_date,
        note.chart_time is None,
        note.chart_time or datetime.combine(note.chart_date, time.min),
        note.row_id,
    )


def group_admissions(
    notes: Iterable[NoteEvent],
    report: Optional[IngestReport] = None,
) -> list[AdmissionBundle]:
    """One time-ordered bundle per distinct hadm_id, sorted by hadm_id.

    Notes lacking an hadm_id are diverted to the report's rejects, never guessed.
    """
    if report is None:
        report = IngestReport()
    by_hadm: dict[int, list[NoteEvent]] = {}
    for note in notes:
        if note.hadm_id is None:
            report.reject(note.row_id, "no hadm_id")
            continue
        by_hadm.setdefault(note.hadm_id, []).append(note)
    bundles = []
    for hadm_id in sorted(by_hadm):
        ordered = sorted(by_hadm[hadm_id], key=_note_sort_key)
        bundles.append(
            AdmissionBundle(
                hadm_id=hadm_id,
                subject_id=ordered[0].subject_id,
                admission_date=min(n.chart_date for n in ordered),
                notes=tuple(ordered),
            )
        )
    return bundles
