"""Assemble chronological EMR inputs, pair them with extracted ground-truth
summaries, filter by token thresholds, split deterministically, and emit the
dataset, prompts, and the fine-tuning recipe file.
"""

from __future__ import annotations

import json
import logging
import math
import random
from dataclasses import dataclass, replace
from datetime import date
from enum import Enum
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

import yaml

from .deid import rewrite_document, normalize_layout
from .ingest import AdmissionBundle
from .sections import ExtractedSection, SectionKind
from .tokenizers import TokenCount

log = logging.getLogger(__name__)


class Split(Enum):
    TRAIN = "train"
    VALIDATION = "validation"
    TEST = "test"


class AssemblyError(ValueError):
    """Admission cannot be assembled into an input narrative."""


class PromptTemplateError(ValueError):
    """Prompt template missing its input placeholder."""


@dataclass(frozen=True)
class SummaryPair:
    hadm_id: int
    subject_id: int
    input_text: str
    bhc_text: str
    input_tokens: TokenCount
    bhc_tokens: TokenCount
    split: Optional[Split] = None

    def as_dict(self) -> dict:
        return {
            "hadm_id": self.hadm_id,
            "subject_id": self.subject_id,
            "input_text": self.input_text,
            "bhc_text": self.bhc_text,
            "input_tokens": self.input_tokens.count,
            "bhc_tokens": self.bhc_tokens.count,
            "tokenizer_name": self.input_tokens.tokenizer_name,
            "split": self.split.value if self.split else None,
        }


@dataclass(frozen=True)
class FilterThresholds:
    bhc_min: int = 50
    input_min: int = 500

    def __post_init__(self):
        if self.bhc_min <= 0 or self.input_min <= 0:
            raise ValueError("thresholds must be positive")


@dataclass(frozen=True)
class SplitPlan:
    fractions: tuple[float, float, float] = (0.85, 0.10, 0.05)
    seed: int = 0
    unit: str = "hadm_id"  # or "subject_id" for the leakage-guard mode

    def __post_init__(self):
        if len(self.fractions) != 3:
            raise ValueError("split fractions must be (train, validation, test)")
        if not math.isclose(sum(self.fractions), 1.0, abs_tol=1e-9):
            raise ValueError("split fractions must sum to 1.0")
        if self.unit not in ("hadm_id", "subject_id"):
            raise ValueError(f"unknown split unit: {self.unit}")


_SENTENCE_SLOT_KINDS = {
    SectionKind.CHIEF_COMPLAINT,
    SectionKind.PHYSICAL_EXAM,
    SectionKind.DISCHARGE_DIAGNOSIS,
    SectionKind.MAJOR_PROCEDURE,
    SectionKind.DISCHARGE_DISPOSITION,
    SectionKind.HISTORY_OF_PRESENT_ILLNESS,
    SectionKind.ASSESSMENT_AND_PLAN,
}


def _inline(text: str) -> str:
    return " ".join(text.split())


def _sentence(text: str) -> str:
    text = text.strip()
    return text if text.endswith(".") else text + "."


def assemble_emr(
    bundle: AdmissionBundle,
    sections_by_note: dict[int, list[ExtractedSection]],
    admission_date: Optional[date] = None,
) -> str:
    """Render the chronological multi-document input narrative.

    Block order: admission block (chief complaint, history of present illness)
    when available, one "Day N:" block per calendar day holding that day's
    assessment-and-plan texts in time order, then the discharge block. Every
    section body passes through the pseudonymization rewrites; days without
    extracted content are omitted.
    """
    admission_date = admission_date or bundle.admission_date

    def clean(section: ExtractedSection) -> str:
        text, _ = rewrite_document(section.text, admission_date)
        return _inline(text) if section.kind in _SENTENCE_SLOT_KINDS else text.strip()

    first = {}
    day_sections: list[tuple[date, int, ExtractedSection]] = []
    total = 0
    for note in bundle.notes:
        for section in sections_by_note.get(note.row_id, ()):
            if section.kind is SectionKind.BRIEF_HOSPITAL_COURSE:
                continue  # ground truth, never part of the input
            total += 1
            if section.kind is SectionKind.ASSESSMENT_AND_PLAN:
                day_sections.append((note.chart_date, note.row_id, section))
            elif section.kind not in first:
                first[section.kind] = section
    if total == 0:
        raise AssemblyError(f"admission {bundle.hadm_id}: no extracted sections")

    blocks: list[str] = []
    admission_parts = ["Admission day:"]
    if SectionKind.CHIEF_COMPLAINT in first:
        cc = clean(first[SectionKind.CHIEF_COMPLAINT])
        if cc:
            admission_parts.append(_sentence(f"Reason for hospitalization is {cc}"))
    if SectionKind.HISTORY_OF_PRESENT_ILLNESS in first:
        hpi = clean(first[SectionKind.HISTORY_OF_PRESENT_ILLNESS])
        if hpi:
            admission_parts.append(_sentence(f"History of present illness: {hpi}"))
    blocks.append(" ".join(admission_parts))

    by_day: dict[date, list[str]] = {}
    for day, _row_id, section in sorted(day_sections, key=lambda t: (t[0], t[1])):
        body = clean(section)
        if body:
            by_day.setdefault(day, []).append(body)
    for day in sorted(by_day):
        day_no = (day - admission_date).days + 1
        blocks.append(f"Day {day_no}: " + " ".join(by_day[day]))

    discharge_parts = []
    if SectionKind.PHYSICAL_EXAM in first:
        pe = clean(first[SectionKind.PHYSICAL_EXAM])
        if pe:
            discharge_parts.append(_sentence(f"Patient physical examination {pe}"))
    diagnosis = clean(first[SectionKind.DISCHARGE_DIAGNOSIS]) if SectionKind.DISCHARGE_DIAGNOSIS in first else ""
    procedure = clean(first[SectionKind.MAJOR_PROCEDURE]) if SectionKind.MAJOR_PROCEDURE in first else ""
    if diagnosis and procedure:
        discharge_parts.append(_sentence(f"Patient is diagnosed {diagnosis}, received {procedure} in hospital"))
    elif diagnosis:
        discharge_parts.append(_sentence(f"Patient is diagnosed {diagnosis}"))
    elif procedure:
        discharge_parts.append(_sentence(f"Patient received {procedure} in hospital"))
    if SectionKind.DISCHARGE_DISPOSITION in first:
        disp = clean(first[SectionKind.DISCHARGE_DISPOSITION])
        if disp:
            discharge_parts.append(_sentence(f"Patient is discharged to {disp}"))
    if discharge_parts:
        blocks.append("Discharge day: " + " ".join(discharge_parts))

    return normalize_layout("\n".join(blocks))


def filter_pairs(
    pairs: Iterable[SummaryPair], thresholds: FilterThresholds
) -> tuple[list[SummaryPair], list[tuple[SummaryPair, list[str]]]]:
    """Keep pairs meeting both minimums (inclusive); dropped pairs carry the
    failed threshold name(s)."""
    kept, dropped = [], []
    for pair in pairs:
        reasons = []
        if pair.bhc_tokens.count < thresholds.bhc_min:
            reasons.append("bhc_below_min")
        if pair.input_tokens.count < thresholds.input_min:
            reasons.append("input_below_min")
        if reasons:
            dropped.append((pair, reasons))
        else:
            kept.append(pair)
    return kept, dropped


def split_sizes(n: int, fractions: tuple[float, float, float]) -> tuple[int, int, int]:
    """floor(train) / floor(validation) / remainder-to-test."""
    n_train = math.floor(fractions[0] * n)
    n_val = math.floor(fractions[1] * n)
    return n_train, n_val, n - n_train - n_val


def split_dataset(pairs: Sequence[SummaryPair], plan: SplitPlan) -> list[SummaryPair]:
    """Assign split labels by seeded shuffle over the plan's unit ids.

    The shuffle runs over sorted distinct ids so the assignment depends only on
    (ids, seed), not input order. With the subject unit, every pair of a subject
    lands in one split; pair-level sizes are then approximate.
    """
    if not pairs:
        raise ValueError("split_dataset requires at least one pair")
    key = (lambda p: p.hadm_id) if plan.unit == "hadm_id" else (lambda p: p.subject_id)
    ids = sorted({key(p) for p in pairs})
    rng = random.Random(plan.seed)
    rng.shuffle(ids)
    n_train, n_val, _ = split_sizes(len(ids), plan.fractions)
    label_of: dict[int, Split] = {}
    for pos, unit_id in enumerate(ids):
        if pos < n_train:
            label_of[unit_id] = Split.TRAIN
        elif pos < n_train + n_val:
            label_of[unit_id] = Split.VALIDATION
        else:
            label_of[unit_id] = Split.TEST
    return [replace(p, split=label_of[key(p)]) for p in pairs]


RESPONSE_MARKER = "### Response:"
INPUT_PLACEHOLDER = "{input}"

DEFAULT_PROMPT_TEMPLATE = (
    "You are a helpful medical assistant. For the following hospital clinical "
    "notes, write a concise hospital course summary for the patient.\n"
    "\n"
    "### Input note:\n"
    "{input}\n"
    "\n"
    "### Response:"
)


def build_prompt(input_text: str, template: str = DEFAULT_PROMPT_TEMPLATE) -> str:
    """Substitute the input note into the template, verbatim and unescaped.

    The template must contain the placeholder exactly once; an input that
    itself contains the response marker is substituted anyway and flagged in
    the build log.
    """
    if template.count(INPUT_PLACEHOLDER) != 1:
        raise PromptTemplateError(
            f"template must contain {INPUT_PLACEHOLDER!r} exactly once"
        )
    if RESPONSE_MARKER in input_text:
        log.warning("input text contains the response marker literal; substituted verbatim")
    return template.replace(INPUT_PLACEHOLDER, input_text)


FINETUNE_RECIPE = {
    "lora": {
        "rank": 256,
        "alpha": 512,
        "dropout": 0.1,
        "target_modules": [
            "q_proj",
            "k_proj",
            "v_proj",
            "o_proj",
            "gate_proj",
            "up_proj",
            "down_proj",
        ],
        "bias": False,
        "random_state": 3407,
    },
    "quantization": {"load_in_4bit": True},
    "train": {
        "batch_size": 8,
        "learning_rate": 2e-5,
        "max_steps": 12000,
        "warmup_ratio": 0.05,
        "eval_steps": 1200,
        "weight_decay": 0.1,
        "dtype": "bf16",
        "optimizer": "adamw_8bit",
        "lr_scheduler": "cosine",
        "seed": 3407,
    },
}


def emit_finetune_config(path: Union[str, Path], header: str = "") -> None:
    """Write the training recipe consumed by an external fine-tuning harness.

    Emission is deterministic: identical calls produce byte-identical files.
    """
    body = yaml.safe_dump(FINETUNE_RECIPE, sort_keys=False, default_flow_style=False)
    with open(path, "w", encoding="utf-8") as fh:
        if header:
            for line in header.splitlines():
                fh.write(f"# {line}\n")
        fh.write(body)


def write_pairs(path: Union[str, Path], pairs: Sequence[SummaryPair], meta: Optional[dict] = None) -> None:
    """Dataset file: JSON Lines, one record per pair, ordered by hadm_id,
    preceded by one meta record carrying provenance."""
    ordered = sorted(pairs, key=lambda p: p.hadm_id)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"record_type": "meta", **(meta or {})}) + "\n")
        for pair in ordered:
            fh.write(json.dumps(pair.as_dict()) + "\n")


def read_pairs(path: Union[str, Path]) -> tuple[list[SummaryPair], dict]:
    meta: dict = {}
    pairs: list[SummaryPair] = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            if record.get("record_type") == "meta":
                meta = record
                continue
            tokenizer_name = record["tokenizer_name"]
            pairs.append(
                SummaryPair(
                    hadm_id=record["hadm_id"],
                    subject_id=record["subject_id"],
                    input_text=record["input_text"],
                    bhc_text=record["bhc_text"],
                    input_tokens=TokenCount(record["input_tokens"], tokenizer_name),
                    bhc_tokens=TokenCount(record["bhc_tokens"], tokenizer_name),
                    split=Split(record["split"]) if record.get("split") else None,
                )
            )
    return pairs, meta
