"""Blinded reader-study engine for the six-subsection summary rubric.

Sessions are deterministic functions of (inputs, seed): item sampling, the
per-item shuffle of model summaries, and the opaque labels all come from one
seeded generator. Scores live in an append-only JSON Lines log; aggregation
replays the log, and only the aggregate export ever unblinds labels.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union


class Subsection(Enum):
    ADMISSION_REASON = "admission_reason"
    HISTORY_OF_PRESENT_ILLNESS = "history_of_present_illness"
    MEDICAL_ASSESSMENT = "medical_assessment"
    HEALTH_INTERVENTION = "health_intervention"
    DIAGNOSIS = "diagnosis"
    DISCHARGE_INFORMATION = "discharge_information"


# Inline guidance shown to readers next to the score selectors.
RUBRIC_GUIDANCE: dict[Subsection, str] = {
    Subsection.ADMISSION_REASON: (
        "Why the patient was admitted: presenting symptoms or complaints, the "
        "admitting diagnosis, and whether the admission was elective or an emergency."
    ),
    Subsection.HISTORY_OF_PRESENT_ILLNESS: (
        "Patient demographics (age, sex) and relevant past medical history, "
        "including co-morbidities and any intensive-care course and response."
    ),
    Subsection.MEDICAL_ASSESSMENT: (
        "Diagnostic work-up performed during the stay (imaging, endoscopy, "
        "catheterization, laboratory studies), what it established, and the "
        "patient's response, including adverse effects."
    ),
    Subsection.HEALTH_INTERVENTION: (
        "Treatments delivered: procedures and medications, each with its "
        "indication, and how the patient responded."
    ),
    Subsection.DIAGNOSIS: (
        "Primary diagnosis for the stay plus secondary diagnoses, including "
        "complications that arose during the hospital course."
    ),
    Subsection.DISCHARGE_INFORMATION: (
        "Condition at discharge and destination (home, rehabilitation, nursing "
        "facility, another hospital, or death in hospital)."
    ),
}


class ChocosaScore(float, Enum):
    """Closed score domain: no other values are representable."""

    INCORRECT = 0.0
    PARTIAL = 0.5
    CORRECT = 1.0


class SessionError(ValueError):
    """Session cannot be built as requested."""


@dataclass(frozen=True)
class BlindedSummary:
    label: str
    text: str
    model_name: str  # server-side only; stripped from reader-facing payloads


@dataclass(frozen=True)
class SessionItem:
    item_index: int
    hadm_id: int
    input_text: str
    reference_summary: str
    summaries: tuple[BlindedSummary, ...]

    def label_to_model(self) -> dict[str, str]:
        return {s.label: s.model_name for s in self.summaries}


@dataclass
class ReaderStudySession:
    session_id: str
    seed: int
    readers: list[str]
    items: list[SessionItem]

    def item(self, index: int) -> SessionItem:
        if not 0 <= index < len(self.items):
            raise SessionError(f"no item {index} in session {self.session_id}")
        return self.items[index]


@dataclass(frozen=True)
class ChocosaScoreRecord:
    session_id: str
    item_index: int
    reader_id: str
    blinded_label: str
    scores: dict[Subsection, ChocosaScore]
    comment: Optional[str] = None
    insufficient_input: bool = False
    submitted_at: str = ""

    def as_dict(self) -> dict:
        return {
            "session_id": self.session_id,
            "item_index": self.item_index,
            "reader_id": self.reader_id,
            "blinded_label": self.blinded_label,
            "scores": {sub.value: score.value for sub, score in self.scores.items()},
            "comment": self.comment,
            "insufficient_input": self.insufficient_input,
            "submitted_at": self.submitted_at,
        }


class RecordRejected(ValueError):
    """Validation failure for a submitted score record; the reason is the message."""


def parse_record(raw: dict) -> ChocosaScoreRecord:
    """Parse an untrusted submission; out-of-domain scores are unrepresentable
    and rejected here."""
    try:
        session_id = str(raw["session_id"])
        item_index = int(raw["item_index"])
        reader_id = str(raw["reader_id"])
        blinded_label = str(raw["blinded_label"])
    except (KeyError, TypeError, ValueError) as exc:
        raise RecordRejected(f"missing or malformed field: {exc}") from exc
    insufficient = bool(raw.get("insufficient_input", False))
    scores: dict[Subsection, ChocosaScore] = {}
    raw_scores = raw.get("scores") or {}
    if not isinstance(raw_scores, dict):
        raise RecordRejected("scores must be a mapping")
    for key, value in raw_scores.items():
        try:
            sub = Subsection(key)
        except ValueError as exc:
            raise RecordRejected(f"unknown subsection: {key!r}") from exc
        try:
            score = ChocosaScore(float(value))
        except (TypeError, ValueError) as exc:
            raise RecordRejected(f"score outside {{0, 0.5, 1}}: {value!r}") from exc
        if sub in scores:
            raise RecordRejected(f"duplicate subsection: {key!r}")
        scores[sub] = score
    if not insufficient and set(scores) != set(Subsection):
        missing = sorted(s.value for s in set(Subsection) - set(scores))
        raise RecordRejected(f"missing subsection scores: {missing}")
    return ChocosaScoreRecord(
        session_id=session_id,
        item_index=item_index,
        reader_id=reader_id,
        blinded_label=blinded_label,
        scores=scores,
        comment=raw.get("comment"),
        insufficient_input=insufficient,
        submitted_at=raw.get("submitted_at") or datetime.now(timezone.utc).isoformat(),
    )


def _labels(n: int) -> list[str]:
    return [f"Summary {chr(ord('A') + i)}" for i in range(n)]


def sample_session(
    pairs: Sequence,
    generations_by_model: dict[str, dict[int, str]],
    n: int = 30,
    seed: int = 0,
    session_id: Optional[str] = None,
    readers: Optional[Sequence[str]] = None,
) -> ReaderStudySession:
    """Seeded sample of n admissions that have a summary from every model.

    Per item, the model order is freshly shuffled and opaque labels are
    assigned in presentation order; the label->model mapping stays inside the
    session object and never reaches reader-facing payloads.
    """
    if not generations_by_model:
        raise SessionError("at least one model's generations are required")
    eligible = [
        p
        for p in sorted(pairs, key=lambda p: p.hadm_id)
        if all(p.hadm_id in gen for gen in generations_by_model.values())
    ]
    if n > len(eligible):
        raise SessionError(
            f"requested {n} items but only {len(eligible)} pairs have "
            f"generations from every model"
        )
    rng = random.Random(seed)
    chosen = rng.sample(eligible, n)
    models = sorted(generations_by_model)
    items = []
    for index, pair in enumerate(chosen):
        order = models[:]
        rng.shuffle(order)
        labels = _labels(len(order))
        summaries = tuple(
            BlindedSummary(
                label=labels[pos],
                text=generations_by_model[model][pair.hadm_id],
                model_name=model,
            )
            for pos, model in enumerate(order)
        )
        items.append(
            SessionItem(
                item_index=index,
                hadm_id=pair.hadm_id,
                input_text=pair.input_text,
                reference_summary=pair.bhc_text,
                summaries=summaries,
            )
        )
    return ReaderStudySession(
        session_id=session_id or f"session-{seed}-{n}",
        seed=seed,
        readers=list(readers or []),
        items=items,
    )


def validate_record(
    record: ChocosaScoreRecord,
    session: ReaderStudySession,
    existing: Iterable[ChocosaScoreRecord] = (),
) -> None:
    """Raise RecordRejected for unknown items/labels, roster violations, or
    duplicate (reader, item, label) submissions; parse_record already closed
    the score domain."""
    if record.session_id != session.session_id:
        raise RecordRejected(f"unknown session: {record.session_id!r}")
    if not 0 <= record.item_index < len(session.items):
        raise RecordRejected(f"unknown item index: {record.item_index}")
    item = session.items[record.item_index]
    if record.blinded_label not in {s.label for s in item.summaries}:
        raise RecordRejected(f"unknown blinded label: {record.blinded_label!r}")
    if session.readers and record.reader_id not in session.readers:
        raise RecordRejected(f"reader not on session roster: {record.reader_id!r}")
    for prior in existing:
        if (
            prior.reader_id == record.reader_id
            and prior.item_index == record.item_index
            and prior.blinded_label == record.blinded_label
        ):
            raise RecordRejected("duplicate submission for this reader, item, and summary")


@dataclass
class ChocosaAggregate:
    """Unblinded per-(model, subsection) means plus per-model overall means."""

    cells: dict  # model -> subsection value -> {"mean": float|None, "n": int, "n_flagged": int}
    overall: dict  # model -> {"mean": float|None, "n": int}

    def as_dict(self) -> dict:
        return {"cells": self.cells, "overall": self.overall}


def aggregate_chocosa(
    records: Sequence[ChocosaScoreRecord], session: ReaderStudySession
) -> ChocosaAggregate:
    """Mean score per (model, subsection); overall = unweighted mean of the six
    subsection means. Records flagged insufficient are excluded from means and
    counted separately."""
    by_cell: dict[tuple[str, Subsection], list[float]] = {}
    flagged: dict[str, int] = {}
    models: set[str] = set()
    for item in session.items:
        models.update(item.label_to_model().values())
    for record in records:
        item = session.items[record.item_index]
        model = item.label_to_model()[record.blinded_label]
        models.add(model)
        if record.insufficient_input:
            flagged[model] = flagged.get(model, 0) + 1
            continue
        for sub, score in record.scores.items():
            by_cell.setdefault((model, sub), []).append(score.value)
    cells: dict = {}
    overall: dict = {}
    for model in sorted(models):
        cells[model] = {}
        sub_means = []
        for sub in Subsection:
            values = by_cell.get((model, sub), [])
            mean = sum(values) / len(values) if values else None
            cells[model][sub.value] = {
                "mean": mean,
                "n": len(values),
                "n_flagged": flagged.get(model, 0),
            }
            if mean is not None:
                sub_means.append(mean)
        overall[model] = {
            "mean": sum(sub_means) / len(sub_means) if len(sub_means) == len(Subsection) else None,
            "n": sum(cells[model][s.value]["n"] for s in Subsection),
        }
    return ChocosaAggregate(cells=cells, overall=overall)


_SCORE_INDEX = {ChocosaScore.INCORRECT: 0, ChocosaScore.PARTIAL: 1, ChocosaScore.CORRECT: 2}


def inter_rater_agreement(
    records: Sequence[ChocosaScoreRecord],
) -> Optional[dict]:
    """Exact-agreement rate and linear-weighted kappa per subsection over all
    reader pairs sharing an (item, label) cell; None when no overlap exists."""
    by_key: dict[tuple[int, str], list[ChocosaScoreRecord]] = {}
    for record in records:
        if record.insufficient_input:
            continue
        by_key.setdefault((record.item_index, record.blinded_label), []).append(record)

    paired: dict[Subsection, list[tuple[int, int]]] = {sub: [] for sub in Subsection}
    any_overlap = False
    for shared in by_key.values():
        for i in range(len(shared)):
            for j in range(i + 1, len(shared)):
                a, b = shared[i], shared[j]
                if a.reader_id == b.reader_id:
                    continue
                any_overlap = True
                for sub in Subsection:
                    if sub in a.scores and sub in b.scores:
                        paired[sub].append(
                            (_SCORE_INDEX[a.scores[sub]], _SCORE_INDEX[b.scores[sub]])
                        )
    if not any_overlap:
        return None

    def weighted_kappa(pairs: list[tuple[int, int]]) -> Optional[float]:
        if not pairs:
            return None
        k = 3
        weight = lambda i, j: 1.0 - abs(i - j) / (k - 1)  # noqa: E731
        n = len(pairs)
        po = sum(weight(a, b) for a, b in pairs) / n
        marg_a = [0.0] * k
        marg_b = [0.0] * k
        for a, b in pairs:
            marg_a[a] += 1.0 / n
            marg_b[b] += 1.0 / n
        pe = sum(marg_a[i] * marg_b[j] * weight(i, j) for i in range(k) for j in range(k))
        if pe == 1.0:
            return 1.0 if po == 1.0 else 0.0
        return (po - pe) / (1.0 - pe)

    out: dict = {"per_subsection": {}, "overall": {}}
    all_pairs: list[tuple[int, int]] = []
    for sub in Subsection:
        pairs = paired[sub]
        all_pairs.extend(pairs)
        out["per_subsection"][sub.value] = {
            "n_pairs": len(pairs),
            "exact_agreement": (
                sum(1 for a, b in pairs if a == b) / len(pairs) if pairs else None
            ),
            "weighted_kappa": weighted_kappa(pairs),
        }
    out["overall"] = {
        "n_pairs": len(all_pairs),
        "exact_agreement": (
            sum(1 for a, b in all_pairs if a == b) / len(all_pairs) if all_pairs else None
        ),
        "weighted_kappa": weighted_kappa(all_pairs),
    }
    return out


# ---------------------------------------------------------------------------
# Persistence: session JSON + append-only score log


def save_session(
    session: ReaderStudySession, path: Union[str, Path], meta: Optional[dict] = None
) -> None:
    payload = {
        "meta": meta or {},
        "session_id": session.session_id,
        "seed": session.seed,
        "readers": session.readers,
        "items": [
            {
                "item_index": item.item_index,
                "hadm_id": item.hadm_id,
                "input_text": item.input_text,
                "reference_summary": item.reference_summary,
                "summaries": [
                    {"label": s.label, "text": s.text, "model_name": s.model_name}
                    for s in item.summaries
                ],
            }
            for item in session.items
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def load_session(path: Union[str, Path]) -> ReaderStudySession:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    items = [
        SessionItem(
            item_index=raw["item_index"],
            hadm_id=raw["hadm_id"],
            input_text=raw["input_text"],
            reference_summary=raw["reference_summary"],
            summaries=tuple(
                BlindedSummary(s["label"], s["text"], s["model_name"])
                for s in raw["summaries"]
            ),
        )
        for raw in payload["items"]
    ]
    return ReaderStudySession(
        session_id=payload["session_id"],
        seed=payload["seed"],
        readers=list(payload.get("readers", [])),
        items=items,
    )


class ScoreLog:
    """Append-only JSON Lines log; aggregation replays the whole file."""

    def __init__(self, path: Union[str, Path]):
        self.path = Path(path)

    def append(self, record: ChocosaScoreRecord) -> None:
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(record.as_dict()) + "\n")

    def replay(self) -> list[ChocosaScoreRecord]:
        if not self.path.exists():
            return []
        records = []
        with open(self.path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    records.append(parse_record(json.loads(line)))
        return records
