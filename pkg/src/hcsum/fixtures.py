"""Synthetic clinical-note corpus generator.

Real note tables are access-controlled, so the toolkit ships a seeded fixture
generator producing structurally realistic admissions: a discharge summary
with the routed sections plus daily progress notes, with bracketed dates and
name placeholders sprinkled in for the pseudonymization pass to find.
"""

from __future__ import annotations

import csv
import random
from datetime import date, timedelta
from pathlib import Path
from typing import Union

_CONDITIONS = [
    "hypertension", "hyperlipidemia", "type 2 diabetes", "atrial fibrillation",
    "congestive heart failure", "chronic kidney disease", "severe mitral regurgitation",
    "aortic stenosis", "pneumonia", "anemia", "thrombocytosis", "hypotension",
]
_INTERVENTIONS = [
    "aortic valve replacement", "mitral valve repair", "coronary angiography",
    "upper endoscopy", "chest tube placement", "mechanical ventilation",
    "diuresis with furosemide", "beta blocker titration", "anticoagulation bridging",
    "blood transfusion",
]
_FINDINGS = [
    "echocardiogram showed a dilated right ventricle", "chest film revealed bilateral effusions",
    "cultures remained negative", "hematocrit trended down to 22", "creatinine stabilized",
    "white count was normal", "electrocardiogram showed no acute changes",
    "filling pressures were elevated on catheterization",
]
_FILLER = [
    "the patient remained hemodynamically stable overnight",
    "pain was controlled with the existing regimen",
    "physical therapy evaluated the patient at bedside",
    "electrolytes were repleted per protocol",
    "telemetry showed no sustained arrhythmia",
    "the care team discussed goals with the family",
    "oxygen was weaned to room air as tolerated",
    "diet was advanced without complication",
]
_DISPOSITIONS = [
    "home with services", "rehabilitation facility", "extended care facility",
    "home", "skilled nursing facility",
]


def _sentences(rng: random.Random, n_words: int) -> str:
    """Roughly n_words of clinical-sounding prose."""
    out = []
    words = 0
    pools = (_FILLER, _FINDINGS)
    while words < n_words:
        sentence = rng.choice(pools[rng.randrange(len(pools))])
        if rng.random() < 0.25:
            sentence += f" and {rng.choice(_FILLER)}"
        out.append(sentence.capitalize() + ".")
        words += len(sentence.split())
    return " ".join(out)


def _bracket(d: date) -> str:
    return f"[**{d.isoformat()}**]"


def _discharge_summary(rng: random.Random, admit: date, discharge: date, bhc_words: int) -> str:
    condition = rng.choice(_CONDITIONS)
    procedure = rng.choice(_INTERVENTIONS)
    history = ", ".join(rng.sample(_CONDITIONS, 3))
    pre_admission = admit - timedelta(days=rng.randrange(30, 300))
    mid_stay = admit + timedelta(days=max(1, (discharge - admit).days // 2))
    parts = [
        f"Admission Date: {_bracket(admit)}   Discharge Date: {_bracket(discharge)}",
        "",
        "Chief Complaint:",
        f"{condition} with worsening symptoms",
        "",
        "Major Surgical or Invasive Procedure:",
        procedure,
        "",
        "History of Present Illness:",
        f"Ms. [**Known lastname {rng.randrange(1000, 9999)}**] is a "
        f"{rng.randrange(40, 90)} year old patient with a history of {history}, "
        f"last hospitalized {_bracket(pre_admission)}. "
        + _sentences(rng, 60),
        "",
        "Physical Exam:",
        _sentences(rng, 35),
        "",
        "Brief Hospital Course:",
        f"[**First Name**] [**Last Name**] was admitted on {_bracket(admit)} for {condition}. "
        f"On {_bracket(mid_stay)} the patient underwent {procedure}. "
        + _sentences(rng, bhc_words)
        + f" The patient was discharged on {_bracket(discharge)} in stable condition.",
        "",
        "Discharge Diagnosis:",
        f"Primary: {condition}. Secondary: {rng.choice(_CONDITIONS)}.",
        "",
        "Discharge Disposition:",
        rng.choice(_DISPOSITIONS),
        "",
    ]
    return "\n".join(parts)


def _progress_note(rng: random.Random, day: date, words: int) -> str:
    return "\n".join(
        [
            f"Progress note for {_bracket(day)}.",
            "",
            "Assessment and Plan:",
            _sentences(rng, words),
            "",
        ]
    )


def write_demo_corpus(
    path: Union[str, Path],
    n_admissions: int = 4,
    seed: int = 0,
    n_long: int = 1,
    bad_rows: int = 0,
    orphan_notes: int = 0,
    shared_subject_pairs: int = 0,
) -> list[int]:
    """Write a synthetic NOTEEVENTS-style CSV; returns the admission ids.

    The first ``n_long`` admissions get enough daily narrative to exceed a
    2048-token input; the rest stay comfortably between the 500-token floor
    and the boundary. ``bad_rows`` appends malformed rows, ``orphan_notes``
    appends notes with no admission id, and ``shared_subject_pairs`` makes
    that many admission pairs share one subject id (for leakage tests).
    """
    rng = random.Random(seed)
    rows = []
    row_id = 1
    hadm_ids = []
    for i in range(n_admissions):
        hadm_id = 1000 + i
        subject_id = 5000 + i
        if shared_subject_pairs and i < 2 * shared_subject_pairs:
            subject_id = 5000 + (i // 2)
        hadm_ids.append(hadm_id)
        admit = date(2119, 1, 10) + timedelta(days=7 * i)
        stay_days = rng.randrange(3, 6)
        discharge = admit + timedelta(days=stay_days)
        long_stay = i < n_long
        per_day_words = rng.randrange(700, 900) if long_stay else rng.randrange(120, 180)
        for offset in range(stay_days):
            day = admit + timedelta(days=offset)
            category = "Nursing" if offset % 2 == 0 else "Physician"
            rows.append(
                {
                    "ROW_ID": row_id,
                    "SUBJECT_ID": subject_id,
                    "HADM_ID": hadm_id,
                    "CHARTDATE": day.isoformat(),
                    "CHARTTIME": f"{day.isoformat()} {8 + offset:02d}:30:00",
                    "CATEGORY": category,
                    "DESCRIPTION": "Progress Note",
                    "TEXT": _progress_note(rng, day, per_day_words),
                }
            )
            row_id += 1
        rows.append(
            {
                "ROW_ID": row_id,
                "SUBJECT_ID": subject_id,
                "HADM_ID": hadm_id,
                "CHARTDATE": discharge.isoformat(),
                "CHARTTIME": "",
                "CATEGORY": "Discharge summary",
                "DESCRIPTION": "Report",
                "TEXT": _discharge_summary(rng, admit, discharge, bhc_words=rng.randrange(80, 140)),
            }
        )
        row_id += 1

    for _ in range(orphan_notes):
        rows.append(
            {
                "ROW_ID": row_id,
                "SUBJECT_ID": 9000,
                "HADM_ID": "",
                "CHARTDATE": "2119-03-01",
                "CHARTTIME": "",
                "CATEGORY": "Nursing",
                "DESCRIPTION": "Outpatient note",
                "TEXT": "Assessment and Plan:\n" + _sentences(rng, 30) + "\n",
            }
        )
        row_id += 1

    fieldnames = [
        "ROW_ID", "SUBJECT_ID", "HADM_ID", "CHARTDATE", "CHARTTIME",
        "CATEGORY", "DESCRIPTION", "TEXT",
    ]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
        for b in range(bad_rows):
            # empty TEXT and an unparseable date, one of each flavor
            if b % 2 == 0:
                writer.writerow(
                    {
                        "ROW_ID": row_id, "SUBJECT_ID": 1, "HADM_ID": 1,
                        "CHARTDATE": "2119-01-01", "CHARTTIME": "", "CATEGORY": "Nursing",
                        "DESCRIPTION": "", "TEXT": "",
                    }
                )
            else:
                writer.writerow(
                    {
                        "ROW_ID": row_id, "SUBJECT_ID": 1, "HADM_ID": 1,
                        "CHARTDATE": "not-a-date", "CHARTTIME": "", "CATEGORY": "Nursing",
                        "DESCRIPTION": "", "TEXT": "some text",
                    }
                )
            row_id += 1
    return hadm_ids
