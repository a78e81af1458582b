"""Build a small fixture session for the UI round-trip test.

Usage: python3 make_session.py OUTDIR  -> prints the session id.
"""

import sys
from pathlib import Path

from hcsum.chocosa import sample_session, save_session
from hcsum.dataset import SummaryPair
from hcsum.tokenizers import TokenCount

MODELS = ["llama-ft", "mistral-ft", "biomistral-ft"]


def main(outdir: str) -> None:
    pairs = [
        SummaryPair(
            hadm_id=i,
            subject_id=i,
            input_text=(
                f"Admission day: Reason for hospitalization is condition {i}.\n"
                f"Day 1: assessment and plan narrative for admission {i}.\n"
                f"Discharge day: Patient is discharged to home.\n"
            ),
            bhc_text=f"Reference hospital course for admission {i}.",
            input_tokens=TokenCount(600 + i, "ws"),
            bhc_tokens=TokenCount(80, "ws"),
        )
        for i in range(8)
    ]
    generations = {
        model: {p.hadm_id: f"Candidate narrative {idx}-{p.hadm_id} for the stay." for p in pairs}
        for idx, model in enumerate(MODELS)
    }
    session = sample_session(pairs, generations, n=3, seed=42, readers=["r1"], session_id="ui-test")
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    save_session(session, out / "session.json")
    print(session.session_id)


if __name__ == "__main__":
    main(sys.argv[1])
