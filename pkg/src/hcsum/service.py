"""HTTP API serving reader-study sessions to the web annotation interface.

Reader-facing payloads are blinded: they carry opaque summary labels and never
a model name. Score submissions are validated and appended to the session's
single-writer log; aggregation endpoints replay that log.
"""

from __future__ import annotations

import threading
from pathlib import Path
from typing import Optional

from fastapi import Body, FastAPI, HTTPException, Query
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from .chocosa import (
    ChocosaScoreRecord,
    ReaderStudySession,
    RecordRejected,
    RUBRIC_GUIDANCE,
    ScoreLog,
    parse_record,
    validate_record,
)

RUBRIC_PAYLOAD = [
    {"subsection": sub.value, "guidance": text} for sub, text in RUBRIC_GUIDANCE.items()
]
SCORE_VALUES = [0.0, 0.5, 1.0]


def _reader_progress(
    session: ReaderStudySession, records: list[ChocosaScoreRecord], reader: str
) -> dict:
    scored: dict[int, set[str]] = {}
    for record in records:
        if record.reader_id == reader:
            scored.setdefault(record.item_index, set()).add(record.blinded_label)
    done = 0
    next_item: Optional[int] = None
    for item in session.items:
        labels = {s.label for s in item.summaries}
        if labels <= scored.get(item.item_index, set()):
            done += 1
        elif next_item is None:
            next_item = item.item_index
    return {
        "reader_id": reader,
        "items_done": done,
        "items_total": len(session.items),
        "next_item": next_item,
    }


def create_app(
    session: ReaderStudySession,
    score_log: ScoreLog,
    reader_tokens: Optional[dict[str, str]] = None,
    ui_dir: Optional[str] = None,
) -> FastAPI:
    app = FastAPI(title="reader study service")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    write_lock = threading.Lock()

    def _check_session(session_id: str) -> None:
        if session_id != session.session_id:
            raise HTTPException(status_code=404, detail=f"unknown session: {session_id}")

    def _check_token(reader: str, token: Optional[str]) -> None:
        if reader_tokens and reader_tokens.get(reader) != token:
            raise HTTPException(status_code=403, detail="bad or missing reader token")

    @app.get("/api/sessions/{session_id}")
    def session_meta(session_id: str):
        _check_session(session_id)
        records = score_log.replay()
        return {
            "session_id": session.session_id,
            "item_count": len(session.items),
            "readers": session.readers,
            "progress": [
                _reader_progress(session, records, reader) for reader in session.readers
            ],
        }

    @app.get("/api/sessions/{session_id}/items/{item_index}")
    def get_item(
        session_id: str,
        item_index: int,
        reader: str = Query(...),
        token: Optional[str] = Query(default=None),
    ):
        _check_session(session_id)
        _check_token(reader, token)
        if not 0 <= item_index < len(session.items):
            raise HTTPException(status_code=404, detail=f"unknown item: {item_index}")
        item = session.items[item_index]
        submitted = [
            record.as_dict()
            for record in score_log.replay()
            if record.reader_id == reader and record.item_index == item_index
        ]
        return {
            "session_id": session.session_id,
            "item_index": item.item_index,
            "input_text": item.input_text,
            "reference_summary": item.reference_summary,
            "summaries": [{"label": s.label, "text": s.text} for s in item.summaries],
            "rubric": RUBRIC_PAYLOAD,
            "score_values": SCORE_VALUES,
            "submitted": submitted,
        }

    @app.post("/api/sessions/{session_id}/items/{item_index}/scores")
    def post_scores(
        session_id: str,
        item_index: int,
        payload: dict = Body(...),
        token: Optional[str] = Query(default=None),
    ):
        _check_session(session_id)
        body = {**payload, "session_id": session_id, "item_index": item_index}
        try:
            record = parse_record(body)
            _check_token(record.reader_id, token)
            with write_lock:
                validate_record(record, session, existing=score_log.replay())
                score_log.append(record)
        except RecordRejected as exc:
            return JSONResponse(status_code=422, content={"status": "rejected", "reason": str(exc)})
        return {"status": "accepted"}

    @app.get("/api/sessions/{session_id}/progress")
    def progress(
        session_id: str,
        reader: str = Query(...),
        token: Optional[str] = Query(default=None),
    ):
        _check_session(session_id)
        _check_token(reader, token)
        return _reader_progress(session, score_log.replay(), reader)

    if ui_dir:
        app.mount("/", StaticFiles(directory=Path(ui_dir), html=True), name="ui")

    return app
