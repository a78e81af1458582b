"""HTTP client for OpenAI-compatible completion backends.

Every request carries the three sampling parameters explicitly (no silent
backend defaults), transient failures retry with exponential backoff, and the
batch API returns exactly one record per input, in input order.
"""

from __future__ import annotations

import hashlib
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

import requests

from .dataset import RESPONSE_MARKER
from .tokenizers import whitespace_tokens

INPUT_NOTE_MARKER = "### Input note:"
TRUNCATION_JOINER = " ... "

RETRYABLE_STATUS = {408, 429, 500, 502, 503, 504}


@dataclass(frozen=True)
class GenerationConfig:
    model_name: str
    endpoint: str
    temperature: float = 0.1
    repetition_penalty: float = 1.1
    max_new_tokens: int = 1024
    timeout: float = 120.0
    max_retries: int = 3
    backoff_base: float = 0.5
    # Backends name the repetition-penalty field differently; map it here.
    repetition_penalty_field: str = "repetition_penalty"
    # When set, prompts are trimmed to fit (context_window - max_new_tokens).
    context_window: Optional[int] = None

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_new_tokens <= 0:
            raise ValueError("max_new_tokens must be positive")
        if self.repetition_penalty < 1.0:
            raise ValueError("repetition_penalty must be >= 1.0")


@dataclass
class GenerationRecord:
    hadm_id: int
    model_name: str
    prompt_hash: str
    summary_text: Optional[str]
    latency_ms: float
    attempt_count: int
    created_at: str
    status: str  # "success" | "failure"
    error: Optional[str] = None
    truncated: bool = False

    @property
    def ok(self) -> bool:
        return self.status == "success"

    def as_dict(self) -> dict:
        return {
            "hadm_id": self.hadm_id,
            "model_name": self.model_name,
            "prompt_hash": self.prompt_hash,
            "summary_text": self.summary_text,
            "latency_ms": self.latency_ms,
            "attempt_count": self.attempt_count,
            "created_at": self.created_at,
            "status": self.status,
            "error": self.error,
            "truncated": self.truncated,
        }


def _prompt_hash(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


def truncate_prompt(prompt: str, config: GenerationConfig) -> tuple[str, bool]:
    """Trim the middle of the input-note segment so the prompt fits the
    backend context window, preserving the role preamble, the note's admission
    and discharge ends, and the response marker."""
    if config.context_window is None:
        return prompt, False
    budget = config.context_window - config.max_new_tokens
    if budget <= 0:
        raise ValueError("context_window must exceed max_new_tokens")
    if len(whitespace_tokens(prompt)) <= budget:
        return prompt, False
    head_at = prompt.find(INPUT_NOTE_MARKER)
    tail_at = prompt.rfind(RESPONSE_MARKER)
    if head_at == -1 or tail_at == -1 or tail_at <= head_at:
        # No recognizable note segment: trim the prompt middle itself.
        toks = prompt.split()
        keep = max(budget - 1, 2)
        trimmed = toks[: keep // 2] + [TRUNCATION_JOINER.strip()] + toks[-(keep - keep // 2):]
        return " ".join(trimmed), True
    note_start = head_at + len(INPUT_NOTE_MARKER)
    scaffold_tokens = len(whitespace_tokens(prompt[:note_start])) + len(
        whitespace_tokens(prompt[tail_at:])
    )
    note_budget = max(budget - scaffold_tokens - 1, 2)
    note_tokens = prompt[note_start:tail_at].split()
    head_keep = note_budget // 2
    trimmed_note = note_tokens[:head_keep] + [TRUNCATION_JOINER.strip()] + note_tokens[
        -(note_budget - head_keep):
    ]
    out = prompt[:note_start] + "\n" + " ".join(trimmed_note) + "\n\n" + prompt[tail_at:]
    return out, True


def _completion_body(prompt: str, config: GenerationConfig) -> dict:
    return {
        "model": config.model_name,
        "prompt": prompt,
        "temperature": config.temperature,
        "max_tokens": config.max_new_tokens,
        config.repetition_penalty_field: config.repetition_penalty,
    }


def generate(
    prompt: str,
    config: GenerationConfig,
    hadm_id: int = -1,
    session: Optional[requests.Session] = None,
) -> GenerationRecord:
    """One completion round trip with retries; failures become records, not raises."""
    prompt, truncated = truncate_prompt(prompt, config)
    body = _completion_body(prompt, config)
    url = config.endpoint.rstrip("/") + "/v1/completions"
    http = session or requests
    started = time.perf_counter()
    attempts = 0
    error: Optional[str] = None
    summary: Optional[str] = None
    while attempts <= config.max_retries:
        attempts += 1
        try:
            resp = http.post(url, json=body, timeout=config.timeout)
        except requests.Timeout:
            error = "timeout"
        except requests.RequestException:
            error = "connection"
        else:
            if resp.status_code == 200:
                try:
                    summary = resp.json()["choices"][0]["text"]
                    error = None
                    break
                except (ValueError, KeyError, IndexError):
                    error = "malformed_response"
                    break  # a well-formed 200 with a bad body will not improve on retry
            else:
                error = f"http_{resp.status_code}"
                if resp.status_code not in RETRYABLE_STATUS:
                    break
        if attempts <= config.max_retries:
            time.sleep(config.backoff_base * (2 ** (attempts - 1)))
    latency_ms = (time.perf_counter() - started) * 1000.0
    return GenerationRecord(
        hadm_id=hadm_id,
        model_name=config.model_name,
        prompt_hash=_prompt_hash(prompt),
        summary_text=summary,
        latency_ms=latency_ms,
        attempt_count=attempts,
        created_at=datetime.now(timezone.utc).isoformat(),
        status="success" if summary is not None else "failure",
        error=error,
        truncated=truncated,
    )


def generate_batch(
    items: Sequence[tuple[int, str]],
    config: GenerationConfig,
    concurrency_limit: int = 4,
) -> list[GenerationRecord]:
    """Generate for (hadm_id, prompt) items; output order matches input order
    regardless of completion order, one record per item."""
    if not items:
        return []
    with ThreadPoolExecutor(max_workers=max(1, concurrency_limit)) as pool:
        records = list(
            pool.map(lambda item: generate(item[1], config, hadm_id=item[0]), items)
        )
    return records


def write_records(path: Union[str, Path], records: Iterable[GenerationRecord], meta: Optional[dict] = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"record_type": "meta", **(meta or {})}) + "\n")
        for record in records:
            fh.write(json.dumps(record.as_dict()) + "\n")


def read_records(path: Union[str, Path]) -> tuple[list[GenerationRecord], dict]:
    meta: dict = {}
    records: list[GenerationRecord] = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            raw = json.loads(line)
            if raw.get("record_type") == "meta":
                meta = raw
                continue
            records.append(GenerationRecord(**raw))
    return records, meta
