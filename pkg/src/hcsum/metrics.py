"""ROUGE-1/2/L and BERTScore composition, plus median/deviation aggregation.

Preprocessing is deliberately minimal: lowercase, tokens are maximal runs of
letters, digits and hyphens, no stemming and no stopword removal. This is a
known source of small divergence from other ROUGE toolkits and is recorded in
every report's metadata.
"""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np
import requests

from ._kernels import lcs_length
from .tokenizers import Bucket

TOKEN_RE = re.compile(r"[a-z0-9-]+")

ROUGE_METRICS = ("rouge1", "rouge2", "rougeL")
ALL_METRICS = ROUGE_METRICS + ("bertscore",)

PREPROCESSING_NOTE = (
    "lowercase; tokens = maximal runs of letters/digits/hyphens; "
    "no stemming; no stopwords; whole-text LCS (no sentence splits)"
)
QUARTILE_NOTE = "median-exclusive quartiles (Moore-McCabe), linear interpolation"


class EmbeddingBackendError(RuntimeError):
    """Raised when the embedding backend cannot produce vectors."""


@dataclass(frozen=True)
class PrecisionRecallF1:
    precision: float
    recall: float
    f1: float

    @classmethod
    def from_pr(cls, precision: float, recall: float) -> "PrecisionRecallF1":
        denom = precision + recall
        f1 = 2.0 * precision * recall / denom if denom > 0 else 0.0
        return cls(precision, recall, f1)

    def as_dict(self) -> dict:
        return {"precision": self.precision, "recall": self.recall, "f1": self.f1}


ZERO_SCORE = PrecisionRecallF1(0.0, 0.0, 0.0)


def metric_tokenize(text: str) -> list[str]:
    """Lowercase and split into maximal runs of letters/digits/hyphens."""
    return TOKEN_RE.findall(text.lower())


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def rouge_n(candidate: Sequence[str], reference: Sequence[str], n: int) -> PrecisionRecallF1:
    """Clipped n-gram multiset overlap between candidate and reference tokens."""
    if n not in (1, 2):
        raise ValueError(f"rouge_n supports n in (1, 2), got {n}")
    cand = _ngrams(candidate, n)
    ref = _ngrams(reference, n)
    cand_total = sum(cand.values())
    ref_total = sum(ref.values())
    if cand_total == 0 or ref_total == 0:
        return ZERO_SCORE
    overlap = sum(min(count, ref[gram]) for gram, count in cand.items())
    return PrecisionRecallF1.from_pr(overlap / cand_total, overlap / ref_total)


def _token_ids(candidate: Sequence[str], reference: Sequence[str]) -> tuple[np.ndarray, np.ndarray]:
    ids: dict[str, int] = {}
    for tok in candidate:
        ids.setdefault(tok, len(ids))
    for tok in reference:
        ids.setdefault(tok, len(ids))
    a = np.fromiter((ids[t] for t in candidate), dtype=np.int64, count=len(candidate))
    b = np.fromiter((ids[t] for t in reference), dtype=np.int64, count=len(reference))
    return a, b


def rouge_l(candidate: Sequence[str], reference: Sequence[str]) -> PrecisionRecallF1:
    """LCS-based overlap over whole token sequences (no sentence splitting)."""
    if not candidate or not reference:
        return ZERO_SCORE
    a, b = _token_ids(candidate, reference)
    lcs = lcs_length(a, b)
    return PrecisionRecallF1.from_pr(lcs / len(candidate), lcs / len(reference))


def rouge_scores(candidate_text: str, reference_text: str) -> dict[str, PrecisionRecallF1]:
    """All three ROUGE variants for one (candidate, reference) text pair."""
    cand = metric_tokenize(candidate_text)
    ref = metric_tokenize(reference_text)
    return {
        "rouge1": rouge_n(cand, ref, 1),
        "rouge2": rouge_n(cand, ref, 2),
        "rougeL": rouge_l(cand, ref),
    }


def bert_score(candidate: np.ndarray, reference: np.ndarray) -> PrecisionRecallF1:
    """Greedy max-cosine matching between two unit-norm embedding sequences.

    No IDF weighting and no baseline rescaling. Values are reported raw; the
    MetricRow assembly clips into [0, 1] (negative max-cosine is possible only
    for adversarial embedding sets).
    """
    candidate = np.asarray(candidate, dtype=np.float64)
    reference = np.asarray(reference, dtype=np.float64)
    if candidate.size == 0 or reference.size == 0:
        return ZERO_SCORE
    if candidate.ndim != 2 or reference.ndim != 2:
        raise ValueError("embedding sequences must be 2-D (tokens x dims)")
    if candidate.shape[1] != reference.shape[1]:
        raise ValueError(
            f"embedding dimension mismatch: candidate {candidate.shape[1]} "
            f"vs reference {reference.shape[1]}"
        )
    sim = candidate @ reference.T
    precision = float(sim.max(axis=1).mean())
    recall = float(sim.max(axis=0).mean())
    return PrecisionRecallF1.from_pr(precision, recall)


def normalize_rows(vectors: np.ndarray) -> np.ndarray:
    """L2-normalize each row; zero rows raise (a token embedding may not vanish)."""
    vectors = np.asarray(vectors, dtype=np.float64)
    if vectors.size == 0:
        return vectors.reshape(0, 0)
    norms = np.linalg.norm(vectors, axis=1, keepdims=True)
    if np.any(norms == 0):
        raise ValueError("zero-norm embedding vector")
    return vectors / norms


def embed_tokens(text: str, endpoint: str, timeout: float = 30.0) -> np.ndarray:
    """Fetch per-token contextual vectors from an HTTP embedding backend.

    POST {endpoint}/embed-tokens with {"text": ...}; the response carries
    {"tokens": [...], "vectors": [[...]]}. Vectors are unit-normalized locally.
    """
    if not text:
        return np.zeros((0, 0))
    url = endpoint.rstrip("/") + "/embed-tokens"
    try:
        resp = requests.post(url, json={"text": text}, timeout=timeout)
        resp.raise_for_status()
        payload = resp.json()
        vectors = np.asarray(payload["vectors"], dtype=np.float64)
    except (requests.RequestException, KeyError, ValueError) as exc:
        raise EmbeddingBackendError(f"embedding backend failed: {exc}") from exc
    if vectors.size == 0:
        return np.zeros((0, 0))
    return normalize_rows(vectors)


@dataclass
class MetricRow:
    """Per-example metric values for one (admission, model) pair."""

    hadm_id: int
    model_name: str
    rouge1: PrecisionRecallF1
    rouge2: PrecisionRecallF1
    rougeL: PrecisionRecallF1
    bertscore: Optional[PrecisionRecallF1]
    input_tokens: int
    bucket: Bucket

    def metric(self, name: str) -> Optional[PrecisionRecallF1]:
        return getattr(self, name)

    def as_dict(self) -> dict:
        return {
            "hadm_id": self.hadm_id,
            "model_name": self.model_name,
            "rouge1": self.rouge1.as_dict(),
            "rouge2": self.rouge2.as_dict(),
            "rougeL": self.rougeL.as_dict(),
            "bertscore": self.bertscore.as_dict() if self.bertscore else None,
            "input_tokens": self.input_tokens,
            "bucket": self.bucket.value,
        }


def _clip_score(score: PrecisionRecallF1) -> PrecisionRecallF1:
    clip = lambda v: float(min(1.0, max(0.0, v)))  # noqa: E731
    return PrecisionRecallF1(clip(score.precision), clip(score.recall), clip(score.f1))


def score_pair(
    hadm_id: int,
    model_name: str,
    candidate_text: str,
    reference_text: str,
    input_tokens: int,
    boundary: int,
    embedding_endpoint: Optional[str] = None,
) -> MetricRow:
    """Build one MetricRow; bertscore stays absent when no backend is configured
    or the backend fails (never fabricated)."""
    from .tokenizers import bucket_by_length  # local import avoids cycle at module load

    rouge = rouge_scores(candidate_text, reference_text)
    bs: Optional[PrecisionRecallF1] = None
    if embedding_endpoint:
        try:
            cand_vecs = embed_tokens(candidate_text, embedding_endpoint)
            ref_vecs = embed_tokens(reference_text, embedding_endpoint)
            if cand_vecs.size and ref_vecs.size:
                bs = _clip_score(bert_score(cand_vecs, ref_vecs))
            else:
                bs = ZERO_SCORE
        except EmbeddingBackendError:
            bs = None
    return MetricRow(
        hadm_id=hadm_id,
        model_name=model_name,
        rouge1=rouge["rouge1"],
        rouge2=rouge["rouge2"],
        rougeL=rouge["rougeL"],
        bertscore=bs,
        input_tokens=input_tokens,
        bucket=bucket_by_length(input_tokens, boundary),
    )


def _median(sorted_vals: Sequence[float]) -> float:
    n = len(sorted_vals)
    mid = n // 2
    if n % 2:
        return float(sorted_vals[mid])
    return float((sorted_vals[mid - 1] + sorted_vals[mid]) / 2.0)


def _quartiles(sorted_vals: Sequence[float]) -> tuple[float, float]:
    """Median-exclusive quartiles: halves exclude the middle element for odd n."""
    n = len(sorted_vals)
    half = n // 2
    if half == 0:
        return float(sorted_vals[0]), float(sorted_vals[0])
    return _median(sorted_vals[:half]), _median(sorted_vals[n - half :])


def cell_stats(values: Iterable[float]) -> Optional[dict]:
    """median / IQR / mean / std (population) for one report cell; None when empty."""
    vals = sorted(float(v) for v in values)
    if not vals:
        return None
    q1, q3 = _quartiles(vals)
    arr = np.asarray(vals)
    return {
        "n": len(vals),
        "median": _median(vals),
        "q1": q1,
        "q3": q3,
        "iqr": q3 - q1,
        "mean": float(arr.mean()),
        "std": float(arr.std()),
    }


@dataclass
class AggregateReport:
    """Nested statistics per (model, metric) and per (model, metric, bucket)."""

    models: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"meta": self.meta, "models": self.models}

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.as_dict(), indent=2, sort_keys=False, **kwargs)

    def flat_rows(self) -> list[dict]:
        """Flatten to one row per (model, metric, bucket-or-all, stat) for CSV export."""
        rows = []
        for model, metrics in self.models.items():
            for metric, node in metrics.items():
                cells = [("all", node["overall"])] + [
                    (bucket, stats) for bucket, stats in node["buckets"].items()
                ]
                for bucket, stats in cells:
                    row = {"model": model, "metric": metric, "bucket": bucket}
                    if stats is None:
                        row.update({"n": 0})
                    else:
                        row.update(stats)
                    rows.append(row)
        return rows


def aggregate(rows: Sequence[MetricRow], value: str = "f1") -> AggregateReport:
    """Aggregate per-example rows into medians/deviations with bucket breakdowns.

    ``value`` selects which of precision/recall/f1 is aggregated; f1 is the
    headline statistic, all three live in the per-example rows.
    """
    if not rows:
        raise ValueError("aggregate requires at least one metric row")
    report = AggregateReport(
        meta={
            "value": value,
            "preprocessing": PREPROCESSING_NOTE,
            "quartiles": QUARTILE_NOTE,
            "std": "population (ddof=0)",
        }
    )
    models = sorted({r.model_name for r in rows})
    for model in models:
        model_rows = [r for r in rows if r.model_name == model]
        per_metric = {}
        for metric in ALL_METRICS:
            scored = [r for r in model_rows if r.metric(metric) is not None]
            vals = [getattr(r.metric(metric), value) for r in scored]
            buckets = {}
            for bucket in Bucket:
                bvals = [
                    getattr(r.metric(metric), value)
                    for r in scored
                    if r.bucket is bucket
                ]
                buckets[bucket.value] = cell_stats(bvals)
            per_metric[metric] = {
                "overall": cell_stats(vals),
                "buckets": buckets,
                "n_absent": len(model_rows) - len(scored),
            }
        report.models[model] = per_metric
    return report
