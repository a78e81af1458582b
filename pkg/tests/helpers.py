"""Shared test utilities: a miniature BPE asset and brute-force oracles."""

from __future__ import annotations

import itertools
import json
from pathlib import Path

import numpy as np

WORKED_SENTENCE = (
    "The patient was diagnosed with type 2 diabetes and prescribed "
    "metformin 500 mg daily."
)

# Piece layout the mini asset must reproduce: every word merges whole except
# metformin, which stays split subword-style. 16 pieces total.
WORKED_PIECES = [
    ["The"], ["patient"], ["was"], ["diagnosed"], ["with"], ["type"], ["2"],
    ["diabetes"], ["and"], ["prescribed"], ["met", "formin"], ["500"], ["mg"],
    ["daily"], ["."],
]


def build_demo_bpe_asset(dirpath: Path) -> Path:
    """Write a vocab.json + merges.txt pair that tokenizes WORKED_SENTENCE
    into WORKED_PIECES. Merges build each target piece up character by
    character; no merge bridges the pieces of a split word."""
    dirpath.mkdir(parents=True, exist_ok=True)
    vocab: dict[str, int] = {}
    merges: list[tuple[str, str]] = []
    seen: set[tuple[str, str]] = set()

    def add_token(tok: str) -> None:
        if tok not in vocab:
            vocab[tok] = len(vocab)

    for word_pieces in WORKED_PIECES:
        for piece in word_pieces:
            for ch in piece:
                add_token(ch)
            cur = piece[0]
            for nxt in piece[1:]:
                pair = (cur, nxt)
                if pair not in seen:
                    seen.add(pair)
                    merges.append(pair)
                cur += nxt
                add_token(cur)

    with open(dirpath / "vocab.json", "w", encoding="utf-8") as fh:
        json.dump(vocab, fh, indent=0)
    with open(dirpath / "merges.txt", "w", encoding="utf-8") as fh:
        fh.write("#version: mini\n")
        for left, right in merges:
            fh.write(f"{left} {right}\n")
    return dirpath


def lcs_exhaustive(a: list, b: list) -> int:
    """All-subsequence search; only viable for short lists."""
    best = 0
    for r in range(len(a), 0, -1):
        if r <= best:
            break
        for combo in itertools.combinations(a, r):
            if _is_subsequence(combo, b):
                best = r
                break
    return best


def _is_subsequence(needle, haystack) -> bool:
    it = iter(haystack)
    return all(tok in it for tok in needle)


def rouge_n_bruteforce(cand: list, ref: list, n: int):
    """Clipped n-gram counting without Counter tricks, as an independent oracle."""
    cand_grams = [tuple(cand[i : i + n]) for i in range(len(cand) - n + 1)]
    ref_grams = [tuple(ref[i : i + n]) for i in range(len(ref) - n + 1)]
    if not cand_grams or not ref_grams:
        return 0.0, 0.0, 0.0
    overlap = 0
    remaining = list(ref_grams)
    for gram in cand_grams:
        if gram in remaining:
            remaining.remove(gram)
            overlap += 1
    p = overlap / len(cand_grams)
    r = overlap / len(ref_grams)
    f = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return p, r, f


def greedy_match_bruteforce(cand: np.ndarray, ref: np.ndarray):
    """Max cosine per row/column via explicit python loops."""
    precision_parts = []
    for c in cand:
        precision_parts.append(max(float(np.dot(c, r)) for r in ref))
    recall_parts = []
    for r in ref:
        recall_parts.append(max(float(np.dot(c, r)) for c in cand))
    p = sum(precision_parts) / len(precision_parts)
    r = sum(recall_parts) / len(recall_parts)
    f = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return p, r, f


def random_unit_vectors(rng: np.random.Generator, n: int, dim: int) -> np.ndarray:
    vecs = rng.normal(size=(n, dim))
    return vecs / np.linalg.norm(vecs, axis=1, keepdims=True)
