"""Subword token counting for length filtering and context-length subgroups.

Two tokenizer kinds are supported behind one interface: a byte-pair-encoding
counter driven by a vocabulary+merges asset pair, and a zero-asset whitespace
approximation so the pipeline runs without any external files. Every report
records which tokenizer produced its counts.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from pathlib import Path
from typing import Optional

PRETOKEN_RE = re.compile(r"\w+|[^\w\s]")


class TokenizerKind(Enum):
    SUBWORD_BPE = "subword_bpe"
    WHITESPACE_APPROX = "whitespace_approx"


class Bucket(Enum):
    SHORT_CONTEXT = "short"
    LONG_CONTEXT = "long"


class TokenizerConfigError(ValueError):
    """Bad tokenizer configuration: missing, corrupt, or mismatched asset."""


@dataclass(frozen=True)
class TokenizerSpec:
    kind: TokenizerKind
    asset_path: Optional[str] = None
    name: str = ""

    def __post_init__(self):
        if self.kind is TokenizerKind.SUBWORD_BPE and not self.asset_path:
            raise TokenizerConfigError("subword_bpe requires an asset_path")
        if self.kind is TokenizerKind.WHITESPACE_APPROX and self.asset_path:
            raise TokenizerConfigError("whitespace_approx takes no asset_path")
        if not self.name:
            object.__setattr__(self, "name", self.kind.value)


@dataclass(frozen=True)
class TokenCount:
    count: int
    tokenizer_name: str

    def __post_init__(self):
        if self.count < 0:
            raise ValueError("token count must be non-negative")


class BpeCounter:
    """Greedy byte-pair-merge tokenizer over a vocab.json + merges.txt asset pair.

    Text is pre-split into word runs and single punctuation marks; merges are
    applied inside each pre-token, lowest rank first, all adjacent occurrences
    per pass. Counting excludes special/beginning-of-sequence tokens.
    """

    def __init__(self, asset_dir: str | Path):
        asset_dir = Path(asset_dir)
        vocab_path = asset_dir / "vocab.json"
        merges_path = asset_dir / "merges.txt"
        for path in (vocab_path, merges_path):
            if not path.is_file():
                raise TokenizerConfigError(f"tokenizer asset missing: {path}")
        try:
            with open(vocab_path, encoding="utf-8") as fh:
                vocab = json.load(fh)
            if not isinstance(vocab, dict) or not all(
                isinstance(k, str) and isinstance(v, int) for k, v in vocab.items()
            ):
                raise ValueError("vocab.json must map token strings to integer ids")
        except (json.JSONDecodeError, ValueError) as exc:
            raise TokenizerConfigError(f"corrupt vocabulary asset {vocab_path}: {exc}") from exc
        self.vocab: dict[str, int] = vocab
        self.ranks: dict[tuple[str, str], int] = {}
        with open(merges_path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.rstrip("\n")
                if not line or line.startswith("#"):
                    continue
                parts = line.split(" ")
                if len(parts) != 2:
                    raise TokenizerConfigError(
                        f"corrupt merges asset {merges_path}: line {lineno} is not a pair"
                    )
                self.ranks.setdefault((parts[0], parts[1]), len(self.ranks))
        self._encode_word = lru_cache(maxsize=65536)(self._encode_word_uncached)

    def _encode_word_uncached(self, word: str) -> tuple[str, ...]:
        pieces = list(word)
        while len(pieces) > 1:
            best_rank = None
            best_pair = None
            for pair in zip(pieces, pieces[1:]):
                rank = self.ranks.get(pair)
                if rank is not None and (best_rank is None or rank < best_rank):
                    best_rank = rank
                    best_pair = pair
            if best_pair is None:
                break
            merged = []
            i = 0
            while i < len(pieces):
                if i + 1 < len(pieces) and (pieces[i], pieces[i + 1]) == best_pair:
                    merged.append(pieces[i] + pieces[i + 1])
                    i += 2
                else:
                    merged.append(pieces[i])
                    i += 1
            pieces = merged
        return tuple(pieces)

    def encode(self, text: str) -> list[str]:
        out: list[str] = []
        for word in PRETOKEN_RE.findall(text):
            out.extend(self._encode_word(word))
        return out

    def count(self, text: str) -> int:
        return len(self.encode(text))


_BPE_CACHE: dict[str, BpeCounter] = {}


def _bpe_for(spec: TokenizerSpec) -> BpeCounter:
    key = str(spec.asset_path)
    if key not in _BPE_CACHE:
        _BPE_CACHE[key] = BpeCounter(spec.asset_path)
    return _BPE_CACHE[key]


def whitespace_tokens(text: str) -> list[str]:
    """Word runs plus standalone punctuation; the zero-asset approximation."""
    return PRETOKEN_RE.findall(text)


def count_tokens(text: str, spec: TokenizerSpec) -> TokenCount:
    if spec.kind is TokenizerKind.WHITESPACE_APPROX:
        return TokenCount(len(whitespace_tokens(text)), spec.name)
    return TokenCount(_bpe_for(spec).count(text), spec.name)


def bucket_by_length(count: int | TokenCount, boundary: int) -> Bucket:
    """Inclusive on the short side: count <= boundary is ShortContext."""
    if boundary <= 0:
        raise ValueError("boundary must be positive")
    n = count.count if isinstance(count, TokenCount) else int(count)
    return Bucket.SHORT_CONTEXT if n <= boundary else Bucket.LONG_CONTEXT
