"""Single-file pipeline configuration.

Every run resolves its config (file values over defaults, CLI overrides over
both) and stamps the resolved digest plus toolkit version into each output so
artifacts are traceable to the exact settings that produced them.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import yaml

from . import __version__
from .dataset import FilterThresholds, SplitPlan
from .tokenizers import TokenizerKind, TokenizerSpec


class ConfigError(ValueError):
    """Configuration file missing, unreadable, or inconsistent."""


@dataclass
class GenerationSettings:
    endpoint: str = "http://127.0.0.1:8123"
    models: list[str] = field(default_factory=lambda: ["stub"])
    temperature: float = 0.1
    repetition_penalty: float = 1.1
    max_new_tokens: int = 1024
    timeout: float = 120.0
    max_retries: int = 3
    concurrency: int = 4
    context_window: Optional[int] = None
    repetition_penalty_field: str = "repetition_penalty"


@dataclass
class PipelineConfig:
    corpus: str = "corpus.csv"
    workdir: str = "work"
    column_mapping: dict[str, str] = field(default_factory=dict)
    registry_path: Optional[str] = None
    prompt_template_path: Optional[str] = None
    tokenizer: TokenizerSpec = field(
        default_factory=lambda: TokenizerSpec(TokenizerKind.WHITESPACE_APPROX)
    )
    thresholds: FilterThresholds = field(default_factory=FilterThresholds)
    split: SplitPlan = field(default_factory=SplitPlan)
    generation: GenerationSettings = field(default_factory=GenerationSettings)
    embedding_endpoint: Optional[str] = None
    subgroup_boundary: int = 2048
    reader_tokens: dict[str, str] = field(default_factory=dict)

    def resolved(self) -> dict:
        return {
            "corpus": self.corpus,
            "workdir": self.workdir,
            "column_mapping": dict(sorted(self.column_mapping.items())),
            "registry_path": self.registry_path,
            "prompt_template_path": self.prompt_template_path,
            "tokenizer": {
                "kind": self.tokenizer.kind.value,
                "asset_path": self.tokenizer.asset_path,
                "name": self.tokenizer.name,
            },
            "thresholds": {
                "bhc_min": self.thresholds.bhc_min,
                "input_min": self.thresholds.input_min,
            },
            "split": {
                "fractions": list(self.split.fractions),
                "seed": self.split.seed,
                "unit": self.split.unit,
            },
            "generation": {
                "endpoint": self.generation.endpoint,
                "models": self.generation.models,
                "temperature": self.generation.temperature,
                "repetition_penalty": self.generation.repetition_penalty,
                "max_new_tokens": self.generation.max_new_tokens,
                "timeout": self.generation.timeout,
                "max_retries": self.generation.max_retries,
                "concurrency": self.generation.concurrency,
                "context_window": self.generation.context_window,
                "repetition_penalty_field": self.generation.repetition_penalty_field,
            },
            "embedding_endpoint": self.embedding_endpoint,
            "subgroup_boundary": self.subgroup_boundary,
        }

    def digest(self) -> str:
        canonical = json.dumps(self.resolved(), sort_keys=True)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]

    def meta(self) -> dict:
        """Provenance block embedded into every output file."""
        return {"toolkit_version": __version__, "config_digest": self.digest()}


def _expect_mapping(raw, where: str) -> dict:
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{where}: expected a mapping")
    return raw


def load_config(path: Optional[Union[str, Path]] = None, overrides: Optional[dict] = None) -> PipelineConfig:
    """Load YAML config; absent path means all defaults. ``overrides`` maps
    dotted keys (e.g. "split.seed") to replacement values."""
    raw: dict = {}
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {p}")
        try:
            with open(p, encoding="utf-8") as fh:
                raw = _expect_mapping(yaml.safe_load(fh), str(p))
        except yaml.YAMLError as exc:
            raise ConfigError(f"config file does not parse: {p}: {exc}") from exc

    for key, value in (overrides or {}).items():
        node = raw
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = value

    tok_raw = _expect_mapping(raw.get("tokenizer"), "tokenizer")
    try:
        tokenizer = TokenizerSpec(
            kind=TokenizerKind(tok_raw.get("kind", "whitespace_approx")),
            asset_path=tok_raw.get("asset_path"),
            name=tok_raw.get("name", ""),
        )
    except ValueError as exc:
        raise ConfigError(f"tokenizer: {exc}") from exc

    thr_raw = _expect_mapping(raw.get("thresholds"), "thresholds")
    split_raw = _expect_mapping(raw.get("split"), "split")
    gen_raw = _expect_mapping(raw.get("generation"), "generation")
    try:
        thresholds = FilterThresholds(
            bhc_min=int(thr_raw.get("bhc_min", 50)),
            input_min=int(thr_raw.get("input_min", 500)),
        )
        split = SplitPlan(
            fractions=tuple(split_raw.get("fractions", (0.85, 0.10, 0.05))),
            seed=int(split_raw.get("seed", 0)),
            unit=split_raw.get("unit", "hadm_id"),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    generation = GenerationSettings(
        endpoint=gen_raw.get("endpoint", "http://127.0.0.1:8123"),
        models=list(gen_raw.get("models", ["stub"])),
        temperature=float(gen_raw.get("temperature", 0.1)),
        repetition_penalty=float(gen_raw.get("repetition_penalty", 1.1)),
        max_new_tokens=int(gen_raw.get("max_new_tokens", 1024)),
        timeout=float(gen_raw.get("timeout", 120.0)),
        max_retries=int(gen_raw.get("max_retries", 3)),
        concurrency=int(gen_raw.get("concurrency", 4)),
        context_window=gen_raw.get("context_window"),
        repetition_penalty_field=gen_raw.get("repetition_penalty_field", "repetition_penalty"),
    )

    return PipelineConfig(
        corpus=raw.get("corpus", "corpus.csv"),
        workdir=raw.get("workdir", "work"),
        column_mapping=dict(_expect_mapping(raw.get("column_mapping"), "column_mapping")),
        registry_path=raw.get("registry_path"),
        prompt_template_path=raw.get("prompt_template_path"),
        tokenizer=tokenizer,
        thresholds=thresholds,
        split=split,
        generation=generation,
        embedding_endpoint=raw.get("embedding_endpoint"),
        subgroup_boundary=int(raw.get("subgroup_boundary", 2048)),
        reader_tokens=dict(raw.get("reader_tokens", {})),
    )
