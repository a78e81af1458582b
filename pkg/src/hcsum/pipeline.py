"""End-to-end pipeline stages behind the CLI: build, generate, eval.

The build stage mirrors the preprocessing flow and reports a count at every
hop so filtering is auditable; eval joins generations back to the dataset by
admission id and refuses to score orphans.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from .chocosa import ReaderStudySession, sample_session
from .client import GenerationConfig, generate_batch, read_records, write_records
from .config import PipelineConfig
from .dataset import (
    AssemblyError,
    Split,
    SummaryPair,
    assemble_emr,
    build_prompt,
    filter_pairs,
    read_pairs,
    split_dataset,
    write_pairs,
)
from .deid import rewrite_document
from .ingest import AdmissionBundle, IngestReport, group_admissions, parse_corpus
from .metrics import AggregateReport, MetricRow, aggregate, score_pair
from .sections import CompiledRegistry, SectionKind, compile_registry, extract_all, extract_section, load_registry
from .tokenizers import count_tokens

log = logging.getLogger(__name__)


class EvalAlignmentError(ValueError):
    """Generations reference admission ids absent from the dataset."""


@dataclass
class BuildReport:
    rows_seen: int = 0
    notes_parsed: int = 0
    row_errors: int = 0
    bundles: int = 0
    bundles_rejected: dict[str, int] = field(default_factory=dict)
    assembled: int = 0
    filtered_out: dict[str, int] = field(default_factory=dict)
    kept: int = 0
    split_sizes: dict[str, int] = field(default_factory=dict)
    deid: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "rows_seen": self.rows_seen,
            "notes_parsed": self.notes_parsed,
            "row_errors": self.row_errors,
            "bundles": self.bundles,
            "bundles_rejected": self.bundles_rejected,
            "assembled": self.assembled,
            "filtered_out": self.filtered_out,
            "kept": self.kept,
            "split_sizes": self.split_sizes,
            "deid": self.deid,
        }


def _registry_for(config: PipelineConfig) -> CompiledRegistry:
    if config.registry_path:
        return load_registry(config.registry_path)
    return compile_registry()


def build_pairs(
    bundles: Sequence[AdmissionBundle],
    registry: CompiledRegistry,
    config: PipelineConfig,
    report: BuildReport,
) -> list[SummaryPair]:
    """Extract, clean, assemble, and tokenize one SummaryPair per admission."""
    pairs = []
    dates_rewritten = 0
    names_rewritten = 0
    unresolved = 0
    for bundle in bundles:
        sections_by_note = {}
        bhc_text: Optional[str] = None
        for note in bundle.notes:
            found = extract_all(note, registry, routing=registry.routing)
            sections_by_note[note.row_id] = found
            if bhc_text is None:
                bhc = extract_section(note.text, SectionKind.BRIEF_HOSPITAL_COURSE, registry, note.row_id)
                if bhc is not None and bhc.text.strip():
                    cleaned, bhc_report = rewrite_document(bhc.text, bundle.admission_date)
                    bhc_text = cleaned
                    dates_rewritten += bhc_report.dates_rewritten
                    names_rewritten += bhc_report.names_rewritten
                    unresolved += len(bhc_report.unresolved_placeholders)
        if bhc_text is None:
            report.bundles_rejected["no_bhc"] = report.bundles_rejected.get("no_bhc", 0) + 1
            continue
        try:
            input_text = assemble_emr(bundle, sections_by_note)
        except AssemblyError:
            report.bundles_rejected["no_sections"] = (
                report.bundles_rejected.get("no_sections", 0) + 1
            )
            continue
        pairs.append(
            SummaryPair(
                hadm_id=bundle.hadm_id,
                subject_id=bundle.subject_id,
                input_text=input_text,
                bhc_text=bhc_text,
                input_tokens=count_tokens(input_text, config.tokenizer),
                bhc_tokens=count_tokens(bhc_text, config.tokenizer),
            )
        )
    report.assembled = len(pairs)
    report.deid = {
        "bhc_dates_rewritten": dates_rewritten,
        "bhc_names_rewritten": names_rewritten,
        "bhc_unresolved_placeholders": unresolved,
    }
    return pairs


def cmd_build(config: PipelineConfig) -> tuple[Path, BuildReport]:
    """Run ingest -> extract -> deid -> assemble -> tokenize -> filter -> split
    and write the dataset plus a stage-by-stage build report."""
    workdir = Path(config.workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    report = BuildReport()

    ingest_report = IngestReport()
    notes = list(
        parse_corpus(config.corpus, mapping=config.column_mapping or None, report=ingest_report)
    )
    bundles = group_admissions(notes, report=ingest_report)
    report.rows_seen = ingest_report.rows_seen
    report.notes_parsed = ingest_report.notes_parsed
    report.row_errors = len(ingest_report.errors)
    report.bundles = len(bundles)
    if ingest_report.errors:
        ingest_report.write_rejects(workdir / "rejects.jsonl")

    registry = _registry_for(config)
    pairs = build_pairs(bundles, registry, config, report)
    kept, dropped = filter_pairs(pairs, config.thresholds)
    for _, reasons in dropped:
        for reason in reasons:
            report.filtered_out[reason] = report.filtered_out.get(reason, 0) + 1
    report.kept = len(kept)

    if kept:
        kept = split_dataset(kept, config.split)
        for split in Split:
            report.split_sizes[split.value] = sum(1 for p in kept if p.split is split)

    dataset_path = workdir / "dataset.jsonl"
    write_pairs(dataset_path, kept, meta=config.meta())
    with open(workdir / "build_report.json", "w", encoding="utf-8") as fh:
        json.dump({**config.meta(), "stages": report.as_dict()}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return dataset_path, report


def _load_template(config: PipelineConfig) -> Optional[str]:
    if config.prompt_template_path:
        return Path(config.prompt_template_path).read_text(encoding="utf-8")
    return None


def cmd_generate(
    config: PipelineConfig,
    dataset_path: Path,
    models: Optional[Sequence[str]] = None,
) -> dict[str, Path]:
    """One generations file per model over the Test split."""
    pairs, _ = read_pairs(dataset_path)
    test_pairs = [p for p in pairs if p.split is Split.TEST]
    template = _load_template(config)
    items = [
        (
            p.hadm_id,
            build_prompt(p.input_text, template) if template else build_prompt(p.input_text),
        )
        for p in test_pairs
    ]
    workdir = Path(config.workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    outputs: dict[str, Path] = {}
    for model in models or config.generation.models:
        gen_config = GenerationConfig(
            model_name=model,
            endpoint=config.generation.endpoint,
            temperature=config.generation.temperature,
            repetition_penalty=config.generation.repetition_penalty,
            max_new_tokens=config.generation.max_new_tokens,
            timeout=config.generation.timeout,
            max_retries=config.generation.max_retries,
            repetition_penalty_field=config.generation.repetition_penalty_field,
            context_window=config.generation.context_window,
        )
        records = generate_batch(items, gen_config, config.generation.concurrency)
        path = workdir / f"generations_{model}.jsonl"
        write_records(path, records, meta={**config.meta(), "model": model})
        outputs[model] = path
        failures = sum(1 for r in records if not r.ok)
        if failures:
            log.warning("%s: %d of %d generations failed", model, failures, len(records))
    return outputs


def cmd_eval(
    config: PipelineConfig,
    dataset_path: Path,
    generation_paths: Sequence[Path],
) -> tuple[list[MetricRow], AggregateReport]:
    """Score every successful generation against its reference and aggregate."""
    pairs, _ = read_pairs(dataset_path)
    by_hadm = {p.hadm_id: p for p in pairs}
    rows: list[MetricRow] = []
    skipped_failures = 0
    for path in generation_paths:
        records, _ = read_records(path)
        orphans = sorted({r.hadm_id for r in records} - set(by_hadm))
        if orphans:
            raise EvalAlignmentError(
                f"{path}: generations for admission ids not in the dataset: {orphans}"
            )
        for record in records:
            if not record.ok:
                skipped_failures += 1
                continue
            pair = by_hadm[record.hadm_id]
            rows.append(
                score_pair(
                    hadm_id=record.hadm_id,
                    model_name=record.model_name,
                    candidate_text=record.summary_text or "",
                    reference_text=pair.bhc_text,
                    input_tokens=pair.input_tokens.count,
                    boundary=config.subgroup_boundary,
                    embedding_endpoint=config.embedding_endpoint,
                )
            )
    if skipped_failures:
        log.warning("skipped %d failed generation records", skipped_failures)
    if not rows:
        raise EvalAlignmentError("no successful generations to evaluate")
    report = aggregate(rows)
    report.meta.update(config.meta())
    report.meta["skipped_failures"] = skipped_failures
    report.meta["subgroup_boundary"] = config.subgroup_boundary
    return rows, report


def write_metric_rows(path_base: Path, rows: Sequence[MetricRow], meta: dict) -> tuple[Path, Path]:
    """Metric rows as JSON Lines and as flat CSV (one column per stat)."""
    jsonl_path = path_base.with_suffix(".jsonl")
    with open(jsonl_path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"record_type": "meta", **meta}) + "\n")
        for row in rows:
            fh.write(json.dumps(row.as_dict()) + "\n")

    csv_path = path_base.with_suffix(".csv")
    fieldnames = ["hadm_id", "model_name", "input_tokens", "bucket"]
    for metric in ("rouge1", "rouge2", "rougeL", "bertscore"):
        for stat in ("precision", "recall", "f1"):
            fieldnames.append(f"{metric}_{stat}")
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# toolkit_version={meta.get('toolkit_version')} config_digest={meta.get('config_digest')}\n")
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        for row in rows:
            flat = {
                "hadm_id": row.hadm_id,
                "model_name": row.model_name,
                "input_tokens": row.input_tokens,
                "bucket": row.bucket.value,
            }
            for metric in ("rouge1", "rouge2", "rougeL", "bertscore"):
                score = row.metric(metric)
                for stat in ("precision", "recall", "f1"):
                    flat[f"{metric}_{stat}"] = getattr(score, stat) if score else ""
            writer.writerow(flat)
    return jsonl_path, csv_path


def write_aggregate(path_base: Path, report: AggregateReport) -> tuple[Path, Path]:
    json_path = path_base.with_suffix(".json")
    with open(json_path, "w", encoding="utf-8") as fh:
        fh.write(report.to_json())
        fh.write("\n")
    csv_path = path_base.with_suffix(".csv")
    rows = report.flat_rows()
    fieldnames = ["model", "metric", "bucket", "n", "median", "q1", "q3", "iqr", "mean", "std"]
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        fh.write(
            f"# toolkit_version={report.meta.get('toolkit_version')} "
            f"config_digest={report.meta.get('config_digest')}\n"
        )
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
    return json_path, csv_path


def sample_from_files(
    config: PipelineConfig,
    dataset_path: Path,
    generation_paths: Sequence[Path],
    n: int,
    seed: int,
    readers: Sequence[str] = (),
) -> ReaderStudySession:
    """Build a reader-study session from the dataset and generations files."""
    pairs, _ = read_pairs(dataset_path)
    test_pairs = [p for p in pairs if p.split is Split.TEST]
    generations_by_model: dict[str, dict[int, str]] = {}
    for path in generation_paths:
        records, _ = read_records(path)
        for record in records:
            if record.ok:
                generations_by_model.setdefault(record.model_name, {})[
                    record.hadm_id
                ] = record.summary_text
    return sample_session(
        test_pairs, generations_by_model, n=n, seed=seed, readers=readers
    )
