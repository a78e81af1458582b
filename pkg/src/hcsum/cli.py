"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 corpus/input error,
4 generation failed for every record, 5 evaluation alignment error,
6 service error. Each failure class is distinct so shell pipelines can react.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .chocosa import (
    ScoreLog,
    SessionError,
    aggregate_chocosa,
    inter_rater_agreement,
    load_session,
    save_session,
)
from .config import ConfigError, PipelineConfig, load_config
from .dataset import emit_finetune_config
from .fixtures import write_demo_corpus
from .ingest import SchemaError
from .pipeline import (
    EvalAlignmentError,
    cmd_build,
    cmd_eval,
    cmd_generate,
    sample_from_files,
    write_aggregate,
    write_metric_rows,
)
from .sections import RegistryError, dump_default_registry
from .tokenizers import TokenizerConfigError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INPUT = 3
EXIT_GENERATION = 4
EXIT_EVAL = 5
EXIT_SERVICE = 6

log = logging.getLogger("hcsum")


def _load(args: argparse.Namespace) -> PipelineConfig:
    overrides = {}
    if args.workdir:
        overrides["workdir"] = args.workdir
    if args.seed is not None:
        overrides["split.seed"] = args.seed
    if getattr(args, "tokenizer", None):
        overrides["tokenizer.kind"] = args.tokenizer
    if getattr(args, "tokenizer_asset", None):
        overrides["tokenizer.asset_path"] = args.tokenizer_asset
    return load_config(args.config, overrides)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", default=None, help="pipeline config YAML")
    parser.add_argument("--workdir", default=None, help="override workdir")
    parser.add_argument("--seed", type=int, default=None, help="override split seed")


def _run_build(args) -> int:
    config = _load(args)
    dataset_path, report = cmd_build(config)
    print(f"dataset: {dataset_path}")
    for key, value in report.as_dict().items():
        print(f"  {key}: {value}")
    return EXIT_OK


def _run_generate(args) -> int:
    config = _load(args)
    dataset = Path(args.dataset or Path(config.workdir) / "dataset.jsonl")
    outputs = cmd_generate(config, dataset, models=args.model or None)
    total_failure = True
    from .client import read_records

    for model, path in outputs.items():
        records, _ = read_records(path)
        ok = sum(1 for r in records if r.ok)
        if ok:
            total_failure = False
        print(f"{model}: {ok}/{len(records)} generations -> {path}")
    if total_failure and outputs:
        print("every generation failed", file=sys.stderr)
        return EXIT_GENERATION
    return EXIT_OK


def _run_eval(args) -> int:
    config = _load(args)
    dataset = Path(args.dataset or Path(config.workdir) / "dataset.jsonl")
    generation_paths = [Path(p) for p in args.generations]
    rows, report = cmd_eval(config, dataset, generation_paths)
    base = Path(config.workdir) / "metric_rows"
    jsonl_path, csv_path = write_metric_rows(base, rows, {**config.meta()})
    agg_json, agg_csv = write_aggregate(Path(config.workdir) / "aggregate", report)
    print(f"metric rows: {jsonl_path}, {csv_path}")
    print(f"aggregate report: {agg_json}, {agg_csv}")
    return EXIT_OK


def _run_chocosa_sample(args) -> int:
    config = _load(args)
    dataset = Path(args.dataset or Path(config.workdir) / "dataset.jsonl")
    session = sample_from_files(
        config,
        dataset,
        [Path(p) for p in args.generations],
        n=args.n,
        seed=args.seed if args.seed is not None else 0,
        readers=args.reader,
    )
    out = Path(args.out or Path(config.workdir) / "session.json")
    save_session(session, out, meta=config.meta())
    print(f"session with {len(session.items)} items -> {out}")
    return EXIT_OK


def _run_chocosa_serve(args) -> int:
    import uvicorn

    from .service import create_app

    config = _load(args)
    session = load_session(args.session)
    score_log = ScoreLog(args.scores or Path(args.session).with_suffix(".scores.jsonl"))
    app = create_app(
        session, score_log, reader_tokens=config.reader_tokens or None, ui_dir=args.ui
    )
    try:
        uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    except OSError as exc:
        print(f"cannot serve: {exc}", file=sys.stderr)
        return EXIT_SERVICE
    except SystemExit:  # uvicorn exits on startup failure (e.g. occupied port)
        print("cannot serve: server failed to start (is the port occupied?)", file=sys.stderr)
        return EXIT_SERVICE
    return EXIT_OK


def _run_chocosa_export(args) -> int:
    config = _load(args)
    session = load_session(args.session)
    score_log = ScoreLog(args.scores or Path(args.session).with_suffix(".scores.jsonl"))
    records = score_log.replay()
    aggregate_out = aggregate_chocosa(records, session)
    payload = {
        **config.meta(),
        "session_id": session.session_id,
        "n_records": len(records),
        "aggregate": aggregate_out.as_dict(),
        "inter_rater": inter_rater_agreement(records),
        "label_to_model": {
            str(item.item_index): item.label_to_model() for item in session.items
        },
        "records": [r.as_dict() for r in records],
    }
    out_json = Path(args.out or Path(config.workdir) / "chocosa_export.json")
    out_json.parent.mkdir(parents=True, exist_ok=True)
    with open(out_json, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
    out_csv = out_json.with_suffix(".csv")
    with open(out_csv, "w", encoding="utf-8") as fh:
        fh.write(f"# toolkit_version={__version__} config_digest={config.digest()}\n")
        fh.write("model,subsection,mean,n,n_flagged\n")
        for model, cells in aggregate_out.cells.items():
            for sub, cell in cells.items():
                mean = "" if cell["mean"] is None else f"{cell['mean']:.6f}"
                fh.write(f"{model},{sub},{mean},{cell['n']},{cell['n_flagged']}\n")
    print(f"export: {out_json}, {out_csv}")
    return EXIT_OK


def _run_emit_finetune_config(args) -> int:
    config = _load(args)
    out = Path(args.out or Path(config.workdir) / "finetune_recipe.yaml")
    out.parent.mkdir(parents=True, exist_ok=True)
    emit_finetune_config(
        out, header=f"hcsum {__version__} config_digest={config.digest()}"
    )
    print(f"finetune recipe -> {out}")
    return EXIT_OK


def _run_demo_corpus(args) -> int:
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    hadm_ids = write_demo_corpus(
        out,
        n_admissions=args.admissions,
        seed=args.seed if args.seed is not None else 0,
        n_long=args.long,
    )
    print(f"demo corpus with admissions {hadm_ids} -> {out}")
    return EXIT_OK


def _run_dump_registry(args) -> int:
    dump_default_registry(args.out)
    print(f"default section registry -> {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hcsum",
        description="Hospital-course summarization benchmark toolkit",
    )
    parser.add_argument("--version", action="version", version=f"hcsum {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", help="corpus -> dataset + build report")
    _add_common(p)
    p.add_argument(
        "--tokenizer", choices=["whitespace_approx", "subword_bpe"], default=None,
        help="override the configured tokenizer kind",
    )
    p.add_argument("--tokenizer-asset", default=None, help="vocab+merges asset directory")
    p.set_defaults(func=_run_build)

    p = sub.add_parser("generate", help="dataset test split -> model summaries")
    _add_common(p)
    p.add_argument("--dataset", default=None)
    p.add_argument("--model", action="append", default=[], help="repeatable model name")
    p.set_defaults(func=_run_generate)

    p = sub.add_parser("eval", help="generations -> metric rows + aggregate report")
    _add_common(p)
    p.add_argument("--dataset", default=None)
    p.add_argument("generations", nargs="+", help="generations JSONL file(s)")
    p.set_defaults(func=_run_eval)

    chocosa = sub.add_parser("chocosa", help="reader study workflow")
    chocosa_sub = chocosa.add_subparsers(dest="chocosa_command", required=True)

    p = chocosa_sub.add_parser("sample", help="sample a blinded session")
    _add_common(p)
    p.add_argument("--dataset", default=None)
    p.add_argument("--generations", nargs="+", required=True)
    p.add_argument("--n", type=int, default=30)
    p.add_argument("--reader", action="append", default=[], help="repeatable reader id")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_run_chocosa_sample)

    p = chocosa_sub.add_parser("serve", help="serve the reader study API (and UI)")
    _add_common(p)
    p.add_argument("--session", required=True)
    p.add_argument("--scores", default=None, help="score log path")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8770)
    p.add_argument("--ui", default=None, help="static UI directory to mount")
    p.set_defaults(func=_run_chocosa_serve)

    p = chocosa_sub.add_parser("export", help="unblinded aggregate export")
    _add_common(p)
    p.add_argument("--session", required=True)
    p.add_argument("--scores", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_run_chocosa_export)

    p = sub.add_parser("emit-finetune-config", help="write the training recipe file")
    _add_common(p)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_run_emit_finetune_config)

    p = sub.add_parser("make-demo-corpus", help="write a synthetic corpus CSV")
    _add_common(p)
    p.add_argument("--out", required=True)
    p.add_argument("--admissions", type=int, default=4)
    p.add_argument("--long", type=int, default=1, help="admissions exceeding 2048 tokens")
    p.set_defaults(func=_run_demo_corpus)

    p = sub.add_parser("dump-registry", help="write the default section registry YAML")
    _add_common(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_run_dump_registry)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, RegistryError, TokenizerConfigError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SchemaError, FileNotFoundError, SessionError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except EvalAlignmentError as exc:
        print(f"evaluation error: {exc}", file=sys.stderr)
        return EXIT_EVAL


if __name__ == "__main__":
    raise SystemExit(main())
