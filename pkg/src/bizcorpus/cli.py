"""Command-line interface.

``bizcorpus run`` drives the whole pipeline from one config file; the other
subcommands run individual stages, plan mixtures, and operate the benchmark
(run / judge / score). Exit codes: 0 success, 1 validation error, 2 stage
failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .backends import CommandModel, CommandSearch, EchoModel, SubprocessClassifier
from .bench import (
    SettingKind,
    TaskSetting,
    compute_accuracy,
    load_judgments,
    load_questions,
    record_judgments,
    run_benchmark,
)
from .core import (
    PipelineStats,
    SourceTag,
    count_tokens,
    read_corpus_jsonl,
    write_corpus_jsonl,
)
from .curation import curate, load_rules
from .dedup import DedupConfig, count_sentences, dedup_documents, dedup_sentences
from .langid import LangIdConfig, filter_non_japanese
from .mixture import (
    MixtureConfigError,
    MixtureSpec,
    UpdateMixSpec,
    plan_epoch,
    sample_update_mix,
    verify_plan,
)
from .noise import NoiseConfig, denoise_corpus
from .pipeline import ConfigError, StageFailure, emit_manifest, load_config, run_pipeline

log = logging.getLogger("bizcorpus")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_STAGE = 2


def _print_stage_summary(stats: PipelineStats) -> None:
    for stage in stats.stages:
        print(f"{stage.stage}: {stage.total_in} -> {stage.total_out} docs", end="")
        if stage.doc_removals:
            reasons = ", ".join(f"{k}={v}" for k, v in sorted(stage.doc_removals.items()))
            print(f" (removed: {reasons})", end="")
        print()


def cmd_run(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    stats = run_pipeline(config)
    _print_stage_summary(stats)
    print(f"total tokens: {stats.total_tokens}")
    print(f"wrote {config.output_dir / 'cleaned.jsonl'} and {config.output_dir / 'manifest.json'}")
    return EXIT_OK


def cmd_curate(args: argparse.Namespace) -> int:
    rules = load_rules(args.rules)
    corpus = read_corpus_jsonl(args.input)
    stats = PipelineStats()
    out = curate(rules, corpus, stats=stats)
    write_corpus_jsonl(out, args.output)
    _print_stage_summary(stats)
    return EXIT_OK


def cmd_langid(args: argparse.Namespace) -> int:
    classifier = SubprocessClassifier(args.classifier_cmd) if args.classifier_cmd else None
    config = LangIdConfig(
        uncertainty_threshold=args.threshold,
        jp_script_ratio_threshold=args.jp_ratio,
        classifier=classifier,
    )
    corpus = read_corpus_jsonl(args.input)
    stats = PipelineStats()
    out = filter_non_japanese(config, corpus, stats=stats, workers=args.workers)
    write_corpus_jsonl(out, args.output)
    _print_stage_summary(stats)
    return EXIT_OK


def cmd_denoise(args: argparse.Namespace) -> int:
    config = NoiseConfig(min_sentential_ratio=args.ratio)
    corpus = read_corpus_jsonl(args.input)
    stats = PipelineStats()
    out = denoise_corpus(config, corpus, stats=stats, workers=args.workers)
    write_corpus_jsonl(out, args.output)
    _print_stage_summary(stats)
    return EXIT_OK


def cmd_dedup(args: argparse.Namespace) -> int:
    config = DedupConfig(sentence_frequency_threshold=args.threshold)
    corpus = read_corpus_jsonl(args.input)
    stats = PipelineStats()
    corpus = dedup_documents(config, corpus, stats=stats)
    table = count_sentences(config, corpus, workers=args.workers)
    if args.dump_freq:
        table.dump_jsonl(args.dump_freq)
    out = dedup_sentences(config, corpus, table, stats=stats)
    write_corpus_jsonl(out, args.output)
    _print_stage_summary(stats)
    return EXIT_OK


def cmd_mix(args: argparse.Namespace) -> int:
    if args.kind == "epoch":
        if not args.input:
            raise ConfigError("mix epoch requires --in")
        weights = {}
        for item in args.weight or []:
            tag, _, value = item.partition("=")
            weights[SourceTag(tag)] = float(value)
        spec = MixtureSpec(weights=weights, seed=args.seed) if weights else MixtureSpec(seed=args.seed)
        corpus = read_corpus_jsonl(args.input)
        plan = plan_epoch(spec, corpus)
    else:
        if not (args.latest and args.non_latest):
            raise ConfigError("mix update requires --latest and --non-latest")
        if args.r is None or args.total is None:
            raise ConfigError("mix update requires --r and --total")
        spec = UpdateMixSpec(r=args.r, total=args.total, seed=args.seed)
        latest = read_corpus_jsonl(args.latest)
        non_latest = read_corpus_jsonl(args.non_latest)
        plan = sample_update_mix(spec, latest, non_latest)
        report = verify_plan(plan, spec)
        print(json.dumps(report.to_dict(), ensure_ascii=False))
        if not report.ok:
            return EXIT_STAGE
    plan.to_jsonl(args.output)
    counts = ", ".join(f"{k}={v}" for k, v in sorted(plan.source_counts.items()))
    print(f"plan: {len(plan)} entries ({counts}) -> {args.output}")
    return EXIT_OK


def cmd_stats(args: argparse.Namespace) -> int:
    corpus = read_corpus_jsonl(args.input)
    stats = count_tokens(corpus)
    stats.record_stage("stats", corpus, corpus)
    emit_manifest(stats, args.output)
    print(f"{len(corpus)} documents, {stats.total_tokens} tokens -> {args.output}")
    return EXIT_OK


def cmd_bench_run(args: argparse.Namespace) -> int:
    questions = load_questions(args.questions)
    setting = TaskSetting(SettingKind(args.setting), truncation_chars=args.truncation)
    if args.model_cmd:
        model = CommandModel(args.model_cmd, model_id=args.model_id)
    elif args.echo_model:
        model = EchoModel()
    else:
        raise ConfigError("bench-run needs --model-cmd or --echo-model")
    search = CommandSearch(args.search_cmd) if args.search_cmd else None
    responses = run_benchmark(
        setting,
        questions,
        model,
        search=search,
        out_dir=args.out,
        max_in_flight=args.max_in_flight,
    )
    print(f"{len(responses)}/{len(questions)} responses -> {args.out}")
    return EXIT_OK


def cmd_bench_judge(args: argparse.Namespace) -> int:
    judgments = record_judgments(args.run, args.verdicts, args.judge)
    print(f"recorded {len(judgments)} judgment(s) -> {Path(args.run) / 'judgments.jsonl'}")
    return EXIT_OK


def cmd_bench_score(args: argparse.Namespace) -> int:
    judgments = []
    for path in args.judgments:
        judgments.extend(load_judgments(path))
    if not judgments:
        print("no judgments found")
        return EXIT_OK
    for (model_id, setting), accuracy in sorted(compute_accuracy(judgments).items()):
        n = sum(1 for j in judgments if (j.model_id, j.setting.value) == (model_id, setting))
        print(f"model={model_id} setting={setting} n={n} accuracy={accuracy:.4f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bizcorpus", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run the full pipeline from a config file")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("curate", help="rule-based curation of a corpus file")
    p.add_argument("--rules", required=True)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", dest="output", required=True)
    p.set_defaults(func=cmd_curate)

    p = sub.add_parser("langid", help="drop non-Japanese documents")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", dest="output", required=True)
    p.add_argument("--threshold", type=float, default=0.9)
    p.add_argument("--jp-ratio", type=float, default=0.05)
    p.add_argument("--classifier-cmd", default=None)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_langid)

    p = sub.add_parser("denoise", help="strip noise lines / drop non-sentential docs")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", dest="output", required=True)
    p.add_argument("--ratio", type=float, default=0.5)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_denoise)

    p = sub.add_parser("dedup", help="document- and sentence-level dedup")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", dest="output", required=True)
    p.add_argument("--threshold", type=int, default=15)
    p.add_argument("--dump-freq", default=None, help="dump sentence frequency table here")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_dedup)

    p = sub.add_parser("mix", help="plan an epoch or an update mix")
    p.add_argument("kind", choices=["epoch", "update"])
    p.add_argument("--in", dest="input", default=None, help="corpus for epoch plans")
    p.add_argument("--latest", default=None)
    p.add_argument("--non-latest", dest="non_latest", default=None)
    p.add_argument("--out", dest="output", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--weight", action="append", help="epoch weight as TAG=W, repeatable")
    p.add_argument("--r", type=float, default=None, help="non-latest proportion")
    p.add_argument("--total", type=int, default=None)
    p.set_defaults(func=cmd_mix)

    p = sub.add_parser("stats", help="token counts and manifest for a corpus file")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", dest="output", required=True)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("bench-run", help="run one benchmark setting")
    p.add_argument("--questions", required=True)
    p.add_argument("--setting", required=True, choices=[k.value for k in SettingKind])
    p.add_argument("--out", required=True)
    p.add_argument("--model-cmd", default=None)
    p.add_argument("--model-id", default=None)
    p.add_argument("--echo-model", action="store_true")
    p.add_argument("--search-cmd", default=None)
    p.add_argument("--truncation", type=int, default=1000)
    p.add_argument("--max-in-flight", type=int, default=1)
    p.set_defaults(func=cmd_bench_run)

    p = sub.add_parser("bench-judge", help="record a judge's verdict file")
    p.add_argument("--run", required=True)
    p.add_argument("--verdicts", required=True)
    p.add_argument("--judge", required=True)
    p.set_defaults(func=cmd_bench_judge)

    p = sub.add_parser("bench-score", help="accuracy per (model, setting)")
    p.add_argument("judgments", nargs="+")
    p.set_defaults(func=cmd_bench_score)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (ConfigError, MixtureConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StageFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STAGE
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STAGE


if __name__ == "__main__":
    sys.exit(main())
