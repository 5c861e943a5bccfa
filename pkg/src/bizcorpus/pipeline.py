"""End-to-end pipeline driver.

Loads a single declarative config, validates it up front, then runs the
fixed stage order — curation, language filtering, noise removal, document
dedup, sentence dedup, token counting — and writes the cleaned corpus plus
a manifest mirroring the per-source token table. Every stage can also run
standalone through the CLI subcommands.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import yaml

from . import dedup as dedup_mod
from .core import (
    Corpus,
    PipelineStats,
    SourceTag,
    count_tokens,
    derive_seed,
    ingest_jsonl,
    write_corpus_jsonl,
)
from .curation import CurationRuleSet, curate, load_rules
from .langid import LangIdConfig, filter_non_japanese
from .mixture import MixtureSpec, UpdateMixSpec
from .noise import (
    DEFAULT_JP_TERMINATORS,
    DEFAULT_LATIN_TERMINATORS,
    NoiseConfig,
    denoise_corpus,
)

log = logging.getLogger(__name__)

MANIFEST_SCHEMA = "bizcorpus-manifest/1"

ENV_OUTPUT_DIR = "BIZCORPUS_OUTPUT_DIR"
ENV_WORKERS = "BIZCORPUS_WORKERS"


class ConfigError(ValueError):
    """Configuration problem detected before any work starts (exit code 1)."""


class StageFailure(RuntimeError):
    """A pipeline stage failed mid-run (exit code 2)."""

    def __init__(self, stage: str, message: str, doc_id: str | None = None):
        detail = f" (document {doc_id!r})" if doc_id else ""
        super().__init__(f"stage {stage!r} failed{detail}: {message}")
        self.stage = stage
        self.doc_id = doc_id


@dataclass
class SourceSpec:
    path: Path
    source: SourceTag


@dataclass
class PipelineConfig:
    sources: list[SourceSpec]
    output_dir: Path
    seed: int = 0
    rules: CurationRuleSet | None = None
    lang_id: LangIdConfig = field(default_factory=LangIdConfig)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    dedup: dedup_mod.DedupConfig = field(default_factory=dedup_mod.DedupConfig)
    mixture: MixtureSpec | None = None
    update_mix: UpdateMixSpec | None = None
    workers: int = 1
    dump_sentence_freq: bool = False
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def digest(self) -> str:
        # identifies the data-defining configuration; where outputs land and
        # how many workers run does not change what gets produced
        significant = {k: v for k, v in self.raw.items() if k not in ("output_dir", "workers")}
        canonical = json.dumps(significant, sort_keys=True, ensure_ascii=False)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def _parse_noise(raw: dict) -> NoiseConfig:
    return NoiseConfig(
        jp_terminators=frozenset(raw["jp_terminators"])
        if raw.get("jp_terminators")
        else DEFAULT_JP_TERMINATORS,
        latin_terminators=frozenset(raw["latin_terminators"])
        if raw.get("latin_terminators")
        else DEFAULT_LATIN_TERMINATORS,
        min_sentential_ratio=float(raw.get("min_sentential_ratio", 0.5)),
        punctuationless_languages=frozenset(raw.get("punctuationless_languages", ["th"])),
    )


def load_config(path: Path | str) -> PipelineConfig:
    """Load and validate the pipeline config. Referenced files must exist;
    any problem raises :class:`ConfigError` before work starts.

    ``BIZCORPUS_OUTPUT_DIR`` and ``BIZCORPUS_WORKERS`` override the config.
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    with path.open("r", encoding="utf-8") as fh:
        raw = yaml.safe_load(fh) or {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: config must be a mapping")
    base = path.parent

    def _resolve(p: str) -> Path:
        candidate = Path(p)
        return candidate if candidate.is_absolute() else base / candidate

    sources: list[SourceSpec] = []
    for i, entry in enumerate(raw.get("sources") or []):
        if not isinstance(entry, dict) or "path" not in entry:
            raise ConfigError(f"sources[{i}]: each source needs a path")
        src_path = _resolve(str(entry["path"]))
        if not src_path.exists():
            raise ConfigError(f"sources[{i}]: file not found: {src_path}")
        try:
            tag = SourceTag(entry.get("source", "other"))
        except ValueError as exc:
            raise ConfigError(f"sources[{i}]: {exc}") from exc
        sources.append(SourceSpec(src_path, tag))
    if not sources:
        raise ConfigError("config lists no ingestion sources")

    rules = None
    curation_raw = raw.get("curation") or {}
    if curation_raw.get("rules_file"):
        rules_path = _resolve(str(curation_raw["rules_file"]))
        if not rules_path.exists():
            raise ConfigError(f"curation rules file not found: {rules_path}")
        try:
            rules = load_rules(rules_path)
        except ValueError as exc:
            raise ConfigError(f"bad rules file {rules_path}: {exc}") from exc

    try:
        lang_raw = raw.get("lang_id") or {}
        classifier = None
        if lang_raw.get("classifier_cmd"):
            from .backends import SubprocessClassifier

            classifier = SubprocessClassifier(lang_raw["classifier_cmd"])
        lang_id = LangIdConfig(
            uncertainty_threshold=float(lang_raw.get("uncertainty_threshold", 0.9)),
            jp_script_ratio_threshold=float(lang_raw.get("jp_script_ratio_threshold", 0.05)),
            classifier=classifier,
        )
        noise = _parse_noise(raw.get("noise") or {})
        dedup_raw = raw.get("dedup") or {}
        dedup_cfg = dedup_mod.DedupConfig(
            sentence_frequency_threshold=int(
                dedup_raw.get("sentence_frequency_threshold", 15)
            ),
            terminators=noise.terminators,
        )
        seed = int(raw.get("seed", 0))
        mixture = None
        if raw.get("mixture") is not None:
            weights = {
                SourceTag(k): float(v)
                for k, v in (raw["mixture"].get("weights") or {}).items()
            }
            mixture = MixtureSpec(
                weights=weights, seed=derive_seed(seed, "mixture")
            )
        update_mix = None
        if raw.get("update_mix") is not None:
            update_mix = UpdateMixSpec(
                r=float(raw["update_mix"]["r"]),
                total=int(raw["update_mix"]["total"]),
                seed=derive_seed(seed, "update_mix"),
            )
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc

    output_dir = Path(os.environ.get(ENV_OUTPUT_DIR) or _resolve(str(raw.get("output_dir", "out"))))
    workers = int(os.environ.get(ENV_WORKERS) or raw.get("workers", 1))
    if workers < 1:
        raise ConfigError("workers must be >= 1")

    return PipelineConfig(
        sources=sources,
        output_dir=output_dir,
        seed=seed,
        rules=rules,
        lang_id=lang_id,
        noise=noise,
        dedup=dedup_cfg,
        mixture=mixture,
        update_mix=update_mix,
        workers=workers,
        dump_sentence_freq=bool(raw.get("dump_sentence_freq", False)),
        raw=raw,
    )


def _merge(corpora: list[Corpus]) -> Corpus:
    docs = [doc for corpus in corpora for doc in corpus]
    provenance = "; ".join(c.provenance for c in corpora if c.provenance)
    return Corpus(docs, provenance=provenance)


def run_pipeline(config: PipelineConfig) -> PipelineStats:
    """Execute the full pipeline and write ``cleaned.jsonl`` and
    ``manifest.json`` into the output directory.

    On a stage failure the manifest is still written, marked incomplete, and
    :class:`StageFailure` propagates with the stage name.
    """
    stats = PipelineStats(seed=config.seed, config_digest=config.digest)
    config.output_dir.mkdir(parents=True, exist_ok=True)
    stage = "ingest"
    try:
        corpora = [
            ingest_jsonl(spec.path, spec.source, stats=stats) for spec in config.sources
        ]
        corpus = _merge(corpora)
        log.info("ingested %d documents from %d source file(s)", len(corpus), len(corpora))

        if config.rules is not None:
            stage = "curate"
            corpus = curate(config.rules, corpus, stats=stats)

        stage = "lang_id"
        corpus = filter_non_japanese(
            config.lang_id, corpus, stats=stats, workers=config.workers
        )

        stage = "noise_filter"
        corpus = denoise_corpus(config.noise, corpus, stats=stats, workers=config.workers)

        stage = "dedup_documents"
        corpus = dedup_mod.dedup_documents(config.dedup, corpus, stats=stats)

        stage = "dedup_sentences"
        table = dedup_mod.count_sentences(config.dedup, corpus, workers=config.workers)
        corpus = dedup_mod.dedup_sentences(config.dedup, corpus, table, stats=stats)
        if config.dump_sentence_freq:
            table.dump_jsonl(config.output_dir / "sentence_freq.jsonl")

        stage = "count_tokens"
        count_tokens(corpus, stats=stats)

        stage = "write_output"
        write_corpus_jsonl(corpus, config.output_dir / "cleaned.jsonl")
    except Exception as exc:
        emit_manifest(stats, config.output_dir / "manifest.json", status="incomplete")
        doc_id = getattr(exc, "doc_id", None)
        raise StageFailure(stage, str(exc), doc_id) from exc

    emit_manifest(stats, config.output_dir / "manifest.json")
    return stats


def emit_manifest(
    stats: PipelineStats, path: Path | str, *, status: str = "complete"
) -> Path:
    """Write the structured run report: one row per source label (zero-count
    rows included) with document and token counts, the per-stage removal
    accounting, the config digest and the seed."""
    final_docs: dict[str, int] = stats.stages[-1].docs_out if stats.stages else {}
    sources = {
        tag.value: {
            "documents": final_docs.get(tag.value, 0),
            "tokens": stats.tokens_by_source.get(tag.value, 0),
        }
        for tag in SourceTag
    }
    manifest = {
        "schema": MANIFEST_SCHEMA,
        "created_at": datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ"),
        "status": status,
        "seed": stats.seed,
        "config_digest": stats.config_digest,
        "sources": sources,
        "total_tokens": stats.total_tokens,
        "stages": [s.to_dict() for s in stats.stages],
    }
    path = Path(path)
    path.write_text(
        json.dumps(manifest, ensure_ascii=False, sort_keys=True, indent=2) + "\n",
        encoding="utf-8",
    )
    return path
