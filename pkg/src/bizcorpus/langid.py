"""Two-stage language identification cascade.

Stage one is a pluggable classifier backend (any model or tool exposing
``classify(text) -> (lang, confidence)``). When the primary verdict is
uncertain — confidence below ``uncertainty_threshold`` — a built-in script
characteristics heuristic decides instead: text whose Hiragana/Katakana
character ratio reaches ``jp_script_ratio_threshold`` is Japanese, otherwise
the most frequent script determines the guess. The heuristic keeps the
cascade self-contained; no external detector is required.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Protocol

from .core import Corpus, Document, PipelineStats

JAPANESE = "ja"
UNDETERMINED = "und"


class VerdictStage(str, Enum):
    PRIMARY = "primary_classifier"
    FALLBACK = "characteristics_fallback"


@dataclass(frozen=True)
class LangVerdict:
    lang: str
    confidence: float
    stage: VerdictStage

    def __post_init__(self) -> None:
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence out of range: {self.confidence}")


class ClassifierBackend(Protocol):
    """Primary-stage plug point: ``classify(text) -> (language, confidence)``.

    ``shareable`` declares whether one instance may be called from several
    threads; the pipeline serializes calls to non-shareable backends.
    """

    shareable: bool

    def classify(self, text: str) -> tuple[str, float]: ...


@dataclass
class LangIdConfig:
    uncertainty_threshold: float = 0.9
    jp_script_ratio_threshold: float = 0.05
    classifier: ClassifierBackend | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        for name in ("uncertainty_threshold", "jp_script_ratio_threshold"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {value}")


class PrimaryClassifierUnavailable(RuntimeError):
    """Raised when the primary stage cannot produce a verdict; callers should
    run the cascade in fallback-only mode."""


# Hiragana + Katakana blocks; the signal for Japanese even in Kanji-heavy text.
_KANA_RANGES = ((0x3040, 0x309F), (0x30A0, 0x30FF))

# Script buckets for the most-frequent-script guess, checked per character.
_SCRIPT_RANGES: dict[str, tuple[tuple[int, int], ...]] = {
    "kana": _KANA_RANGES,
    "han": ((0x3400, 0x4DBF), (0x4E00, 0x9FFF), (0xF900, 0xFAFF)),
    "hangul": ((0x1100, 0x11FF), (0xAC00, 0xD7AF)),
    "latin": ((0x41, 0x5A), (0x61, 0x7A), (0xC0, 0x24F)),
    "cyrillic": ((0x400, 0x4FF),),
    "greek": ((0x370, 0x3FF),),
    "arabic": ((0x600, 0x6FF),),
    "hebrew": ((0x590, 0x5FF),),
    "devanagari": ((0x900, 0x97F),),
    "thai": ((0xE00, 0xE7F),),
}

_SCRIPT_LANG = {
    "kana": JAPANESE,
    "han": "zh",
    "hangul": "ko",
    "latin": "en",
    "cyrillic": "ru",
    "greek": "el",
    "arabic": "ar",
    "hebrew": "he",
    "devanagari": "hi",
    "thai": "th",
}


def jp_script_ratio(text: str) -> float:
    """Fraction of all characters that fall in the Hiragana/Katakana blocks."""
    if not text:
        return 0.0
    kana = sum(1 for ch in text if any(lo <= ord(ch) <= hi for lo, hi in _KANA_RANGES))
    return kana / len(text)


def _script_counts(text: str) -> dict[str, int]:
    counts = {name: 0 for name in _SCRIPT_RANGES}
    for ch in text:
        cp = ord(ch)
        for name, ranges in _SCRIPT_RANGES.items():
            if any(lo <= cp <= hi for lo, hi in ranges):
                counts[name] += 1
                break
    return counts


def classify_primary(config: LangIdConfig, text: str) -> LangVerdict:
    """Run the configured classifier backend. Any backend failure (missing
    backend, crash, timeout) surfaces as :class:`PrimaryClassifierUnavailable`
    so callers can drop to fallback-only mode."""
    if config.classifier is None:
        raise PrimaryClassifierUnavailable(
            "no primary classifier configured; run identify() in fallback-only mode"
        )
    try:
        lang, confidence = config.classifier.classify(text)
    except Exception as exc:
        raise PrimaryClassifierUnavailable(
            f"primary classifier failed ({exc}); run identify() in fallback-only mode"
        ) from exc
    clamped = min(1.0, max(0.0, float(confidence)))
    return LangVerdict(str(lang), clamped, VerdictStage.PRIMARY)


def classify_fallback(config: LangIdConfig, text: str) -> LangVerdict:
    """Script-characteristics heuristic.

    Japanese wins when the kana ratio reaches the configured threshold, with
    confidence ``min(1, ratio / threshold)``; otherwise the most frequent
    script decides, with that script's character fraction as confidence.
    Empty text yields ``und`` at confidence 0.
    """
    if not text:
        return LangVerdict(UNDETERMINED, 0.0, VerdictStage.FALLBACK)
    ratio = jp_script_ratio(text)
    threshold = config.jp_script_ratio_threshold
    if ratio >= threshold:
        confidence = 1.0 if threshold <= 0 else min(1.0, ratio / threshold)
        return LangVerdict(JAPANESE, confidence, VerdictStage.FALLBACK)
    counts = _script_counts(text)
    best = max(counts, key=lambda name: (counts[name], name))
    if counts[best] == 0:
        return LangVerdict(UNDETERMINED, 0.0, VerdictStage.FALLBACK)
    return LangVerdict(_SCRIPT_LANG[best], counts[best] / len(text), VerdictStage.FALLBACK)


def identify(config: LangIdConfig, text: str) -> LangVerdict:
    """Cascade: the primary verdict stands when its confidence reaches the
    uncertainty threshold; otherwise (or when the backend is unusable) the
    characteristics fallback decides."""
    if config.classifier is not None:
        try:
            primary = classify_primary(config, text)
        except PrimaryClassifierUnavailable:
            primary = None
        if primary is not None and primary.confidence >= config.uncertainty_threshold:
            return primary
    return classify_fallback(config, text)


def filter_non_japanese(
    config: LangIdConfig,
    corpus: Corpus,
    *,
    stats: PipelineStats | None = None,
    workers: int = 1,
) -> Corpus:
    """Keep exactly the documents identified as Japanese, setting ``lang`` on
    survivors. Removal counts are recorded per detected language."""
    backend = config.classifier
    if backend is not None and not getattr(backend, "shareable", False):
        workers = 1

    def _verdict(doc: Document) -> LangVerdict:
        return identify(config, doc.text)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            verdicts = list(pool.map(_verdict, corpus.documents))
    else:
        verdicts = [_verdict(doc) for doc in corpus.documents]

    kept: list[Document] = []
    removals: dict[str, int] = {}
    for doc, verdict in zip(corpus.documents, verdicts):
        if verdict.lang == JAPANESE:
            kept.append(doc.with_lang(JAPANESE))
        else:
            key = f"lang:{verdict.lang}"
            removals[key] = removals.get(key, 0) + 1
    out = Corpus(kept, provenance=corpus.provenance)
    if stats is not None:
        stats.record_stage("lang_id", corpus, out, doc_removals=removals)
    return out
