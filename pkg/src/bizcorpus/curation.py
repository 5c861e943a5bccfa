"""Rule-based selection of domain-relevant documents.

A rule set pairs URL match rules with a cue-word list; a document is kept
when either axis matches. URL rules are plain prefixes unless they contain
glob metacharacters (``* ? [``), in which case they match as globs. Matching
folds case so cased scripts (Latin, Cyrillic, ...) compare case-insensitively
while CJK text is unaffected; cue words match as plain substrings because
Japanese has no whitespace word boundaries.
"""

from __future__ import annotations

import fnmatch
from dataclasses import dataclass
from pathlib import Path

import yaml

from .core import Corpus, PipelineStats

_GLOB_CHARS = frozenset("*?[")


@dataclass(frozen=True)
class CurationRuleSet:
    url_patterns: tuple[str, ...] = ()
    cue_words: tuple[str, ...] = ()
    rule_set_version: str = "unversioned"

    def __post_init__(self) -> None:
        if not self.url_patterns and not self.cue_words:
            raise ValueError("rule set needs at least one URL pattern or cue word")
        if any(not w for w in self.cue_words):
            raise ValueError("cue_words must not contain empty strings")
        if any(not p for p in self.url_patterns):
            raise ValueError("url_patterns must not contain empty strings")


def load_rules(path: Path | str) -> CurationRuleSet:
    """Load a rule set from a YAML (or JSON) file with keys
    ``url_patterns``, ``cue_words`` and ``version``."""
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        raw = yaml.safe_load(fh) or {}
    if not isinstance(raw, dict):
        raise ValueError(f"{path}: rule file must contain a mapping")
    return CurationRuleSet(
        url_patterns=tuple(str(p) for p in raw.get("url_patterns") or ()),
        cue_words=tuple(str(w) for w in raw.get("cue_words") or ()),
        rule_set_version=str(raw.get("version", "unversioned")),
    )


def matches_url(rules: CurationRuleSet, url: str) -> bool:
    """True iff the URL satisfies any rule. An empty URL never matches."""
    if not url:
        return False
    folded = url.casefold()
    for pattern in rules.url_patterns:
        p = pattern.casefold()
        if _GLOB_CHARS.intersection(p):
            if fnmatch.fnmatchcase(folded, p):
                return True
        elif folded.startswith(p):
            return True
    return False


def contains_cue_word(rules: CurationRuleSet, text: str) -> bool:
    """True iff any cue word occurs as a substring of the text, folding case
    for cased scripts only (``str.casefold`` leaves CJK untouched)."""
    if not text:
        return False
    folded = text.casefold()
    return any(word.casefold() in folded for word in rules.cue_words)


def curate(
    rules: CurationRuleSet,
    corpus: Corpus,
    *,
    stats: PipelineStats | None = None,
) -> Corpus:
    """Keep exactly the documents matching the URL axis or the cue-word axis,
    preserving order. Per-criterion hit counts land in the stage detail."""
    kept = []
    url_hits = cue_hits = both = 0
    for doc in corpus:
        by_url = matches_url(rules, doc.url)
        by_cue = contains_cue_word(rules, doc.text)
        if by_url:
            url_hits += 1
        if by_cue:
            cue_hits += 1
        if by_url and by_cue:
            both += 1
        if by_url or by_cue:
            kept.append(doc)
    out = Corpus(kept, provenance=corpus.provenance)
    if stats is not None:
        stats.record_stage(
            "curate",
            corpus,
            out,
            doc_removals={"no_rule_match": len(corpus) - len(out)},
            detail={"url_hits": url_hits, "cue_hits": cue_hits, "both_hits": both},
        )
    return out
