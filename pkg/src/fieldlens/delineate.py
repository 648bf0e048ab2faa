"""Two-tiered venue delineation with audit sampling and keyword suggestion.

Tier 1 selects records citing a yardstick venue at least once. Tier 2 scans
the remaining records for specialty-specific title keywords or prefixes and
produces *candidates* that require a manual review verdict before they join
the specialty set. The comparison set is what remains of the venue.
"""
from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping, Optional, Sequence

from .corpus import BibRecord, Corpus, DocumentSet, normalize_venue
from .textstats import TextConfig, consolidate_variant, normalize_title

DEFAULT_KEYWORDS = frozenset(
    {"citation", "bibliometric", "scientometric", "indicator", "productivity", "mapping", "cite"}
)
DEFAULT_PREFIXES = ("co-", "h-")
DEFAULT_MIN_YEAR = 1982


class ReviewError(ValueError):
    """Raised when tier-2 candidates lack a review verdict."""

    def __init__(self, missing_ids: Sequence[str]):
        self.missing_ids = sorted(missing_ids)
        preview = ", ".join(self.missing_ids[:10])
        more = "" if len(self.missing_ids) <= 10 else f" (+{len(self.missing_ids) - 10} more)"
        super().__init__(f"candidates without review verdict: {preview}{more}")


@dataclass(frozen=True)
class DelineationConfig:
    yardstick_sources: frozenset[str]
    keywords: frozenset[str] = DEFAULT_KEYWORDS
    prefixes: tuple[str, ...] = DEFAULT_PREFIXES
    min_year: int = DEFAULT_MIN_YEAR
    audit_stride: int = 10
    venue_aliases: Optional[Mapping[str, str]] = None

    def __post_init__(self):
        if not self.yardstick_sources:
            raise ValueError("yardstick_sources must not be empty")
        for prefix in self.prefixes:
            if not prefix.endswith("-"):
                raise ValueError(f"prefix {prefix!r} must end with '-'")

    def normalized_yardsticks(self) -> frozenset[str]:
        return frozenset(normalize_venue(s, self.venue_aliases) for s in self.yardstick_sources)

    def consolidated_keywords(self) -> frozenset[str]:
        return frozenset(consolidate_variant(k.lower()) for k in self.keywords)

    @classmethod
    def from_dict(cls, data: Mapping, venue_aliases: Optional[Mapping[str, str]] = None):
        return cls(
            yardstick_sources=frozenset(data["yardstick_sources"]),
            keywords=frozenset(data.get("keywords", DEFAULT_KEYWORDS)),
            prefixes=tuple(data.get("prefixes", DEFAULT_PREFIXES)),
            min_year=int(data.get("min_year", DEFAULT_MIN_YEAR)),
            audit_stride=int(data.get("audit_stride", 10)),
            venue_aliases=venue_aliases,
        )


# ---------------------------------------------------------------------------
# Tier 1: citation of a yardstick venue

def yardstick_ref_count(record: BibRecord, config: DelineationConfig) -> int:
    yardsticks = config.normalized_yardsticks()
    return sum(
        1
        for ref in record.cited_refs
        if ref.source and normalize_venue(ref.source, config.venue_aliases) in yardsticks
    )


def classify_tier1(venue_records: Sequence[BibRecord], config: DelineationConfig) -> set[str]:
    """Ids of records with at least one cited reference to a yardstick source."""
    yardsticks = config.normalized_yardsticks()
    selected = set()
    for rec in venue_records:
        for ref in rec.cited_refs:
            if ref.source and normalize_venue(ref.source, config.venue_aliases) in yardsticks:
                selected.add(rec.id)
                break
    return selected


# ---------------------------------------------------------------------------
# Tier 2: title keywords and prefixes

def _token_matches(token: str, keywords: frozenset[str], prefixes: Sequence[str]) -> bool:
    if consolidate_variant(token) in keywords:
        return True
    for prefix in prefixes:
        if token.startswith(prefix) and len(token) > len(prefix):
            return True
        # Unhyphenated compounds count only when the remainder is a keyword
        # ("cocitation" matches via "co-" + "citation"; "coverage" does not).
        stem = prefix[:-1]
        if token.startswith(stem) and consolidate_variant(token[len(stem):]) in keywords:
            return True
    # Hyphenated compounds also expose their parts ("co-citation" -> "citation").
    if "-" in token:
        for part in token.split("-"):
            if part and consolidate_variant(part) in keywords:
                return True
    return False


def title_matches_keywords(title: str, config: DelineationConfig) -> bool:
    keywords = config.consolidated_keywords()
    return any(_token_matches(t, keywords, config.prefixes) for t in normalize_title(title))


def classify_tier2(remaining: Sequence[BibRecord], config: DelineationConfig) -> set[str]:
    """Candidate ids among records not captured by tier 1 (manual review pending)."""
    return {rec.id for rec in remaining if title_matches_keywords(rec.title, config)}


# ---------------------------------------------------------------------------
# Manual review

def read_review_file(path: str | Path) -> dict[str, str]:
    """Review CSV: columns id, verdict (accept|reject), optional note."""
    verdicts: dict[str, str] = {}
    with Path(path).open("r", encoding="utf-8", newline="") as fh:
        for row in csv.reader(fh):
            if not row or not row[0].strip():
                continue
            rid = row[0].strip()
            verdict = row[1].strip().lower() if len(row) > 1 else ""
            if rid.lower() == "id" and verdict == "verdict":
                continue  # header row
            if verdict not in ("accept", "reject"):
                raise ValueError(f"invalid verdict {verdict!r} for id {rid!r} (use accept/reject)")
            verdicts[rid] = verdict
    return verdicts


def apply_review(
    candidates: set[str], review_file: str | Path
) -> tuple[set[str], list[str]]:
    """Accepted subset of the candidates, plus warnings for unknown ids.

    Every candidate must carry a verdict; otherwise ReviewError lists the
    uncovered ids.
    """
    verdicts = read_review_file(review_file)
    warnings = [
        f"review verdict for unknown id {rid!r} ignored"
        for rid in sorted(set(verdicts) - candidates)
    ]
    missing = candidates - set(verdicts)
    if missing:
        raise ReviewError(sorted(missing))
    accepted = {rid for rid in candidates if verdicts[rid] == "accept"}
    return accepted, warnings


# ---------------------------------------------------------------------------
# Audit sampling and keyword suggestion

def audit_sample(
    records: Sequence[BibRecord], predicate: Callable[[BibRecord], bool], stride: int
) -> list[str]:
    """Every stride-th matching record id (sorted by id, starting at index 0)."""
    if stride < 1:
        raise ValueError("stride must be >= 1")
    matching = sorted(rec.id for rec in records if predicate(rec))
    return matching[::stride]


def cites_yardstick_exactly_once(config: DelineationConfig) -> Callable[[BibRecord], bool]:
    """Predicate selecting the weakest tier-1 members: a single yardstick reference.

    These are the records worth spot-checking by hand, since one citation is
    the thinnest possible evidence of specialty membership.
    """
    return lambda rec: yardstick_ref_count(rec, config) == 1


def suggest_keywords(
    specialty_sets: Sequence[DocumentSet],
    corpus: Corpus,
    top_n: int,
    text_config: Optional[TextConfig] = None,
) -> list[tuple[str, int]]:
    """Most frequent title words across the specialty sets, stop and general
    words removed, ranked by frequency then lexicographically."""
    if not specialty_sets:
        raise ValueError("at least one specialty set is required")
    cfg = text_config or TextConfig.default()
    counts: Counter[str] = Counter()
    for docset in specialty_sets:
        for rec in corpus.iter_set(docset):
            for token in normalize_title(rec.title, cfg.keep_hyphens):
                if token in cfg.stopwords:
                    continue
                term = consolidate_variant(token, cfg.variant_table)
                if term in cfg.stopwords or term in cfg.general_words:
                    continue
                counts[term] += 1
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return ranked[: max(top_n, 0)]


# ---------------------------------------------------------------------------
# Orchestration

@dataclass(frozen=True)
class DelineationResult:
    venue_label: str
    min_year: int
    tier1_ids: frozenset[str]
    tier2_candidate_ids: frozenset[str]
    tier2_accepted_ids: frozenset[str]
    comparison_ids: frozenset[str]
    audit_sample: tuple[str, ...]
    review_applied: bool

    def specialty_ids(self) -> frozenset[str]:
        return self.tier1_ids | self.tier2_accepted_ids

    def specialty_set(self, label: Optional[str] = None) -> DocumentSet:
        return DocumentSet(label or f"{self.venue_label}-IN", self.specialty_ids())

    def comparison_set(self, label: Optional[str] = None) -> DocumentSet:
        return DocumentSet(label or f"{self.venue_label}-OUT", self.comparison_ids)

    def to_dict(self) -> dict:
        return {
            "venue_label": self.venue_label,
            "min_year": self.min_year,
            "review_applied": self.review_applied,
            "tier1_ids": sorted(self.tier1_ids),
            "tier2_candidate_ids": sorted(self.tier2_candidate_ids),
            "tier2_accepted_ids": sorted(self.tier2_accepted_ids),
            "comparison_ids": sorted(self.comparison_ids),
            "audit_sample": list(self.audit_sample),
        }


def delineate(
    venue_records: Sequence[BibRecord],
    config: DelineationConfig,
    review_file: Optional[str | Path] = None,
    venue_label: str = "VENUE",
) -> tuple[DelineationResult, list[str]]:
    """Run the full two-tiered procedure over one venue's records.

    Records older than config.min_year (or with unknown year) are left out of
    every set. Without a review file the result is provisional: candidates
    are excluded from the comparison set until verdicts arrive.
    """
    eligible = [r for r in venue_records if r.year is not None and r.year >= config.min_year]
    tier1 = classify_tier1(eligible, config)
    remaining = [r for r in eligible if r.id not in tier1]
    candidates = classify_tier2(remaining, config)

    warnings: list[str] = []
    if review_file is not None:
        accepted, warnings = apply_review(candidates, review_file)
        review_applied = True
    else:
        accepted = set()
        review_applied = False

    eligible_ids = {r.id for r in eligible}
    excluded = tier1 | accepted if review_applied else tier1 | candidates
    comparison = eligible_ids - excluded

    sample = audit_sample(eligible, cites_yardstick_exactly_once(config), config.audit_stride)

    result = DelineationResult(
        venue_label=venue_label,
        min_year=config.min_year,
        tier1_ids=frozenset(tier1),
        tier2_candidate_ids=frozenset(candidates),
        tier2_accepted_ids=frozenset(accepted),
        comparison_ids=frozenset(comparison),
        audit_sample=tuple(sample),
        review_applied=review_applied,
    )
    return result, warnings
