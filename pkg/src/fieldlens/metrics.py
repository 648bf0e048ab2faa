"""Quantitative measures: cosine similarity with bootstrap errors, author
overlap and the coefficient of distinctness, reference ages and the recency
index, source shares, top cited first authors, and annual publication trends.

Fractions and ratios that feed threshold comparisons or report rendering are
kept as exact rationals until the moment of output; rendering rounds half
away from zero.
"""
from __future__ import annotations

import math
import statistics
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal, localcontext
from fractions import Fraction
from typing import Mapping, Optional, Sequence

import numpy as np
from scipy import sparse

from .corpus import Corpus, DocumentSet, normalize_venue
from .textstats import Phrase, TextConfig, corpus_title_tokens, mine_phrases, segment_many

UNKNOWN_SOURCE_LABEL = "(UNKNOWN)"

#: Pooled bucket key for negative reference ages (cited year after citing year).
NEGATIVE_AGE_BUCKET = -1


# ---------------------------------------------------------------------------
# Cosine similarity

def cosine(u: Mapping[str, float], v: Mapping[str, float]) -> float:
    """Cosine of two sparse nonnegative count vectors, clamped to [0, 1]."""
    norm_u = math.sqrt(sum(x * x for x in u.values()))
    norm_v = math.sqrt(sum(x * x for x in v.values()))
    if norm_u == 0.0 or norm_v == 0.0:
        raise ValueError("undefined cosine for zero vector")
    smaller, larger = (u, v) if len(u) <= len(v) else (v, u)
    dot = sum(value * larger.get(term, 0) for term, value in smaller.items())
    return max(0.0, min(1.0, dot / (norm_u * norm_v)))


@dataclass(frozen=True)
class CosineResult:
    pair: tuple[str, str]
    value: float
    bootstrap_std: Optional[float]
    replicates: int


_SEED_MASK = (1 << 64) - 1


def bootstrap_cosine(
    set_a: DocumentSet,
    set_b: DocumentSet,
    corpus: Corpus,
    text_config: TextConfig,
    replicates: int,
    seed: int,
    phrases: Optional[set[Phrase]] = None,
    threads: int = 1,
) -> CosineResult:
    """Title-term cosine with a bootstrap standard deviation.

    Documents are resampled with replacement independently within each set
    (same cardinality); term vectors are rebuilt against the fixed original
    phrase inventory (mined over the union of the two sets when not given).
    Replicate i draws from its own stream seeded seed XOR i, so serial and
    threaded runs agree bit for bit.
    """
    if not set_a.member_ids or not set_b.member_ids:
        raise ValueError("cannot bootstrap an empty document set")

    tokens_a = corpus_title_tokens(corpus, set_a, text_config)
    tokens_b = corpus_title_tokens(corpus, set_b, text_config)
    if phrases is None:
        phrases = mine_phrases(
            tokens_a + tokens_b,
            text_config.phrase_max_len,
            text_config.phrase_min_count,
            text_config.stopwords,
        )
    rows_a = segment_many(tokens_a, phrases, text_config)
    rows_b = segment_many(tokens_b, phrases, text_config)
    return bootstrap_cosine_rows(
        set_a.label, rows_a, set_b.label, rows_b, replicates, seed, threads
    )


def bootstrap_cosine_rows(
    label_a: str,
    rows_a: Sequence[Counter],
    label_b: str,
    rows_b: Sequence[Counter],
    replicates: int,
    seed: int,
    threads: int = 1,
) -> CosineResult:
    """Bootstrap over precomputed per-document term counts (one Counter per doc)."""
    if replicates < 1:
        raise ValueError("replicates must be >= 1")
    if not rows_a or not rows_b:
        raise ValueError("cannot bootstrap an empty document set")

    terms = sorted(set().union(*rows_a, *rows_b))
    index = {term: i for i, term in enumerate(terms)}

    def matrix(rows: Sequence[Counter]) -> sparse.csr_array:
        data, indices, indptr = [], [], [0]
        for counts in rows:
            for term, c in counts.items():
                indices.append(index[term])
                data.append(c)
            indptr.append(len(indices))
        return sparse.csr_array(
            (np.asarray(data, dtype=np.int64), indices, indptr),
            shape=(len(rows), len(terms)),
        )

    mat_a, mat_b = matrix(rows_a), matrix(rows_b)
    point = _cosine_arrays(
        np.asarray(mat_a.sum(axis=0)).ravel(), np.asarray(mat_b.sum(axis=0)).ravel()
    )

    n_a, n_b = len(rows_a), len(rows_b)

    def one_replicate(i: int) -> float:
        rng = np.random.default_rng((seed ^ i) & _SEED_MASK)
        weights_a = np.bincount(rng.integers(0, n_a, n_a), minlength=n_a)
        weights_b = np.bincount(rng.integers(0, n_b, n_b), minlength=n_b)
        return _cosine_arrays(weights_a @ mat_a, weights_b @ mat_b)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            values = list(pool.map(one_replicate, range(replicates)))
    else:
        values = [one_replicate(i) for i in range(replicates)]

    std = statistics.stdev(values) if len(values) > 1 else 0.0
    return CosineResult(
        pair=(label_a, label_b), value=point, bootstrap_std=std, replicates=replicates
    )


def _cosine_arrays(u: np.ndarray, v: np.ndarray) -> float:
    dot = float(np.dot(u, v))
    norm = math.sqrt(float(np.dot(u, u))) * math.sqrt(float(np.dot(v, v)))
    if norm == 0.0:
        raise ValueError("undefined cosine for zero vector")
    return max(0.0, min(1.0, dot / norm))


# ---------------------------------------------------------------------------
# Author overlap and the coefficient of distinctness

@dataclass(frozen=True)
class OverlapRow:
    set_label: str
    n_first_authors: int
    frac_other_specialty: Fraction
    frac_comparison: Fraction
    coefficient: Optional[Fraction]  # None when the comparison fraction is zero


def render_ratio(value: Optional[Fraction], places: int = 1) -> str:
    """Fixed-point rendering, ties rounded away from zero (0.43/0.14 -> "3.1")."""
    if value is None:
        return "undefined"
    with localcontext() as ctx:
        ctx.prec = 50
        dec = Decimal(value.numerator) / Decimal(value.denominator)
        return str(dec.quantize(Decimal(1).scaleb(-places), rounding=ROUND_HALF_UP))


def _set_authors(docset: DocumentSet, corpus: Corpus, first_only: bool) -> frozenset[str]:
    authors: set[str] = set()
    for rec in corpus.iter_set(docset):
        if first_only:
            if rec.first_author:
                authors.add(rec.first_author)
        else:
            authors.update(rec.authors)
    return frozenset(authors)


def author_overlap(
    specialty_sets: Sequence[DocumentSet],
    comparison: DocumentSet,
    corpus: Corpus,
    first_author_only: bool = True,
) -> list[OverlapRow]:
    """Per specialty set: fraction of its (first) authors who also appear in
    the other specialty sets, fraction appearing in the comparison set, and
    the ratio of the two."""
    author_sets = {s.label: _set_authors(s, corpus, first_author_only) for s in specialty_sets}
    comparison_authors = _set_authors(comparison, corpus, first_author_only)

    rows = []
    for docset in specialty_sets:
        own = author_sets[docset.label]
        others: frozenset[str] = frozenset().union(
            *(author_sets[s.label] for s in specialty_sets if s.label != docset.label)
        ) if len(specialty_sets) > 1 else frozenset()
        n = len(own)
        frac_other = Fraction(len(own & others), n) if n else Fraction(0)
        frac_comp = Fraction(len(own & comparison_authors), n) if n else Fraction(0)
        coefficient = frac_other / frac_comp if frac_comp > 0 else None
        rows.append(OverlapRow(docset.label, n, frac_other, frac_comp, coefficient))
    return rows


# ---------------------------------------------------------------------------
# Reference ages and the recency (Price-style) index

@dataclass(frozen=True)
class AgeHistogram:
    """Distribution of reference ages for one document set.

    ``bins`` maps age in years to the fraction of known-age references;
    all negative ages are pooled under NEGATIVE_AGE_BUCKET. ``price_index``
    is the percentage of nonnegative-age references no older than the
    configured window (inclusive); None when no reference qualifies.
    """

    set_label: str
    bins: Mapping[int, float]
    n_refs: int
    n_unknown: int
    price_index: Optional[float]


def reference_age_histogram(
    docset: DocumentSet, corpus: Corpus, price_max_age: int = 5
) -> AgeHistogram:
    age_counts: Counter[int] = Counter()
    negative = 0
    unknown = 0
    for rec in corpus.iter_set(docset):
        for ref in rec.cited_refs:
            if rec.year is None or ref.year is None:
                unknown += 1
            else:
                age = rec.year - ref.year
                if age < 0:
                    negative += 1
                else:
                    age_counts[age] += 1

    n_known = sum(age_counts.values()) + negative
    bins: dict[int, float] = {}
    if n_known:
        for age in sorted(age_counts):
            bins[age] = age_counts[age] / n_known
        if negative:
            bins[NEGATIVE_AGE_BUCKET] = negative / n_known

    n_nonneg = sum(age_counts.values())
    if n_nonneg:
        n_recent = sum(c for age, c in age_counts.items() if age <= price_max_age)
        price = (100.0 * n_recent) / n_nonneg
    else:
        price = None
    return AgeHistogram(docset.label, bins, n_known, unknown, price)


def mean_refs_per_article(docset: DocumentSet, corpus: Corpus) -> float:
    records = list(corpus.iter_set(docset))
    if not records:
        raise ValueError(f"document set {docset.label!r} is empty")
    return sum(len(r.cited_refs) for r in records) / len(records)


# ---------------------------------------------------------------------------
# Cited sources

def _source_counts(
    docset: DocumentSet, corpus: Corpus, aliases: Optional[Mapping[str, str]]
) -> Counter:
    counts: Counter[str] = Counter()
    for rec in corpus.iter_set(docset):
        for ref in rec.cited_refs:
            if ref.source:
                counts[normalize_venue(ref.source, aliases)] += 1
            else:
                counts[UNKNOWN_SOURCE_LABEL] += 1
    return counts


def source_shares(
    docset: DocumentSet,
    corpus: Corpus,
    min_share: float = 0.01,
    aliases: Optional[Mapping[str, str]] = None,
) -> list[tuple[str, float]]:
    """Per-source fraction of the set's references, above the share floor.

    References with no parseable source are pooled under UNKNOWN_SOURCE_LABEL.
    Sorted by reference count descending, then source name.
    """
    counts = _source_counts(docset, corpus, aliases)
    total = sum(counts.values())
    if not total:
        return []
    qualifying = [(src, c / total) for src, c in counts.items() if c / total > min_share]
    qualifying.sort(key=lambda item: (-counts[item[0]], item[0]))
    return qualifying


@dataclass(frozen=True)
class SourceShareRow:
    source: str
    total_refs: int
    shares: Mapping[str, float]  # set label -> share within that set


def source_share_table(
    docsets: Sequence[DocumentSet],
    corpus: Corpus,
    min_share: float = 0.01,
    aliases: Optional[Mapping[str, str]] = None,
) -> list[SourceShareRow]:
    """Sources exceeding the share floor in any set, sorted by the total
    number of references across all analyzed sets (the joint-table layout)."""
    per_set = {s.label: _source_counts(s, corpus, aliases) for s in docsets}
    totals = {s.label: sum(per_set[s.label].values()) for s in docsets}
    qualifying: set[str] = set()
    for label, counts in per_set.items():
        if totals[label]:
            qualifying.update(src for src, c in counts.items() if c / totals[label] > min_share)
    rows = []
    for source in qualifying:
        total = sum(per_set[label][source] for label in per_set)
        shares = {
            label: (per_set[label][source] / totals[label] if totals[label] else 0.0)
            for label in per_set
        }
        rows.append(SourceShareRow(source, total, shares))
    rows.sort(key=lambda r: (-r.total_refs, r.source))
    return rows


def source_count_vector(
    docset: DocumentSet,
    corpus: Corpus,
    aliases: Optional[Mapping[str, str]] = None,
    include_unknown: bool = False,
) -> dict[str, int]:
    """Source -> reference count, for the knowledge-base cosine comparison."""
    counts = _source_counts(docset, corpus, aliases)
    if not include_unknown:
        counts.pop(UNKNOWN_SOURCE_LABEL, None)
    return dict(counts)


def top_cited_first_authors(
    docset: DocumentSet, corpus: Corpus, top_n: int = 10
) -> list[tuple[str, int]]:
    """Most referenced first-author keys (count descending, ties lexicographic)."""
    counts: Counter[str] = Counter()
    for rec in corpus.iter_set(docset):
        for ref in rec.cited_refs:
            if ref.first_author:
                counts[ref.first_author] += 1
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return ranked[: max(top_n, 0)]


# ---------------------------------------------------------------------------
# Annual trends

@dataclass(frozen=True)
class AnnualTable:
    labels: tuple[str, ...]
    years: tuple[int, ...]
    counts: Mapping[int, Mapping[str, int]]  # year -> label -> count


@dataclass(frozen=True)
class AnnualShares:
    labels: tuple[str, ...]
    years: tuple[int, ...]
    shares: Mapping[int, Mapping[str, float]]
    empty_years: frozenset[int]  # rows whose total was zero (shares forced to 0)


def annual_counts(
    docsets: Sequence[DocumentSet], corpus: Corpus, year_from: int, year_to: int
) -> AnnualTable:
    """Members per year per set over [year_from, year_to]; absent years are 0."""
    if year_from > year_to:
        raise ValueError(f"invalid year window: {year_from} > {year_to}")
    labels = tuple(s.label for s in docsets)
    years = tuple(range(year_from, year_to + 1))
    table: dict[int, dict[str, int]] = {y: {lb: 0 for lb in labels} for y in years}
    for docset in docsets:
        for rec in corpus.iter_set(docset):
            if rec.year is not None and year_from <= rec.year <= year_to:
                table[rec.year][docset.label] += 1
    return AnnualTable(labels=labels, years=years, counts=table)


def annual_shares(table: AnnualTable) -> AnnualShares:
    shares: dict[int, dict[str, float]] = {}
    empty: set[int] = set()
    for year in table.years:
        row = table.counts[year]
        total = sum(row.values())
        if total == 0:
            empty.add(year)
            shares[year] = {lb: 0.0 for lb in table.labels}
        else:
            shares[year] = {lb: row[lb] / total for lb in table.labels}
    return AnnualShares(table.labels, table.years, shares, frozenset(empty))
