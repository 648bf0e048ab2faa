"""Title text pipeline: normalization, variant consolidation, phrase mining,
term vectors, and the dominant-term analysis.

The processing order matters and is fixed: titles are normalized to tokens,
tokens are consolidated (plural stripping via a small rule table, never a
full stemmer), phrases are mined over the consolidated token streams, and
term vectors are then built by segmenting each title against the shared
phrase inventory. Stop words pass through consolidation untouched so that
phrase interiors keep their exact form, and are removed (together with the
general-word list) only when counting single tokens.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, replace
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

from .corpus import Corpus, DocumentSet, fold_ascii

Phrase = tuple[str, ...]


# ---------------------------------------------------------------------------
# Word lists and the variant table

def _parse_word_lines(lines: Iterable[str]) -> frozenset[str]:
    words = set()
    for line in lines:
        entry = line.split("#", 1)[0].strip().lower()
        if entry:
            words.add(entry)
    return frozenset(words)


def load_word_list(path: str | Path) -> frozenset[str]:
    """One entry per line, '#' comments, case-insensitive."""
    return _parse_word_lines(Path(path).read_text(encoding="utf-8").splitlines())


def _suffix_strip(token: str) -> str:
    """Plural-stripping rules: -s, -es, -ies -> -y. Deliberately shallow."""
    if len(token) < 4:
        return token
    if token.endswith("ies") and len(token) > 4:
        return token[:-3] + "y"
    if token.endswith(("sses", "xes", "ches", "shes", "zzes", "oes")) and len(token) > 4:
        return token[:-2]
    if token.endswith("s") and not token.endswith(("ss", "us", "is")):
        return token[:-1]
    return token


def _parse_variant_lines(lines: Iterable[str]) -> dict[str, str]:
    table: dict[str, str] = {}
    for lineno, line in enumerate(lines, start=1):
        entry = line.split("#", 1)[0].strip().lower()
        if not entry:
            continue
        parts = entry.split()
        if len(parts) == 1:
            table[parts[0]] = parts[0]  # protected word
        elif len(parts) == 2:
            table[parts[0]] = parts[1]
        else:
            raise ValueError(f"variant table line {lineno}: expected 1 or 2 words, got {entry!r}")
    # Canonical forms must be fixed points, otherwise consolidation would not
    # be idempotent. Resolve chains once and reject cycles.
    for variant, canonical in list(table.items()):
        seen = {variant}
        while True:
            nxt = table.get(canonical, _suffix_strip(canonical))
            if nxt == canonical:
                break
            if nxt in seen:
                raise ValueError(f"variant table cycle involving {variant!r}")
            seen.add(nxt)
            canonical = nxt
        table[variant] = canonical
    return table


def load_variant_table(path: str | Path) -> dict[str, str]:
    """Variant table file: "variant canonical" pairs or single protected words."""
    return _parse_variant_lines(Path(path).read_text(encoding="utf-8").splitlines())


def _load_default(name: str) -> str:
    return resources.files("fieldlens.data").joinpath(name).read_text(encoding="utf-8")


def default_stopwords() -> frozenset[str]:
    return _parse_word_lines(_load_default("stopwords.txt").splitlines())


def default_general_words() -> frozenset[str]:
    return _parse_word_lines(_load_default("generalwords.txt").splitlines())


def default_variant_table() -> dict[str, str]:
    return _parse_variant_lines(_load_default("variants.txt").splitlines())


@dataclass(frozen=True)
class TextConfig:
    """Everything the title pipeline needs, bundled so results are reproducible."""

    stopwords: frozenset[str]
    general_words: frozenset[str]
    variant_table: Mapping[str, str]
    keep_hyphens: bool = True
    phrase_max_len: int = 5
    phrase_min_count: int = 3
    count_words_within_phrases: bool = False

    @classmethod
    def default(cls, **overrides) -> "TextConfig":
        cfg = cls(
            stopwords=default_stopwords(),
            general_words=default_general_words(),
            variant_table=default_variant_table(),
        )
        return replace(cfg, **overrides) if overrides else cfg


# ---------------------------------------------------------------------------
# Tokenization and consolidation

def normalize_title(title: str, keep_hyphens: bool = True) -> list[str]:
    """Lowercase tokens with punctuation stripped.

    Hyphens and ampersands survive inside tokens ("h-index", "r&d") unless
    ``keep_hyphens`` is off, in which case hyphens split tokens. Apostrophes
    are dropped without splitting ("price's" -> "prices").
    """
    text = fold_ascii(title).lower().replace("'", "")
    kept = "-&" if keep_hyphens else "&"
    chars = [ch if (ch.isalnum() and ch.isascii()) or ch in kept else " " for ch in text]
    tokens = []
    for token in "".join(chars).split():
        token = token.strip("-&")
        if token:
            tokens.append(token)
    return tokens


_DEFAULT_TABLE: Optional[dict[str, str]] = None


def consolidate_variant(token: str, table: Optional[Mapping[str, str]] = None) -> str:
    """Deterministic singular form of a lowercase token; idempotent."""
    global _DEFAULT_TABLE
    if table is None:
        if _DEFAULT_TABLE is None:
            _DEFAULT_TABLE = default_variant_table()
        table = _DEFAULT_TABLE
    mapped = table.get(token)
    if mapped is not None:
        return mapped
    stripped = _suffix_strip(token)
    return table.get(stripped, stripped)


def consolidate_tokens(tokens: Sequence[str], config: TextConfig) -> list[str]:
    """Consolidate every non-stop token; stop words pass through verbatim."""
    return [
        t if t in config.stopwords else consolidate_variant(t, config.variant_table)
        for t in tokens
    ]


def title_tokens(title: str, config: TextConfig) -> list[str]:
    return consolidate_tokens(normalize_title(title, config.keep_hyphens), config)


def corpus_title_tokens(corpus: Corpus, docset: DocumentSet, config: TextConfig) -> list[list[str]]:
    """Consolidated token lists for a set's titles, in sorted-id order."""
    return [title_tokens(rec.title, config) for rec in corpus.iter_set(docset)]


# ---------------------------------------------------------------------------
# Phrase mining and segmentation

def mine_phrases(
    token_lists: Iterable[Sequence[str]],
    max_len: int = 5,
    min_count: int = 3,
    stopwords: frozenset[str] = frozenset(),
) -> set[Phrase]:
    """All contiguous n-grams (2..max_len) occurring at least min_count times.

    Candidates that start or end with a stop word are rejected; interior stop
    words are allowed. Occurrences are counted with a sliding window, so
    overlapping repeats each count.
    """
    if max_len < 2:
        raise ValueError("phrase max_len must be >= 2")
    if min_count < 1:
        raise ValueError("phrase min_count must be >= 1")
    counts: Counter[Phrase] = Counter()
    for tokens in token_lists:
        n = len(tokens)
        for size in range(2, max_len + 1):
            for start in range(n - size + 1):
                first, last = tokens[start], tokens[start + size - 1]
                if first in stopwords or last in stopwords:
                    continue
                counts[tuple(tokens[start : start + size])] += 1
    return {phrase for phrase, c in counts.items() if c >= min_count}


def phrase_max_len(phrases: set[Phrase]) -> int:
    return max(map(len, phrases), default=0)


def segment_tokens(
    tokens: Sequence[str],
    phrases: set[Phrase],
    config: TextConfig,
    max_phrase_len: Optional[int] = None,
) -> tuple[Counter, int]:
    """Greedy left-to-right longest-match segmentation of one title.

    Returns (term counts, dropped token count). Tokens covered by a matched
    phrase are counted as the phrase only, unless count_words_within_phrases
    is set; leftover single tokens are dropped when they are stop words or
    general words. With the default flag the conservation law holds:
    sum(phrase_len * matches) + single counts + dropped = len(tokens).
    Pass ``max_phrase_len`` (see phrase_max_len) when segmenting many titles
    against one inventory.
    """
    max_len = phrase_max_len(phrases) if max_phrase_len is None else max_phrase_len
    counts: Counter = Counter()
    dropped = 0
    n = len(tokens)
    i = 0

    def count_single(token: str) -> None:
        nonlocal dropped
        if token in config.stopwords or token in config.general_words:
            dropped += 1
        else:
            counts[token] += 1

    while i < n:
        matched = 0
        for size in range(min(max_len, n - i), 1, -1):
            if tuple(tokens[i : i + size]) in phrases:
                counts[" ".join(tokens[i : i + size])] += 1
                matched = size
                break
        if matched:
            if config.count_words_within_phrases:
                for token in tokens[i : i + matched]:
                    count_single(token)
            i += matched
        else:
            count_single(tokens[i])
            i += 1
    return counts, dropped


@dataclass(frozen=True)
class TermVector:
    """Term -> occurrence count over one document set's titles."""

    set_label: str
    counts: Mapping[str, int]
    total: int

    def norm(self) -> float:
        return sum(v * v for v in self.counts.values()) ** 0.5


def segment_many(
    token_lists: Iterable[Sequence[str]], phrases: set[Phrase], config: TextConfig
) -> list[Counter]:
    """Per-title term counts for a batch of titles (one shared inventory)."""
    max_len = phrase_max_len(phrases)
    return [segment_tokens(tokens, phrases, config, max_len)[0] for tokens in token_lists]


def vector_from_rows(label: str, rows: Iterable[Counter]) -> TermVector:
    counts: Counter = Counter()
    for row in rows:
        counts.update(row)
    return TermVector(set_label=label, counts=dict(counts), total=sum(counts.values()))


def vector_from_token_lists(
    label: str, token_lists: Iterable[Sequence[str]], phrases: set[Phrase], config: TextConfig
) -> TermVector:
    return vector_from_rows(label, segment_many(token_lists, phrases, config))


def build_term_vector(
    docset: DocumentSet, corpus: Corpus, phrases: set[Phrase], config: TextConfig
) -> TermVector:
    """Term vector of a document set against a shared phrase inventory."""
    return vector_from_token_lists(
        docset.label, corpus_title_tokens(corpus, docset, config), phrases, config
    )


def shared_phrase_inventory(
    corpus: Corpus, docsets: Sequence[DocumentSet], config: TextConfig
) -> set[Phrase]:
    """Phrases mined over the union of all compared sets (one joint inventory)."""
    all_tokens: list[list[str]] = []
    for docset in docsets:
        all_tokens.extend(corpus_title_tokens(corpus, docset, config))
    return mine_phrases(all_tokens, config.phrase_max_len, config.phrase_min_count, config.stopwords)


# ---------------------------------------------------------------------------
# Dominance analysis

@dataclass(frozen=True)
class DominanceRow:
    """How one term's occurrences distribute over the compared sets.

    Shares are exact rationals so the 1/2 and 2/3 thresholds are compared
    without rounding error; a share of exactly 2/3 is not overwhelming.
    """

    term: str
    counts: Mapping[str, int]
    shares: Mapping[str, Fraction]
    dominant_in: Optional[str]
    overwhelming: bool


_HALF = Fraction(1, 2)
_TWO_THIRDS = Fraction(2, 3)


def dominance_rows(vectors: Sequence[TermVector]) -> list[DominanceRow]:
    """One row per term of the shared inventory, sorted by total count then term."""
    if len(vectors) < 2:
        raise ValueError("dominance analysis needs at least two term vectors")
    terms = sorted(set().union(*(v.counts.keys() for v in vectors)))
    rows = []
    for term in terms:
        counts = {v.set_label: v.counts.get(term, 0) for v in vectors}
        total = sum(counts.values())
        if total == 0:
            continue
        shares = {label: Fraction(c, total) for label, c in counts.items()}
        dominant = next((lb for lb, s in shares.items() if s > _HALF), None)
        overwhelming = dominant is not None and shares[dominant] > _TWO_THIRDS
        rows.append(DominanceRow(term, counts, shares, dominant, overwhelming))
    rows.sort(key=lambda r: (-sum(r.counts.values()), r.term))
    return rows


def dominance_table(vectors: Sequence[TermVector], top_n: int) -> list[DominanceRow]:
    """Per set, the top_n most frequent terms dominant in that set.

    Rows are grouped in the input order of the vectors; within a set they are
    ordered by that set's raw frequency (descending, ties lexicographic).
    """
    if top_n < 0:
        raise ValueError("top_n must be >= 0")
    rows = dominance_rows(vectors)
    table: list[DominanceRow] = []
    for vector in vectors:
        own = [r for r in rows if r.dominant_in == vector.set_label]
        own.sort(key=lambda r: (-r.counts[vector.set_label], r.term))
        table.extend(own[:top_n])
    return table
