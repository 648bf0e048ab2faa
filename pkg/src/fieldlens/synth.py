"""Synthetic corpus generator with exact ground truth.

Every metric the pipeline computes has a planted counterpart here: which
documents cite a yardstick venue, which carry specialty keywords in the
title, realized phrase occurrence counts, per-set source and age counts,
and the author assignments. Truth records *realized* quantities (counted
on the generated corpus itself), so tests compare against exact values
rather than distribution parameters wherever possible.

Generation is sequential from a single seeded RNG: the same spec always
yields a byte-identical corpus.
"""
from __future__ import annotations

import json
import math
import random
from collections import Counter
from dataclasses import dataclass, field
from itertools import accumulate
from pathlib import Path
from typing import Mapping, Optional, Sequence

from .corpus import BibRecord, Corpus, DocumentSet, build_corpus
from .delineate import DEFAULT_KEYWORDS, DEFAULT_PREFIXES
from .ingest import parse_cited_reference
from .textstats import TextConfig, consolidate_variant, normalize_title


def _check_prob(value: float, name: str) -> float:
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{name}: probability {value!r} outside [0, 1]")
    return float(value)


def _check_dist(dist: Mapping[str, float], name: str) -> dict[str, float]:
    if not dist:
        raise ValueError(f"{name}: distribution must not be empty")
    total = sum(dist.values())
    if any(p < 0 for p in dist.values()):
        raise ValueError(f"{name}: negative probability")
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"{name}: probabilities sum to {total}, expected 1")
    return dict(dist)


def _check_count_dist(dist: Mapping, name: str) -> dict:
    kind = dist.get("kind")
    if kind == "poisson":
        lam = float(dist.get("lam", -1))
        if not 0 <= lam <= 700:
            raise ValueError(f"{name}.lam: must be in [0, 700]")
    elif kind == "fixed":
        if int(dist.get("value", -1)) < 0:
            raise ValueError(f"{name}.value: must be >= 0")
    elif kind == "uniform":
        low, high = int(dist.get("low", -1)), int(dist.get("high", -1))
        if not 0 <= low <= high:
            raise ValueError(f"{name}: need 0 <= low <= high")
    elif kind == "geometric":
        p = float(dist.get("p", -1))
        if not 0.0 < p <= 1.0:
            raise ValueError(f"{name}.p: must be in (0, 1]")
    else:
        raise ValueError(f"{name}.kind: unknown distribution kind {kind!r}")
    return dict(dist)


def _sample_count(rng: random.Random, dist: Mapping) -> int:
    kind = dist["kind"]
    if kind == "fixed":
        return int(dist["value"])
    if kind == "uniform":
        return rng.randint(int(dist["low"]), int(dist["high"]))
    if kind == "geometric":
        u = rng.random()
        p = float(dist["p"])
        if p >= 1.0:
            return 0
        return int(math.floor(math.log(1.0 - u) / math.log(1.0 - p)))
    # Poisson via Knuth's product-of-uniforms method.
    threshold = math.exp(-float(dist["lam"]))
    k, product = 0, rng.random()
    while product > threshold:
        k += 1
        product *= rng.random()
    return k


@dataclass(frozen=True)
class SetSpec:
    """Per-document-set generation parameters."""

    label: str
    n_docs: int
    year_range: tuple[int, int] = (2007, 2011)
    venue: Optional[str] = None  # defaults to the label
    doc_type: str = "Article"
    title_len_range: tuple[int, int] = (5, 10)
    shared_vocab_weight: float = 0.5
    specific_vocab_size: int = 150
    phrase_plants: tuple[tuple[str, int], ...] = ()
    author_pool_size: int = 50
    coauthors_range: tuple[int, int] = (0, 2)
    cross_pub_prob: float = 0.2
    refs_per_doc: Mapping = field(default_factory=lambda: {"kind": "poisson", "lam": 20})
    ref_age: Mapping = field(default_factory=lambda: {"kind": "geometric", "p": 0.25})
    source_dist: Mapping[str, float] = field(
        default_factory=lambda: {"JOURNAL A": 0.5, "JOURNAL B": 0.3, "JOURNAL C": 0.2}
    )
    yardstick_citation_prob: float = 0.0
    keyword_title_prob: float = 0.0


@dataclass(frozen=True)
class SynthSpec:
    seed: int
    sets: tuple[SetSpec, ...]
    shared_vocab_size: int = 300
    yardstick_sources: tuple[str, ...] = ("SCIENTOMETRICS",)
    keywords: tuple[str, ...] = tuple(sorted(DEFAULT_KEYWORDS))
    prefixes: tuple[str, ...] = DEFAULT_PREFIXES
    cited_author_pool: int = 200

    @classmethod
    def from_dict(cls, data: Mapping) -> "SynthSpec":
        sets = []
        for i, raw in enumerate(data.get("sets", ())):
            kwargs = dict(raw)
            for key in ("year_range", "title_len_range", "coauthors_range"):
                if key in kwargs:
                    kwargs[key] = tuple(kwargs[key])
            if "phrase_plants" in kwargs:
                kwargs["phrase_plants"] = tuple(
                    (str(p), int(c)) for p, c in kwargs["phrase_plants"]
                )
            try:
                sets.append(SetSpec(**kwargs))
            except TypeError as exc:
                raise ValueError(f"sets[{i}]: {exc}") from exc
        kwargs = {k: v for k, v in data.items() if k != "sets"}
        for key in ("yardstick_sources", "keywords", "prefixes"):
            if key in kwargs:
                kwargs[key] = tuple(kwargs[key])
        try:
            return cls(sets=tuple(sets), **kwargs)
        except TypeError as exc:
            raise ValueError(str(exc)) from exc


@dataclass(frozen=True)
class SetTruth:
    """Realized quantities for one generated set."""

    label: str
    doc_ids: tuple[str, ...]
    yardstick_doc_ids: frozenset[str]
    keyword_doc_ids: frozenset[str]
    phrase_counts: Mapping[str, int]
    source_counts: Mapping[str, int]
    age_counts: Mapping[int, int]
    refs_total: int
    first_authors: frozenset[str]
    cited_author_counts: Mapping[str, int]

    def document_set(self) -> DocumentSet:
        return DocumentSet(self.label, frozenset(self.doc_ids))


@dataclass(frozen=True)
class GroundTruth:
    sets: Mapping[str, SetTruth]

    def to_dict(self) -> dict:
        out = {}
        for label, t in self.sets.items():
            out[label] = {
                "doc_ids": list(t.doc_ids),
                "yardstick_doc_ids": sorted(t.yardstick_doc_ids),
                "keyword_doc_ids": sorted(t.keyword_doc_ids),
                "phrase_counts": dict(sorted(t.phrase_counts.items())),
                "source_counts": dict(sorted(t.source_counts.items())),
                "age_counts": {str(k): v for k, v in sorted(t.age_counts.items())},
                "refs_total": t.refs_total,
                "first_authors": sorted(t.first_authors),
                "cited_author_counts": dict(sorted(t.cited_author_counts.items())),
            }
        return out

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )


def _validate(spec: SynthSpec) -> None:
    if not spec.yardstick_sources:
        raise ValueError("yardstick_sources: must not be empty")
    seen_labels = set()
    keywords = {consolidate_variant(k.lower()) for k in spec.keywords}
    for i, s in enumerate(spec.sets):
        where = f"sets[{i}]"
        if s.n_docs < 0:
            raise ValueError(f"{where}.n_docs: must be >= 0")
        if s.label in seen_labels:
            raise ValueError(f"{where}.label: duplicate label {s.label!r}")
        seen_labels.add(s.label)
        if s.year_range[0] > s.year_range[1]:
            raise ValueError(f"{where}.year_range: empty range")
        if s.title_len_range[0] < 1 or s.title_len_range[0] > s.title_len_range[1]:
            raise ValueError(f"{where}.title_len_range: invalid range")
        _check_prob(s.shared_vocab_weight, f"{where}.shared_vocab_weight")
        _check_prob(s.cross_pub_prob, f"{where}.cross_pub_prob")
        _check_prob(s.yardstick_citation_prob, f"{where}.yardstick_citation_prob")
        _check_prob(s.keyword_title_prob, f"{where}.keyword_title_prob")
        _check_dist(s.source_dist, f"{where}.source_dist")
        _check_count_dist(s.refs_per_doc, f"{where}.refs_per_doc")
        _check_count_dist(s.ref_age, f"{where}.ref_age")
        if s.author_pool_size < 1:
            raise ValueError(f"{where}.author_pool_size: must be >= 1")
        yard_upper = {y.upper() for y in spec.yardstick_sources}
        for src in s.source_dist:
            if src.upper() in yard_upper:
                raise ValueError(
                    f"{where}.source_dist: {src!r} is a yardstick source; "
                    "yardstick citations are planted separately"
                )
        for j, (phrase, count) in enumerate(s.phrase_plants):
            tokens = normalize_title(phrase)
            if len(tokens) < 2:
                raise ValueError(f"{where}.phrase_plants[{j}]: phrase needs >= 2 tokens")
            if count < 0:
                raise ValueError(f"{where}.phrase_plants[{j}]: negative count")
            if count > 0 and s.n_docs == 0:
                raise ValueError(f"{where}.phrase_plants[{j}]: cannot plant into 0 documents")
            for t in tokens:
                if consolidate_variant(t) in keywords or any(
                    t.startswith(p) for p in spec.prefixes
                ):
                    raise ValueError(
                        f"{where}.phrase_plants[{j}]: token {t!r} collides with "
                        "delineation keywords/prefixes and would break keyword truth"
                    )


def _zipf_cum_weights(n: int) -> list[float]:
    weights = [1.0 / (rank + 1) for rank in range(n)]
    return list(accumulate(weights))


def _make_ref(
    rng: random.Random,
    author: str,
    year: int,
    source: str,
):
    volume, page = rng.randint(1, 120), rng.randint(1, 999)
    raw = f"{author}, {year}, {source}, V{volume}, P{page}"
    return parse_cited_reference(raw, citing_year=None)


def generate(spec: SynthSpec) -> tuple[Corpus, GroundTruth]:
    """Build the corpus and its ground truth; deterministic in the seed."""
    _validate(spec)
    rng = random.Random(spec.seed)
    text_cfg = TextConfig.default()

    shared_vocab = [f"shw{i:03d}" for i in range(spec.shared_vocab_size)]
    shared_cum = _zipf_cum_weights(spec.shared_vocab_size)
    cited_pool = [f"REF{i:03d} A" for i in range(spec.cited_author_pool)]
    cited_cum = _zipf_cum_weights(spec.cited_author_pool)
    cross_pool = [f"SHARED{i:03d} A" for i in range(200)]
    keywords_sorted = sorted(spec.keywords)
    yardsticks_sorted = sorted(spec.yardstick_sources)

    records: list[BibRecord] = []
    truths: dict[str, SetTruth] = {}

    for set_index, sspec in enumerate(spec.sets):
        specific_vocab = [f"s{set_index}w{i:03d}" for i in range(sspec.specific_vocab_size)]
        specific_cum = _zipf_cum_weights(sspec.specific_vocab_size)
        local_pool = [f"LOCAL{set_index}{i:03d} A" for i in range(sspec.author_pool_size)]
        sources_sorted = sorted(sspec.source_dist)
        source_cum = list(accumulate(sspec.source_dist[s] for s in sources_sorted))

        doc_ids: list[str] = []
        titles: list[list[list[str]]] = []  # per doc: list of contiguous segments
        yardstick_docs: set[str] = set()
        keyword_docs: set[str] = set()
        source_counts: Counter[str] = Counter()
        age_counts: Counter[int] = Counter()
        cited_author_counts: Counter[str] = Counter()
        first_authors: set[str] = set()
        doc_meta: list[tuple[int, tuple[str, ...], list]] = []  # (year, authors, refs)

        for doc_index in range(sspec.n_docs):
            doc_id = f"S{set_index:02d}-{doc_index:06d}"
            doc_ids.append(doc_id)
            year = rng.randint(*sspec.year_range)

            # Title: one segment per base word; plants are inserted later as
            # whole segments so their tokens stay contiguous.
            length = rng.randint(*sspec.title_len_range)
            segments: list[list[str]] = []
            for _ in range(length):
                if rng.random() < sspec.shared_vocab_weight:
                    word = rng.choices(shared_vocab, cum_weights=shared_cum, k=1)[0]
                else:
                    word = rng.choices(specific_vocab, cum_weights=specific_cum, k=1)[0]
                segments.append([word])
            if rng.random() < sspec.keyword_title_prob:
                keyword = rng.choice(keywords_sorted)
                segments.insert(rng.randint(0, len(segments)), [keyword])
                keyword_docs.add(doc_id)
            titles.append(segments)

            # Authors
            if rng.random() < sspec.cross_pub_prob:
                first = rng.choice(cross_pool)
            else:
                first = rng.choice(local_pool)
            coauthors = [
                rng.choice(local_pool) for _ in range(rng.randint(*sspec.coauthors_range))
            ]
            authors = (first, *coauthors)
            first_authors.add(first)

            # References
            refs = []
            for _ in range(_sample_count(rng, sspec.refs_per_doc)):
                age = _sample_count(rng, sspec.ref_age)
                source = rng.choices(sources_sorted, cum_weights=source_cum, k=1)[0]
                author = rng.choices(cited_pool, cum_weights=cited_cum, k=1)[0]
                refs.append(_make_ref(rng, author, year - age, source))
                source_counts[source] += 1
                age_counts[age] += 1
                cited_author_counts[author] += 1
            if rng.random() < sspec.yardstick_citation_prob:
                age = _sample_count(rng, sspec.ref_age)
                source = rng.choice(yardsticks_sorted)
                author = rng.choices(cited_pool, cum_weights=cited_cum, k=1)[0]
                refs.append(_make_ref(rng, author, year - age, source))
                source_counts[source] += 1
                age_counts[age] += 1
                cited_author_counts[author] += 1
                yardstick_docs.add(doc_id)

            doc_meta.append((year, authors, refs))

        # Phrase plants: insert whole-phrase segments at segment boundaries.
        for phrase, count in sspec.phrase_plants:
            tokens = normalize_title(phrase)
            for _ in range(count):
                segments = titles[rng.randrange(sspec.n_docs)]
                segments.insert(rng.randint(0, len(segments)), list(tokens))

        # Realized phrase counts, recounted on the consolidated token streams
        # exactly the way the miner sees them.
        consolidated = []
        for segments in titles:
            flat = [t for seg in segments for t in seg]
            consolidated.append(
                [t if t in text_cfg.stopwords else consolidate_variant(t) for t in flat]
            )
        phrase_counts: dict[str, int] = {}
        for phrase, _ in sspec.phrase_plants:
            target = tuple(
                t if t in text_cfg.stopwords else consolidate_variant(t)
                for t in normalize_title(phrase)
            )
            size = len(target)
            realized = 0
            for tokens in consolidated:
                for start in range(len(tokens) - size + 1):
                    if tuple(tokens[start : start + size]) == target:
                        realized += 1
            phrase_counts[" ".join(target)] = realized

        for doc_index, doc_id in enumerate(doc_ids):
            year, authors, refs = doc_meta[doc_index]
            title = " ".join(t for seg in titles[doc_index] for t in seg)
            records.append(
                BibRecord(
                    id=doc_id,
                    doc_type=sspec.doc_type,
                    year=year,
                    title=title,
                    source=sspec.venue or sspec.label,
                    authors=authors,
                    cited_refs=tuple(refs),
                )
            )

        truths[sspec.label] = SetTruth(
            label=sspec.label,
            doc_ids=tuple(doc_ids),
            yardstick_doc_ids=frozenset(yardstick_docs),
            keyword_doc_ids=frozenset(keyword_docs),
            phrase_counts=phrase_counts,
            source_counts=dict(source_counts),
            age_counts=dict(age_counts),
            refs_total=sum(source_counts.values()),
            first_authors=frozenset(first_authors),
            cited_author_counts=dict(cited_author_counts),
        )

    corpus, _ = build_corpus(records, provenance=(f"synth:seed={spec.seed}",))
    return corpus, GroundTruth(sets=truths)


# ---------------------------------------------------------------------------
# Tagged serialization (round-trips through the export parser)

def serialize_tagged(corpus: Corpus, path: str | Path) -> None:
    """Write the corpus in the tagged export format.

    Re-parsing the file yields identical records; unknown years simply omit
    the PY tag.
    """
    if len(corpus) == 0:
        raise ValueError("cannot serialize an empty corpus")
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write("FN fieldlens tagged export\nVR 1.0\n")
        for rid in sorted(corpus.records):
            rec = corpus.records[rid]
            _write_list_tag(fh, "AU", rec.authors)
            if rec.title:
                fh.write(f"TI {_oneline(rec.title)}\n")
            if rec.source:
                fh.write(f"SO {_oneline(rec.source)}\n")
            if rec.doc_type:
                fh.write(f"DT {_oneline(rec.doc_type)}\n")
            if rec.year is not None:
                fh.write(f"PY {rec.year}\n")
            _write_list_tag(fh, "CR", [r.raw for r in rec.cited_refs])
            fh.write(f"UT {_oneline(rec.id)}\nER\n\n")
        fh.write("EF\n")


def _oneline(text: str) -> str:
    return " ".join(text.split()) if any(c in text for c in "\r\n") else text


def _write_list_tag(fh, tag: str, values: Sequence[str]) -> None:
    for i, value in enumerate(values):
        prefix = f"{tag} " if i == 0 else "   "
        fh.write(f"{prefix}{_oneline(value)}\n")
