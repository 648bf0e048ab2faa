"""Analysis report: one JSON bundle plus per-table CSV and per-figure TSV/SVG.

The report is a plain dict with a versioned schema. All serialization is
deterministic: sorted JSON keys, fixed row ordering, shortest-round-trip
float formatting, no timestamps.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Optional, Sequence

from . import __version__
from .corpus import Corpus, DocumentSet, restrict_years
from .figures import line_chart
from .metrics import (
    CosineResult,
    NEGATIVE_AGE_BUCKET,
    annual_counts,
    annual_shares,
    author_overlap,
    bootstrap_cosine_rows,
    cosine,
    mean_refs_per_article,
    reference_age_histogram,
    render_ratio,
    source_count_vector,
    source_share_table,
    top_cited_first_authors,
)
from .textstats import (
    TextConfig,
    corpus_title_tokens,
    dominance_table,
    mine_phrases,
    segment_many,
    vector_from_rows,
)

REPORT_SCHEMA = "fieldlens-report@1"

#: Label of the synthesized all-specialty row in the author-count table.
COMBINED_LABEL = "(all specialty)"


@dataclass(frozen=True)
class AnalysisOptions:
    comparison_label: Optional[str] = None
    replicates: int = 1000
    seed: int = 42
    threads: int = 1
    year_from: Optional[int] = None
    year_to: Optional[int] = None
    top_terms: int = 20
    top_cited: int = 10
    min_source_share: float = 0.01
    price_max_age: int = 5
    first_author_only: bool = True
    venue_aliases: Optional[Mapping[str, str]] = None

    @classmethod
    def from_dict(cls, data: Mapping, **overrides) -> "AnalysisOptions":
        known = {f for f in cls.__dataclass_fields__}
        kwargs = {k: v for k, v in data.items() if k in known}
        kwargs.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**kwargs)


def _set_authors_count(docset: DocumentSet, corpus: Corpus) -> tuple[int, int]:
    all_authors: set[str] = set()
    first_authors: set[str] = set()
    for rec in corpus.iter_set(docset):
        all_authors.update(rec.authors)
        if rec.first_author:
            first_authors.add(rec.first_author)
    return len(all_authors), len(first_authors)


def _cosine_result_dict(result: Optional[CosineResult], pair: tuple[str, str]) -> dict:
    if result is None:
        return {"pair": list(pair), "value": None, "bootstrap_std": None, "replicates": 0}
    return {
        "pair": list(result.pair),
        "value": result.value,
        "bootstrap_std": result.bootstrap_std,
        "replicates": result.replicates,
    }


def build_report(
    corpus: Corpus,
    docsets: Sequence[DocumentSet],
    options: AnalysisOptions,
    text_config: Optional[TextConfig] = None,
) -> dict:
    """Compute every table and figure dataset for the given document sets.

    One set may be designated the comparison set; the rest are specialty
    sets. Without a comparison the specialty-vs-comparison tables are empty.
    """
    if len(docsets) < 2:
        raise ValueError("analysis needs at least two document sets")
    labels = [s.label for s in docsets]
    if len(set(labels)) != len(labels):
        raise ValueError("document set labels must be unique")
    if options.comparison_label is not None and options.comparison_label not in labels:
        raise ValueError(f"comparison label {options.comparison_label!r} not among sets")

    cfg = text_config or TextConfig.default()
    if options.year_from is not None or options.year_to is not None:
        lo = options.year_from if options.year_from is not None else -(10**6)
        hi = options.year_to if options.year_to is not None else 10**6
        docsets = [restrict_years(s, corpus, lo, hi) for s in docsets]

    comparison = next((s for s in docsets if s.label == options.comparison_label), None)
    specialty = [s for s in docsets if comparison is None or s.label != comparison.label]

    # Titles are tokenized once per set and segmented once against the joint
    # phrase inventory; vectors and bootstrap replicates share those rows.
    tokens = {s.label: corpus_title_tokens(corpus, s, cfg) for s in docsets}
    phrases = mine_phrases(
        [t for s in docsets for t in tokens[s.label]],
        cfg.phrase_max_len, cfg.phrase_min_count, cfg.stopwords,
    )
    rows = {s.label: segment_many(tokens[s.label], phrases, cfg) for s in docsets}
    vectors = {s.label: vector_from_rows(s.label, rows[s.label]) for s in docsets}

    # Author counts (with a combined specialty row when meaningful).
    author_rows = []
    for s in docsets:
        n_all, n_first = _set_authors_count(s, corpus)
        author_rows.append(
            {"label": s.label, "articles": len(s), "authors": n_all, "first_authors": n_first}
        )
    if len(specialty) > 1:
        union_ids = frozenset().union(*(s.member_ids for s in specialty))
        combined = DocumentSet(COMBINED_LABEL, union_ids)
        n_all, n_first = _set_authors_count(combined, corpus)
        author_rows.append(
            {
                "label": COMBINED_LABEL,
                "articles": len(combined),
                "authors": n_all,
                "first_authors": n_first,
            }
        )

    # Social overlap (needs a comparison set).
    overlap_rows = []
    if comparison is not None and specialty:
        for row in author_overlap(specialty, comparison, corpus, options.first_author_only):
            overlap_rows.append(
                {
                    "set_label": row.set_label,
                    "n_first_authors": row.n_first_authors,
                    "frac_other_specialty": float(row.frac_other_specialty),
                    "frac_comparison": float(row.frac_comparison),
                    "coefficient": float(row.coefficient) if row.coefficient is not None else None,
                    "coefficient_1dp": render_ratio(row.coefficient),
                }
            )

    # Title-term cosines with bootstrap errors.
    def title_pair(a: DocumentSet, b: DocumentSet) -> dict:
        try:
            result = bootstrap_cosine_rows(
                a.label, rows[a.label], b.label, rows[b.label],
                options.replicates, options.seed, threads=options.threads,
            )
        except ValueError:
            return _cosine_result_dict(None, (a.label, b.label))
        return _cosine_result_dict(result, (a.label, b.label))

    title_spec = [
        title_pair(specialty[i], specialty[j])
        for i in range(len(specialty))
        for j in range(i + 1, len(specialty))
    ]
    title_comp = [title_pair(s, comparison) for s in specialty] if comparison is not None else []

    # Dominant terms per set.
    dom_rows = []
    if len(docsets) >= 2:
        for row in dominance_table([vectors[s.label] for s in docsets], options.top_terms):
            label = row.dominant_in
            dom_rows.append(
                {
                    "set_label": label,
                    "term": row.term,
                    "count": row.counts[label],
                    "share": float(row.shares[label]),
                    "overwhelming": row.overwhelming,
                }
            )

    # Knowledge base: source shares and source-vector cosines.
    share_rows = [
        {"source": r.source, "total_refs": r.total_refs, "shares": dict(r.shares)}
        for r in source_share_table(docsets, corpus, options.min_source_share, options.venue_aliases)
    ]
    source_vecs = {
        s.label: source_count_vector(s, corpus, options.venue_aliases) for s in docsets
    }

    def source_pair(a: DocumentSet, b: DocumentSet) -> dict:
        u, v = source_vecs[a.label], source_vecs[b.label]
        if not u or not v:
            return _cosine_result_dict(None, (a.label, b.label))
        result = CosineResult((a.label, b.label), cosine(u, v), None, 0)
        return _cosine_result_dict(result, (a.label, b.label))

    source_spec = [
        source_pair(specialty[i], specialty[j])
        for i in range(len(specialty))
        for j in range(i + 1, len(specialty))
    ]
    source_comp = [source_pair(s, comparison) for s in specialty] if comparison is not None else []

    top_cited = {
        s.label: [[a, c] for a, c in top_cited_first_authors(s, corpus, options.top_cited)]
        for s in docsets
    }
    mean_refs = {
        s.label: (mean_refs_per_article(s, corpus) if s.member_ids else None) for s in docsets
    }

    ages = {}
    for s in docsets:
        hist = reference_age_histogram(s, corpus, options.price_max_age)
        ages[s.label] = {
            "bins": {str(age): frac for age, frac in sorted(hist.bins.items())},
            "n_refs": hist.n_refs,
            "n_unknown": hist.n_unknown,
            "price_index": hist.price_index,
        }

    # Annual trends over the widest known-year window of the sets.
    known_years = [
        rec.year for s in docsets for rec in corpus.iter_set(s) if rec.year is not None
    ]
    if known_years:
        lo = options.year_from if options.year_from is not None else min(known_years)
        hi = options.year_to if options.year_to is not None else max(known_years)
        counts_table = annual_counts(docsets, corpus, lo, hi)
        shares_table = annual_shares(counts_table)
        annual = {
            "labels": list(counts_table.labels),
            "years": list(counts_table.years),
            "counts": {str(y): dict(counts_table.counts[y]) for y in counts_table.years},
            "shares": {str(y): dict(shares_table.shares[y]) for y in shares_table.years},
            "empty_years": sorted(shares_table.empty_years),
        }
    else:
        annual = {"labels": labels, "years": [], "counts": {}, "shares": {}, "empty_years": []}

    return {
        "schema": REPORT_SCHEMA,
        "tool_version": __version__,
        "options": {
            "comparison_label": options.comparison_label,
            "replicates": options.replicates,
            "seed": options.seed,
            "year_from": options.year_from,
            "year_to": options.year_to,
            "top_terms": options.top_terms,
            "top_cited": options.top_cited,
            "min_source_share": options.min_source_share,
            "price_max_age": options.price_max_age,
            "first_author_only": options.first_author_only,
        },
        "sets": [{"label": s.label, "n_docs": len(s)} for s in docsets],
        "specialty_labels": [s.label for s in specialty],
        "comparison_label": comparison.label if comparison is not None else None,
        "n_phrases": len(phrases),
        "author_counts": author_rows,
        "author_overlap": overlap_rows,
        "title_cosine_specialty": title_spec,
        "title_cosine_comparison": title_comp,
        "dominant_terms": dom_rows,
        "source_shares": share_rows,
        "source_cosine_specialty": source_spec,
        "source_cosine_comparison": source_comp,
        "top_cited_first_authors": top_cited,
        "mean_refs_per_article": mean_refs,
        "reference_ages": ages,
        "annual": annual,
    }


# ---------------------------------------------------------------------------
# File emission

def _write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _fmt(value) -> str:
    if value is None:
        return ""
    return str(value)


def _cosine_rows(entries: Sequence[dict]) -> list[list]:
    return [
        [e["pair"][0], e["pair"][1], _fmt(e["value"]), _fmt(e["bootstrap_std"]), e["replicates"]]
        for e in entries
    ]


def write_report_files(report: dict, out_dir: str | Path, formats: Sequence[str]) -> list[Path]:
    """Emit report.json, CSV tables, and figure TSV/SVG files into out_dir."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    def emit(path: Path) -> Path:
        written.append(path)
        return path

    if "json" in formats:
        path = emit(out / "report.json")
        path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    labels = [s["label"] for s in report["sets"]]

    if "csv" in formats:
        _write_csv(
            emit(out / "table_authors.csv"),
            ["set", "articles", "authors", "first_authors"],
            [[r["label"], r["articles"], r["authors"], r["first_authors"]]
             for r in report["author_counts"]],
        )
        _write_csv(
            emit(out / "table_author_overlap.csv"),
            ["set", "n_first_authors", "frac_other_specialty", "frac_comparison",
             "coefficient", "coefficient_1dp"],
            [[r["set_label"], r["n_first_authors"], _fmt(r["frac_other_specialty"]),
              _fmt(r["frac_comparison"]), _fmt(r["coefficient"]), r["coefficient_1dp"]]
             for r in report["author_overlap"]],
        )
        _write_csv(
            emit(out / "table_title_cosine_specialty.csv"),
            ["set_a", "set_b", "cosine", "bootstrap_std", "replicates"],
            _cosine_rows(report["title_cosine_specialty"]),
        )
        _write_csv(
            emit(out / "table_title_cosine_comparison.csv"),
            ["set_a", "set_b", "cosine", "bootstrap_std", "replicates"],
            _cosine_rows(report["title_cosine_comparison"]),
        )
        _write_csv(
            emit(out / "table_dominant_terms.csv"),
            ["set", "term", "count", "share", "overwhelming"],
            [[r["set_label"], r["term"], r["count"], _fmt(r["share"]),
              str(r["overwhelming"]).lower()]
             for r in report["dominant_terms"]],
        )
        _write_csv(
            emit(out / "table_source_shares.csv"),
            ["source", "total_refs"] + [f"share_{lb}" for lb in labels],
            [[r["source"], r["total_refs"]] + [_fmt(r["shares"].get(lb)) for lb in labels]
             for r in report["source_shares"]],
        )
        _write_csv(
            emit(out / "table_source_cosine_specialty.csv"),
            ["set_a", "set_b", "cosine", "bootstrap_std", "replicates"],
            _cosine_rows(report["source_cosine_specialty"]),
        )
        _write_csv(
            emit(out / "table_source_cosine_comparison.csv"),
            ["set_a", "set_b", "cosine", "bootstrap_std", "replicates"],
            _cosine_rows(report["source_cosine_comparison"]),
        )
        _write_csv(
            emit(out / "table_top_cited_authors.csv"),
            ["set", "rank", "author", "references"],
            [[label, rank + 1, author, count]
             for label in labels
             for rank, (author, count) in enumerate(report["top_cited_first_authors"][label])],
        )
        _write_csv(
            emit(out / "table_mean_refs.csv"),
            ["set", "mean_refs_per_article"],
            [[lb, _fmt(report["mean_refs_per_article"][lb])] for lb in labels],
        )

    annual = report["annual"]
    if "csv" in formats or "tsv" in formats:
        _write_tsv_matrix(
            emit(out / "fig_annual_counts.tsv"), "year", annual["labels"],
            [(str(y), [annual["counts"][str(y)][lb] for lb in annual["labels"]])
             for y in annual["years"]],
        )
        _write_tsv_matrix(
            emit(out / "fig_annual_shares.tsv"), "year", annual["labels"],
            [(str(y), [annual["shares"][str(y)][lb] for lb in annual["labels"]])
             for y in annual["years"]],
        )
        age_keys = sorted(
            {int(age) for data in report["reference_ages"].values() for age in data["bins"]}
        )
        _write_tsv_matrix(
            emit(out / "fig_reference_age.tsv"), "age", labels,
            [(str(age),
              [report["reference_ages"][lb]["bins"].get(str(age), 0.0) for lb in labels])
             for age in age_keys],
        )

    if "svg" in formats:
        series = [
            (lb, [(float(y), float(annual["counts"][str(y)][lb])) for y in annual["years"]])
            for lb in annual["labels"]
        ]
        line_chart(emit(out / "fig_annual_counts.svg"), "Articles per year", "year", series)
        series = [
            (lb, [(float(y), annual["shares"][str(y)][lb]) for y in annual["years"]])
            for lb in annual["labels"]
        ]
        line_chart(emit(out / "fig_annual_shares.svg"), "Share of articles per year", "year", series)
        series = []
        for lb in labels:
            bins = report["reference_ages"][lb]["bins"]
            points = sorted(
                (int(age), frac) for age, frac in bins.items()
                if int(age) != NEGATIVE_AGE_BUCKET
            )
            series.append((lb, [(float(a), f) for a, f in points]))
        line_chart(emit(out / "fig_reference_age.svg"), "Reference age distribution", "age", series)

    return written


def _write_tsv_matrix(
    path: Path, key_name: str, labels: Sequence[str], rows: Sequence[tuple[str, Sequence]]
) -> None:
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write("\t".join([key_name, *labels]) + "\n")
        for key, values in rows:
            fh.write("\t".join([key, *(str(v) for v in values)]) + "\n")
