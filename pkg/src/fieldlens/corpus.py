"""Core corpus model: records, document sets, and the JSONL cache.

Everything here is an immutable value. A ``Corpus`` is built once from a
list of parsed records and then shared freely; document sets are labeled
id sets that always refer back to a corpus.
"""
from __future__ import annotations

import hashlib
import json
import re
import unicodedata
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Iterator, Mapping, Optional

from . import __version__

CACHE_SCHEMA = "fieldlens-cache@1"

# Characters that do not decompose to ASCII under NFKD and need a manual fold.
_ASCII_FALLBACK = {
    "ß": "ss", "ẞ": "SS", "æ": "ae", "Æ": "AE", "œ": "oe", "Œ": "OE",
    "ø": "o", "Ø": "O", "ł": "l", "Ł": "L", "đ": "d", "Đ": "D",
    "ð": "d", "Ð": "D", "þ": "th", "Þ": "TH", "ı": "i", "ħ": "h", "Ħ": "H",
}

_VENUE_PUNCT_RE = re.compile(r"[^A-Z0-9&]+")


def fold_ascii(text: str) -> str:
    """Fold diacritics to plain ASCII ("Milojević" -> "Milojevic")."""
    if text.isascii():
        return text
    text = "".join(_ASCII_FALLBACK.get(ch, ch) for ch in text)
    decomposed = unicodedata.normalize("NFKD", text)
    return "".join(ch for ch in decomposed if ord(ch) < 128 and not unicodedata.combining(ch))


@lru_cache(maxsize=65536)
def _normalize_venue_bare(name: str) -> str:
    norm = _VENUE_PUNCT_RE.sub(" ", fold_ascii(name).upper()).strip()
    return " ".join(norm.split())


def normalize_venue(name: str, aliases: Optional[Mapping[str, str]] = None) -> str:
    """Canonical venue form: ASCII, uppercase, punctuation stripped, spaces collapsed.

    ``aliases`` maps normalized names onto a replacement (used e.g. to merge a
    journal with its earlier title); it is applied after normalization, so the
    keys themselves should be in normalized form.
    """
    norm = _normalize_venue_bare(name)
    if aliases:
        norm = aliases.get(norm, norm)
    return norm


@dataclass(frozen=True)
class CitedReference:
    """One parsed reference string. ``raw`` is always the verbatim input."""

    raw: str
    first_author: Optional[str] = None
    year: Optional[int] = None
    source: Optional[str] = None

    def is_unparsed(self) -> bool:
        return self.first_author is None and self.year is None and self.source is None


@dataclass(frozen=True)
class BibRecord:
    """One publication record."""

    id: str
    doc_type: str = ""
    year: Optional[int] = None
    title: str = ""
    source: str = ""
    authors: tuple[str, ...] = ()
    cited_refs: tuple[CitedReference, ...] = ()

    @property
    def first_author(self) -> Optional[str]:
        return self.authors[0] if self.authors else None


@dataclass(frozen=True)
class ParseDiagnostic:
    """A per-line / per-record parsing message. ``error`` means the record was dropped."""

    line_number: int
    record_index: int
    message: str
    severity: str = "warn"  # warn | error

    def __str__(self) -> str:
        return f"{self.severity}: line {self.line_number}, record {self.record_index}: {self.message}"


@dataclass(frozen=True)
class DocumentSet:
    """A labeled subset of corpus record ids."""

    label: str
    member_ids: frozenset[str]

    def __len__(self) -> int:
        return len(self.member_ids)

    def sorted_ids(self) -> list[str]:
        return sorted(self.member_ids)


@dataclass(frozen=True)
class Corpus:
    """Immutable id -> record mapping plus source provenance."""

    records: Mapping[str, BibRecord]
    provenance: tuple[str, ...] = ()

    def __len__(self) -> int:
        return len(self.records)

    def __contains__(self, record_id: str) -> bool:
        return record_id in self.records

    def __getitem__(self, record_id: str) -> BibRecord:
        return self.records[record_id]

    def get(self, record_id: str) -> Optional[BibRecord]:
        return self.records.get(record_id)

    def iter_set(self, docset: DocumentSet) -> Iterator[BibRecord]:
        """Records of a document set in sorted-id order (deterministic)."""
        for rid in docset.sorted_ids():
            rec = self.records.get(rid)
            if rec is not None:
                yield rec

    def all_ids(self) -> frozenset[str]:
        return frozenset(self.records)


def build_corpus(
    records: Iterable[BibRecord], provenance: Iterable[str] = ()
) -> tuple[Corpus, list[ParseDiagnostic]]:
    """Assemble a corpus, deduplicating ids (first occurrence wins, warn per duplicate)."""
    table: dict[str, BibRecord] = {}
    diagnostics: list[ParseDiagnostic] = []
    for index, rec in enumerate(records):
        if rec.id in table:
            diagnostics.append(
                ParseDiagnostic(1, index, f"duplicate record id {rec.id!r} dropped", "warn")
            )
            continue
        table[rec.id] = rec
    corpus = Corpus(records=MappingProxyType(table), provenance=tuple(provenance))
    return corpus, diagnostics


def restrict_years(docset: DocumentSet, corpus: Corpus, year_from: int, year_to: int) -> DocumentSet:
    """Keep members published within [year_from, year_to]; unknown years are excluded."""
    if year_from > year_to:
        raise ValueError(f"invalid year window: {year_from} > {year_to}")
    kept = frozenset(
        rid
        for rid in docset.member_ids
        if rid in corpus
        and corpus[rid].year is not None
        and year_from <= corpus[rid].year <= year_to
    )
    return DocumentSet(label=docset.label, member_ids=kept)


# ---------------------------------------------------------------------------
# JSONL cache

def _ref_to_dict(ref: CitedReference) -> dict:
    return {
        "raw": ref.raw,
        "first_author": ref.first_author,
        "year": ref.year,
        "source": ref.source,
    }


def record_to_dict(rec: BibRecord) -> dict:
    """Stable-key-order dict form used by the cache and JSONL output."""
    return {
        "id": rec.id,
        "doc_type": rec.doc_type,
        "year": rec.year,
        "title": rec.title,
        "source": rec.source,
        "authors": list(rec.authors),
        "cited_refs": [_ref_to_dict(r) for r in rec.cited_refs],
    }


def record_from_dict(data: dict) -> BibRecord:
    refs = []
    for item in data.get("cited_refs", ()):
        if isinstance(item, str):
            refs.append(CitedReference(raw=item))
        else:
            refs.append(
                CitedReference(
                    raw=item["raw"],
                    first_author=item.get("first_author"),
                    year=item.get("year"),
                    source=item.get("source"),
                )
            )
    year = data.get("year")
    return BibRecord(
        id=str(data["id"]),
        doc_type=data.get("doc_type", "") or "",
        year=int(year) if year is not None else None,
        title=data.get("title", "") or "",
        source=data.get("source", "") or "",
        authors=tuple(data.get("authors", ())),
        cited_refs=tuple(refs),
    )


def save_cache(corpus: Corpus, path: str | Path) -> None:
    """Write the corpus as JSONL, one record per line, bit-exact across runs."""
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        for rid in sorted(corpus.records):
            fh.write(json.dumps(record_to_dict(corpus.records[rid]), ensure_ascii=True))
            fh.write("\n")


def load_cache(path: str | Path) -> Corpus:
    path = Path(path)
    records = []
    with path.open("r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(record_from_dict(json.loads(line)))
    corpus, _ = build_corpus(records, provenance=(str(path),))
    return corpus


def file_sha256(path: str | Path) -> str:
    digest = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest(path: str | Path, input_paths: Iterable[str | Path], n_records: int) -> None:
    """Provenance manifest for a cache: input hashes and tool version (no timestamps)."""
    inputs = []
    for p in input_paths:
        p = Path(p)
        inputs.append({"path": p.name, "sha256": file_sha256(p), "bytes": p.stat().st_size})
    manifest = {
        "schema": CACHE_SCHEMA,
        "tool": "fieldlens",
        "tool_version": __version__,
        "records": n_records,
        "inputs": inputs,
    }
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
