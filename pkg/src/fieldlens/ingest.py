"""Bibliographic export parsing: tagged plaintext, CSV, and JSONL.

Tagged format reference (WoS-style field tags, two letters at line start):

    FN <producer name>      file header, required, first line
    VR 1.0                  optional version line
    AU <name>               author; one per line, continuations indented
    TI <title>              title; continuation lines are joined with a space
    SO <venue>              source venue
    DT <type>               document type ("Article", "Proceedings Paper", ...)
    PY <year>               publication year, 4 digits
    CR <reference>          one cited-reference string per line
    UT <id>                 unique record id (required; record dropped if absent)
    ER                      end of record
    EF                      end of file (optional)

Continuation lines start with whitespace and belong to the open tag: for the
list tags (AU, CR) each continuation is a new item, for scalar tags the text
is appended. Unknown tags are skipped, including their continuations.

CSV exports need the documented header ``id,doc_type,year,title,source,
authors,cited_refs``; the two list columns use "; " as the item separator.
JSONL exports carry one record object per line with the same field names
(``cited_refs`` items may be raw strings or parsed objects).

Encoding is auto-detected: UTF-8 BOM wins, then strict UTF-8, then Latin-1.
"""
from __future__ import annotations

import csv
import io
import json
import re
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .corpus import (
    BibRecord,
    CitedReference,
    ParseDiagnostic,
    fold_ascii,
)

#: Document types counted as research articles (case-insensitive).
DEFAULT_RESEARCH_TYPES = frozenset({"article", "conference paper", "proceedings paper"})

#: Name suffixes stripped in "Last, First" inputs. Not stripped in bare
#: "LAST XX" inputs, where a trailing "JR" is indistinguishable from initials.
_NAME_SUFFIXES = frozenset({"JR", "SR", "II", "III", "IV"})

_TAG_RE = re.compile(r"^([A-Z][A-Z0-9])( (.*))?$")
_YEAR_RE = re.compile(r"^\d{4}$")

CSV_COLUMNS = ("id", "doc_type", "year", "title", "source", "authors", "cited_refs")
CSV_LIST_SEP = "; "

YEAR_MIN, YEAR_MAX = 1800, 2100
_REF_YEAR_MIN, _REF_YEAR_MAX = 1500, 2100


class ExportFormatError(ValueError):
    """The file does not match any recognizable export format."""

    def __init__(self, message: str, offending_line: str = ""):
        super().__init__(message)
        self.offending_line = offending_line


@dataclass(frozen=True)
class RawExportFile:
    path: str
    format: str = "auto"  # auto | tagged | csv | jsonl


# ---------------------------------------------------------------------------
# Author keys

def normalize_author_key(full_name: str, all_initials: bool = False) -> str:
    """Canonical author key: uppercased "LASTNAME F" (last name + first initial).

    "Last, First" inputs keep multi-token surnames intact before the comma;
    comma-less inputs are treated as reference style "LAST F", where a short
    trailing alphabetic token is the initials block. Diacritics are folded to
    ASCII, hyphens inside surnames are preserved, apostrophes are dropped,
    and "Jr."-style suffixes are stripped from the comma form. With
    ``all_initials``, the whole initials block is kept instead of the first
    letter. Idempotent: applying the function to its own output is a no-op.
    """
    if not full_name or not full_name.strip():
        raise ValueError("empty author name")
    text = fold_ascii(full_name).replace(".", " ").replace("'", "").strip()
    if not text:
        raise ValueError("empty author name")
    # One pass can still shorten its own output (an initials block collapses
    # to its first letter only once the text is uppercased), so iterate to a
    # fixed point; each extra pass strictly shortens, so this terminates.
    key = _author_key_pass(text, all_initials)
    while True:
        again = _author_key_pass(key, all_initials)
        if again == key:
            return key
        key = again


def _author_key_pass(text: str, all_initials: bool) -> str:
    def clean(parts):
        # Interior hyphens stay ("GARCIA-MARQUEZ"); edge hyphens would change
        # the initials-block decision between passes, so they go first.
        return [p for p in (t.strip("-") for t in parts) if p]

    block_is_initials = False
    if "," in text:
        last, _, given = text.partition(",")
        given = given.replace(",", " ")
        surname_tokens = [t for t in clean(last.split()) if t.upper() not in _NAME_SUFFIXES]
        given_tokens = [
            t for t in clean(re.split(r"[\s\-]+", given)) if t.upper() not in _NAME_SUFFIXES
        ]
    else:
        tokens = clean(text.split())
        if len(tokens) >= 2 and tokens[-1].isalpha() and len(tokens[-1]) <= 4:
            surname_tokens, given_tokens = tokens[:-1], [tokens[-1]]
            block_is_initials = True
        else:
            surname_tokens, given_tokens = tokens, []

    surname = " ".join(surname_tokens).upper()
    if not surname:
        raise ValueError("empty author name")

    if all_initials and block_is_initials:
        initials = given_tokens[0].upper()
    else:
        letters = [c for c in (_first_alnum(t) for t in given_tokens) if c]
        if not all_initials:
            letters = letters[:1]
        initials = "".join(letters).upper()
    return f"{surname} {initials}" if initials else surname


def _first_alnum(token: str) -> str:
    for ch in token:
        if ch.isalnum():
            return ch
    return ""


# ---------------------------------------------------------------------------
# Cited-reference microformat

def parse_cited_reference(raw: str, citing_year: Optional[int] = None) -> CitedReference:
    """Best-effort parse of one comma-delimited reference string.

    Extracts the first-author key, the first plausible 4-digit year, and the
    source field that follows the year. Components that cannot be parsed stay
    unset; the raw text is always retained verbatim. Never raises.
    """
    text = raw.strip()
    if not text:
        return CitedReference(raw=raw)
    parts = [p.strip() for p in text.split(",")]

    year_idx: Optional[int] = None
    candidates = [
        i
        for i, p in enumerate(parts)
        if _YEAR_RE.match(p) and _REF_YEAR_MIN <= int(p) <= _REF_YEAR_MAX
    ]
    if candidates:
        year_idx = candidates[0]
        if citing_year is not None:
            # Prefer a year that does not postdate the citing article; refs to
            # in-press work may legitimately sit one year ahead.
            plausible = [i for i in candidates if int(parts[i]) <= citing_year + 1]
            if plausible:
                year_idx = plausible[0]
    year = int(parts[year_idx]) if year_idx is not None else None

    source: Optional[str] = None
    if year_idx is not None and year_idx + 1 < len(parts) and parts[year_idx + 1]:
        source = fold_ascii(parts[year_idx + 1]).upper().strip()

    author: Optional[str] = None
    if parts[0] and year_idx != 0:
        try:
            author = normalize_author_key(parts[0])
        except ValueError:
            author = None

    return CitedReference(raw=raw, first_author=author, year=year, source=source)


# ---------------------------------------------------------------------------
# Document-type filter

def filter_research_articles(
    records: Sequence[BibRecord], allowed: Iterable[str] = DEFAULT_RESEARCH_TYPES
) -> list[BibRecord]:
    """Keep records whose document type is on the allow-list, order preserved.

    Compound types ("Article; Proceedings Paper") match if any component does.
    """
    allowed_lower = {a.strip().lower() for a in allowed}

    def matches(doc_type: str) -> bool:
        return any(part.strip().lower() in allowed_lower for part in doc_type.split(";"))

    return [rec for rec in records if matches(rec.doc_type)]


# ---------------------------------------------------------------------------
# File reading and format detection

def read_export_text(path: str | Path) -> str:
    data = Path(path).read_bytes()
    if data.startswith(b"\xef\xbb\xbf"):
        return data.decode("utf-8-sig")
    try:
        return data.decode("utf-8")
    except UnicodeDecodeError:
        return data.decode("latin-1")


def detect_format(first_line: str) -> str:
    line = first_line.strip()
    if line.startswith("FN ") or line == "FN":
        return "tagged"
    if line.startswith("{"):
        return "jsonl"
    columns = [c.strip().strip('"').lower() for c in line.split(",")]
    if "," in line and "id" in columns:
        return "csv"
    raise ExportFormatError(f"unrecognizable export format: {line[:80]!r}", line)


def parse_export(
    file: RawExportFile | str | Path, format: str = "auto", all_initials: bool = False
) -> tuple[list[BibRecord], list[ParseDiagnostic]]:
    """Parse one export file into records plus diagnostics.

    Well-formed records appear exactly once, in file order. Malformed records
    yield an error diagnostic and are skipped; malformed individual fields
    yield a warn diagnostic and are left empty. Raises OSError for unreadable
    files and ExportFormatError when the content matches no known format.
    ``all_initials`` switches author keys from "LAST F" to "LAST FM".
    """
    if isinstance(file, RawExportFile):
        path, declared = Path(file.path), file.format
    else:
        path, declared = Path(file), format
    text = read_export_text(path)

    lines = text.split("\n")
    first_content = next((ln for ln in lines if ln.strip()), None)
    if first_content is None:
        return [], [ParseDiagnostic(1, 0, "no records found", "error")]

    detected = detect_format(first_content)
    if declared not in ("auto", detected):
        raise ExportFormatError(
            f"file does not look like {declared!r} (detected {detected!r})", first_content
        )

    if detected == "tagged":
        records, diagnostics = _parse_tagged(lines, all_initials)
    elif detected == "csv":
        records, diagnostics = _parse_csv(text, all_initials)
    else:
        records, diagnostics = _parse_jsonl(lines, all_initials)

    if not records and not any(d.severity == "error" for d in diagnostics):
        diagnostics.append(ParseDiagnostic(1, 0, "no records found", "error"))
    return records, diagnostics


# ---------------------------------------------------------------------------
# Tagged parser

#: Tags whose continuation lines are separate list items.
_LIST_TAGS = {"AU", "CR"}
#: Tags captured into record fields; anything else is skipped.
_KNOWN_TAGS = {"AU", "CR", "TI", "SO", "DT", "PY", "UT"}
_SCALAR_TAGS = _KNOWN_TAGS - _LIST_TAGS


def _parse_tagged(
    lines: list[str], all_initials: bool = False
) -> tuple[list[BibRecord], list[ParseDiagnostic]]:
    records: list[BibRecord] = []
    diagnostics: list[ParseDiagnostic] = []
    record_index = 0

    fields: Optional[dict[str, list[str]]] = None
    open_tag: Optional[str] = None
    record_start_line = 1

    def finalize(end_line: int) -> None:
        nonlocal fields, open_tag, record_index
        if fields is None:
            return
        rec = _build_tagged_record(
            fields, record_start_line, record_index, diagnostics, all_initials
        )
        if rec is not None:
            records.append(rec)
        record_index += 1
        fields = None
        open_tag = None

    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            open_tag = None
            continue
        if line[:1].isspace():
            if fields is None or open_tag is None:
                diagnostics.append(
                    ParseDiagnostic(lineno, record_index, "orphan continuation line ignored", "warn")
                )
                continue
            value = line.strip()
            if open_tag in _LIST_TAGS:
                fields[open_tag].append(value)
            elif open_tag in _SCALAR_TAGS:
                fields[open_tag][-1] += " " + value
            continue

        match = _TAG_RE.match(line.rstrip())
        if not match:
            diagnostics.append(
                ParseDiagnostic(lineno, record_index, f"unrecognized line skipped: {line[:60]!r}", "warn")
            )
            continue
        tag, value = match.group(1), (match.group(3) or "").strip()

        if tag == "ER":
            if fields is None:
                diagnostics.append(
                    ParseDiagnostic(lineno, record_index, "end-of-record tag without open record", "warn")
                )
            finalize(lineno)
            continue
        if tag == "EF":
            if fields is not None:
                diagnostics.append(
                    ParseDiagnostic(lineno, record_index, "record not terminated before end of file", "warn")
                )
                finalize(lineno)
            fields = None
            continue
        if tag in ("FN", "VR") and fields is None:
            continue

        if fields is None:
            fields = {t: [] for t in _KNOWN_TAGS}
            record_start_line = lineno
        if tag not in _KNOWN_TAGS:
            open_tag = None  # skip unknown tag and its continuations
            continue
        if tag in _SCALAR_TAGS and fields[tag]:
            diagnostics.append(
                ParseDiagnostic(lineno, record_index, f"duplicate {tag} tag ignored", "warn")
            )
            open_tag = None
            continue
        fields[tag].append(value)
        open_tag = tag

    if fields is not None:
        diagnostics.append(
            ParseDiagnostic(len(lines), record_index, "record not terminated at end of file", "warn")
        )
        finalize(len(lines))

    return records, diagnostics


def _build_tagged_record(
    fields: dict[str, list[str]],
    lineno: int,
    record_index: int,
    diagnostics: list[ParseDiagnostic],
    all_initials: bool = False,
) -> Optional[BibRecord]:
    record_id = fields["UT"][0].strip() if fields["UT"] else ""
    if not record_id:
        diagnostics.append(
            ParseDiagnostic(lineno, record_index, "record without UT id dropped", "error")
        )
        return None

    year = _parse_year_field(fields["PY"], lineno, record_index, diagnostics)

    authors = []
    for raw_name in fields["AU"]:
        if not raw_name.strip():
            continue
        try:
            authors.append(normalize_author_key(raw_name, all_initials))
        except ValueError:
            diagnostics.append(
                ParseDiagnostic(lineno, record_index, f"unusable author name {raw_name!r}", "warn")
            )
    if not authors:
        diagnostics.append(ParseDiagnostic(lineno, record_index, "record has no authors", "warn"))

    refs = []
    for raw_ref in fields["CR"]:
        if not raw_ref.strip():
            continue
        ref = parse_cited_reference(raw_ref, citing_year=year)
        if ref.is_unparsed():
            diagnostics.append(
                ParseDiagnostic(lineno, record_index, f"unparseable cited reference {raw_ref[:60]!r}", "warn")
            )
        refs.append(ref)

    return BibRecord(
        id=record_id,
        doc_type=fields["DT"][0] if fields["DT"] else "",
        year=year,
        title=fields["TI"][0] if fields["TI"] else "",
        source=fields["SO"][0] if fields["SO"] else "",
        authors=tuple(authors),
        cited_refs=tuple(refs),
    )


def _parse_year_field(
    values: list[str], lineno: int, record_index: int, diagnostics: list[ParseDiagnostic]
) -> Optional[int]:
    if not values:
        diagnostics.append(ParseDiagnostic(lineno, record_index, "missing publication year", "warn"))
        return None
    raw = values[0].strip()
    try:
        year = int(raw)
    except ValueError:
        diagnostics.append(
            ParseDiagnostic(lineno, record_index, f"unparseable publication year {raw!r}", "warn")
        )
        return None
    if not YEAR_MIN <= year <= YEAR_MAX:
        diagnostics.append(
            ParseDiagnostic(lineno, record_index, f"implausible publication year {year}", "warn")
        )
        return None
    return year


# ---------------------------------------------------------------------------
# CSV parser

def _parse_csv(
    text: str, all_initials: bool = False
) -> tuple[list[BibRecord], list[ParseDiagnostic]]:
    records: list[BibRecord] = []
    diagnostics: list[ParseDiagnostic] = []
    reader = csv.DictReader(io.StringIO(text))
    header = reader.fieldnames or []
    missing = [c for c in CSV_COLUMNS if c not in header]
    if missing:
        raise ExportFormatError(f"CSV header missing columns: {', '.join(missing)}", ",".join(header))

    for index, row in enumerate(reader):
        lineno = index + 2  # header is line 1
        record_id = (row.get("id") or "").strip()
        if not record_id:
            diagnostics.append(ParseDiagnostic(lineno, index, "row without id dropped", "error"))
            continue
        raw_year = (row.get("year") or "").strip()
        year: Optional[int] = None
        if raw_year:
            year = _parse_year_field([raw_year], lineno, index, diagnostics)

        authors = []
        for name in _split_list(row.get("authors")):
            try:
                authors.append(normalize_author_key(name, all_initials))
            except ValueError:
                diagnostics.append(ParseDiagnostic(lineno, index, f"unusable author name {name!r}", "warn"))

        refs = tuple(
            parse_cited_reference(raw, citing_year=year) for raw in _split_list(row.get("cited_refs"))
        )
        records.append(
            BibRecord(
                id=record_id,
                doc_type=(row.get("doc_type") or "").strip(),
                year=year,
                title=(row.get("title") or "").strip(),
                source=(row.get("source") or "").strip(),
                authors=tuple(authors),
                cited_refs=refs,
            )
        )
    return records, diagnostics


def _split_list(value: Optional[str]) -> list[str]:
    if not value:
        return []
    return [item.strip() for item in value.split(CSV_LIST_SEP.strip()) if item.strip()]


# ---------------------------------------------------------------------------
# JSONL parser

def _parse_jsonl(
    lines: list[str], all_initials: bool = False
) -> tuple[list[BibRecord], list[ParseDiagnostic]]:
    from .corpus import record_from_dict

    records: list[BibRecord] = []
    diagnostics: list[ParseDiagnostic] = []
    index = 0
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            data = json.loads(line)
        except json.JSONDecodeError as exc:
            diagnostics.append(ParseDiagnostic(lineno, index, f"invalid JSON: {exc.msg}", "error"))
            index += 1
            continue
        if not isinstance(data, dict) or not str(data.get("id") or "").strip():
            diagnostics.append(ParseDiagnostic(lineno, index, "record without id dropped", "error"))
            index += 1
            continue
        rec = record_from_dict(data)
        if rec.year is not None and not YEAR_MIN <= rec.year <= YEAR_MAX:
            diagnostics.append(
                ParseDiagnostic(lineno, index, f"implausible publication year {rec.year}", "warn")
            )
            rec = replace(rec, year=None)
        # Input names may be raw; keys are idempotent, so renormalizing our
        # own cache output is a no-op.
        authors = []
        for name in rec.authors:
            try:
                authors.append(normalize_author_key(name, all_initials))
            except ValueError:
                diagnostics.append(
                    ParseDiagnostic(lineno, index, f"unusable author name {name!r}", "warn")
                )
        if tuple(authors) != rec.authors:
            rec = replace(rec, authors=tuple(authors))
        # Re-parse refs that arrived as raw strings only.
        if any(r.is_unparsed() and r.raw.strip() for r in rec.cited_refs):
            refs = tuple(
                parse_cited_reference(r.raw, citing_year=rec.year) if r.is_unparsed() else r
                for r in rec.cited_refs
            )
            rec = replace(rec, cited_refs=refs)
        records.append(rec)
        index += 1
    return records, diagnostics
