"""Command-line surface: parse | delineate | analyze | synth | report.

Exit codes: 0 success, 2 input/parse/spec error, 3 review incomplete,
4 analysis precondition failure. Diagnostics go to stderr as structured
lines; results land in the paths the user names.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path
from typing import Mapping, Optional

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover - depends on interpreter
    import tomli as tomllib

from . import __version__
from .corpus import DocumentSet, build_corpus, load_cache, save_cache, write_manifest
from .delineate import DelineationConfig, ReviewError, delineate
from .ingest import ExportFormatError, filter_research_articles, parse_export
from .report import AnalysisOptions, build_report, write_report_files
from .synth import SetSpec, SynthSpec, generate, serialize_tagged
from .textstats import TextConfig, load_variant_table, load_word_list

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_REVIEW = 3
EXIT_PRECONDITION = 4


def load_config_file(path: str | Path) -> dict:
    path = Path(path)
    if path.suffix.lower() == ".toml":
        with path.open("rb") as fh:
            return tomllib.load(fh)
    return json.loads(path.read_text(encoding="utf-8"))


def text_config_from(config: Mapping) -> TextConfig:
    section = config.get("text", {})
    kwargs = {}
    if "stopwords" in section:
        kwargs["stopwords"] = load_word_list(section["stopwords"])
    if "generalwords" in section:
        kwargs["general_words"] = load_word_list(section["generalwords"])
    if "variants" in section:
        kwargs["variant_table"] = load_variant_table(section["variants"])
    for key in ("keep_hyphens", "phrase_max_len", "phrase_min_count", "count_words_within_phrases"):
        if key in section:
            kwargs[key] = section[key]
    return TextConfig.default(**kwargs)


def _venue_aliases(config: Mapping) -> Optional[dict]:
    aliases = config.get("venues", {}).get("aliases")
    return dict(aliases) if aliases else None


def _read_id_file(path: str | Path) -> frozenset[str]:
    ids = set()
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line:
            ids.add(line)
    return frozenset(ids)


def _write_id_file(path: Path, ids) -> None:
    path.write_text("".join(f"{rid}\n" for rid in sorted(ids)), encoding="utf-8")


# ---------------------------------------------------------------------------
# Subcommands

def cmd_parse(args) -> int:
    all_records = []
    n_warn = n_error = 0
    for input_path in args.inputs:
        records, diagnostics = parse_export(
            input_path, format=args.input_format, all_initials=args.all_initials
        )
        for diag in diagnostics:
            print(f"{input_path}: {diag}", file=sys.stderr)
            if diag.severity == "error":
                n_error += 1
            else:
                n_warn += 1
        all_records.extend(records)

    if args.research_only:
        all_records = filter_research_articles(all_records)

    corpus, dedup_warns = build_corpus(all_records, provenance=tuple(map(str, args.inputs)))
    for diag in dedup_warns:
        print(f"{args.cache}: {diag}", file=sys.stderr)
        n_warn += 1

    save_cache(corpus, args.cache)
    manifest_path = args.manifest or f"{args.cache}.manifest.json"
    write_manifest(manifest_path, args.inputs, len(corpus))
    print(f"parsed {len(corpus)} records ({n_warn} warnings, {n_error} errors) -> {args.cache}")
    return EXIT_OK


def cmd_delineate(args) -> int:
    config = load_config_file(args.config)
    section = config.get("delineation")
    if not section or "yardstick_sources" not in section or "venue" not in section:
        print("config must provide delineation.yardstick_sources and delineation.venue",
              file=sys.stderr)
        return EXIT_INPUT
    aliases = _venue_aliases(config)
    dconfig = DelineationConfig.from_dict(section, venue_aliases=aliases)
    venue = section["venue"]

    corpus = load_cache(args.cache)
    from .corpus import normalize_venue

    venue_norm = normalize_venue(venue, aliases)
    venue_records = [
        rec for rec in (corpus[rid] for rid in sorted(corpus.records))
        if normalize_venue(rec.source, aliases) == venue_norm
    ]
    if "doc_types" in section:
        venue_records = filter_research_articles(venue_records, section["doc_types"])

    result, warnings = delineate(venue_records, dconfig, args.review, venue_label=venue)
    for message in warnings:
        print(f"warn: {message}", file=sys.stderr)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    status = "review-complete" if result.review_applied else "review-pending"
    payload = {"schema": "fieldlens-delineation@1", "status": status, **result.to_dict()}
    (out / "delineation.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    _write_id_file(out / "tier1.ids.txt", result.tier1_ids)
    _write_id_file(out / "tier2_candidates.ids.txt", result.tier2_candidate_ids)
    _write_id_file(out / "tier2_accepted.ids.txt", result.tier2_accepted_ids)
    _write_id_file(out / "comparison.ids.txt", result.comparison_ids)
    _write_id_file(out / "audit_sample.ids.txt", result.audit_sample)
    if result.review_applied:
        _write_id_file(out / "specialty.ids.txt", result.specialty_ids())
    print(status)
    return EXIT_OK


def cmd_analyze(args) -> int:
    config = load_config_file(args.config) if args.config else {}
    corpus = load_cache(args.cache)

    docsets = []
    for spec in args.sets:
        label, sep, path = spec.partition("=")
        if not sep or not label or not path:
            print(f"--set expects LABEL=FILE, got {spec!r}", file=sys.stderr)
            return EXIT_INPUT
        docsets.append(DocumentSet(label, _read_id_file(path)))

    options = AnalysisOptions.from_dict(
        config.get("analysis", {}),
        comparison_label=args.comparison,
        replicates=args.replicates,
        seed=args.seed,
        threads=args.threads,
        year_from=args.year_from,
        year_to=args.year_to,
        venue_aliases=_venue_aliases(config),
    )
    text_config = text_config_from(config)

    try:
        report = build_report(corpus, docsets, options, text_config)
    except ValueError as exc:
        print(f"analysis precondition failed: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION

    formats = [f.strip() for f in args.format.split(",") if f.strip()]
    written = write_report_files(report, args.out, formats)
    print(f"wrote {len(written)} files to {args.out}")
    return EXIT_OK


DEFAULT_SYNTH_SPEC = SynthSpec(
    seed=20110820,
    sets=(
        SetSpec(label="CORE-A", n_docs=150, yardstick_citation_prob=0.9,
                shared_vocab_weight=0.7),
        SetSpec(label="CORE-B", n_docs=120, yardstick_citation_prob=0.85,
                shared_vocab_weight=0.7),
        SetSpec(label="MIXED", n_docs=200, yardstick_citation_prob=0.3,
                keyword_title_prob=0.1, shared_vocab_weight=0.5),
        SetSpec(label="OTHER", n_docs=180, yardstick_citation_prob=0.02,
                shared_vocab_weight=0.2),
    ),
)


def cmd_synth(args) -> int:
    if args.spec:
        spec = SynthSpec.from_dict(load_config_file(args.spec))
    else:
        spec = DEFAULT_SYNTH_SPEC
    if args.seed is not None:
        spec = dataclasses.replace(spec, seed=args.seed)

    corpus, truth = generate(spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_cache(corpus, out / "corpus.jsonl")
    if len(corpus):
        serialize_tagged(corpus, out / "corpus.tagged.txt")
    truth.save(out / "groundtruth.json")
    spec_echo = dataclasses.asdict(spec)
    (out / "synth_spec.json").write_text(
        json.dumps(spec_echo, indent=2, sort_keys=True, default=list) + "\n", encoding="utf-8"
    )
    print(f"generated {len(corpus)} records in {args.out}")
    return EXIT_OK


def cmd_report(args) -> int:
    report = json.loads(Path(args.report).read_text(encoding="utf-8"))
    formats = [f.strip() for f in args.format.split(",") if f.strip()]
    written = write_report_files(report, args.out, formats)
    print(f"wrote {len(written)} files to {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Argument parsing

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fieldlens",
        description="Delineate a research specialty inside multi-topic journals "
        "and measure its social and cognitive distinctness.",
    )
    parser.add_argument("--version", action="version", version=f"fieldlens {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", help="parse export files into a corpus cache")
    p.add_argument("inputs", nargs="+", metavar="INPUT")
    p.add_argument("--cache", required=True, help="output JSONL cache path")
    p.add_argument("--manifest", help="manifest path (default: <cache>.manifest.json)")
    p.add_argument("--input-format", default="auto", choices=["auto", "tagged", "csv", "jsonl"])
    p.add_argument("--research-only", action="store_true",
                   help="keep only research-article document types")
    p.add_argument("--all-initials", action="store_true",
                   help="author keys keep the full initials block, not just the first")
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("delineate", help="split a venue into specialty and comparison sets")
    p.add_argument("--cache", required=True)
    p.add_argument("--config", required=True, help="TOML/JSON config with a [delineation] section")
    p.add_argument("--review", help="review CSV (id,verdict,note) for tier-2 candidates")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_delineate)

    p = sub.add_parser("analyze", help="compute all tables and figure data for labeled sets")
    p.add_argument("--cache", required=True)
    p.add_argument("--set", dest="sets", action="append", required=True, metavar="LABEL=FILE",
                   help="document set as a label and an id-list file (repeatable)")
    p.add_argument("--comparison", help="label of the comparison set")
    p.add_argument("--config", help="TOML/JSON config ([analysis]/[text]/[venues] sections)")
    p.add_argument("--replicates", type=int, help="bootstrap replicates")
    p.add_argument("--seed", type=int, help="bootstrap seed")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--year-from", type=int, dest="year_from")
    p.add_argument("--year-to", type=int, dest="year_to")
    p.add_argument("--format", default="csv,json", help="comma list: csv,json,svg")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("synth", help="generate a synthetic corpus with ground truth")
    p.add_argument("--spec", help="SynthSpec JSON/TOML file (default: a small demo spec)")
    p.add_argument("--seed", type=int, help="override the seed from the --spec file")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("report", help="re-render tables/figures from an existing report.json")
    p.add_argument("--report", required=True)
    p.add_argument("--format", default="csv", help="comma list: csv,json,svg")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ReviewError as exc:
        print(f"review incomplete: {exc}", file=sys.stderr)
        for rid in exc.missing_ids:
            print(f"missing-verdict: {rid}", file=sys.stderr)
        return EXIT_REVIEW
    except ExportFormatError as exc:
        print(f"format error: {exc}", file=sys.stderr)
        if exc.offending_line:
            print(f"offending line: {exc.offending_line[:120]}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
