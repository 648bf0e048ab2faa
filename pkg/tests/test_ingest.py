"""Export parsing, author keys, cited-reference parsing, type filtering."""
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fieldlens.corpus import BibRecord, build_corpus
from fieldlens.ingest import (
    ExportFormatError,
    RawExportFile,
    filter_research_articles,
    normalize_author_key,
    parse_cited_reference,
    parse_export,
)
from fieldlens.synth import SetSpec, SynthSpec, generate, serialize_tagged

TAGGED_THREE_RECORDS = """FN fieldlens tagged export
VR 1.0
AU Glanzel, W
TI Mapping the field with care
SO SCIENTOMETRICS
DT Article
PY 2005
CR GARFIELD E, 1955, SCIENCE, V122, P108
UT R1
ER

AU Milojević, Staša
   Leydesdorff, Loet
TI A title wrapped
   onto a second line
SO SCIENTOMETRICS
DT Article
CR LEYDESDORFF L, 2007, SCIENTOMETRICS, V71, P391
   EGGHE L, 2006, SCIENTOMETRICS, V69, P131
UT R2
ER

AU Small, H
TI Another study entirely
SO SCIENTOMETRICS
DT Article
PY 2008
UT R3
ER
EF
"""


class TestTaggedParsing:
    def test_three_records_one_missing_year(self, tmp_path):
        path = tmp_path / "export.txt"
        path.write_text(TAGGED_THREE_RECORDS, encoding="utf-8")
        records, diagnostics = parse_export(path)
        assert len(records) == 3
        warns = [d for d in diagnostics if d.severity == "warn"]
        assert len(warns) == 1
        assert "year" in warns[0].message
        by_id = {r.id: r for r in records}
        assert by_id["R2"].year is None
        assert by_id["R1"].year == 2005
        assert by_id["R2"].title == "A title wrapped onto a second line"
        assert by_id["R2"].authors == ("MILOJEVIC S", "LEYDESDORFF L")
        assert [ref.source for ref in by_id["R2"].cited_refs] == ["SCIENTOMETRICS"] * 2

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.txt"
        path.write_text("", encoding="utf-8")
        records, diagnostics = parse_export(path)
        assert records == []
        assert len(diagnostics) == 1
        assert diagnostics[0].severity == "error"
        assert "no records found" in diagnostics[0].message

    def test_record_without_id_dropped(self, tmp_path):
        text = "FN x\nAU A, B\nTI Title\nPY 2001\nER\nAU C, D\nTI Kept\nPY 2002\nUT OK1\nER\nEF\n"
        path = tmp_path / "e.txt"
        path.write_text(text)
        records, diagnostics = parse_export(path)
        assert [r.id for r in records] == ["OK1"]
        assert any(d.severity == "error" and "UT" in d.message for d in diagnostics)

    def test_unparseable_year_warns(self, tmp_path):
        text = "FN x\nAU A, B\nTI T\nPY twenty\nUT X1\nER\nEF\n"
        path = tmp_path / "e.txt"
        path.write_text(text)
        records, diagnostics = parse_export(path)
        assert records[0].year is None
        assert any("year" in d.message for d in diagnostics if d.severity == "warn")

    def test_unterminated_final_record_kept_with_warning(self, tmp_path):
        text = "FN x\nAU A, B\nTI T\nPY 2001\nUT X1\n"
        path = tmp_path / "e.txt"
        path.write_text(text)
        records, diagnostics = parse_export(path)
        assert [r.id for r in records] == ["X1"]
        assert any("not terminated" in d.message for d in diagnostics)

    def test_deterministic(self, tmp_path):
        path = tmp_path / "export.txt"
        path.write_text(TAGGED_THREE_RECORDS, encoding="utf-8")
        first = parse_export(path)
        second = parse_export(path)
        assert first == second

    def test_latin1_fallback(self, tmp_path):
        text = "FN x\nAU Glänzel, W\nTI T\nPY 2001\nUT X1\nER\nEF\n"
        path = tmp_path / "latin.txt"
        path.write_bytes(text.encode("latin-1"))
        records, _ = parse_export(path)
        assert records[0].authors == ("GLANZEL W",)

    def test_round_trip_synthetic(self, tmp_path):
        spec = SynthSpec(
            seed=401,
            sets=(SetSpec(label="RT", n_docs=50, yardstick_citation_prob=0.4),),
        )
        corpus, _ = generate(spec)
        path = tmp_path / "rt.txt"
        serialize_tagged(corpus, path)
        records, diagnostics = parse_export(path)
        reparsed, _ = build_corpus(records)
        assert dict(reparsed.records) == dict(corpus.records)
        assert not diagnostics


class TestFormats:
    def test_missing_file_raises(self, tmp_path):
        with pytest.raises(OSError):
            parse_export(tmp_path / "nope.txt")

    def test_unrecognizable_format(self, tmp_path):
        path = tmp_path / "junk.txt"
        path.write_text("%% not a known export\nsecond line\n")
        with pytest.raises(ExportFormatError) as excinfo:
            parse_export(path)
        assert "not a known export" in excinfo.value.offending_line

    def test_declared_format_mismatch(self, tmp_path):
        path = tmp_path / "t.txt"
        path.write_text(TAGGED_THREE_RECORDS)
        with pytest.raises(ExportFormatError):
            parse_export(RawExportFile(path=str(path), format="csv"))

    def test_csv_parse(self, tmp_path):
        path = tmp_path / "e.csv"
        path.write_text(
            "id,doc_type,year,title,source,authors,cited_refs\n"
            'C1,Article,2005,"Citation patterns, revisited",SCIENTOMETRICS,'
            '"Glanzel, W; Schubert, A","GARFIELD E, 1955, SCIENCE, V122, P108; ANON, REPORT"\n'
            "C2,Editorial,,No refs here,SCIENTOMETRICS,,\n"
        )
        records, diagnostics = parse_export(path)
        assert len(records) == 2
        assert records[0].authors == ("GLANZEL W", "SCHUBERT A")
        assert records[0].title == "Citation patterns, revisited"
        assert len(records[0].cited_refs) == 2
        assert records[0].cited_refs[0].year == 1955
        assert records[1].year is None

    def test_csv_missing_column(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("id,year,title\n1,2000,x\n")
        with pytest.raises(ExportFormatError):
            parse_export(path)

    def test_jsonl_parse(self, tmp_path):
        path = tmp_path / "e.jsonl"
        path.write_text(
            '{"id": "J1", "doc_type": "Article", "year": 2009, "title": "T", '
            '"source": "S", "authors": ["GLANZEL W"], '
            '"cited_refs": ["EGGHE L, 2006, SCIENTOMETRICS, V69, P131"]}\n'
            "not json at all\n"
            '{"title": "missing id"}\n'
        )
        records, diagnostics = parse_export(path)
        assert len(records) == 1
        assert records[0].cited_refs[0].first_author == "EGGHE L"
        errors = [d for d in diagnostics if d.severity == "error"]
        assert len(errors) == 2

    def test_jsonl_raw_author_names_normalized(self, tmp_path):
        path = tmp_path / "e.jsonl"
        path.write_text(
            '{"id": "J1", "year": 2009, "title": "T", "source": "S", '
            '"authors": ["Milojević, Staša", "van den Besselaar, Peter"]}\n'
        )
        records, _ = parse_export(path)
        assert records[0].authors == ("MILOJEVIC S", "VAN DEN BESSELAAR P")

    def test_all_initials_mode(self, tmp_path):
        path = tmp_path / "t.txt"
        path.write_text("FN x\nAU van Raan, A F J\nTI T\nPY 2001\nUT X1\nER\nEF\n")
        first_only, _ = parse_export(path)
        full_block, _ = parse_export(path, all_initials=True)
        assert first_only[0].authors == ("VAN RAAN A",)
        assert full_block[0].authors == ("VAN RAAN AFJ",)


class TestAuthorKeys:
    @pytest.mark.parametrize(
        "name,expected",
        [
            ("Milojević, Staša", "MILOJEVIC S"),
            ("van den Besselaar, Peter", "VAN DEN BESSELAAR P"),
            ("GLANZEL W", "GLANZEL W"),
            ("Garfield, E.", "GARFIELD E"),
            ("O'Brien, Kevin", "OBRIEN K"),
            ("Smith Jr., John", "SMITH J"),
            ("Garcia-Marquez, G", "GARCIA-MARQUEZ G"),
            ("ANON", "ANON"),
        ],
    )
    def test_known_forms(self, name, expected):
        assert normalize_author_key(name) == expected

    def test_all_initials_flag(self):
        assert normalize_author_key("VAN RAAN AFJ", all_initials=True) == "VAN RAAN AFJ"
        assert normalize_author_key("VAN RAAN AFJ") == "VAN RAAN A"
        assert normalize_author_key("Glanzel, Wolfgang Maria", all_initials=True) == "GLANZEL WM"

    def test_empty_raises(self):
        with pytest.raises(ValueError):
            normalize_author_key("")
        with pytest.raises(ValueError):
            normalize_author_key("   ")

    @given(
        st.text(
            alphabet=st.characters(
                whitelist_categories=("Lu", "Ll"), whitelist_characters=" ,.-'éüßžćč"
            ),
            min_size=1,
            max_size=40,
        )
    )
    @settings(max_examples=300)
    def test_idempotent(self, name):
        try:
            once = normalize_author_key(name)
        except ValueError:
            return
        assert normalize_author_key(once) == once

    @given(st.text(min_size=1, max_size=40))
    @settings(max_examples=300)
    def test_idempotent_arbitrary_text(self, name):
        try:
            once = normalize_author_key(name)
        except ValueError:
            return
        assert normalize_author_key(once) == once


class TestCitedReferences:
    def test_garfield(self):
        ref = parse_cited_reference("GARFIELD E, 1955, SCIENCE, V122, P108", 2008)
        assert (ref.first_author, ref.year, ref.source) == ("GARFIELD E", 1955, "SCIENCE")

    def test_missing_fields(self):
        ref = parse_cited_reference("ANON, REPORT")
        assert ref.first_author == "ANON"
        assert ref.year is None
        assert ref.source is None
        assert ref.raw == "ANON, REPORT"

    def test_leydesdorff(self):
        ref = parse_cited_reference("LEYDESDORFF L, 2007, SCIENTOMETRICS, V71, P391")
        assert (ref.first_author, ref.year, ref.source) == ("LEYDESDORFF L", 2007, "SCIENTOMETRICS")

    def test_year_first_reference(self):
        ref = parse_cited_reference("1986, LECT NOTES MATH, V1206, P1")
        assert ref.first_author is None
        assert ref.year == 1986
        assert ref.source == "LECT NOTES MATH"

    def test_citing_year_prefers_plausible_year(self):
        # A stray future year is skipped when an older candidate exists.
        ref = parse_cited_reference("DOE J, 2093, 1999, JOURNAL X", citing_year=2005)
        assert ref.year == 1999

    @given(st.text(max_size=120))
    @settings(max_examples=500)
    def test_never_fails_and_keeps_raw(self, raw):
        ref = parse_cited_reference(raw, citing_year=2010)
        assert ref.raw == raw


class TestResearchArticleFilter:
    @staticmethod
    def _rec(i, doc_type):
        return BibRecord(id=f"r{i}", doc_type=doc_type, title="t")

    def test_empty(self):
        assert filter_research_articles([]) == []

    def test_mixed_types(self):
        records = (
            [self._rec(i, "Article") for i in range(4)]
            + [self._rec(4 + i, "Proceedings Paper") for i in range(2)]
            + [self._rec(6 + i, "Editorial") for i in range(4)]
        )
        kept = filter_research_articles(records)
        assert len(kept) == 6
        assert all(r.doc_type != "Editorial" for r in kept)

    def test_all_reviews_filtered(self):
        records = [self._rec(i, "Review") for i in range(5)]
        assert filter_research_articles(records) == []

    def test_compound_type_matches(self):
        records = [self._rec(0, "Article; Proceedings Paper")]
        assert len(filter_research_articles(records)) == 1

    def test_output_is_subsequence(self):
        records = [self._rec(i, t) for i, t in enumerate(["Article", "Review", "Article"])]
        kept = filter_research_articles(records)
        ids = [r.id for r in records]
        assert [ids.index(r.id) for r in kept] == sorted(ids.index(r.id) for r in kept)
