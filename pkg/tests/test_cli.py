"""CLI surface: exit codes, review flow, output determinism, CSV integrity."""
import csv
import json
from pathlib import Path

import pytest

from fieldlens.cli import main

SYNTH_SPEC = {
    "seed": 808,
    "yardstick_sources": ["SCIENTOMETRICS"],
    "sets": [
        {"label": "VEN", "n_docs": 120, "yardstick_citation_prob": 0.4,
         "keyword_title_prob": 0.15, "year_range": [1985, 2011]},
        {"label": "CORE", "n_docs": 80, "yardstick_citation_prob": 0.9},
    ],
}

DELIN_CONFIG = {
    "delineation": {
        "venue": "VEN",
        "yardstick_sources": ["SCIENTOMETRICS"],
        "min_year": 1982,
    }
}


@pytest.fixture()
def workspace(tmp_path):
    """Synthetic corpus files plus a parsed cache, ready for delineate/analyze."""
    spec_path = tmp_path / "spec.json"
    spec_path.write_text(json.dumps(SYNTH_SPEC))
    assert main(["synth", "--spec", str(spec_path), "--out", str(tmp_path / "synth")]) == 0
    cache = tmp_path / "cache.jsonl"
    assert main(["parse", str(tmp_path / "synth" / "corpus.tagged.txt"),
                 "--cache", str(cache)]) == 0
    config = tmp_path / "config.json"
    config.write_text(json.dumps(DELIN_CONFIG))
    return tmp_path


def _write_review(path, candidate_file, reject_every=4):
    ids = [l.strip() for l in Path(candidate_file).read_text().splitlines() if l.strip()]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "verdict", "note"])
        for i, rid in enumerate(ids):
            writer.writerow([rid, "reject" if i % reject_every == 0 else "accept", ""])
    return ids


class TestParseCommand:
    def test_valid_fixture_exit_zero(self, workspace):
        assert (workspace / "cache.jsonl").exists()
        assert (workspace / "cache.jsonl.manifest.json").exists()

    def test_missing_file_exit_two(self, tmp_path, capsys):
        rc = main(["parse", str(tmp_path / "missing.txt"), "--cache", str(tmp_path / "c.jsonl")])
        assert rc == 2
        assert "missing.txt" in capsys.readouterr().err

    def test_bad_record_warn_count_in_summary(self, tmp_path, capsys):
        export = tmp_path / "e.txt"
        export.write_text(
            "FN x\nAU A, B\nTI ok\nPY 2000\nUT id1\nER\n"
            "AU C, D\nTI bad year\nPY 20xx\nUT id2\nER\nEF\n"
        )
        rc = main(["parse", str(export), "--cache", str(tmp_path / "c.jsonl")])
        captured = capsys.readouterr()
        assert rc == 0
        assert "2 records (1 warnings, 0 errors)" in captured.out

    def test_garbage_exit_two(self, tmp_path, capsys):
        export = tmp_path / "e.txt"
        export.write_text("%%% nothing recognizable\n")
        rc = main(["parse", str(export), "--cache", str(tmp_path / "c.jsonl")])
        assert rc == 2
        assert "format error" in capsys.readouterr().err


class TestDelineateCommand:
    def test_pending_then_complete(self, workspace, capsys):
        out = workspace / "del"
        rc = main(["delineate", "--cache", str(workspace / "cache.jsonl"),
                   "--config", str(workspace / "config.json"), "--out", str(out)])
        assert rc == 0
        assert "review-pending" in capsys.readouterr().out
        payload = json.loads((out / "delineation.json").read_text())
        assert payload["status"] == "review-pending"
        for name in ("tier1", "tier2_candidates", "tier2_accepted", "comparison"):
            assert (out / f"{name}.ids.txt").exists()

        review = workspace / "review.csv"
        _write_review(review, out / "tier2_candidates.ids.txt")
        out2 = workspace / "del2"
        rc = main(["delineate", "--cache", str(workspace / "cache.jsonl"),
                   "--config", str(workspace / "config.json"),
                   "--review", str(review), "--out", str(out2)])
        assert rc == 0
        assert "review-complete" in capsys.readouterr().out
        assert (out2 / "specialty.ids.txt").exists()

    def test_partition_matches_ground_truth(self, workspace):
        truth = json.loads((workspace / "synth" / "groundtruth.json").read_text())["VEN"]
        out = workspace / "del"
        main(["delineate", "--cache", str(workspace / "cache.jsonl"),
              "--config", str(workspace / "config.json"), "--out", str(out)])
        payload = json.loads((out / "delineation.json").read_text())
        assert set(payload["tier1_ids"]) == set(truth["yardstick_doc_ids"])
        expected_t2 = set(truth["keyword_doc_ids"]) - set(truth["yardstick_doc_ids"])
        assert set(payload["tier2_candidate_ids"]) == expected_t2

    def test_incomplete_review_exit_three(self, workspace, capsys):
        out = workspace / "del"
        main(["delineate", "--cache", str(workspace / "cache.jsonl"),
              "--config", str(workspace / "config.json"), "--out", str(out)])
        review = workspace / "partial.csv"
        ids = [l.strip() for l in (out / "tier2_candidates.ids.txt").read_text().splitlines()
               if l.strip()]
        review.write_text("id,verdict,note\n" + f"{ids[0]},accept,\n")
        rc = main(["delineate", "--cache", str(workspace / "cache.jsonl"),
                   "--config", str(workspace / "config.json"),
                   "--review", str(review), "--out", str(workspace / "del3")])
        assert rc == 3
        err = capsys.readouterr().err
        assert "missing-verdict" in err

    def test_empty_venue_four_empty_sets(self, workspace):
        config = workspace / "empty_cfg.json"
        config.write_text(json.dumps({
            "delineation": {"venue": "NO SUCH VENUE", "yardstick_sources": ["SCIENTOMETRICS"]}
        }))
        out = workspace / "del_empty"
        rc = main(["delineate", "--cache", str(workspace / "cache.jsonl"),
                   "--config", str(config), "--out", str(out)])
        assert rc == 0
        payload = json.loads((out / "delineation.json").read_text())
        for key in ("tier1_ids", "tier2_candidate_ids", "tier2_accepted_ids", "comparison_ids"):
            assert payload[key] == []


def _delineated(workspace):
    out = workspace / "del"
    main(["delineate", "--cache", str(workspace / "cache.jsonl"),
          "--config", str(workspace / "config.json"), "--out", str(out)])
    review = workspace / "review.csv"
    _write_review(review, out / "tier2_candidates.ids.txt")
    final = workspace / "final"
    main(["delineate", "--cache", str(workspace / "cache.jsonl"),
          "--config", str(workspace / "config.json"),
          "--review", str(review), "--out", str(final)])
    core = workspace / "core.ids.txt"
    truth = json.loads((workspace / "synth" / "groundtruth.json").read_text())
    core.write_text("".join(i + "\n" for i in truth["CORE"]["doc_ids"]))
    return final, core


class TestAnalyzeCommand:
    def _analyze(self, workspace, out, extra=()):
        final, core = _delineated(workspace)
        return main([
            "analyze", "--cache", str(workspace / "cache.jsonl"),
            "--set", f"CORE={core}",
            "--set", f"VEN-IN={final / 'specialty.ids.txt'}",
            "--set", f"VEN-OUT={final / 'comparison.ids.txt'}",
            "--comparison", "VEN-OUT",
            "--replicates", "20", "--seed", "5",
            "--out", str(out), *extra,
        ])

    def test_report_and_tables_written(self, workspace):
        out = workspace / "ana"
        assert self._analyze(workspace, out) == 0
        report = json.loads((out / "report.json").read_text())
        assert report["schema"].startswith("fieldlens-report@")
        assert report["comparison_label"] == "VEN-OUT"
        assert len(report["title_cosine_specialty"]) == 1  # CORE x VEN-IN
        assert len(report["title_cosine_comparison"]) == 2
        assert report["author_overlap"]
        # Every CSV table re-parses and its row count matches the JSON payload.
        def rows_of(name):
            with open(out / name, newline="") as fh:
                return list(csv.DictReader(fh))

        labels = [s["label"] for s in report["sets"]]
        expected_rows = {
            "table_authors.csv": len(report["author_counts"]),
            "table_author_overlap.csv": len(report["author_overlap"]),
            "table_title_cosine_specialty.csv": len(report["title_cosine_specialty"]),
            "table_title_cosine_comparison.csv": len(report["title_cosine_comparison"]),
            "table_dominant_terms.csv": len(report["dominant_terms"]),
            "table_source_shares.csv": len(report["source_shares"]),
            "table_source_cosine_specialty.csv": len(report["source_cosine_specialty"]),
            "table_source_cosine_comparison.csv": len(report["source_cosine_comparison"]),
            "table_top_cited_authors.csv": sum(
                len(report["top_cited_first_authors"][lb]) for lb in labels
            ),
            "table_mean_refs.csv": len(labels),
        }
        for name, expected in expected_rows.items():
            assert len(rows_of(name)) == expected, name

    def test_identical_sets_cosine_one(self, workspace, tmp_path):
        truth = json.loads((workspace / "synth" / "groundtruth.json").read_text())
        ids = tmp_path / "ids.txt"
        ids.write_text("".join(i + "\n" for i in truth["CORE"]["doc_ids"]))
        out = workspace / "twins"
        rc = main(["analyze", "--cache", str(workspace / "cache.jsonl"),
                   "--set", f"L={ids}", "--set", f"R={ids}",
                   "--replicates", "5", "--seed", "1", "--out", str(out)])
        assert rc == 0
        report = json.loads((out / "report.json").read_text())
        (entry,) = report["title_cosine_specialty"]
        assert entry["value"] == pytest.approx(1.0, abs=1e-12)

    def test_fewer_than_two_sets_exit_four(self, workspace, tmp_path, capsys):
        ids = tmp_path / "ids.txt"
        ids.write_text("S01-000000\n")
        rc = main(["analyze", "--cache", str(workspace / "cache.jsonl"),
                   "--set", f"ONLY={ids}", "--out", str(tmp_path / "x")])
        assert rc == 4
        assert "precondition" in capsys.readouterr().err

    def test_unknown_comparison_exit_four(self, workspace, tmp_path):
        ids = tmp_path / "ids.txt"
        ids.write_text("S01-000000\n")
        rc = main(["analyze", "--cache", str(workspace / "cache.jsonl"),
                   "--set", f"A={ids}", "--set", f"B={ids}",
                   "--comparison", "NOPE", "--out", str(tmp_path / "x")])
        assert rc == 4

    def test_byte_identical_reruns_and_threads(self, workspace):
        out1, out2 = workspace / "d1", workspace / "d2"
        assert self._analyze(workspace, out1) == 0
        assert self._analyze(workspace, out2, extra=("--threads", "3")) == 0
        files1 = sorted(p.name for p in out1.iterdir())
        files2 = sorted(p.name for p in out2.iterdir())
        assert files1 == files2
        for name in files1:
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes(), name


class TestSynthCommand:
    def test_default_spec_files_created(self, tmp_path):
        rc = main(["synth", "--out", str(tmp_path / "s")])
        assert rc == 0
        for name in ("corpus.jsonl", "corpus.tagged.txt", "groundtruth.json", "synth_spec.json"):
            assert (tmp_path / "s" / name).exists()

    def test_same_seed_identical_bytes(self, tmp_path):
        main(["synth", "--out", str(tmp_path / "a"), "--seed", "321"])
        main(["synth", "--out", str(tmp_path / "b"), "--seed", "321"])
        for name in ("corpus.jsonl", "corpus.tagged.txt", "groundtruth.json"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_invalid_probability_exit_two(self, tmp_path, capsys):
        spec = tmp_path / "bad.json"
        spec.write_text(json.dumps({
            "seed": 1,
            "sets": [{"label": "X", "n_docs": 3, "yardstick_citation_prob": 1.5}],
        }))
        rc = main(["synth", "--spec", str(spec), "--out", str(tmp_path / "s")])
        assert rc == 2
        assert "yardstick_citation_prob" in capsys.readouterr().err


class TestReportCommand:
    def test_rerender_from_json(self, workspace, tmp_path):
        out = workspace / "ana"
        final, core = _delineated(workspace)
        main(["analyze", "--cache", str(workspace / "cache.jsonl"),
              "--set", f"CORE={core}",
              "--set", f"VEN-IN={final / 'specialty.ids.txt'}",
              "--set", f"VEN-OUT={final / 'comparison.ids.txt'}",
              "--comparison", "VEN-OUT", "--replicates", "5", "--seed", "5",
              "--out", str(out)])
        re_out = tmp_path / "re"
        rc = main(["report", "--report", str(out / "report.json"),
                   "--format", "csv,svg", "--out", str(re_out)])
        assert rc == 0
        assert (re_out / "table_authors.csv").read_bytes() == \
            (out / "table_authors.csv").read_bytes()
        assert (re_out / "fig_annual_counts.svg").exists()


class TestTomlConfig:
    def test_toml_delineation_config(self, workspace, tmp_path):
        config = tmp_path / "cfg.toml"
        config.write_text(
            '[delineation]\nvenue = "VEN"\nyardstick_sources = ["SCIENTOMETRICS"]\n'
            "min_year = 1982\n"
        )
        out = tmp_path / "del"
        rc = main(["delineate", "--cache", str(workspace / "cache.jsonl"),
                   "--config", str(config), "--out", str(out)])
        assert rc == 0
        assert (out / "delineation.json").exists()
