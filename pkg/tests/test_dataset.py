"""Dataset loading, validation, and the A1 subset filter."""

from pathlib import Path

import pytest

from proofsearch import Problem, load_dataset, select_a1_subset, validate_problem
from proofsearch.dataset import build_manifest, parse_header

FUNEQ_ROOT = Path(__file__).parent / "data" / "funeq"


class TestLoadDataset:
    def test_simple_tier_count(self):
        assert len(load_dataset(FUNEQ_ROOT, "simple")) == 18

    def test_intermediate_tier_count(self):
        assert len(load_dataset(FUNEQ_ROOT, "intermediate")) == 15

    def test_problems_sorted_by_name(self):
        names = [p.name for p in load_dataset(FUNEQ_ROOT, "simple")]
        assert names == sorted(names)

    def test_tier_matches_directory(self):
        for p in load_dataset(FUNEQ_ROOT, "all"):
            assert p.source_path is not None
            assert p.source_path.parent.name == p.tier

    def test_missing_root_is_an_error(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_dataset(tmp_path / "nope")

    def test_missing_tier_directory_is_an_error(self, tmp_path):
        (tmp_path / "simple").mkdir()
        with pytest.raises(FileNotFoundError):
            load_dataset(tmp_path, "intermediate")

    def test_empty_tier_warns_but_loads(self, tmp_path, caplog):
        (tmp_path / "simple").mkdir()
        with caplog.at_level("WARNING"):
            problems = load_dataset(tmp_path, "simple")
        assert problems == []
        assert any("contains no problems" in r.message for r in caplog.records)

    def test_round_trip_through_statement_text(self, tmp_path):
        original = load_dataset(FUNEQ_ROOT, "intermediate")[0]
        tier_dir = tmp_path / "intermediate"
        tier_dir.mkdir()
        (tier_dir / f"{original.name}.lean").write_text(
            original.statement_text, encoding="utf-8"
        )
        reloaded = load_dataset(tmp_path, "intermediate")[0]
        assert (reloaded.name, reloaded.tier, reloaded.statement_text) == (
            original.name,
            original.tier,
            original.statement_text,
        )

    def test_loading_is_listing_order_independent(self):
        # Sorting by name makes the directory iteration order irrelevant.
        twice = [tuple(p.name for p in load_dataset(FUNEQ_ROOT, "all")) for _ in range(2)]
        assert twice[0] == twice[1]

    def test_manifest_counts_match_disk(self):
        manifest = build_manifest(FUNEQ_ROOT)
        assert manifest.counts == {"simple": 18, "intermediate": 15, "hard": 9}
        assert "intermediate_funeq_2" in manifest.problems["intermediate"]


class TestValidateProblem:
    def test_shipped_intermediate_statement_is_clean(self):
        problems = {p.name: p for p in load_dataset(FUNEQ_ROOT, "intermediate")}
        assert validate_problem(problems["intermediate_funeq_2"]) == []

    def test_every_fixture_problem_is_clean(self):
        for p in load_dataset(FUNEQ_ROOT, "all"):
            assert validate_problem(p) == [], p.name

    def test_two_declarations_flagged(self):
        p = Problem(
            name="dup",
            tier="simple",
            statement_text="theorem a : true := sorry\ntheorem b : true := sorry\n",
        )
        assert any("multiple declarations" in f for f in validate_problem(p))

    def test_empty_goal_flagged(self):
        p = Problem(name="bare", tier="simple", statement_text="theorem bare (x : ℕ) : := sorry")
        assert any("empty goal" in f for f in validate_problem(p))

    def test_missing_theorem_flagged(self):
        p = Problem(name="none", tier="simple", statement_text="def f := 3")
        assert any("no theorem declaration" in f for f in validate_problem(p))

    def test_header_parse_extracts_goal_past_binder_colons(self):
        problems = {p.name: p for p in load_dataset(FUNEQ_ROOT, "intermediate")}
        name, goal = parse_header(problems["intermediate_funeq_2"].statement_text)
        assert name == "intermediate_funeq_2"
        assert goal == "∀ x, x ≠ 0 → f (1 + 1 / x) = 1 + f x / x ^ 2"


class TestA1Subset:
    def test_filters_by_a1_marker(self):
        hard = load_dataset(FUNEQ_ROOT, "hard")
        subset = {p.name for p in select_a1_subset(hard)}
        # Oracle: manual inspection of the fixture names.
        assert subset == {
            "hard_2002_a1",
            "hard_2003_a1",
            "hard_2004_a1",
            "hard_2006_a1",
            "hard_2008_a1",
            "hard_2010_a1",
        }

    def test_marker_must_be_delimited(self):
        mk = lambda name: Problem(name=name, tier="hard", statement_text="theorem x : true :=")
        assert select_a1_subset([mk("hard_2011_a10")]) == []
        assert select_a1_subset([mk("hard_2011_ba1")]) == []
        assert [p.name for p in select_a1_subset([mk("hard_2011_A1")])] == ["hard_2011_A1"]

    def test_empty_input_yields_empty(self):
        assert select_a1_subset([]) == []

    def test_no_marked_names_warns(self, caplog):
        p = Problem(name="hard_misc", tier="hard", statement_text="theorem x : true :=")
        with caplog.at_level("WARNING"):
            assert select_a1_subset([p]) == []
        assert any("no A1-marked" in r.message for r in caplog.records)
