"""Block segmentation and response parsing.

The two appendix-style proof listings below double as regression fixtures:
their expected segmentations were derived by hand-applying the splitting
rules (split at depth-0 commas/newlines; parens, brackets, braces, angle
brackets, begin/end, and string literals protect their contents).
"""

import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from proofsearch import SuggestionResponse, join_blocks, parse_response, segment_blocks
from toyutil import random_script

LISTING_FEAS_BODY = """\
    intro x,
    intro hx,
    have h_2 : f (1 / x + 1) = f (1 / x) + 1 := h_0 (1 / x),
    have h_3 : f (1 / x) = f x / x ^ 2 := h_1 x hx,
    rw h_3 at h_2,
    rw add_comm at h_2,
    nlinarith,
"""

LISTING_FEAS_BLOCKS = [
    "intro x",
    "intro hx",
    "have h_2 : f (1 / x + 1) = f (1 / x) + 1 := h_0 (1 / x)",
    "have h_3 : f (1 / x) = f x / x ^ 2 := h_1 x hx",
    "rw h_3 at h_2",
    "rw add_comm at h_2",
    "nlinarith",
]

LISTING_SINGLE_TACTIC_BODY = """\
    intro x, intro hx,
    rw [h_0 (1 / x), h_1 x hx] at *,
    field_simp [hx],
    rw mul_comm at *,
    rw [←h_0 (1 / x), h_1 x hx] at *,
    rw [←h_0 (1 / x), h_1 x hx] at *,
    ring_nf,
"""

LISTING_SINGLE_TACTIC_BLOCKS = [
    "intro x",
    "intro hx",
    "rw [h_0 (1 / x), h_1 x hx] at *",
    "field_simp [hx]",
    "rw mul_comm at *",
    "rw [←h_0 (1 / x), h_1 x hx] at *",
    "rw [←h_0 (1 / x), h_1 x hx] at *",
    "ring_nf",
]


def normalize(text: str) -> str:
    return " ".join(text.split())


def texts(blocks):
    return [b.text for b in blocks]


class TestSegmentBlocks:
    def test_two_plain_tactics(self):
        assert texts(segment_blocks("intro x, intro hx")) == ["intro x", "intro hx"]

    def test_angle_brackets_protect_commas(self):
        # Hand-derived via the depth-tracking scan: the inner commas sit at
        # depth 1, so only the comma after the closing bracket splits.
        blocks = texts(segment_blocks("have h : p ∧ q := ⟨by simp, by simp⟩, exact h"))
        assert blocks == ["have h : p ∧ q := ⟨by simp, by simp⟩", "exact h"]

    def test_internal_parens_keep_have_step_whole(self):
        line = "have h_2 : f (1 / x + 1) = f (1 / x) + 1 := h_0 (1 / x)"
        assert texts(segment_blocks(line)) == [line]

    def test_listing_segmentation(self):
        assert texts(segment_blocks(LISTING_FEAS_BODY)) == LISTING_FEAS_BLOCKS
        assert texts(segment_blocks(LISTING_SINGLE_TACTIC_BODY)) == LISTING_SINGLE_TACTIC_BLOCKS

    def test_string_literals_protect_everything(self):
        script = 'trace "unbalanced [ and a, comma", simp'
        assert texts(segment_blocks(script)) == ['trace "unbalanced [ and a, comma"', "simp"]

    def test_begin_end_pairs_protect_contents(self):
        script = "have h : p := begin simp, ring end, exact h"
        assert texts(segment_blocks(script)) == [
            "have h : p := begin simp, ring end",
            "exact h",
        ]

    def test_begin_requires_word_boundary(self):
        # 'beginning' and 'ending' must not shift the depth.
        script = "beginning x, ending y"
        assert texts(segment_blocks(script)) == ["beginning x", "ending y"]

    def test_newlines_split_without_commas(self):
        assert texts(segment_blocks("simp\nring_nf")) == ["simp", "ring_nf"]

    def test_unbalanced_open_degrades_to_single_block(self):
        assert texts(segment_blocks("intro (x, y")) == ["intro (x, y"]

    def test_unbalanced_close_degrades_to_single_block(self):
        assert texts(segment_blocks("a), b")) == ["a), b"]
        assert texts(segment_blocks("end foo, bar")) == ["end foo, bar"]

    def test_no_block_is_empty(self):
        blocks = segment_blocks(",,,\n\n, simp ,\n,")
        assert texts(blocks) == ["simp"]
        assert all(b.text.strip() for b in blocks)

    def test_exact_join_round_trip_preserves_separators(self):
        script = "intro x,\n  intro hx,\nfield_simp [hx]"
        assert join_blocks(segment_blocks(script)) == script

    def test_spans_are_ordered_and_nonoverlapping(self):
        blocks = segment_blocks("intro x, intro hx,\nsimp, ring")
        spans = [b.source_span for b in blocks]
        assert spans == [(1, 1), (1, 1), (2, 2), (2, 2)]
        for a, b in zip(blocks, blocks[1:]):
            assert a.source_span[0] <= a.source_span[1] <= b.source_span[0]

    @given(st.integers(0, 10**9))
    def test_round_trip_modulo_whitespace(self, seed):
        script = random_script(random.Random(seed))
        blocks = segment_blocks(script)
        assert normalize(join_blocks(blocks)) == normalize(script)
        assert all(b.text.strip() for b in blocks)


def feas_response(body: str, strategy: str = "First, instantiate the relation.") -> str:
    return f"{strategy}\n\n```lean\nbegin\n{body}end\n```\n"


class TestResponseExtraction:
    def test_no_code_region_means_no_blocks(self):
        resp = SuggestionResponse.from_raw("I am not sure how to proceed.")
        assert parse_response(resp, "feas") == []
        assert resp.proof_text == ""

    def test_proof_text_is_substring_of_raw(self):
        raw = feas_response(LISTING_FEAS_BODY)
        resp = SuggestionResponse.from_raw(raw)
        assert resp.proof_text in raw
        assert resp.strategy_text == "First, instantiate the relation."

    def test_last_fenced_region_wins(self):
        raw = (
            "A sketch:\n```\nthis is pseudocode, not the proof\n```\n"
            "Now formally:\n```lean\nbegin\n  simp,\n  ring,\nend\n```\n"
        )
        blocks = parse_response(SuggestionResponse.from_raw(raw), "feas")
        assert texts(blocks) == ["simp", "ring"]

    def test_begin_end_and_header_are_stripped(self):
        raw = (
            "```lean\ntheorem foo (x : ℝ) : x = x :=\nbegin\n  refl,\nend\n```"
        )
        blocks = parse_response(SuggestionResponse.from_raw(raw), "feas")
        assert texts(blocks) == ["refl"]

    def test_unterminated_fence_is_salvaged(self):
        raw = "Proof:\n```lean\nintro x, simp"
        blocks = parse_response(SuggestionResponse.from_raw(raw), "feas")
        assert texts(blocks) == ["intro x", "simp"]

    def test_listing_parses_to_seven_blocks(self):
        raw = feas_response(LISTING_FEAS_BODY)
        blocks = parse_response(SuggestionResponse.from_raw(raw), "feas")
        assert texts(blocks) == LISTING_FEAS_BLOCKS

    def test_spans_are_relative_to_the_raw_response(self):
        raw = "Strategy text here.\n\n```lean\nbegin\n    intro x,\n    intro hx,\nend\n```\n"
        blocks = parse_response(SuggestionResponse.from_raw(raw), "feas")
        assert [b.source_span for b in blocks] == [(5, 5), (6, 6)]


class TestAgentModes:
    def test_copra_returns_first_line_as_single_block(self):
        # Single-tactic rule applied by hand: the first line of the stripped
        # body, trailing comma dropped.
        raw = feas_response(LISTING_SINGLE_TACTIC_BODY, strategy="")
        blocks = parse_response(SuggestionResponse.from_raw(raw, "copra"), "copra")
        assert texts(blocks) == ["intro x, intro hx"]
        # raw ends up with two blank lines, the fence, then begin: line 5.
        assert blocks[0].source_span == (5, 5)

    def test_copra_strategy_text_is_empty(self):
        raw = feas_response(LISTING_FEAS_BODY)
        assert SuggestionResponse.from_raw(raw, "copra").strategy_text == ""

    def test_few_shot_returns_whole_proof_as_one_block(self):
        raw = feas_response("  simp,\n  ring,\n", strategy="")
        blocks = parse_response(SuggestionResponse.from_raw(raw, "few_shot"), "few_shot")
        assert len(blocks) == 1
        assert normalize(blocks[0].text) == "simp, ring,"

    def test_unknown_mode_rejected(self):
        with pytest.raises(ValueError):
            parse_response(SuggestionResponse.from_raw("```\nx\n```"), "alphazero")
