"""Response parsing: code-region extraction and nesting-aware block segmentation.

A backend response is free-form text. The formal proof is expected inside a
fenced code region (the last one, when several appear); the proof script is
then segmented into independently applicable tactic blocks. Segmentation
splits at commas and newlines, but only at nesting depth zero with respect to
parentheses, square brackets, curly braces, angle brackets, begin/end pairs,
and double-quoted string literals. Malformed nesting degrades to a single
block holding the remainder; text is never dropped.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .state import ORIGIN_LLM, TacticBlock

# Agent modes, which determine both prompting and parsing behaviour.
MODE_FEAS = "feas"
MODE_COPRA = "copra"
MODE_FEW_SHOT = "few_shot"
AGENT_MODES = (MODE_FEAS, MODE_COPRA, MODE_FEW_SHOT)

_OPENERS = {"(": ")", "[": "]", "{": "}", "⟨": "⟩"}  # ⟨⟩ included
_CLOSERS = {v: k for k, v in _OPENERS.items()}
_SEPARATORS = (",", "\n")

_FENCE_RE = re.compile(r"```[^\n]*\n(.*?)```", re.DOTALL)
_BEGIN_RE = re.compile(r"\bbegin\b")
_END_RE = re.compile(r"\bend\b")


@dataclass(frozen=True)
class SuggestionResponse:
    """A backend reply, split into its natural-language and formal sections.

    ``proof_text`` is always a contiguous substring of ``raw_text`` (the body
    of the chosen code region, delimiters still in place); ``strategy_text``
    is the prose preceding it and is empty in copra/few_shot modes.
    """

    raw_text: str
    strategy_text: str = ""
    proof_text: str = ""

    @classmethod
    def from_raw(cls, raw_text: str, mode: str = MODE_FEAS) -> "SuggestionResponse":
        region = extract_proof_region(raw_text)
        if region is None:
            return cls(raw_text=raw_text)
        start, end = region
        strategy = raw_text[:start].strip() if mode == MODE_FEAS else ""
        body_start = raw_text.find("\n", start) + 1
        return cls(
            raw_text=raw_text,
            strategy_text=strategy,
            proof_text=raw_text[body_start:end],
        )


def extract_proof_region(raw_text: str) -> tuple[int, int] | None:
    """Locate the formal-proof code region in a raw response.

    Returns (start, end) character offsets of the last fenced region's body,
    where ``start`` points at the opening fence. An opening fence without a
    closer is salvaged as running to the end of the text. None when the
    response contains no code region at all.
    """
    last = None
    for m in _FENCE_RE.finditer(raw_text):
        last = m
    if last is not None:
        return last.start(), last.end(1)
    # Unterminated fence: salvage everything after the opener's line.
    opener = raw_text.rfind("```")
    if opener >= 0:
        body = raw_text.find("\n", opener)
        if body >= 0 and raw_text[body + 1 :].strip():
            return opener, len(raw_text)
    return None


def strip_proof_delimiters(proof_text: str) -> tuple[str, int]:
    """Remove a surrounding begin/end pair (and anything before the begin).

    Responses often restate the theorem header before ``begin``; taking the
    outermost begin..end body drops it as well. Returns the stripped body and
    its character offset within ``proof_text``. Text without begin/end is
    returned unchanged at offset 0.
    """
    m = _BEGIN_RE.search(proof_text)
    if m is None:
        return proof_text, 0
    body_start = m.end()
    ends = list(_END_RE.finditer(proof_text, body_start))
    body_end = ends[-1].start() if ends else len(proof_text)
    return proof_text[body_start:body_end], body_start


def _scan_segments(text: str) -> list[tuple[int, int]]:
    """Split points honouring nesting: (start, end) offsets of raw segments.

    A segment runs up to a separator at depth zero. Depth is tracked over
    bracket pairs, begin/end keywords, and double-quoted strings (with
    backslash escapes). A closer that would take the depth negative stops all
    further splitting: the remainder becomes one final segment.
    """
    segments: list[tuple[int, int]] = []
    depth = 0
    in_string = False
    seg_start = 0
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if in_string:
            if ch == "\\":
                i += 2
                continue
            if ch == '"':
                in_string = False
            i += 1
            continue
        if ch == '"':
            in_string = True
            i += 1
            continue
        if ch in _OPENERS:
            depth += 1
            i += 1
            continue
        if ch in _CLOSERS:
            depth -= 1
            if depth < 0:
                # Unbalanced closer: degrade, never drop text.
                segments.append((seg_start, n))
                return segments
            i += 1
            continue
        if _word_at(text, i, "begin"):
            depth += 1
            i += 5
            continue
        if _word_at(text, i, "end"):
            depth -= 1
            if depth < 0:
                segments.append((seg_start, n))
                return segments
            i += 3
            continue
        if depth == 0 and ch in _SEPARATORS:
            segments.append((seg_start, i))
            seg_start = i + 1
            i += 1
            continue
        i += 1
    segments.append((seg_start, n))
    return segments


def _word_at(text: str, i: int, word: str) -> bool:
    if not text.startswith(word, i):
        return False
    if i > 0 and (text[i - 1].isalnum() or text[i - 1] == "_"):
        return False
    j = i + len(word)
    return j >= len(text) or not (text[j].isalnum() or text[j] == "_")


def _line_of(text: str, offset: int) -> int:
    return text.count("\n", 0, offset)


def segment_blocks(proof_text: str, line_offset: int = 1) -> list[TacticBlock]:
    """Segment a delimiter-stripped proof script into tactic blocks.

    ``line_offset`` is the 1-indexed line number of ``proof_text``'s first
    line within the originating response, used for the blocks' source spans.
    Each block's ``separator`` holds the raw text (separators plus
    whitespace) between it and the next block, so ``join_blocks`` restores
    the input.
    """
    blocks: list[TacticBlock] = []
    trimmed: list[tuple[int, int]] = []
    for start, end in _scan_segments(proof_text):
        seg = proof_text[start:end]
        lead = len(seg) - len(seg.lstrip())
        stripped = seg.strip()
        if not stripped:
            continue
        a = start + lead
        trimmed.append((a, a + len(stripped)))
    for idx, (a, b) in enumerate(trimmed):
        sep_end = trimmed[idx + 1][0] if idx + 1 < len(trimmed) else len(proof_text)
        blocks.append(
            TacticBlock(
                text=proof_text[a:b],
                source_span=(
                    line_offset + _line_of(proof_text, a),
                    line_offset + _line_of(proof_text, b - 1),
                ),
                origin=ORIGIN_LLM,
                separator=proof_text[b:sep_end],
            )
        )
    return blocks


def join_blocks(blocks: list[TacticBlock]) -> str:
    """Reassemble segmented blocks into the original script text."""
    return "".join(b.text + b.separator for b in blocks)


def parse_response(resp: SuggestionResponse, mode: str = MODE_FEAS) -> list[TacticBlock]:
    """Turn a backend response into an ordered list of tactic blocks.

    feas mode segments the extracted proof body into blocks; copra mode keeps
    only the first line as a single block; few_shot mode returns the whole
    body as one block. An empty list signals an unparseable response (no code
    region, or nothing left after stripping).
    """
    if mode not in AGENT_MODES:
        raise ValueError(f"unknown agent mode: {mode!r}")
    region = extract_proof_region(resp.raw_text)
    if region is None:
        return []
    start, end = region
    body_abs = resp.raw_text.find("\n", start) + 1
    body = resp.raw_text[body_abs:end]
    stripped, rel = strip_proof_delimiters(body)
    base_line = 1 + _line_of(resp.raw_text, body_abs + rel)

    if mode == MODE_FEW_SHOT:
        whole = stripped.strip()
        if not whole:
            return []
        lead = len(stripped) - len(stripped.lstrip())
        first = base_line + _line_of(stripped, lead)
        last = base_line + _line_of(stripped, lead + len(whole) - 1)
        return [TacticBlock(text=whole, source_span=(first, last))]

    if mode == MODE_COPRA:
        for ln, line in enumerate(stripped.split("\n")):
            tactic = line.strip().rstrip(",").strip()
            if tactic:
                return [TacticBlock(text=tactic, source_span=(base_line + ln, base_line + ln))]
        return []

    return segment_blocks(stripped, line_offset=base_line)
