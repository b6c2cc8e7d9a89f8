"""Loading and validation of functional-equation problem files.

A dataset checkout is a directory with one subdirectory per difficulty tier
(``simple``, ``intermediate``, ``hard``), each holding one ``.lean`` file per
problem. Problem statements are treated as opaque prover input; validation
only checks the header shape (exactly one theorem declaration, a parseable
name, a non-empty goal).
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass
from pathlib import Path

logger = logging.getLogger(__name__)

TIERS = ("simple", "intermediate", "hard")

_THEOREM_RE = re.compile(r"\btheorem\b")
_A1_RE = re.compile(r"(?i)(?<![a-z0-9])a1(?![a-z0-9])")
_OPENERS = {"(": ")", "[": "]", "{": "}", "⟨": "⟩"}
_CLOSERS = set(_OPENERS.values())


@dataclass(frozen=True)
class Problem:
    """One problem: a single theorem statement plus where it came from."""

    name: str
    tier: str
    statement_text: str
    source_path: Path | None = None

    def __post_init__(self) -> None:
        if self.tier not in TIERS:
            raise ValueError(f"unknown tier {self.tier!r}")


@dataclass(frozen=True)
class DatasetManifest:
    """Per-tier problem counts and names for a dataset root."""

    root: Path
    counts: dict[str, int]
    problems: dict[str, tuple[str, ...]]

    def to_dict(self) -> dict:
        return {
            "root": str(self.root),
            "counts": dict(self.counts),
            "problems": {t: list(names) for t, names in self.problems.items()},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def load_dataset(root: str | Path, tier: str = "all") -> list[Problem]:
    """Load problems for one tier (or all tiers), sorted by name.

    A missing tier directory is an error; an empty one yields an empty list
    with a warning.
    """
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"dataset root {root} does not exist")
    tiers = TIERS if tier == "all" else (tier,)
    for t in tiers:
        if t not in TIERS:
            raise ValueError(f"unknown tier {t!r}; expected one of {TIERS} or 'all'")
    problems: list[Problem] = []
    for t in tiers:
        tier_dir = root / t
        if not tier_dir.is_dir():
            raise FileNotFoundError(f"tier directory {tier_dir} does not exist")
        files = sorted(tier_dir.glob("*.lean"), key=lambda p: p.stem)
        if not files:
            logger.warning("tier directory %s contains no problems", tier_dir)
        for path in files:
            problems.append(
                Problem(
                    name=path.stem,
                    tier=t,
                    statement_text=path.read_text("utf-8"),
                    source_path=path,
                )
            )
    problems.sort(key=lambda p: (TIERS.index(p.tier), p.name))
    return problems


def build_manifest(root: str | Path) -> DatasetManifest:
    root = Path(root)
    counts: dict[str, int] = {}
    names: dict[str, tuple[str, ...]] = {}
    for t in TIERS:
        tier_dir = root / t
        stems = sorted(p.stem for p in tier_dir.glob("*.lean")) if tier_dir.is_dir() else []
        counts[t] = len(stems)
        names[t] = tuple(stems)
    return DatasetManifest(root=root, counts=counts, problems=names)


def _top_level_positions(text: str, needles: tuple[str, ...]) -> list[tuple[int, str]]:
    """Offsets of needle occurrences at bracket/string nesting depth zero.

    Longer needles win at a shared offset (so ``:=`` is not also reported as
    ``:``).
    """
    hits: list[tuple[int, str]] = []
    ordered = sorted(needles, key=len, reverse=True)
    depth = 0
    in_string = False
    i = 0
    while i < len(text):
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
        elif ch in _OPENERS:
            depth += 1
        elif ch in _CLOSERS:
            depth = max(0, depth - 1)
        elif depth == 0:
            for needle in ordered:
                if text.startswith(needle, i):
                    hits.append((i, needle))
                    i += len(needle)
                    break
            else:
                i += 1
            continue
        i += 1
    return hits


def parse_header(statement_text: str) -> tuple[str, str]:
    """Extract (name, goal) from a theorem statement.

    The goal is the text between the last top-level ``:`` of the header and
    the ``:=`` (or end of text). Raises ValueError when the header does not
    have that shape.
    """
    m = _THEOREM_RE.search(statement_text)
    if m is None:
        raise ValueError("no theorem declaration")
    after = statement_text[m.end() :]
    name_match = re.match(r"\s*([A-Za-z_][A-Za-z0-9_']*)", after)
    if name_match is None:
        raise ValueError("theorem has no name")
    name = name_match.group(1)
    hits = _top_level_positions(after, (":=", ":"))
    assign = next((pos for pos, needle in hits if needle == ":="), len(after))
    colons = [pos for pos, needle in hits if needle == ":" and pos < assign]
    if not colons:
        raise ValueError("header has no goal separator")
    goal = after[colons[-1] + 1 : assign].strip()
    return name, goal


def validate_problem(problem: Problem) -> list[str]:
    """Structural findings for a problem; an empty list means valid."""
    findings: list[str] = []
    declarations = len(_THEOREM_RE.findall(problem.statement_text))
    if declarations == 0:
        findings.append("no theorem declaration")
        return findings
    if declarations > 1:
        findings.append(f"multiple declarations ({declarations} theorems)")
    try:
        _, goal = parse_header(problem.statement_text)
    except ValueError as exc:
        findings.append(f"unparseable header: {exc}")
        return findings
    if not goal:
        findings.append("empty goal")
    return findings


def select_a1_subset(problems: list[Problem]) -> list[Problem]:
    """Hard-tier problems whose names carry the A1 marker (one per IMO year)."""
    selected = [p for p in problems if p.tier == "hard" and _A1_RE.search(p.name)]
    if problems and not selected:
        logger.warning("no A1-marked problems among %d hard problems", len(problems))
    return selected
