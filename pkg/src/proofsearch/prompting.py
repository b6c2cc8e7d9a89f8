"""Prompt construction for the suggestion backend.

Templates live in external files under ``templates/`` so their wording can be
versioned and tuned without code changes; this module fixes what they must
contain: the rendered proof state, the verbatim list of failed tactics, the
most recent prover error at the state, and an optional slot for
domain-specific heuristic entries.
"""

from __future__ import annotations

import string
from dataclasses import dataclass
from importlib import resources

from .parsing import AGENT_MODES, MODE_FEAS
from .state import FailureDict, ProofState, SearchStack, StateKind, canonical_form


@dataclass(frozen=True)
class HeuristicEntry:
    """A named heuristic whose text is injected into the system prompt."""

    name: str
    prompt_text: str


# The shipped default set: the four functional-equation heuristic families.
DEFAULT_HEURISTICS: tuple[HeuristicEntry, ...] = (
    HeuristicEntry(
        name="substitution",
        prompt_text=(
            "Substitution-based simplification: plug strategic values into the "
            "functional equation (x = 0, x = 1, x = y, x and y swapped, x = 1/t) "
            "to derive simpler relations before attacking the goal directly."
        ),
    ),
    HeuristicEntry(
        name="bijectivity",
        prompt_text=(
            "Proving bijectivity: for injectivity, assume f a = f b and cancel "
            "through the defining equation to conclude a = b; for surjectivity, "
            "exhibit an explicit preimage for an arbitrary target value."
        ),
    ),
    HeuristicEntry(
        name="symmetry_involution",
        prompt_text=(
            "Symmetry and involution: when the equation is symmetric in its "
            "arguments, compare the two orientations; when f (f x) collapses "
            "(an involution), apply f to both sides of a known relation to "
            "transport it."
        ),
    ),
    HeuristicEntry(
        name="induction",
        prompt_text=(
            "Induction over naturals and rationals: extend a relation from f 1 "
            "to all naturals by induction on the shift equation, then to "
            "integers and to rationals p/q via the multiplicative structure."
        ),
    ),
)

_SYSTEM_TEMPLATES = {
    "feas": "system_feas.txt",
    "copra": "system_copra.txt",
    "few_shot": "system_few_shot.txt",
}


@dataclass(frozen=True)
class PromptBundle:
    """A fully rendered prompt: system instructions plus the user turn.

    ``state_key`` is the canonical form of the state the prompt was built
    for; scripted backends key their tables on it.
    """

    system_text: str
    user_text: str
    agent_mode: str
    state_key: str = ""


def _load_template(name: str) -> string.Template:
    text = resources.files("proofsearch.templates").joinpath(name).read_text("utf-8")
    return string.Template(text)


def render_state(state: ProofState) -> str:
    """Human/LLM-facing rendering of an obligation state's goals and hypotheses."""
    parts = []
    for i, ob in enumerate(state.obligations, 1):
        lines = [f"Goal {i}: {ob.goal}"]
        if ob.hypotheses:
            lines.append("  hypotheses:")
            lines.extend(f"    {h.name} : {h.statement}" for h in ob.hypotheses)
        parts.append("\n".join(lines))
    return "\n".join(parts)


def render_heuristics(heuristics: tuple[HeuristicEntry, ...]) -> str:
    lines = ["", "Domain heuristics for functional equations:"]
    lines.extend(f"- {h.name}: {h.prompt_text}" for h in heuristics)
    return "\n".join(lines) + "\n"


def promptify(
    stack: SearchStack,
    bad: FailureDict,
    heuristics_on: bool = False,
    mode: str = MODE_FEAS,
    heuristics: tuple[HeuristicEntry, ...] = DEFAULT_HEURISTICS,
) -> PromptBundle:
    """Build the prompt for the state on top of the search stack.

    Rendering is deterministic: failed tactics are listed sorted and
    verbatim, and the stack's applied-tactic history and the state's most
    recent prover error (when present) are included in the user turn.
    Requires a non-empty stack whose top state has obligations.
    """
    if not stack:
        raise ValueError("promptify requires a non-empty stack")
    top = stack.top
    if top.state.kind is not StateKind.OBLIGATIONS:
        raise ValueError("promptify requires an obligation state on top of the stack")
    if mode not in AGENT_MODES:
        raise ValueError(f"unknown agent mode: {mode!r}")

    system_text = _load_template(_SYSTEM_TEMPLATES[mode]).substitute(
        heuristics=render_heuristics(heuristics) if heuristics_on else ""
    )

    history = ""
    applied = [f.via.text for f in stack.frames[1:] if f.via is not None]
    if applied:
        history = (
            "Tactics already applied on this path:\n"
            + "\n".join(f"  {t}" for t in applied)
            + "\n"
        )

    failed = ""
    failed_texts = sorted(bad.lookup(top.state))
    if failed_texts:
        failed = (
            "Previously failed tactics at this state (do not repeat them):\n"
            + "\n".join(f"  {t}" for t in failed_texts)
            + "\n"
        )

    error = ""
    if top.last_error:
        error = f"Most recent prover error at this state:\n  {top.last_error}\n"

    user_text = _load_template("user_prompt.txt").substitute(
        state=render_state(top.state),
        history=history,
        failed=failed,
        error=error,
    )
    return PromptBundle(
        system_text=system_text,
        user_text=user_text,
        agent_mode=mode,
        state_key=canonical_form(top.state),
    )
