"""Proof-state model, canonicalization, and the per-search failure dictionary.

A proof state is either a set of obligations (goal plus named hypotheses), a
terminal QED state, or an error state carrying the prover's message. States
are compared through a purely textual canonical form: whitespace is
normalized, obligations are sorted by goal text, hypotheses are sorted by
statement text with their names erased. This makes equivalence cheap and
prover-agnostic; it does not attempt semantic (unification-based) equality.
"""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Iterator, NamedTuple

# Reserved canonical key for the terminal state.
QED_KEY = "QED"


class StateKind(enum.Enum):
    OBLIGATIONS = "obligations"
    ERROR = "error"
    QED = "qed"


class Hypothesis(NamedTuple):
    name: str
    statement: str


@dataclass(frozen=True)
class Obligation:
    """One open goal together with its hypotheses.

    Hypothesis order is preserved as given (it matters for display), but never
    for equivalence: canonicalization sorts hypotheses and drops their names.
    """

    goal: str
    hypotheses: tuple[Hypothesis, ...] = ()

    def __post_init__(self) -> None:
        if not self.goal.strip():
            raise ValueError("obligation goal must be non-empty")
        hyps = tuple(Hypothesis(*h) for h in self.hypotheses)
        names = [h.name for h in hyps]
        if len(names) != len(set(names)):
            raise ValueError(f"duplicate hypothesis names in obligation: {names}")
        object.__setattr__(self, "hypotheses", hyps)


@dataclass(frozen=True)
class ProofState:
    """A node of the proof search: obligations, QED, or a prover error.

    Exactly the fields for the active kind are populated. ``state_id`` is an
    opaque handle issued by the prover environment; it never participates in
    equivalence.
    """

    kind: StateKind
    obligations: tuple[Obligation, ...] = ()
    error_message: str = ""
    state_id: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "obligations", tuple(self.obligations))
        if self.kind is StateKind.QED:
            if self.obligations or self.error_message:
                raise ValueError("QED state must carry no obligations or message")
        elif self.kind is StateKind.ERROR:
            if not self.error_message:
                raise ValueError("error state requires a non-empty message")
            if self.obligations:
                raise ValueError("error state must carry no obligations")
        else:
            if not self.obligations:
                raise ValueError("obligations state requires at least one obligation")
            if self.error_message:
                raise ValueError("obligations state must carry no error message")

    @classmethod
    def from_obligations(
        cls, obligations: Iterable[Obligation], state_id: str = ""
    ) -> "ProofState":
        return cls(StateKind.OBLIGATIONS, tuple(obligations), state_id=state_id)

    @classmethod
    def qed(cls, state_id: str = "") -> "ProofState":
        return cls(StateKind.QED, state_id=state_id)

    @classmethod
    def error(cls, message: str, state_id: str = "") -> "ProofState":
        return cls(StateKind.ERROR, error_message=message, state_id=state_id)


# Where a tactic block came from: parsed out of a backend response, or the
# automatic fallback tactic.
ORIGIN_LLM = "llm"
ORIGIN_FALLBACK = "auto_fallback"


@dataclass(frozen=True)
class TacticBlock:
    """One independently applicable segment of a proof script.

    ``source_span`` is the (start_line, end_line) extent, 1-indexed, within
    the originating response; fallback-origin blocks have no span.
    ``separator`` preserves the raw source text that followed the block, so a
    parsed script can be reassembled verbatim.
    """

    text: str
    source_span: tuple[int, int] | None = None
    origin: str = ORIGIN_LLM
    separator: str = ""

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise ValueError("tactic block text must be non-empty")
        if self.origin not in (ORIGIN_LLM, ORIGIN_FALLBACK):
            raise ValueError(f"unknown block origin: {self.origin!r}")
        if self.source_span is not None:
            start, end = self.source_span
            if start > end:
                raise ValueError(f"block span is not well-ordered: {self.source_span}")


def _normalize_ws(text: str) -> str:
    return " ".join(text.split())


def canonical_form(state: ProofState) -> str:
    """Deterministic textual key for a state, stable under permutations.

    Whitespace runs collapse to single spaces; obligations sort by their
    rendered text (goal first); hypotheses sort by statement with names
    erased. The QED state maps to the distinguished key ``"QED"``.

    Raises ValueError for error-kind states, which have no canonical form.
    """
    if state.kind is StateKind.ERROR:
        raise ValueError("error states have no canonical form")
    if state.kind is StateKind.QED:
        return QED_KEY
    rendered = []
    for ob in state.obligations:
        goal = _normalize_ws(ob.goal)
        if ob.hypotheses:
            hyps = sorted(_normalize_ws(h.statement) for h in ob.hypotheses)
            rendered.append(goal + " |- " + " ;; ".join(hyps))
        else:
            rendered.append(goal)
    return " || ".join(sorted(rendered))


def state_equiv(a: ProofState, b: ProofState) -> bool:
    """True iff the two states share a canonical form.

    An equivalence relation over obligation/QED states; error-kind arguments
    raise ValueError.
    """
    return canonical_form(a) == canonical_form(b)


class FailureDict:
    """Per-search record of tactics shown to be unproductive at a state.

    Entries are keyed by canonical form, so a failure recorded at one state is
    visible at every equivalent state. Within a search nothing is ever
    removed.
    """

    def __init__(self) -> None:
        self._entries: dict[str, set[str]] = {}

    def record(self, state: ProofState, tactic: TacticBlock) -> None:
        """Mark ``tactic`` unproductive at ``state``. Idempotent.

        Only obligation states can accumulate failures; QED and error states
        raise ValueError.
        """
        if state.kind is not StateKind.OBLIGATIONS:
            raise ValueError("failures can only be recorded at obligation states")
        self._entries.setdefault(canonical_form(state), set()).add(tactic.text)

    def lookup(self, state: ProofState) -> frozenset[str]:
        """Tactic texts known to fail at ``state``; empty for unseen states.

        Never raises: error-kind states (which cannot hold entries) yield the
        empty set.
        """
        if state.kind is StateKind.ERROR:
            return frozenset()
        return frozenset(self._entries.get(canonical_form(state), ()))

    @property
    def entries(self) -> dict[str, frozenset[str]]:
        """Snapshot of the full mapping, for inspection and tests."""
        return {key: frozenset(texts) for key, texts in self._entries.items()}

    def __len__(self) -> int:
        return len(self._entries)


@dataclass
class Frame:
    """One stack entry: a state, its pending tactic queue, and bookkeeping.

    ``refills`` counts backend queries issued at this state; ``last_error``
    holds the most recent prover error seen here (fed back into prompts);
    ``via`` is the block whose application produced this state (None for the
    root).
    """

    state: ProofState
    key: str
    queue: deque[TacticBlock] = field(default_factory=deque)
    refills: int = 0
    last_error: str | None = None
    via: TacticBlock | None = None


class SearchStack:
    """The DFS stack of proof states; the bottom frame is the initial problem.

    The search's loop check guarantees no two frames ever hold equivalent
    states.
    """

    def __init__(self) -> None:
        self._frames: list[Frame] = []

    def push(
        self,
        state: ProofState,
        queue: deque[TacticBlock] | None = None,
        via: TacticBlock | None = None,
    ) -> Frame:
        frame = Frame(state, canonical_form(state), queue or deque(), via=via)
        self._frames.append(frame)
        return frame

    def pop(self) -> Frame:
        return self._frames.pop()

    @property
    def top(self) -> Frame:
        return self._frames[-1]

    @property
    def frames(self) -> list[Frame]:
        return self._frames

    def contains_key(self, key: str) -> bool:
        """Whether any frame on the stack holds a state with this canonical key."""
        return any(f.key == key for f in self._frames)

    def __len__(self) -> int:
        return len(self._frames)

    def __bool__(self) -> bool:
        return bool(self._frames)

    def __iter__(self) -> Iterator[Frame]:
        return iter(self._frames)
