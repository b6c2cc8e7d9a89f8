"""Backtracking depth-first proof search over prover states.

The engine walks a stack of proof states. At a state with an empty tactic
queue it asks the suggestion backend for a proof attempt, parses it into
blocks, and applies them in order; each successful block pushes the new state
with the remaining blocks carried along, so later blocks of the same response
run from where the earlier ones led. A block that errors, or that lands in a
state equivalent to one already on the stack, is recorded in the failure
dictionary for its state and the rest of the response is discarded. After
each response's application pass (clean or not) the automatic fallback tactic
is attempted once; a successful fallback becomes part of the proof, a failed
one leaves no mark. A state is abandoned (popped) after a configured number
of fruitless queries; global stops are the query budget and the wall-clock
timeout.
"""

from __future__ import annotations

import json
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Callable

from .backends import Backend, BackendConfig, BackendError, make_backend
from .dataset import Problem
from .parsing import MODE_FEAS, parse_response
from .prompting import promptify
from .prover import ProverEnvironment, ProverError, ProverTimeoutError
from .state import (
    FailureDict,
    ORIGIN_FALLBACK,
    ProofState,
    SearchStack,
    StateKind,
    TacticBlock,
    canonical_form,
)

# Terminal statuses of a search.
PROVED = "proved"
EXHAUSTED_QUERIES = "exhausted_queries"
TIMED_OUT = "timed_out"
RETRY_LIMIT = "retry_limit"
BACKEND_FAILED = "backend_failed"
STATUSES = (PROVED, EXHAUSTED_QUERIES, TIMED_OUT, RETRY_LIMIT, BACKEND_FAILED)

# Outcomes of one block application, as recorded in the trace.
APPLY_QED = "qed"
APPLY_ERROR = "error"
APPLY_LOOP = "loop"
APPLY_PROGRESS = "progress"

# Fallback attempt outcomes.
FALLBACK_QED = "qed"
FALLBACK_PROGRESS = "progress"
FALLBACK_ABSENT = "absent"

LOOP_CHECK_SCOPE = "stack-ancestors"


@dataclass(frozen=True)
class SearchConfig:
    """Search limits and agent behaviour.

    ``per_state_retry_limit`` bounds how many backend queries a single state
    may consume before the search backtracks past it. The loop check always
    compares against ancestors on the current stack.
    """

    max_queries: int = 60
    timeout: float = 720.0
    per_state_retry_limit: int = 5
    fallback_enabled: bool = True
    agent_mode: str = MODE_FEAS
    heuristics_on: bool = False
    loop_check_scope: str = LOOP_CHECK_SCOPE

    def __post_init__(self) -> None:
        if self.max_queries < 1:
            raise ValueError("max_queries must be at least 1")
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")
        if self.per_state_retry_limit < 1:
            raise ValueError("per_state_retry_limit must be at least 1")
        if self.loop_check_scope != LOOP_CHECK_SCOPE:
            raise ValueError(f"loop check scope is fixed to {LOOP_CHECK_SCOPE!r}")


@dataclass(frozen=True)
class TraceEvent:
    """One search event.

    kind is one of ``query``, ``apply``, ``bad``, ``backtrack``,
    ``fallback``. ``state`` is the canonical key of the state the event
    happened at; ``next_state`` is the key of the resulting state for
    progress events (``"QED"`` for proof-closing ones).
    """

    kind: str
    state: str = ""
    tactic: str = ""
    result: str = ""
    next_state: str = ""

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "state": self.state}
        for key in ("tactic", "result", "next_state"):
            value = getattr(self, key)
            if value:
                out[key] = value
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "TraceEvent":
        return cls(**data)


@dataclass
class SearchTrace:
    """Ordered record of queries, applications, failures, and backtracks."""

    events: list[TraceEvent] = field(default_factory=list)

    def add(self, kind: str, **kwargs) -> None:
        self.events.append(TraceEvent(kind, **kwargs))

    def to_json(self) -> str:
        return json.dumps([e.to_dict() for e in self.events], indent=2, ensure_ascii=False)

    @classmethod
    def from_json(cls, text: str) -> "SearchTrace":
        return cls([TraceEvent.from_dict(d) for d in json.loads(text)])

    def __eq__(self, other: object) -> bool:
        return isinstance(other, SearchTrace) and self.events == other.events


@dataclass(frozen=True)
class SearchOutcome:
    """Terminal result of one search."""

    status: str
    proof_script: tuple[str, ...] | None
    queries_used: int
    wall_time: float
    trace: SearchTrace
    detail: str = ""

    @property
    def proved(self) -> bool:
        return self.status == PROVED


class _Stop(Exception):
    """Internal: carries a terminal status out of the application pass."""

    def __init__(self, status: str, proof: tuple[str, ...] | None = None, detail: str = ""):
        self.status = status
        self.proof = proof
        self.detail = detail


class _Search:
    def __init__(
        self,
        problem: Problem,
        env: ProverEnvironment,
        backend: Backend,
        cfg: SearchConfig,
        clock: Callable[[], float],
    ):
        self.problem = problem
        self.env = env
        self.backend = backend
        self.cfg = cfg
        self.clock = clock
        self.stack = SearchStack()
        self.bad = FailureDict()
        self.trace = SearchTrace()
        self.queries_used = 0
        self.start = 0.0

    # -- helpers -------------------------------------------------------------

    def _check_timeout(self) -> None:
        if self.clock() - self.start > self.cfg.timeout:
            raise _Stop(TIMED_OUT)

    def _proof_through(self, final: TacticBlock) -> tuple[str, ...]:
        path = [f.via.text for f in self.stack.frames[1:] if f.via is not None]
        return tuple(path + [final.text])

    def _apply_block(self, frame, block: TacticBlock) -> ProofState:
        self._check_timeout()
        try:
            return self.env.apply(frame.state, block).state
        except ProverTimeoutError as exc:
            # A stalled tactic is unproductive: surface it as a failure so it
            # lands in the failure dictionary like any other error.
            return ProofState.error(str(exc) or "tactic application timed out")

    # -- the application pass -------------------------------------------------

    def _run_pass(self, blocks: list[TacticBlock]) -> None:
        """Apply one response's blocks from the current top state, then try
        the fallback once. Raises _Stop on QED or timeout."""
        top = self.stack.top
        top.queue = deque(blocks)
        while top.queue:
            block = top.queue.popleft()
            if block.text in self.bad.lookup(top.state):
                continue  # known-unproductive here; never re-applied
            new_state = self._apply_block(top, block)
            if new_state.kind is StateKind.QED:
                self.trace.add(
                    "apply", state=top.key, tactic=block.text, result=APPLY_QED, next_state="QED"
                )
                raise _Stop(PROVED, self._proof_through(block))
            if new_state.kind is StateKind.ERROR:
                self.trace.add("apply", state=top.key, tactic=block.text, result=APPLY_ERROR)
                self.bad.record(top.state, block)
                self.trace.add("bad", state=top.key, tactic=block.text)
                top.last_error = new_state.error_message
                top.queue.clear()
                break
            key = canonical_form(new_state)
            if self.stack.contains_key(key):
                self.trace.add(
                    "apply", state=top.key, tactic=block.text, result=APPLY_LOOP, next_state=key
                )
                self.bad.record(top.state, block)
                self.trace.add("bad", state=top.key, tactic=block.text)
                top.queue.clear()
                break
            self.trace.add(
                "apply", state=top.key, tactic=block.text, result=APPLY_PROGRESS, next_state=key
            )
            inherited = top.queue
            top.queue = deque()
            top = self.stack.push(new_state, inherited, via=block)

        if not self.cfg.fallback_enabled:
            return
        self._check_timeout()
        fb_block = TacticBlock(text=self.env.fallback_tactic, origin=ORIGIN_FALLBACK)
        result = self.env.attempt_fallback(top.state)
        if result is None or result.state.kind is StateKind.ERROR:
            self.trace.add(
                "fallback", state=top.key, tactic=fb_block.text, result=FALLBACK_ABSENT
            )
            return
        if result.state.kind is StateKind.QED:
            self.trace.add(
                "fallback",
                state=top.key,
                tactic=fb_block.text,
                result=FALLBACK_QED,
                next_state="QED",
            )
            raise _Stop(PROVED, self._proof_through(fb_block))
        key = canonical_form(result.state)
        if self.stack.contains_key(key):
            # Progress into an already-visited state is no progress: omit.
            self.trace.add(
                "fallback", state=top.key, tactic=fb_block.text, result=FALLBACK_ABSENT
            )
            return
        self.trace.add(
            "fallback",
            state=top.key,
            tactic=fb_block.text,
            result=FALLBACK_PROGRESS,
            next_state=key,
        )
        self.stack.push(result.state, via=fb_block)

    # -- the main loop ---------------------------------------------------------

    def run(self) -> SearchOutcome:
        root = self.env.init_problem(self.problem)
        # The global timeout excludes prover startup: the clock starts here.
        self.start = self.clock()
        if root.kind is StateKind.QED:
            return self._outcome(PROVED, proof=())
        self.stack.push(root)
        try:
            while True:
                if not self.stack:
                    return self._outcome(RETRY_LIMIT)
                top = self.stack.top
                if top.refills >= self.cfg.per_state_retry_limit:
                    self.trace.add("backtrack", state=top.key)
                    self.stack.pop()
                    continue
                self._check_timeout()
                if self.queries_used >= self.cfg.max_queries:
                    return self._outcome(EXHAUSTED_QUERIES)
                bundle = promptify(
                    self.stack,
                    self.bad,
                    heuristics_on=self.cfg.heuristics_on,
                    mode=self.cfg.agent_mode,
                )
                try:
                    resp = self.backend.complete(bundle)
                except BackendError as exc:
                    return self._outcome(BACKEND_FAILED, detail=str(exc))
                self.queries_used += 1
                self.trace.add("query", state=top.key)
                top.refills += 1
                blocks = parse_response(resp, self.cfg.agent_mode)
                self._run_pass(blocks)
        except _Stop as stop:
            return self._outcome(stop.status, proof=stop.proof, detail=stop.detail)

    def _outcome(
        self, status: str, proof: tuple[str, ...] | None = None, detail: str = ""
    ) -> SearchOutcome:
        return SearchOutcome(
            status=status,
            proof_script=proof if status == PROVED else None,
            queries_used=self.queries_used,
            wall_time=self.clock() - self.start,
            trace=self.trace,
            detail=detail,
        )


def feas_search(
    problem: Problem,
    env: ProverEnvironment,
    backend: Backend | BackendConfig,
    cfg: SearchConfig | None = None,
    clock: Callable[[], float] = time.monotonic,
) -> SearchOutcome:
    """Run the full backtracking search for one problem.

    ``backend`` may be a live backend instance or a config to materialize
    (replay/scripted backends hold per-search state, so configs are the safe
    way to share). Prover session failures propagate; backend failures
    terminate the search with status ``backend_failed``.
    """
    if isinstance(backend, BackendConfig):
        backend = make_backend(backend)
    return _Search(problem, env, backend, cfg or SearchConfig(), clock).run()


def apply_with_fallback(
    env: ProverEnvironment,
    state: ProofState,
    blocks: list[TacticBlock],
) -> tuple[ProofState, list[TacticBlock]]:
    """Apply blocks in order until one fails, then attempt the fallback once.

    Returns the final state together with the applied prefix (the maximal
    successful prefix of ``blocks``, plus the fallback block when it
    succeeded). A standalone distillation of one application pass: no stack,
    no failure recording; loop checking here only guards against a block that
    leaves the state unchanged.
    """
    current = state
    visited = {canonical_form(state)}
    prefix: list[TacticBlock] = []
    for block in blocks:
        try:
            result = env.apply(current, block)
        except ProverTimeoutError:
            break
        new_state = result.state
        if new_state.kind is StateKind.ERROR:
            break
        if new_state.kind is StateKind.QED:
            return new_state, prefix + [block]
        if canonical_form(new_state) in visited:
            break
        visited.add(canonical_form(new_state))
        prefix.append(block)
        current = new_state
    fallback = env.attempt_fallback(current)
    if fallback is not None and fallback.state.kind is not StateKind.ERROR:
        fb_block = TacticBlock(text=env.fallback_tactic, origin=ORIGIN_FALLBACK)
        if fallback.state.kind is StateKind.QED or canonical_form(fallback.state) not in visited:
            return fallback.state, prefix + [fb_block]
    return current, prefix


def replay_proof(
    problem: Problem, env: ProverEnvironment, proof_script: tuple[str, ...] | list[str]
) -> bool:
    """Independently verify a proof script: fresh init, apply each tactic.

    True iff every application succeeds and the final state is QED.
    Environment errors simply yield False.
    """
    try:
        state = env.init_problem(problem)
    except ProverError:
        return False
    for text in proof_script:
        if state.kind is not StateKind.OBLIGATIONS:
            return False
        try:
            result = env.apply(state, TacticBlock(text=text))
        except (ProverError, ValueError):
            return False
        state = result.state
        if state.kind is StateKind.ERROR:
            return False
    return state.kind is StateKind.QED


def export_trace(outcome: SearchOutcome, path) -> None:
    """Write a search outcome's trace (plus summary fields) as JSON."""
    payload = {
        "status": outcome.status,
        "queries_used": outcome.queries_used,
        "wall_time": outcome.wall_time,
        "proof_script": list(outcome.proof_script) if outcome.proof_script else None,
        "detail": outcome.detail,
        "events": [e.to_dict() for e in outcome.trace.events],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, ensure_ascii=False)
        fh.write("\n")


# re-exported for convenience in tests and the harness
__all__ = [
    "SearchConfig",
    "SearchOutcome",
    "SearchTrace",
    "TraceEvent",
    "feas_search",
    "apply_with_fallback",
    "replay_proof",
    "export_trace",
    "PROVED",
    "EXHAUSTED_QUERIES",
    "TIMED_OUT",
    "RETRY_LIMIT",
    "BACKEND_FAILED",
    "STATUSES",
]
