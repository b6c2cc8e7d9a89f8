"""Prover environments: the tactic transition function behind the search.

Two backends implement the same surface:

* ``ToyProver`` — a deterministic in-process environment driven by an explicit
  transition table, used for tests and benchmark rehearsals.
* ``SubprocessProver`` — a driver for an external tactic REPL speaking a
  line-delimited JSON protocol over its standard streams (see
  ``docs/wire_protocol.md`` for the bit-exact format).

Earlier states stay addressable by their ``state_id`` (snapshot semantics),
so backtracking never replays tactics.
"""

from __future__ import annotations

import json
import queue
import subprocess
import threading
import time
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from pathlib import Path

from .dataset import Problem
from .state import Hypothesis, Obligation, ProofState, StateKind, TacticBlock

# Reserved transition endpoints in toy environment specs.
ERR_LABEL = "ERR"
QED_LABEL = "QED"

DEFAULT_FALLBACK_TACTIC = "nlinarith"
DEFAULT_APPLY_TIMEOUT = 30.0


class ProverError(Exception):
    """Base class for prover environment failures."""


class ProverStartError(ProverError):
    """The external prover process could not be started."""


class ProblemInitError(ProverError):
    """The prover rejected the problem statement; carries its message."""


class ProverSessionError(ProverError):
    """The prover session died or answered out of protocol."""


class ProverTimeoutError(ProverError):
    """A single tactic application exceeded the per-application timeout."""


@dataclass(frozen=True)
class ApplyResult:
    """Outcome of one tactic application: the new state and elapsed time."""

    state: ProofState
    elapsed_ms: float

    def __post_init__(self) -> None:
        if self.elapsed_ms < 0:
            raise ValueError("elapsed time must be nonnegative")


class ProverEnvironment(ABC):
    """One prover session; requests are strictly sequential within it."""

    fallback_tactic: str = DEFAULT_FALLBACK_TACTIC

    @abstractmethod
    def init_problem(self, problem: Problem) -> ProofState:
        """Load the problem and return its root state."""

    @abstractmethod
    def apply(self, state: ProofState, tactic: TacticBlock) -> ApplyResult:
        """Apply one tactic to a previously issued obligation state.

        Tactic failures come back as an error-kind state with the prover's
        message; the input state is never mutated and remains applicable.
        """

    def attempt_fallback(self, state: ProofState) -> ApplyResult | None:
        """Try the automatic fallback tactic at ``state``.

        Returns the result when it succeeds; None when it fails for any
        reason, in which case the caller proceeds as if it was never
        attempted. Never returns an error-kind result and never raises.
        """
        block = TacticBlock(text=self.fallback_tactic, origin="auto_fallback")
        try:
            result = self.apply(state, block)
        except ProverError:
            return None
        if result.state.kind is StateKind.ERROR:
            return None
        return result


@dataclass(frozen=True)
class ToyEnvSpec:
    """A scripted environment: labeled states and a (state, tactic) table.

    Transition endpoints may be another state label, ``"ERR"`` (the tactic
    fails), or ``"QED"`` (the tactic closes the proof). States listed in
    ``auto_tactic_closes`` are closed by the fallback tactic.
    """

    states: frozenset[str]
    initial: str
    transitions: dict[tuple[str, str], str] = field(default_factory=dict)
    auto_tactic_closes: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        object.__setattr__(self, "states", frozenset(self.states))
        object.__setattr__(self, "auto_tactic_closes", frozenset(self.auto_tactic_closes))
        reserved = {ERR_LABEL, QED_LABEL} & self.states
        if reserved:
            raise ValueError(f"state labels {sorted(reserved)} are reserved")
        if self.initial not in self.states:
            raise ValueError(f"initial state {self.initial!r} not among states")
        for (src, tactic), dest in self.transitions.items():
            if src not in self.states:
                raise ValueError(f"transition source {src!r} not among states")
            if dest not in self.states and dest not in (ERR_LABEL, QED_LABEL):
                raise ValueError(f"transition ({src!r}, {tactic!r}) ends at unknown {dest!r}")
        unknown = self.auto_tactic_closes - self.states
        if unknown:
            raise ValueError(f"auto-close labels {sorted(unknown)} not among states")

    @classmethod
    def from_dict(cls, data: dict) -> "ToyEnvSpec":
        return cls(
            states=frozenset(data["states"]),
            initial=data["initial"],
            transitions={(s, t): dest for s, t, dest in data.get("transitions", [])},
            auto_tactic_closes=frozenset(data.get("auto_tactic_closes", [])),
        )

    @classmethod
    def from_file(cls, path: str | Path) -> "ToyEnvSpec":
        return cls.from_dict(json.loads(Path(path).read_text("utf-8")))

    def to_dict(self) -> dict:
        return {
            "states": sorted(self.states),
            "initial": self.initial,
            "transitions": [[s, t, dest] for (s, t), dest in sorted(self.transitions.items())],
            "auto_tactic_closes": sorted(self.auto_tactic_closes),
        }


class ToyProver(ProverEnvironment):
    """Pure-function environment over a ToyEnvSpec.

    Replaying any trace yields identical states. ``apply_delay`` injects a
    per-application sleep for timeout testing.
    """

    def __init__(
        self,
        spec: ToyEnvSpec,
        fallback_tactic: str = DEFAULT_FALLBACK_TACTIC,
        apply_delay: float = 0.0,
    ):
        self.spec = spec
        self.fallback_tactic = fallback_tactic
        self.apply_delay = apply_delay
        self._initialized = False

    def _state_for(self, label: str) -> ProofState:
        return ProofState.from_obligations([Obligation(goal=label)], state_id=label)

    def init_problem(self, problem: Problem) -> ProofState:
        self._initialized = True
        return self._state_for(self.spec.initial)

    def apply(self, state: ProofState, tactic: TacticBlock) -> ApplyResult:
        if not self._initialized:
            raise ProverSessionError("init_problem must be called before apply")
        if state.kind is not StateKind.OBLIGATIONS:
            raise ValueError("tactics apply only to obligation states")
        label = state.state_id
        if label not in self.spec.states:
            raise ProverSessionError(f"state {label!r} was not issued by this environment")
        started = time.monotonic()
        if self.apply_delay:
            time.sleep(self.apply_delay)
        dest = self.spec.transitions.get((label, tactic.text))
        if dest is None:
            if tactic.text == self.fallback_tactic and label in self.spec.auto_tactic_closes:
                dest = QED_LABEL
            else:
                dest = ERR_LABEL
        elapsed = (time.monotonic() - started) * 1000.0
        if dest == QED_LABEL:
            return ApplyResult(ProofState.qed(state_id="qed"), elapsed)
        if dest == ERR_LABEL:
            message = f"tactic '{tactic.text}' failed in state {label}"
            return ApplyResult(ProofState.error(message, state_id=label), elapsed)
        return ApplyResult(self._state_for(dest), elapsed)


class SubprocessProver(ProverEnvironment):
    """Driver for an external tactic REPL over line-delimited JSON.

    Requests carry a monotonically increasing ``id`` echoed by responses, so
    a late answer from a timed-out request is discarded rather than
    desynchronizing the session.
    """

    def __init__(
        self,
        command: list[str],
        fallback_tactic: str = DEFAULT_FALLBACK_TACTIC,
        apply_timeout: float = DEFAULT_APPLY_TIMEOUT,
        cwd: str | Path | None = None,
    ):
        self.command = list(command)
        self.fallback_tactic = fallback_tactic
        self.apply_timeout = apply_timeout
        self._cwd = cwd
        self._proc: subprocess.Popen | None = None
        self._responses: queue.Queue[dict | None] = queue.Queue()
        self._next_id = 0

    # -- process management -------------------------------------------------

    def _ensure_started(self) -> None:
        if self._proc is not None:
            if self._proc.poll() is None:
                return
            # State ids died with the process; a fresh driver means a fresh session.
            raise ProverSessionError("prover process exited")
        try:
            self._proc = subprocess.Popen(
                self.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                cwd=self._cwd,
                text=True,
                encoding="utf-8",
                bufsize=1,
            )
        except OSError as exc:
            raise ProverStartError(f"failed to start prover {self.command!r}: {exc}") from exc
        self._responses = queue.Queue()
        reader = threading.Thread(target=self._read_loop, args=(self._proc,), daemon=True)
        reader.start()

    def _read_loop(self, proc: subprocess.Popen) -> None:
        assert proc.stdout is not None
        for line in proc.stdout:
            line = line.strip()
            if not line:
                continue
            try:
                self._responses.put(json.loads(line))
            except ValueError:
                self._responses.put({"status": "protocol-error", "raw": line})
        self._responses.put(None)  # EOF sentinel

    def close(self) -> None:
        if self._proc is not None and self._proc.poll() is None:
            self._proc.terminate()
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._proc.kill()
        self._proc = None

    def __enter__(self) -> "SubprocessProver":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()

    # -- protocol ------------------------------------------------------------

    def _request(self, payload: dict, timeout: float) -> dict:
        self._ensure_started()
        assert self._proc is not None and self._proc.stdin is not None
        self._next_id += 1
        payload = dict(payload, id=self._next_id)
        try:
            self._proc.stdin.write(json.dumps(payload, ensure_ascii=False) + "\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise ProverSessionError(f"prover process is not accepting input: {exc}") from exc
        deadline = time.monotonic() + timeout
        while True:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise ProverTimeoutError(
                    f"prover did not answer request {payload['id']} within {timeout}s"
                )
            try:
                resp = self._responses.get(timeout=remaining)
            except queue.Empty:
                continue
            if resp is None:
                raise ProverSessionError("prover process exited")
            if resp.get("status") == "protocol-error":
                raise ProverSessionError(f"unparseable prover output: {resp['raw']!r}")
            if resp.get("id") == payload["id"]:
                return resp
            # Stale answer to an earlier timed-out request: drop it.

    @staticmethod
    def _state_from_response(resp: dict) -> ProofState:
        status = resp.get("status")
        state_id = str(resp.get("state_id", ""))
        if status == "qed":
            return ProofState.qed(state_id=state_id)
        if status == "error":
            return ProofState.error(resp.get("message") or "prover error", state_id=state_id)
        if status == "ok":
            obligations = []
            for g in resp.get("goals", []):
                hyps = tuple(Hypothesis(str(n), str(s)) for n, s in g.get("hypotheses", []))
                obligations.append(Obligation(goal=str(g["goal"]), hypotheses=hyps))
            if not obligations:
                return ProofState.qed(state_id=state_id)
            return ProofState.from_obligations(obligations, state_id=state_id)
        raise ProverSessionError(f"prover answered with unknown status {status!r}")

    def init_problem(self, problem: Problem) -> ProofState:
        resp = self._request(
            {"op": "init", "statement": problem.statement_text},
            timeout=max(self.apply_timeout, 60.0),
        )
        state = self._state_from_response(resp)
        if state.kind is StateKind.ERROR:
            raise ProblemInitError(state.error_message)
        return state

    def apply(self, state: ProofState, tactic: TacticBlock) -> ApplyResult:
        if state.kind is not StateKind.OBLIGATIONS:
            raise ValueError("tactics apply only to obligation states")
        started = time.monotonic()
        resp = self._request(
            {"op": "apply", "state_id": state.state_id, "tactic": tactic.text},
            timeout=self.apply_timeout,
        )
        elapsed = (time.monotonic() - started) * 1000.0
        return ApplyResult(self._state_from_response(resp), elapsed)
