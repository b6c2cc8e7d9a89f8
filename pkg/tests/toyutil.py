"""Shared helpers for driving the search against toy environments."""

from __future__ import annotations

import random

from proofsearch import Problem, ToyEnvSpec, ToyProver
from proofsearch.search import TraceEvent

_ATOMS = [
    "intro x",
    "intro hx",
    "simp",
    "ring_nf",
    "exact h_2",
    "apply le_trans",
    "nlinarith [sq_nonneg x]",
    "norm_num at h",
    "field_simp [hx]",
    "rw add_comm at h_2",
    'have s : p := "a literal, with ] separators \\" inside"',
    "linarith",
]

_SEPS = [", ", ",\n", "\n", ",\n    ", " , "]

_WRAPS = [
    ("(", ")"),
    ("[", "]"),
    ("{", "}"),
    ("⟨", "⟩"),
    ("begin ", " end"),
]


def random_script(rng: random.Random, depth: int = 0) -> str:
    """A nesting-balanced tactic script with randomized separators.

    Inner items may themselves contain depth-protected separators, so the
    only depth-0 separators are the joining ones.
    """
    items = []
    for _ in range(rng.randint(1, 5)):
        atom = rng.choice(_ATOMS)
        if depth < 2 and rng.random() < 0.4:
            opener, closer = rng.choice(_WRAPS)
            inner = random_script(rng, depth + 1)
            atom = f"{atom} {opener}{inner}{closer}"
        items.append(atom)
    return rng.choice(_SEPS).join(items)


def toy_spec(
    states,
    initial,
    transitions=None,
    auto=(),
) -> ToyEnvSpec:
    return ToyEnvSpec(
        states=frozenset(states),
        initial=initial,
        transitions=dict(transitions or {}),
        auto_tactic_closes=frozenset(auto),
    )


def toy_env(spec: ToyEnvSpec, **kwargs) -> ToyProver:
    return ToyProver(spec, **kwargs)


def toy_problem(name: str = "toy_problem") -> Problem:
    return Problem(
        name=name,
        tier="simple",
        statement_text=f"theorem {name} : true := sorry\n",
    )


def fenced(body: str, strategy: str = "") -> str:
    """A minimal well-formed response: optional prose, then a code region."""
    prefix = strategy + "\n\n" if strategy else ""
    return f"{prefix}```\n{body}\n```\n"


class FakeClock:
    """Deterministic monotonic clock: advances a fixed step per reading."""

    def __init__(self, step: float = 0.001):
        self.now = 0.0
        self.step = step

    def __call__(self) -> float:
        self.now += self.step
        return self.now


class SeqClock:
    """Clock returning a fixed sequence, then advancing steadily."""

    def __init__(self, values, step: float = 1.0):
        self.values = list(values)
        self.step = step
        self.last = 0.0

    def __call__(self) -> float:
        if self.values:
            self.last = self.values.pop(0)
        else:
            self.last += self.step
        return self.last


def build_toy_suite(base_dir, solved=("p1", "p2", "p3"), unsolved=("p4", "p5")):
    """A miniature benchmark: per-problem toy specs plus one script table.

    Solvable problems close with one scripted tactic; unsolvable ones only
    ever err. Returns (dataset_root, specs_dir, script_table).
    """
    import json
    from pathlib import Path

    base_dir = Path(base_dir)
    dataset = base_dir / "dataset"
    specs = base_dir / "specs"
    (dataset / "simple").mkdir(parents=True, exist_ok=True)
    specs.mkdir(parents=True, exist_ok=True)
    script = {}
    for name in list(solved) + list(unsolved):
        label = f"root_{name}"
        (dataset / "simple" / f"{name}.lean").write_text(
            f"theorem {name} : true := sorry\n", encoding="utf-8"
        )
        transitions = [[label, f"win_{name}", "QED"]] if name in solved else []
        spec = {
            "states": [label],
            "initial": label,
            "transitions": transitions,
            "auto_tactic_closes": [],
        }
        (specs / f"{name}.json").write_text(json.dumps(spec), encoding="utf-8")
        body = f"win_{name}" if name in solved else "hopeless"
        script[label] = fenced(body)
    return dataset, specs, script


# Compact constructors for hand-written trace expectations.

def q(state: str) -> TraceEvent:
    return TraceEvent("query", state=state)


def ap(state: str, tactic: str, result: str, next_state: str = "") -> TraceEvent:
    return TraceEvent("apply", state=state, tactic=tactic, result=result, next_state=next_state)


def bad(state: str, tactic: str) -> TraceEvent:
    return TraceEvent("bad", state=state, tactic=tactic)


def bt(state: str) -> TraceEvent:
    return TraceEvent("backtrack", state=state)


def fb(state: str, result: str, next_state: str = "", tactic: str = "nlinarith") -> TraceEvent:
    return TraceEvent("fallback", state=state, tactic=tactic, result=result, next_state=next_state)
