"""Benchmark runner: executes an agent over dataset tiers and scores pass@k.

Each (problem, run) pair gets a fresh prover environment, a fresh backend
instance, and a fresh failure dictionary. With two runs per problem, pass@1
is the mean of the per-run solved indicators over all pairs and pass@2 is the
fraction of problems solved in at least one of the two runs; percentages are
rendered with two decimals, half-up.
"""

from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Callable, Sequence

from .backends import BackendConfig
from .dataset import Problem, load_dataset, select_a1_subset
from .parsing import MODE_COPRA, MODE_FEAS, MODE_FEW_SHOT
from .prover import (
    DEFAULT_APPLY_TIMEOUT,
    DEFAULT_FALLBACK_TACTIC,
    ProverEnvironment,
    SubprocessProver,
    ToyEnvSpec,
    ToyProver,
)
from .search import SearchConfig, SearchOutcome, export_trace, feas_search

logger = logging.getLogger(__name__)

AGENTS = ("few_shot", "copra", "feas", "feas_heuristics")


@dataclass(frozen=True)
class EnvConfig:
    """How to build a prover environment for each search.

    For the toy kind, ``toy_spec`` is a spec file, a directory of per-problem
    ``<name>.json`` spec files, or an in-memory ToyEnvSpec. For the external
    kind, ``command`` is the prover REPL command line.
    """

    kind: str = "toy"
    toy_spec: str | Path | ToyEnvSpec | None = None
    command: tuple[str, ...] | None = None
    fallback_tactic: str = DEFAULT_FALLBACK_TACTIC
    apply_timeout: float = DEFAULT_APPLY_TIMEOUT

    def __post_init__(self) -> None:
        if self.kind not in ("toy", "external"):
            raise ValueError(f"unknown environment kind: {self.kind!r}")
        if self.kind == "toy" and self.toy_spec is None:
            raise ValueError("toy environment requires a spec")
        if self.kind == "external" and not self.command:
            raise ValueError("external environment requires a command")

    def make_env(self, problem: Problem) -> ProverEnvironment:
        if self.kind == "external":
            assert self.command
            return SubprocessProver(
                list(self.command),
                fallback_tactic=self.fallback_tactic,
                apply_timeout=self.apply_timeout,
            )
        spec = self.toy_spec
        if isinstance(spec, (str, Path)):
            path = Path(spec)
            if path.is_dir():
                path = path / f"{problem.name}.json"
            spec = ToyEnvSpec.from_file(path)
        assert isinstance(spec, ToyEnvSpec)
        return ToyProver(spec, fallback_tactic=self.fallback_tactic)


@dataclass(frozen=True)
class RunConfig:
    """One benchmark run: an agent over one tier under the evaluation protocol."""

    agent: str
    tier: str
    dataset_root: str | Path
    search: SearchConfig = field(default_factory=SearchConfig)
    backend: BackendConfig = field(default_factory=lambda: BackendConfig(kind="scripted", script={}))
    env: EnvConfig = field(default_factory=lambda: EnvConfig(kind="toy", toy_spec=ToyEnvSpec(frozenset(["S0"]), "S0")))
    runs_per_problem: int = 0  # 0 = protocol default: 2, or 1 for the hard tier/A1 subset
    workers: int = 1
    out_dir: str | Path | None = None

    def __post_init__(self) -> None:
        if self.agent not in AGENTS:
            raise ValueError(f"unknown agent {self.agent!r}; expected one of {AGENTS}")
        if self.tier not in ("simple", "intermediate", "hard", "a1"):
            raise ValueError(f"unknown tier {self.tier!r}")
        if self.runs_per_problem < 0:
            raise ValueError("runs_per_problem must be nonnegative")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")

    @property
    def effective_runs(self) -> int:
        if self.runs_per_problem:
            return self.runs_per_problem
        return 1 if self.tier in ("hard", "a1") else 2


def agent_search_config(agent: str, base: SearchConfig) -> SearchConfig:
    """Specialize the search configuration for an agent mode.

    Baselines: few_shot is a single whole-proof query with no search and no
    fallback; copra proposes one tactic per query with no fallback. The full
    agent parses multi-block responses and keeps the fallback; the
    heuristics variant additionally injects the heuristic entries.
    """
    if agent == "few_shot":
        return replace(
            base,
            agent_mode=MODE_FEW_SHOT,
            max_queries=1,
            per_state_retry_limit=1,
            fallback_enabled=False,
            heuristics_on=False,
        )
    if agent == "copra":
        return replace(base, agent_mode=MODE_COPRA, fallback_enabled=False, heuristics_on=False)
    if agent == "feas":
        return replace(base, agent_mode=MODE_FEAS, heuristics_on=False)
    if agent == "feas_heuristics":
        return replace(base, agent_mode=MODE_FEAS, heuristics_on=True)
    raise ValueError(f"unknown agent {agent!r}")


@dataclass(frozen=True)
class RunSummary:
    """Per-(problem, run) outcome, without the full trace."""

    problem: str
    run_index: int
    status: str
    queries_used: int
    wall_time: float
    proof_script: tuple[str, ...] | None = None
    detail: str = ""

    @property
    def solved(self) -> bool:
        return self.status == "proved"

    def to_dict(self) -> dict:
        return {
            "problem": self.problem,
            "run_index": self.run_index,
            "status": self.status,
            "queries_used": self.queries_used,
            "wall_time": self.wall_time,
            "proof_script": list(self.proof_script) if self.proof_script else None,
            "detail": self.detail,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RunSummary":
        script = data.get("proof_script")
        return cls(
            problem=data["problem"],
            run_index=data["run_index"],
            status=data["status"],
            queries_used=data["queries_used"],
            wall_time=data["wall_time"],
            proof_script=tuple(script) if script else None,
            detail=data.get("detail", ""),
        )


@dataclass(frozen=True)
class RunReport:
    """Aggregated benchmark outcome for one agent/tier."""

    agent: str
    tier: str
    runs_per_problem: int
    summaries: tuple[RunSummary, ...]
    pass1: float
    pass2: float | None
    total_queries: int
    total_wall_time: float

    def to_dict(self) -> dict:
        return {
            "agent": self.agent,
            "tier": self.tier,
            "runs_per_problem": self.runs_per_problem,
            "pass1": self.pass1,
            "pass2": self.pass2,
            "total_queries": self.total_queries,
            "total_wall_time": self.total_wall_time,
            "summaries": [s.to_dict() for s in self.summaries],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "RunReport":
        return cls(
            agent=data["agent"],
            tier=data["tier"],
            runs_per_problem=data["runs_per_problem"],
            summaries=tuple(RunSummary.from_dict(d) for d in data["summaries"]),
            pass1=data["pass1"],
            pass2=data["pass2"],
            total_queries=data["total_queries"],
            total_wall_time=data["total_wall_time"],
        )

    @classmethod
    def from_json(cls, text: str) -> "RunReport":
        return cls.from_dict(json.loads(text))


def compute_pass_at_k(outcomes: Sequence[Sequence[bool]], k: int) -> float:
    """pass@k over a per-problem matrix of solved indicators.

    pass@1 is the mean solved indicator over all (problem, run) pairs — with
    two runs, the average of the two runs' solve rates. For k >= 2 it is the
    fraction of problems solved in at least one of the first k runs. Every
    problem must have at least k runs.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    if not outcomes:
        logger.warning("pass@%d over zero problems defined as 0.0", k)
        return 0.0
    if any(len(runs) < k for runs in outcomes):
        raise ValueError(f"pass@{k} requires at least {k} runs for every problem")
    if k == 1:
        pairs = [bool(r) for runs in outcomes for r in runs]
        return sum(pairs) / len(pairs)
    solved = sum(1 for runs in outcomes if any(runs[:k]))
    return solved / len(outcomes)


def format_percent(fraction: float) -> str:
    """Two-decimal percentage with half-up rounding, e.g. 0.8611... -> '86.11%'."""
    quantized = (Decimal(repr(fraction)) * 100).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP)
    return f"{quantized}%"


def load_problems(cfg: RunConfig) -> list[Problem]:
    if cfg.tier == "a1":
        return select_a1_subset(load_dataset(cfg.dataset_root, "hard"))
    return load_dataset(cfg.dataset_root, cfg.tier)


def _per_run_backend(cfg: RunConfig, problem: Problem, run_index: int) -> BackendConfig:
    """Give replay/record paths a per-(problem, run) file under the base path."""
    backend = cfg.backend
    updates = {}
    if backend.transcript_path is not None:
        base = Path(backend.transcript_path)
        if base.suffix != ".jsonl":
            updates["transcript_path"] = base / f"{problem.name}.run{run_index}.jsonl"
    if backend.record_path is not None:
        base = Path(backend.record_path)
        if base.suffix != ".jsonl":
            updates["record_path"] = base / f"{problem.name}.run{run_index}.jsonl"
    return replace(backend, **updates) if updates else backend


SearchFn = Callable[[Problem, ProverEnvironment, BackendConfig, SearchConfig], SearchOutcome]


def run_benchmark(
    cfg: RunConfig,
    search_fn: SearchFn | None = None,
    clock_factory: Callable[[], Callable[[], float]] | None = None,
) -> RunReport:
    """Execute the configured runs and aggregate the metrics.

    Per-search failures (a dead prover, a bad problem file) are recorded in
    that run's summary; the benchmark itself always completes. ``search_fn``
    and ``clock_factory`` exist for tests: they default to the real search
    and the monotonic clock.
    """
    problems = load_problems(cfg)
    runs = cfg.effective_runs
    search_cfg = agent_search_config(cfg.agent, cfg.search)
    out_dir = Path(cfg.out_dir) if cfg.out_dir is not None else None
    if out_dir is not None:
        (out_dir / "traces").mkdir(parents=True, exist_ok=True)
        (out_dir / "proofs").mkdir(parents=True, exist_ok=True)

    def one_run(problem: Problem, run_index: int) -> RunSummary:
        backend_cfg = _per_run_backend(cfg, problem, run_index)
        clock = clock_factory() if clock_factory is not None else time.monotonic
        env: ProverEnvironment | None = None
        try:
            env = cfg.env.make_env(problem)
            if search_fn is not None:
                outcome = search_fn(problem, env, backend_cfg, search_cfg)
            else:
                outcome = feas_search(problem, env, backend_cfg, search_cfg, clock=clock)
        except Exception as exc:  # infrastructure failure: record, keep going
            logger.warning("run failed for %s (run %d): %s", problem.name, run_index, exc)
            return RunSummary(
                problem=problem.name,
                run_index=run_index,
                status="error",
                queries_used=0,
                wall_time=0.0,
                detail=f"{type(exc).__name__}: {exc}",
            )
        finally:
            closer = getattr(env, "close", None)
            if callable(closer):
                closer()
        if out_dir is not None:
            export_trace(outcome, out_dir / "traces" / f"{problem.name}.run{run_index}.json")
            if outcome.proof_script:
                script = ",\n".join(outcome.proof_script) + "\n"
                (out_dir / "proofs" / f"{problem.name}.run{run_index}.txt").write_text(
                    script, encoding="utf-8"
                )
        return RunSummary(
            problem=problem.name,
            run_index=run_index,
            status=outcome.status,
            queries_used=outcome.queries_used,
            wall_time=outcome.wall_time,
            proof_script=outcome.proof_script,
            detail=outcome.detail,
        )

    jobs = [(p, r) for p in problems for r in range(runs)]
    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            summaries = list(pool.map(lambda job: one_run(*job), jobs))
    else:
        summaries = [one_run(*job) for job in jobs]
    summaries.sort(key=lambda s: (s.problem, s.run_index))

    by_problem: dict[str, list[bool]] = {p.name: [] for p in problems}
    for s in summaries:
        by_problem[s.problem].append(s.solved)
    matrix = [by_problem[p.name] for p in problems]
    pass1 = compute_pass_at_k(matrix, 1) if matrix else 0.0
    pass2 = compute_pass_at_k(matrix, 2) if matrix and runs >= 2 else None

    report = RunReport(
        agent=cfg.agent,
        tier=cfg.tier,
        runs_per_problem=runs,
        summaries=tuple(summaries),
        pass1=pass1,
        pass2=pass2,
        total_queries=sum(s.queries_used for s in summaries),
        total_wall_time=sum(s.wall_time for s in summaries),
    )
    if out_dir is not None:
        (out_dir / "report.json").write_text(emit_report(report, "structured"), encoding="utf-8")
    return report


def emit_report(report: RunReport | None, fmt: str = "table") -> str:
    """Render a report: a results table, or lossless JSON for machines."""
    if fmt == "structured":
        if report is None:
            raise ValueError("structured format requires a report")
        return report.to_json()
    if fmt != "table":
        raise ValueError(f"unknown report format: {fmt!r}")
    header = f"{'Agent':<18} {'Tier':<14} {'Pass@1 (Pass@2)':<20} {'Problems':>8} {'Runs':>5}"
    lines = [header, "-" * len(header)]
    if report is not None:
        pass2 = format_percent(report.pass2) if report.pass2 is not None else "-"
        cell = f"{format_percent(report.pass1)} ({pass2})"
        n_problems = len({s.problem for s in report.summaries})
        lines.append(
            f"{report.agent:<18} {report.tier:<14} {cell:<20} "
            f"{n_problems:>8} {report.runs_per_problem:>5}"
        )
    return "\n".join(lines) + "\n"
