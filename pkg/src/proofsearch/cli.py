"""Command-line entry point: prove a single problem or benchmark a dataset.

Credentials for the remote backend are read from the environment variable
named by --api-key-env (default PROOFSEARCH_API_KEY); they are never taken on
the command line. Exit code 0 means the run completed (solved or not);
nonzero means a configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .backends import BackendConfig, DEFAULT_API_KEY_ENV
from .bench import (
    AGENTS,
    EnvConfig,
    RunConfig,
    agent_search_config,
    emit_report,
    format_percent,
    run_benchmark,
)
from .dataset import Problem, TIERS, validate_problem
from .prover import DEFAULT_APPLY_TIMEOUT, DEFAULT_FALLBACK_TACTIC
from .search import SearchConfig, export_trace, feas_search


class CliError(Exception):
    pass


def _add_common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--agent",
        choices=[a.replace("_", "-") for a in AGENTS],
        default="feas",
        help="agent mode (default: feas)",
    )
    parser.add_argument(
        "--backend",
        choices=["remote", "replay", "scripted"],
        default="remote",
        help="suggestion backend (default: remote)",
    )
    parser.add_argument("--model", default="", help="model name for the remote backend")
    parser.add_argument("--endpoint", default="", help="chat-completion URL for the remote backend")
    parser.add_argument(
        "--api-key-env",
        default=DEFAULT_API_KEY_ENV,
        help="environment variable holding the remote credential",
    )
    parser.add_argument(
        "--transcript",
        default=None,
        help="transcript path: read for --backend replay, written otherwise",
    )
    parser.add_argument("--script", default=None, help="JSON script table for --backend scripted")
    parser.add_argument("--max-queries", type=int, default=60, help="backend query budget")
    parser.add_argument("--timeout", type=float, default=720.0, help="wall-clock budget, seconds")
    parser.add_argument("--temperature", type=float, default=0.0, help="sampling temperature")
    parser.add_argument(
        "--retry-limit", type=int, default=5, help="queries allowed at one state before backtracking"
    )
    parser.add_argument(
        "--prover",
        choices=["toy", "external"],
        default="external",
        help="prover environment kind (default: external)",
    )
    parser.add_argument("--toy-spec", default=None, help="toy environment spec file or directory")
    parser.add_argument(
        "--prover-cmd", default=None, help="command line for the external prover REPL"
    )
    parser.add_argument(
        "--prover-timeout",
        type=float,
        default=DEFAULT_APPLY_TIMEOUT,
        help="per-tactic-application timeout, seconds",
    )
    parser.add_argument(
        "--fallback-tactic",
        default=DEFAULT_FALLBACK_TACTIC,
        help="automatic fallback tactic name",
    )
    parser.add_argument("--out", default=None, help="directory for traces, proofs, and reports")


def _build_backend(args: argparse.Namespace) -> BackendConfig:
    script = None
    if args.script is not None:
        script = json.loads(Path(args.script).read_text("utf-8"))
    transcript = replay_path = record_path = None
    if args.transcript is not None:
        if args.backend == "replay":
            replay_path = args.transcript
        else:
            record_path = args.transcript
        transcript = replay_path
    if args.backend == "remote" and not args.endpoint:
        raise CliError("--backend remote requires --endpoint")
    if args.backend == "replay" and transcript is None:
        raise CliError("--backend replay requires --transcript")
    if args.backend == "scripted" and script is None:
        raise CliError("--backend scripted requires --script")
    return BackendConfig(
        kind=args.backend,
        endpoint=args.endpoint,
        model=args.model,
        api_key_env=args.api_key_env,
        transcript_path=transcript,
        record_path=record_path,
        script=script,
        temperature=args.temperature,
    )


def _build_env(args: argparse.Namespace) -> EnvConfig:
    if args.prover == "toy":
        if args.toy_spec is None:
            raise CliError("--prover toy requires --toy-spec")
        return EnvConfig(
            kind="toy",
            toy_spec=args.toy_spec,
            fallback_tactic=args.fallback_tactic,
            apply_timeout=args.prover_timeout,
        )
    if args.prover_cmd is None:
        raise CliError("--prover external requires --prover-cmd")
    return EnvConfig(
        kind="external",
        command=tuple(args.prover_cmd.split()),
        fallback_tactic=args.fallback_tactic,
        apply_timeout=args.prover_timeout,
    )


def _build_search(args: argparse.Namespace) -> SearchConfig:
    return SearchConfig(
        max_queries=args.max_queries,
        timeout=args.timeout,
        per_state_retry_limit=args.retry_limit,
    )


def _cmd_prove(args: argparse.Namespace) -> int:
    path = Path(args.problem_file)
    if not path.is_file():
        raise CliError(f"problem file {path} does not exist")
    tier = path.parent.name if path.parent.name in TIERS else "simple"
    problem = Problem(
        name=path.stem, tier=tier, statement_text=path.read_text("utf-8"), source_path=path
    )
    findings = validate_problem(problem)
    if findings:
        raise CliError(f"problem {problem.name} failed validation: {'; '.join(findings)}")

    agent = args.agent.replace("-", "_")
    cfg = agent_search_config(agent, _build_search(args))
    env = _build_env(args).make_env(problem)
    try:
        outcome = feas_search(problem, env, _build_backend(args), cfg)
    finally:
        closer = getattr(env, "close", None)
        if callable(closer):
            closer()

    print(f"{problem.name}: {outcome.status}")
    print(f"queries used: {outcome.queries_used}")
    print(f"wall time: {outcome.wall_time:.2f}s")
    if outcome.proof_script:
        print("proof:")
        for tactic in outcome.proof_script:
            print(f"    {tactic},")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        export_trace(outcome, out / f"{problem.name}.trace.json")
    return 0


def _cmd_bench(args: argparse.Namespace) -> int:
    cfg = RunConfig(
        agent=args.agent.replace("-", "_"),
        tier=args.tier,
        dataset_root=args.root,
        search=_build_search(args),
        backend=_build_backend(args),
        env=_build_env(args),
        runs_per_problem=args.runs,
        workers=args.workers,
        out_dir=args.out,
    )
    report = run_benchmark(cfg)
    print(emit_report(report, args.format), end="")
    if args.format == "table":
        solved = sum(1 for s in report.summaries if s.solved)
        print(f"\nsolved {solved}/{len(report.summaries)} runs, "
              f"{report.total_queries} queries, "
              f"pass@1 {format_percent(report.pass1)}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="proofsearch",
        description="Tactic-search agent and benchmark harness for interactive theorem provers",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    prove = sub.add_parser("prove", help="search for a proof of one problem file")
    prove.add_argument("problem_file", help="path to a .lean problem file")
    _add_common_flags(prove)
    prove.set_defaults(func=_cmd_prove)

    bench = sub.add_parser("bench", help="run an agent over a dataset tier")
    bench.add_argument("root", help="dataset root directory")
    bench.add_argument(
        "--tier", choices=["simple", "intermediate", "hard", "a1"], default="simple"
    )
    bench.add_argument("--runs", type=int, default=0, help="runs per problem (0 = protocol default)")
    bench.add_argument("--workers", type=int, default=1, help="concurrent searches")
    bench.add_argument("--format", choices=["table", "structured"], default="table")
    _add_common_flags(bench)
    bench.set_defaults(func=_cmd_bench)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CliError, FileNotFoundError, ValueError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
