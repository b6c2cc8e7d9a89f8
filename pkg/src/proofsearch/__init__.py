"""Tactic-search agent for interactive theorem provers.

A backtracking depth-first search over prover states, driven by block-parsed
proof suggestions from a pluggable backend, with per-state failure
memoization, loop detection along the current path, an automatic fallback
tactic, and a pass@k benchmark harness.
"""

from .backends import (
    Backend,
    BackendConfig,
    BackendError,
    ReplayBackend,
    ScriptedBackend,
    make_backend,
)
from .bench import (
    EnvConfig,
    RunConfig,
    RunReport,
    RunSummary,
    compute_pass_at_k,
    emit_report,
    run_benchmark,
)
from .dataset import DatasetManifest, Problem, load_dataset, select_a1_subset, validate_problem
from .parsing import (
    SuggestionResponse,
    join_blocks,
    parse_response,
    segment_blocks,
)
from .prompting import DEFAULT_HEURISTICS, HeuristicEntry, PromptBundle, promptify
from .prover import (
    ApplyResult,
    ProverEnvironment,
    SubprocessProver,
    ToyEnvSpec,
    ToyProver,
)
from .search import (
    SearchConfig,
    SearchOutcome,
    SearchTrace,
    TraceEvent,
    apply_with_fallback,
    feas_search,
    replay_proof,
)
from .state import (
    FailureDict,
    Hypothesis,
    Obligation,
    ProofState,
    SearchStack,
    StateKind,
    TacticBlock,
    canonical_form,
    state_equiv,
)

__version__ = "0.1.0"

__all__ = [
    "ApplyResult",
    "Backend",
    "BackendConfig",
    "BackendError",
    "DatasetManifest",
    "DEFAULT_HEURISTICS",
    "EnvConfig",
    "FailureDict",
    "HeuristicEntry",
    "Hypothesis",
    "Obligation",
    "Problem",
    "PromptBundle",
    "ProofState",
    "ProverEnvironment",
    "ReplayBackend",
    "RunConfig",
    "RunReport",
    "RunSummary",
    "ScriptedBackend",
    "SearchConfig",
    "SearchOutcome",
    "SearchStack",
    "SearchTrace",
    "StateKind",
    "SubprocessProver",
    "SuggestionResponse",
    "TacticBlock",
    "ToyEnvSpec",
    "ToyProver",
    "TraceEvent",
    "apply_with_fallback",
    "canonical_form",
    "compute_pass_at_k",
    "emit_report",
    "feas_search",
    "join_blocks",
    "load_dataset",
    "make_backend",
    "parse_response",
    "promptify",
    "replay_proof",
    "run_benchmark",
    "segment_blocks",
    "select_a1_subset",
    "state_equiv",
    "validate_problem",
]
