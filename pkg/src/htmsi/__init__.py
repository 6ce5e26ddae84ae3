"""Deterministic simulator of snapshot-isolated hardware transactions.

A virtual-time model of a POWER8-style HTM (regular and rollback-only
transactions, suspend/resume, a per-core transactional buffer shared by SMT
threads) with a quiescence-based snapshot-isolation protocol layered on
top, plus history checkers, an exhaustive interleaving explorer, and
benchmark workloads.
"""

from .checker import (
    MalformedHistory,
    TimestampAssignment,
    Verdict,
    Violation,
    assign_timestamps,
    check_serializable,
    check_si,
    promote_reads,
)
from .engine import (
    DeadlockError,
    ExecutionResult,
    ExplorationBoundExceeded,
    ExplorationReport,
    LivelockError,
    Machine,
    RoundRobin,
    SeededRandom,
    explore_all,
    explore_tasks,
    run,
)
from .events import Event, History, dump_history, parse_history
from .htm import (
    AbortReason,
    CACHE_LINE_BYTES,
    HtmSystem,
    SimConfig,
    Topology,
    TxAbortError,
    TxMode,
    TxStatus,
    line_of,
)
from .program import Backend, Program, RetryPolicy, TxBody, make_program
from .workloads import (
    HashmapParams,
    TpccParams,
    hashmap_program,
    tpcc_lite_program,
)

__version__ = "0.1.0"

__all__ = [
    "AbortReason",
    "Backend",
    "CACHE_LINE_BYTES",
    "DeadlockError",
    "Event",
    "ExecutionResult",
    "ExplorationBoundExceeded",
    "ExplorationReport",
    "HashmapParams",
    "History",
    "HtmSystem",
    "LivelockError",
    "Machine",
    "MalformedHistory",
    "Program",
    "RetryPolicy",
    "RoundRobin",
    "SeededRandom",
    "SimConfig",
    "TimestampAssignment",
    "Topology",
    "TpccParams",
    "TxAbortError",
    "TxBody",
    "TxMode",
    "TxStatus",
    "Verdict",
    "Violation",
    "assign_timestamps",
    "check_serializable",
    "check_si",
    "dump_history",
    "explore_all",
    "explore_tasks",
    "hashmap_program",
    "line_of",
    "make_program",
    "parse_history",
    "promote_reads",
    "run",
    "tpcc_lite_program",
]
