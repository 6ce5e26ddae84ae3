"""Core model of a POWER8-style hardware transactional memory.

The substrate simulated here is deliberately small: a set of SMT cores, a
per-core TMCAM that tracks touched cache lines, a flat committed memory
(abstract 64-bit addresses, 128-byte cache lines), and transaction
descriptors that buffer writes until commit.  Conflict resolution follows
the POWER8 documentation: at cache-line granularity, the last reader kills
any previous writer, and the last writer loses on a write-write collision.
Rollback-only transactions (ROTs) track writes but read with plain loads,
so a write-after-read by a ROT goes undetected while a read-after-write
kills the writer.  Suspended transactions keep running non-transactionally;
conflicts detected during the suspension window take effect at resume.

Nothing in this module schedules anything.  Callers provide an ``emit``
callback that timestamps and records trace events, and a ``on_kill``
callback fired when a transaction is aborted by another thread's access.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, List, Optional, Set

CACHE_LINE_BYTES = 128
LINE_SHIFT = 7  # log2(CACHE_LINE_BYTES)

# CacheLineId and addresses are plain ints; an address maps to its line via
# line_of().  Workload address allocators keep distinct objects on distinct
# lines, starting at line 1; line 0 is reserved for the global lock word.
CacheLineId = int
LOCK_WORD_ADDR = 0


def line_of(addr: int) -> CacheLineId:
    return addr >> LINE_SHIFT


class TxMode(Enum):
    HTM = "Htm"      # regular transaction: reads and writes tracked
    ROT = "Rot"      # rollback-only: writes tracked, reads are plain loads
    NONTX = "NonTx"  # non-transactional accesses (RO fast path)
    SGL = "Sgl"      # body run under the single global lock


class TxStatus(Enum):
    ACTIVE = "Active"
    SUSPENDED = "Suspended"
    DOOMED = "Doomed"  # suspended and already condemned; aborts at resume
    COMMITTED = "Committed"
    ABORTED = "Aborted"


class AbortReason(Enum):
    CONFLICT = "Conflict"
    CAPACITY = "Capacity"
    NONTX_KILL = "NonTxKill"
    EXPLICIT = "Explicit"


@dataclass(frozen=True)
class Topology:
    """Thread-to-core layout and the per-core TMCAM budget.

    Hardware threads are numbered 0..n_threads-1 and packed onto cores in
    tid order: core(tid) = tid // smt_level.  All hardware threads of one
    core share its TMCAM entries.
    """

    n_threads: int
    smt_level: int = 1
    tmcam_lines: int = 64

    def __post_init__(self) -> None:
        if self.n_threads < 1 or self.smt_level < 1 or self.tmcam_lines < 1:
            raise ValueError("topology fields must be positive")

    def core_of(self, tid: int) -> int:
        return tid // self.smt_level

    @property
    def n_cores(self) -> int:
        return (self.n_threads + self.smt_level - 1) // self.smt_level


@dataclass(frozen=True)
class SimConfig:
    """Cost model and policy switches for one simulation."""

    topology: Topology
    cost_mem: int = 1        # cycles per memory access
    cost_begin: int = 3      # cycles for tbegin
    cost_end: int = 3        # cycles for tend
    cost_proto: int = 1      # cycles per protocol step / wait poll
    cost_sync: int = 8       # cycles for a full memory barrier
    cost_lwsync: int = 4     # cycles for a lightweight barrier
    waw_policy: str = "writer"   # who dies when a write hits a tracked read
    safety_wait: bool = True     # ablation switch for the quiescence wait
    livelock_budget: int = 1_000_000
    record_history: bool = True

    def __post_init__(self) -> None:
        if self.waw_policy not in ("writer", "reader"):
            raise ValueError("waw_policy must be 'writer' or 'reader'")


class TxAbortError(Exception):
    """Raised into a transaction's execution when its attempt dies."""

    def __init__(self, reason: AbortReason):
        super().__init__(reason.value)
        self.reason = reason


@dataclass(eq=False)
class TxDescriptor:
    # identity semantics: descriptors live in reader sets
    txid: int
    tid: int
    mode: TxMode
    status: TxStatus = TxStatus.ACTIVE
    tracked_reads: Set[CacheLineId] = field(default_factory=set)
    tracked_writes: Set[CacheLineId] = field(default_factory=set)
    write_buffer: Dict[int, int] = field(default_factory=dict)

    def footprint(self) -> int:
        return len(self.tracked_reads | self.tracked_writes)

    def is_live(self) -> bool:
        return self.status in (TxStatus.ACTIVE, TxStatus.SUSPENDED)


class GlobalLock:
    """Single global fallback lock. -1 means free."""

    __slots__ = ("holder",)

    def __init__(self) -> None:
        self.holder = -1

    def is_locked(self) -> bool:
        return self.holder != -1

    def lock(self, tid: int) -> None:
        if self.holder != -1:
            raise RuntimeError(f"lock already held by {self.holder}")
        self.holder = tid

    def unlock(self, tid: int) -> None:
        if self.holder != tid:
            raise RuntimeError(f"unlock by {tid} but holder is {self.holder}")
        self.holder = -1


# Committed store: address -> value, absent means 0.
SimMemory = Dict[int, int]


class HtmSystem:
    """Transactional memory state for all threads of one simulation.

    ``emit(kind, tid, txid, args)`` records a trace event (the caller owns
    cycle numbering).  ``on_kill(tid)`` tells the caller that some thread's
    live transaction was just aborted by another thread's access, so the
    owning task must unwind before it executes anything else.
    """

    def __init__(
        self,
        config: SimConfig,
        emit: Callable[..., None],
        on_kill: Optional[Callable[[int, AbortReason], None]] = None,
    ) -> None:
        self.config = config
        self.topology = config.topology
        self.memory: SimMemory = {}
        self.emit = emit
        self.on_kill = on_kill or (lambda tid, reason: None)
        self.tx: List[Optional[TxDescriptor]] = [None] * self.topology.n_threads
        self.core_used = [0] * self.topology.n_cores
        self._writer_of: Dict[CacheLineId, TxDescriptor] = {}
        self._readers_of: Dict[CacheLineId, Set[TxDescriptor]] = {}

    # -- internal bookkeeping ------------------------------------------------

    def _release_lines(self, desc: TxDescriptor) -> None:
        for ln in desc.tracked_writes:
            if self._writer_of.get(ln) is desc:
                del self._writer_of[ln]
        for ln in desc.tracked_reads:
            rs = self._readers_of.get(ln)
            if rs is not None:
                rs.discard(desc)
                if not rs:
                    del self._readers_of[ln]
        self.core_used[self.topology.core_of(desc.tid)] -= desc.footprint()
        desc.tracked_reads.clear()
        desc.tracked_writes.clear()
        desc.write_buffer.clear()

    def _kill(self, desc: TxDescriptor, reason: AbortReason) -> None:
        # Invalidating the TMCAM entries happens immediately either way; a
        # suspended victim only materializes the abort at resume.
        self._release_lines(desc)
        if desc.status is TxStatus.SUSPENDED:
            desc.status = TxStatus.DOOMED
            return
        desc.status = TxStatus.ABORTED
        self.tx[desc.tid] = None
        self.emit("abort", desc.tid, desc.txid, (reason.value,))
        self.on_kill(desc.tid, reason)

    def _self_abort(self, desc: TxDescriptor, reason: AbortReason) -> None:
        self._release_lines(desc)
        desc.status = TxStatus.ABORTED
        self.tx[desc.tid] = None
        self.emit("abort", desc.tid, desc.txid, (reason.value,))
        raise TxAbortError(reason)

    def _track(self, desc: TxDescriptor, ln: CacheLineId, write: bool) -> None:
        # Capacity check before the entry lands: the overflowing accessor is
        # the victim, and usage never exceeds the budget after any op.
        if ln not in desc.tracked_reads and ln not in desc.tracked_writes:
            core = self.topology.core_of(desc.tid)
            if self.core_used[core] + 1 > self.topology.tmcam_lines:
                self._self_abort(desc, AbortReason.CAPACITY)
            self.core_used[core] += 1
        if write:
            desc.tracked_writes.add(ln)
            self._writer_of[ln] = desc
        else:
            desc.tracked_reads.add(ln)
            self._readers_of.setdefault(ln, set()).add(desc)

    def _live_tx(self, tid: int, op: str) -> TxDescriptor:
        desc = self.tx[tid]
        if desc is None or desc.status not in (TxStatus.ACTIVE, TxStatus.SUSPENDED, TxStatus.DOOMED):
            raise RuntimeError(f"{op}: thread {tid} has no live transaction")
        return desc

    # -- transactional operations --------------------------------------------

    def tbegin(self, tid: int, mode: TxMode, txid: int) -> TxDescriptor:
        if self.tx[tid] is not None:
            raise RuntimeError(f"tbegin: thread {tid} already transactional")
        if mode not in (TxMode.HTM, TxMode.ROT):
            raise ValueError("tbegin mode must be HTM or ROT")
        desc = TxDescriptor(txid=txid, tid=tid, mode=mode)
        self.tx[tid] = desc
        return desc

    def tread(self, tid: int, addr: int) -> int:
        """Transactional read. The last reader kills any previous writer."""
        desc = self._live_tx(tid, "tread")
        if desc.status is not TxStatus.ACTIVE:
            raise RuntimeError("tread: transaction is suspended")
        ln = line_of(addr)
        w = self._writer_of.get(ln)
        if w is not None and w is not desc:
            self._kill(w, AbortReason.CONFLICT)
        if addr in desc.write_buffer:
            val = desc.write_buffer[addr]
        else:
            val = self.memory.get(addr, 0)
        if desc.mode is TxMode.HTM:
            self._track(desc, ln, write=False)
        self.emit("read", tid, desc.txid, (ln, addr, val))
        return val

    def twrite(self, tid: int, addr: int, value: int) -> None:
        """Transactional buffered write. The last writer is the one killed."""
        desc = self._live_tx(tid, "twrite")
        if desc.status is not TxStatus.ACTIVE:
            raise RuntimeError("twrite: transaction is suspended")
        ln = line_of(addr)
        w = self._writer_of.get(ln)
        if w is not None and w is not desc:
            self._self_abort(desc, AbortReason.CONFLICT)
        readers = [r for r in self._readers_of.get(ln, ()) if r is not desc]
        if readers:
            if self.config.waw_policy == "writer":
                self._self_abort(desc, AbortReason.CONFLICT)
            for r in readers:
                self._kill(r, AbortReason.CONFLICT)
        self._track(desc, ln, write=True)
        desc.write_buffer[addr] = value
        self.emit("write", tid, desc.txid, (ln, addr, value))

    def tsuspend(self, tid: int) -> None:
        desc = self._live_tx(tid, "tsuspend")
        if desc.status is not TxStatus.ACTIVE:
            raise RuntimeError("tsuspend: not active")
        desc.status = TxStatus.SUSPENDED

    def tresume(self, tid: int) -> None:
        desc = self._live_tx(tid, "tresume")
        if desc.status is TxStatus.DOOMED:
            desc.status = TxStatus.ABORTED
            self.tx[tid] = None
            self.emit("abort", tid, desc.txid, (AbortReason.CONFLICT.value,))
            raise TxAbortError(AbortReason.CONFLICT)
        if desc.status is not TxStatus.SUSPENDED:
            raise RuntimeError("tresume: not suspended")
        desc.status = TxStatus.ACTIVE

    def tend(self, tid: int) -> None:
        """Commit: publish the write buffer and free the TMCAM entries."""
        desc = self._live_tx(tid, "tend")
        if desc.status is not TxStatus.ACTIVE:
            raise RuntimeError("tend: not active")
        for addr, val in desc.write_buffer.items():
            self.memory[addr] = val
        self._release_lines(desc)
        desc.status = TxStatus.COMMITTED
        self.tx[tid] = None
        self.emit("commit", tid, desc.txid, ())

    def tabort(self, tid: int) -> None:
        """Explicit abort of the caller's own transaction."""
        desc = self._live_tx(tid, "tabort")
        self._self_abort(desc, AbortReason.EXPLICIT)

    # -- non-transactional operations -----------------------------------------

    def ntread(self, tid: int, addr: int, txid: int = -1) -> int:
        """Plain load. Kills any other thread's writer of the line."""
        ln = line_of(addr)
        w = self._writer_of.get(ln)
        if w is not None and w.tid != tid:
            self._kill(w, AbortReason.CONFLICT)
        val = self.memory.get(addr, 0)
        self.emit("read", tid, txid, (ln, addr, val))
        return val

    def ntwrite(self, tid: int, addr: int, value: int, txid: int = -1) -> None:
        """Plain store. Kills every other thread's tracker of the line."""
        ln = line_of(addr)
        w = self._writer_of.get(ln)
        if w is not None and w.tid != tid:
            self._kill(w, AbortReason.NONTX_KILL)
        for r in [r for r in self._readers_of.get(ln, ()) if r.tid != tid]:
            self._kill(r, AbortReason.NONTX_KILL)
        self.memory[addr] = value
        self.emit("write", tid, txid, (ln, addr, value))
