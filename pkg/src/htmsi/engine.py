"""Deterministic virtual-time scheduler over resumable tasks.

Each simulated hardware thread is a Python generator that yields one action
tuple per step (memory access, thread-state access, lock access, or
wait-loop poll).  The scheduler picks an enabled task, executes its pending
action against the machine state, advances the global virtual clock by the
action's cost, and feeds the result back into the generator.  Actions that
touch no shared state (tbegin, suspend, resume, trace markers) are fused
into the same scheduler step as the neighboring shared action: they cannot
race with anything, so treating them as interleaving points would only
inflate the schedule space.  Because a whole execution is a pure function
of the schedule, seeded runs replay exactly and exhaustive exploration
enumerates every interleaving by re-running the program with longer and
longer choice prefixes.

Wait-loop semantics differ by mode.  In run mode a task blocked in a wait
loop is still schedulable: scheduling it burns one cycle and re-checks the
condition.  In exploration mode such a task is not enabled until the
watched condition changes (an unchanged re-check would alter nothing but
the clock, making the interleaving tree infinite), except that a pending
abort always makes its victim schedulable so the unwind can be delivered.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Callable, Dict, Generator, List, Optional, Sequence, Tuple

from .events import Event, History
from .htm import AbortReason, HtmSystem, SimConfig, Topology, TxAbortError, TxMode
from .program import Program

# The virtual clock starts here so thread-state timestamps can never collide
# with the sentinels below.
START_CLOCK = 2
STATE_INACTIVE = 0
STATE_COMPLETED = 1

# Action opcodes. Actions are plain tuples with the opcode first; the hot
# paths stay allocation-light and replays stay cheap.
A_TBEGIN = 1          # (op, TxMode)
A_TREAD = 2           # (op, addr)
A_TWRITE = 3          # (op, addr, value)
A_TSUSPEND = 4
A_TRESUME = 5
A_TEND = 6
A_NTREAD = 7          # (op, addr)
A_NTWRITE = 8         # (op, addr, value)
A_ARM = 9             # state[tid] = now; emits TxStart + Barrier(sync)
A_STATE = 10          # (op, value, barrier|None)
A_SNAPSHOT = 11       # -> tuple(state)
A_WAIT_STATE_CHANGE = 12    # (op, tid, armed_value): poll until it moves
A_WAIT_STATE_INACTIVE = 13  # (op, tid): poll until inactive
A_LOCK_TEST = 14      # -> bool
A_LOCK_ACQUIRE = 15   # blocks while held
A_LOCK_RELEASE = 16
A_WAIT_LOCK_FREE = 17  # blocks while held, does not acquire
A_TXSTART_MARK = 18   # TxStart for lock-path bodies
A_COMMIT_MARK = 19    # Commit for lock-path bodies
A_RO_FINISH = 20      # lwsync + Commit + state inactive
A_ABORT_SELF = 21
A_CONFIRM = 22        # state[tid] = now again; emits TxStart (no barrier)

_BLOCKING_OPS = frozenset(
    [A_WAIT_STATE_CHANGE, A_WAIT_STATE_INACTIVE, A_LOCK_ACQUIRE, A_WAIT_LOCK_FREE]
)

# Actions that touch no shared state (mode flips and trace markers). They
# complete in the same scheduler step as the neighboring shared action, so
# they are not interleaving points; their cycle costs still accrue.
_LOCAL_OPS = frozenset([A_TBEGIN, A_TSUSPEND, A_TRESUME, A_TXSTART_MARK])


class LivelockError(RuntimeError):
    """No transaction committed within the configured cycle budget."""


class DeadlockError(RuntimeError):
    """Exploration reached a state where no task is enabled."""


class ExplorationBoundExceeded(RuntimeError):
    """The program has more yield points or interleavings than allowed."""


class _GlobalLock:
    __slots__ = ("holder", "last_release")

    def __init__(self) -> None:
        self.holder = -1
        self.last_release = 0

    def is_locked(self) -> bool:
        return self.holder != -1


class Task:
    """One simulated hardware thread parked at its next action."""

    __slots__ = ("tid", "gen", "pending", "abort_pending", "done", "txid")

    def __init__(self, tid: int, gen: Generator):
        self.tid = tid
        self.gen = gen
        self.pending: Optional[Tuple] = None
        self.abort_pending: Optional[AbortReason] = None
        self.done = False
        self.txid = -1


class Machine:
    """All shared state of one simulation: memory, TMCAMs, thread-state
    array, global lock, virtual clock, trace, and counters."""

    def __init__(self, config: SimConfig):
        n = config.topology.n_threads
        self.config = config
        self.clock = START_CLOCK
        self.state = [STATE_INACTIVE] * n
        self.lock = _GlobalLock()
        self.history: Optional[History] = [] if config.record_history else None
        self.tasks: List[Task] = []
        self.committed = 0
        self.per_thread_commits = [0] * n
        self.per_thread_sgl = [0] * n
        self.htm_commits = 0
        self.ro_commits = 0
        self.sgl_commits = 0
        self.aborts: Dict[str, int] = {
            AbortReason.CONFLICT.value: 0,
            AbortReason.CAPACITY.value: 0,
            AbortReason.NONTX_KILL.value: 0,
            AbortReason.EXPLICIT.value: 0,
        }
        self.last_commit_clock = START_CLOCK
        self.steps = 0
        self._next_txid = 0
        # cost model bound once; emit and _execute are the hot paths
        self._cost_mem = config.cost_mem
        self._cost_begin = config.cost_begin
        self._cost_end = config.cost_end
        self._cost_proto = config.cost_proto
        self._cost_sync = config.cost_sync
        self._cost_lwsync = config.cost_lwsync
        self.htm = HtmSystem(config, emit=self.emit, on_kill=self._on_kill)

    # -- trace and bookkeeping -------------------------------------------------

    def emit(self, kind: str, tid: int, txid: int, args: Tuple = ()) -> None:
        if self.history is not None:
            self.history.append(Event(self.clock, tid, txid, kind, args))
        self.clock += 1
        if kind == "commit":
            self.committed += 1
            self.per_thread_commits[tid] += 1
            self.last_commit_clock = self.clock
        elif kind == "abort":
            self.aborts[args[0]] += 1

    def _on_kill(self, tid: int, reason: AbortReason) -> None:
        self.tasks[tid].abort_pending = reason

    def new_attempt(self, task: Task) -> int:
        txid = self._next_txid
        self._next_txid += 1
        task.txid = txid
        return txid

    # -- scheduling ------------------------------------------------------------

    def attach(self, gens: Sequence[Generator]) -> None:
        self.tasks = [Task(tid, g) for tid, g in enumerate(gens)]
        for t in self.tasks:
            self._advance(t, None, None)

    def _advance(self, task: Task, value, exc) -> None:
        try:
            if exc is not None:
                task.pending = task.gen.throw(exc)
            else:
                task.pending = task.gen.send(value)
        except StopIteration:
            task.done = True
            task.pending = None

    def _is_blocked(self, act: Tuple) -> bool:
        op = act[0]
        if op == A_WAIT_STATE_CHANGE:
            return self.state[act[1]] == act[2]
        if op == A_WAIT_STATE_INACTIVE:
            return self.state[act[1]] != STATE_INACTIVE
        # A_LOCK_ACQUIRE, A_WAIT_LOCK_FREE
        return self.lock.holder != -1

    def runnable_explore(self, task: Task) -> bool:
        if task.done:
            return False
        if task.abort_pending is not None:
            return True
        act = task.pending
        if act[0] in _BLOCKING_OPS and self._is_blocked(act):
            return False
        return True

    def step(self, task: Task) -> None:
        """Execute one scheduler step: one shared action plus any directly
        following local actions of the same task."""
        self.steps += 1
        if task.abort_pending is not None:
            reason = task.abort_pending
            task.abort_pending = None
            self.clock += self._cost_proto
            self._advance(task, None, TxAbortError(reason))
            self._drain_local(task)
            return
        act = task.pending
        if act[0] in _BLOCKING_OPS and self._is_blocked(act):
            self.clock += self._cost_proto  # failed poll
            return
        self._execute(task, act)
        self._drain_local(task)

    def _drain_local(self, task: Task) -> None:
        while not task.done and task.pending is not None and task.pending[0] in _LOCAL_OPS:
            self._execute(task, task.pending)

    def _execute(self, task: Task, act: Tuple) -> None:
        htm = self.htm
        tid = task.tid
        op = act[0]
        c0 = self.clock
        cost = self._cost_proto
        result = None
        exc = None
        try:
            if op == A_TREAD:
                result = htm.tread(tid, act[1])
                cost = self._cost_mem
            elif op == A_NTREAD:
                result = htm.ntread(tid, act[1], task.txid)
                cost = self._cost_mem
            elif op == A_TWRITE:
                htm.twrite(tid, act[1], act[2])
                cost = self._cost_mem
            elif op == A_NTWRITE:
                # optional 4th element overrides the txid (lock-word stores
                # are lock bookkeeping, not transaction data)
                txid = act[3] if len(act) > 3 else task.txid
                htm.ntwrite(tid, act[1], act[2], txid)
                cost = self._cost_mem
            elif op == A_ARM:
                self.state[tid] = self.clock
                self.emit("start", tid, task.txid)
                self.emit("barrier", tid, -1, ("sync",))
                cost = self._cost_proto + self._cost_sync
            elif op == A_CONFIRM:
                # Re-stamp the already-armed slot. The slot never goes
                # through inactive here, so waiting writers stay safe; only
                # the announced timestamp moves forward.
                self.state[tid] = self.clock
                self.emit("start", tid, task.txid)
            elif op == A_STATE:
                self.state[tid] = act[1]
                self.emit("state", tid, -1, (act[1],))
                if act[2] is not None:
                    self.emit("barrier", tid, -1, (act[2],))
                    cost = self._cost_proto + (
                        self._cost_sync if act[2] == "sync" else self._cost_lwsync
                    )
            elif op == A_SNAPSHOT:
                result = tuple(self.state)
                self.emit("snapshot", tid, task.txid, result)
            elif op == A_TBEGIN:
                htm.tbegin(tid, act[1], task.txid)
                if act[1] is TxMode.HTM:
                    self.emit("start", tid, task.txid)
                cost = self._cost_begin
            elif op == A_TSUSPEND:
                htm.tsuspend(tid)
            elif op == A_TRESUME:
                htm.tresume(tid)
            elif op == A_TEND:
                htm.tend(tid)
                self.htm_commits += 1
                cost = self._cost_end
            elif op == A_WAIT_STATE_CHANGE or op == A_WAIT_STATE_INACTIVE:
                pass  # condition already satisfied; the check costs one poll
            elif op == A_WAIT_LOCK_FREE:
                pass
            elif op == A_LOCK_TEST:
                # stale: a holder released after this thread armed, so the
                # armed timestamp predates writes the thread may observe.
                result = (
                    self.lock.is_locked(),
                    self.lock.last_release > self.state[tid],
                )
            elif op == A_LOCK_ACQUIRE:
                self.lock.holder = tid
                self.per_thread_sgl[tid] += 1
                self.emit("lock_acquire", tid, -1)
            elif op == A_LOCK_RELEASE:
                if self.lock.holder != tid:
                    raise RuntimeError("lock release by non-holder")
                self.lock.holder = -1
                self.lock.last_release = self.clock
                self.emit("lock_release", tid, -1)
            elif op == A_TXSTART_MARK:
                self.emit("start", tid, task.txid)
            elif op == A_COMMIT_MARK:
                self.emit("commit", tid, task.txid)
                self.sgl_commits += 1
            elif op == A_RO_FINISH:
                self.emit("barrier", tid, -1, ("lwsync",))
                self.emit("commit", tid, task.txid)
                self.state[tid] = STATE_INACTIVE
                self.emit("state", tid, -1, (STATE_INACTIVE,))
                self.ro_commits += 1
                cost = self._cost_proto + self._cost_lwsync
            elif op == A_ABORT_SELF:
                if htm.tx[tid] is not None:
                    htm.tabort(tid)
                else:
                    self.emit("abort", tid, task.txid, (AbortReason.EXPLICIT.value,))
                    raise TxAbortError(AbortReason.EXPLICIT)
            else:
                raise RuntimeError(f"unknown action {act!r}")
        except TxAbortError as e:
            exc = e
        used = self.clock - c0
        if used < cost:
            self.clock += cost - used
        self._advance(task, result, exc)


@dataclass
class ExecutionResult:
    """Outcome of one complete run."""

    committed: int
    total_cycles: int
    aborts: Dict[str, int]
    per_thread_commits: List[int]
    per_thread_sgl: List[int]
    htm_commits: int
    ro_commits: int
    sgl_commits: int
    steps: int
    history: Optional[History] = None

    @property
    def throughput(self) -> float:
        return self.committed / self.total_cycles if self.total_cycles else 0.0

    @property
    def total_aborts(self) -> int:
        return sum(self.aborts.values())


class RoundRobin:
    """Cycle through live tasks in tid order."""

    def __init__(self) -> None:
        self._next = 0

    def choose(self, candidates: List[Task]) -> Task:
        for t in candidates:
            if t.tid >= self._next:
                self._next = t.tid + 1
                return t
        self._next = candidates[0].tid + 1
        return candidates[0]


class SeededRandom:
    """Uniform choice among live tasks, reproducible from the seed."""

    def __init__(self, seed: int):
        self.seed = seed
        self._rng = random.Random(seed)

    def choose(self, candidates: List[Task]) -> Task:
        return candidates[self._rng.randrange(len(candidates))]


SchedulePolicy = object  # RoundRobin | SeededRandom; exploration has its own driver


def _result(m: Machine) -> ExecutionResult:
    return ExecutionResult(
        committed=m.committed,
        total_cycles=m.clock - START_CLOCK,
        aborts=dict(m.aborts),
        per_thread_commits=list(m.per_thread_commits),
        per_thread_sgl=list(m.per_thread_sgl),
        htm_commits=m.htm_commits,
        ro_commits=m.ro_commits,
        sgl_commits=m.sgl_commits,
        steps=m.steps,
        history=m.history,
    )


def run(
    program: Program,
    policy=None,
    config: Optional[SimConfig] = None,
) -> ExecutionResult:
    """Run the program to completion under a seeded or round-robin policy."""
    from . import protocol

    if config is None:
        config = SimConfig(topology=program.topology)
    if policy is None:
        policy = RoundRobin()
    m = Machine(config)
    m.attach([protocol.thread_main(m, tid, program) for tid in range(program.n_threads)])
    budget = config.livelock_budget
    while True:
        alive = [t for t in m.tasks if not t.done]
        if not alive:
            break
        m.step(policy.choose(alive))
        if m.clock - m.last_commit_clock > budget:
            raise LivelockError(
                f"no commit for {budget} cycles at cycle {m.clock}; "
                f"{m.committed} committed, aborts={m.aborts}"
            )
    return _result(m)


# -- exhaustive exploration ----------------------------------------------------


@dataclass
class ExplorationReport:
    n_interleavings: int
    n_violations: int
    violation_rules: Dict[str, int]
    witnesses: List[Tuple[Tuple[int, ...], History]] = field(default_factory=list)
    reference_steps: int = 0


def explore_tasks(
    make_tasks: Callable[[Machine], List[Generator]],
    config: SimConfig,
    bound: int = 18,
    check: Optional[Callable[[History], object]] = None,
    visit: Optional[Callable[[History, Machine], None]] = None,
    max_interleavings: int = 10_000_000,
    max_witnesses: int = 5,
    step_cap: int = 100_000,
) -> ExplorationReport:
    """Depth-first enumeration of every schedule of the given task set.

    Each complete execution is reproduced from scratch by replaying a choice
    prefix, so machine state never needs checkpointing.  A choice is recorded
    only where two or more tasks are enabled; forced segments do not branch.
    """
    if not config.record_history and (check is not None or visit is not None):
        import dataclasses

        config = dataclasses.replace(config, record_history=True)

    def one_run(prefix: Sequence[int]):
        m = Machine(config)
        m.attach(make_tasks(m))
        branches: List[Tuple[int, int]] = []  # (n_enabled, chosen) per branch point
        steps = 0
        # hot loop: the enabled-set test is inlined (same predicate as
        # Machine.runnable_explore)
        tasks = m.tasks
        state = m.state
        lock = m.lock
        n_prefix = len(prefix)
        while True:
            enabled = []
            pending_exist = False
            for t in tasks:
                if t.done:
                    continue
                pending_exist = True
                if t.abort_pending is None:
                    a = t.pending
                    op = a[0]
                    if op in _BLOCKING_OPS:
                        if op == A_WAIT_STATE_CHANGE:
                            if state[a[1]] == a[2]:
                                continue
                        elif op == A_WAIT_STATE_INACTIVE:
                            if state[a[1]] != STATE_INACTIVE:
                                continue
                        elif lock.holder != -1:
                            continue
                enabled.append(t)
            if not enabled:
                if not pending_exist:
                    break
                raise DeadlockError(
                    f"no enabled task; states={m.state} lock={m.lock.holder}"
                )
            if len(enabled) == 1:
                chosen = enabled[0]
            else:
                depth = len(branches)
                idx = prefix[depth] if depth < n_prefix else 0
                branches.append((len(enabled), idx))
                chosen = enabled[idx]
            m.step(chosen)
            steps += 1
            if steps > step_cap:
                raise ExplorationBoundExceeded(
                    f"execution exceeded {step_cap} steps; livelock in explore mode?"
                )
        return m, branches, steps

    m0, _, ref_steps = one_run(())
    if ref_steps > bound:
        raise ExplorationBoundExceeded(
            f"program has {ref_steps} yield points under the reference schedule, "
            f"bound is {bound}"
        )

    n_interleavings = 0
    n_violations = 0
    violation_rules: Dict[str, int] = {}
    witnesses: List[Tuple[Tuple[int, ...], History]] = []
    prefix: List[int] = []
    while True:
        m, branches, _ = one_run(prefix)
        n_interleavings += 1
        if n_interleavings > max_interleavings:
            raise ExplorationBoundExceeded(
                f"more than {max_interleavings} interleavings"
            )
        hist = m.history if m.history is not None else []
        if visit is not None:
            visit(hist, m)
        if check is not None:
            verdict = check(hist)
            if not verdict.ok:
                n_violations += 1
                for v in verdict.violations:
                    violation_rules[v.rule] = violation_rules.get(v.rule, 0) + 1
                if len(witnesses) < max_witnesses:
                    schedule = tuple(c for _, c in branches)
                    witnesses.append((schedule, hist))
        # Backtrack to the deepest branch point with an unexplored sibling.
        i = len(branches) - 1
        while i >= 0 and branches[i][1] + 1 >= branches[i][0]:
            i -= 1
        if i < 0:
            break
        prefix = [c for _, c in branches[:i]] + [branches[i][1] + 1]
    return ExplorationReport(
        n_interleavings=n_interleavings,
        n_violations=n_violations,
        violation_rules=violation_rules,
        witnesses=witnesses,
        reference_steps=ref_steps,
    )


def explore_all(
    program: Program,
    bound: int = 18,
    config: Optional[SimConfig] = None,
    check: Optional[Callable[[History], object]] = None,
    visit: Optional[Callable[[History, Machine], None]] = None,
    max_interleavings: int = 10_000_000,
    max_witnesses: int = 5,
) -> ExplorationReport:
    """Explore every interleaving of a program, checking each history.

    check defaults to the snapshot-isolation checker.
    """
    from . import protocol

    if config is None:
        config = SimConfig(topology=program.topology)
    if check is None:
        from .checker import check_si

        check = check_si

    def make_tasks(m: Machine) -> List[Generator]:
        return [protocol.thread_main(m, tid, program) for tid in range(program.n_threads)]

    return explore_tasks(
        make_tasks,
        config,
        bound=bound,
        check=check,
        visit=visit,
        max_interleavings=max_interleavings,
        max_witnesses=max_witnesses,
    )
