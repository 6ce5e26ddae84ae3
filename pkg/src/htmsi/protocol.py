"""Quiescence protocol and backend transaction runners.

Update transactions run as ROTs.  A transaction announces itself by writing
the current virtual cycle into its slot of the shared thread-state array
(the arm step; 0 = inactive, 1 = completed, >1 = active since that cycle).
At the end of its body it suspends the hardware transaction, publishes
"completed", resumes, snapshots the whole state array, and then waits until
every thread that was active in that snapshot has moved on before issuing
tend.  The snapshot instant is the transaction's logical commit point; the
wait makes it safe to expose the write set afterwards.  Read-only
transactions skip hardware transactions entirely: after the same arm step
they read with plain loads and finish with a lightweight barrier.

Both paths first consult the single global fallback lock: if it is held the
thread parks (state back to inactive), waits for release, and re-arms.  An
update body that exhausts its hardware retries takes the lock, waits for
every other thread to become inactive, and runs non-transactionally.

The plain-HTM baseline runs bodies as regular transactions whose first
access reads the lock word (early subscription); the fallback path then
acquires the lock and stores to that word non-transactionally, killing
every subscribed transaction at once.  It never touches the state array.

All of these are generators over engine action tuples; one yield is one
scheduler step.
"""

from __future__ import annotations

from typing import Generator

from .engine import (
    A_ABORT_SELF,
    A_ARM,
    A_COMMIT_MARK,
    A_CONFIRM,
    A_LOCK_ACQUIRE,
    A_LOCK_RELEASE,
    A_LOCK_TEST,
    A_NTREAD,
    A_NTWRITE,
    A_RO_FINISH,
    A_SNAPSHOT,
    A_STATE,
    A_TBEGIN,
    A_TEND,
    A_TREAD,
    A_TRESUME,
    A_TSUSPEND,
    A_TWRITE,
    A_TXSTART_MARK,
    A_WAIT_LOCK_FREE,
    A_WAIT_STATE_CHANGE,
    A_WAIT_STATE_INACTIVE,
    Machine,
    STATE_COMPLETED,
    STATE_INACTIVE,
    Task,
)
from .htm import LOCK_WORD_ADDR, TxAbortError, TxMode
from .program import Backend, Program, RetryPolicy, TxBody


def sync_with_gl(m: Machine, task: Task) -> Generator:
    """Arm the thread-state slot, honoring the global lock.

    Writes the current cycle to state[tid], then checks the lock.  If the
    lock is held the slot is reset to inactive and the thread waits for
    release, then starts over from the state write; a lock re-acquired
    between the release and the re-check just makes it loop again.

    A lock holder may have completed entirely between the arm and the
    check; the holder's quiescence scan saw this slot inactive, so the
    armed cycle would predate writes this thread is about to observe.  The
    check reports that case and the slot is re-stamped with the current
    cycle before proceeding.  The slot stays armed across the re-stamp, so
    concurrent scans are unaffected.
    """
    while True:
        yield (A_ARM,)
        locked, stale = yield (A_LOCK_TEST,)
        if not locked:
            if stale:
                yield (A_CONFIRM,)
            return
        yield (A_STATE, STATE_INACTIVE, None)
        yield (A_WAIT_LOCK_FREE,)


def si_tx_end(m: Machine, task: Task) -> Generator:
    """Commit protocol: suspend, publish completed, resume, snapshot, wait
    out every transaction active at the snapshot, then tend."""
    yield (A_TSUSPEND,)
    yield (A_STATE, STATE_COMPLETED, "sync")
    yield (A_TRESUME,)
    snap = yield (A_SNAPSHOT,)
    if m.config.safety_wait:
        for c in range(len(snap)):
            if c != task.tid and snap[c] > STATE_COMPLETED:
                yield (A_WAIT_STATE_CHANGE, c, snap[c])
    yield (A_TEND,)
    yield (A_STATE, STATE_INACTIVE, None)


def _body_tx(body: TxBody) -> Generator:
    # Body ops inside a hardware transaction.
    last = {}
    for op in body.ops:
        k = op[0]
        if k == "r":
            last[op[1]] = yield (A_TREAD, op[1])
        elif k == "w":
            yield (A_TWRITE, op[1], op[2])
        else:
            yield (A_TWRITE, op[1], last[op[1]])


def _body_nt(body: TxBody) -> Generator:
    # Body ops under the global lock.
    last = {}
    for op in body.ops:
        k = op[0]
        if k == "r":
            last[op[1]] = yield (A_NTREAD, op[1])
        elif k == "w":
            yield (A_NTWRITE, op[1], op[2])
        else:
            yield (A_NTWRITE, op[1], last[op[1]])


def _body_ro(body: TxBody) -> Generator:
    for op in body.ops:
        yield (A_NTREAD, op[1])


def _sgl_fallback(m: Machine, task: Task, body: TxBody) -> Generator:
    # State is already inactive here (initial or reset by the abort handler).
    m.new_attempt(task)
    yield (A_LOCK_ACQUIRE,)
    for c in range(m.config.topology.n_threads):
        if c != task.tid:
            yield (A_WAIT_STATE_INACTIVE, c)
    yield (A_TXSTART_MARK,)
    yield from _body_nt(body)
    yield (A_COMMIT_MARK,)
    yield (A_LOCK_RELEASE,)


def si_rw_tx(m: Machine, task: Task, body: TxBody, retry: RetryPolicy) -> Generator:
    """Update transaction: lock-synchronized ROT attempts, then the SGL."""
    retries = retry.max_retries
    while retries > 0:
        retries -= 1
        m.new_attempt(task)
        try:
            yield from sync_with_gl(m, task)
            yield (A_TBEGIN, TxMode.ROT)
            yield from _body_tx(body)
            yield from si_tx_end(m, task)
            return
        except TxAbortError:
            yield (A_STATE, STATE_INACTIVE, None)
    yield from _sgl_fallback(m, task, body)


def si_ro_tx(m: Machine, task: Task, body: TxBody) -> Generator:
    """Read-only fast path: armed plain loads, no hardware transaction,
    never aborts."""
    m.new_attempt(task)
    yield from sync_with_gl(m, task)
    yield from _body_ro(body)
    yield (A_RO_FINISH,)


def plain_htm_tx(m: Machine, task: Task, body: TxBody, retry: RetryPolicy) -> Generator:
    """Baseline: regular HTM attempt with early lock subscription."""
    retries = retry.max_retries
    while retries > 0:
        retries -= 1
        m.new_attempt(task)
        try:
            yield (A_WAIT_LOCK_FREE,)
            yield (A_TBEGIN, TxMode.HTM)
            held = yield (A_TREAD, LOCK_WORD_ADDR)
            if held:
                # Lost the race with a lock acquirer; its release store will
                # kill this subscribed transaction.
                yield (A_WAIT_LOCK_FREE,)
                yield (A_ABORT_SELF,)
            yield from _body_tx(body)
            yield (A_TEND,)
            return
        except TxAbortError:
            continue
    m.new_attempt(task)
    yield (A_LOCK_ACQUIRE,)
    yield (A_NTWRITE, LOCK_WORD_ADDR, 1, -1)
    yield (A_TXSTART_MARK,)
    yield from _body_nt(body)
    yield (A_COMMIT_MARK,)
    yield (A_NTWRITE, LOCK_WORD_ADDR, 0, -1)
    yield (A_LOCK_RELEASE,)


def sgl_only_tx(m: Machine, task: Task, body: TxBody) -> Generator:
    """Serialize everything behind the global lock; no hardware at all."""
    m.new_attempt(task)
    yield (A_LOCK_ACQUIRE,)
    yield (A_TXSTART_MARK,)
    yield from _body_nt(body)
    yield (A_COMMIT_MARK,)
    yield (A_LOCK_RELEASE,)


def thread_main(m: Machine, tid: int, program: Program) -> Generator:
    """Top-level generator for one hardware thread: its bodies in order."""
    task = m.tasks[tid]
    backend = program.backend
    for body in program.threads[tid]:
        if backend is Backend.SI_HTM:
            if body.is_ro:
                yield from si_ro_tx(m, task, body)
            else:
                yield from si_rw_tx(m, task, body, program.retry)
        elif backend is Backend.PLAIN_HTM:
            yield from plain_htm_tx(m, task, body, program.retry)
        else:
            yield from sgl_only_tx(m, task, body)
