"""History checkers: snapshot isolation and brute-force serializability.

check_si validates the operational SI contract over a trace:

  R1/R4  a committed transaction's snapshot read returns the newest
         committed-and-published write whose commit timestamp precedes the
         reader's start timestamp (or the initial 0);
  R3     reads after own writes return the latest buffered value;
  R5     committed transactions with overlapping write-line sets have
         disjoint [start_ts, commit_ts] intervals;
  DirtyRead  no read in ANY attempt, committed or aborted, observes a value
         whose writer had not committed before the reader started (under
         snapshot semantics a writer with commit_ts after the reader's
         start_ts is uncommitted from the reader's point of view, and a
         value from a never-committing writer is dirty outright).

Timestamps come from the trace alone: start_ts is the cycle of the
attempt's last TxStart (a re-arm after parking on the global lock
supersedes the previous one), commit_ts is the SnapshotTaken cycle when the
attempt has one and the Commit cycle otherwise (read-only, lock-path, and
plain-HTM commits).  R2 (reads never block) is structural in the engine and
is asserted by engine tests, not here.

Publication note: with a single-version store a writer's data reaches
memory at its Commit event, which is later than its snapshot-instant
commit_ts.  A reader that arms inside that window cannot observe the
writer, so the R1 expectation requires Commit-event < read cycle as well;
per address, publication order equals commit_ts order, so the expectation
stays well defined.

Preconditions: write values are unique nonzero tokens per (attempt, write)
so a read identifies its writer.  Promoted programs ('wb' ops) can
duplicate values; their histories are checked by commit counts, not here.
A structurally broken history raises MalformedHistory instead of returning
a Verdict.

Address 0 is the reserved global-lock word.  Accesses to it (the plain-HTM
baseline subscribes to the lock inside each hardware attempt) are lock
bookkeeping, not transactional data, and both checkers skip them.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from .events import Event, History
from .program import Program, TxBody

# txid -> (start_ts, commit_ts); aborted attempts map to (start_ts, -1)
TimestampAssignment = Dict[int, Tuple[int, int]]

# the global-lock word; accesses to it are not transactional data
RESERVED_LOCK_ADDR = 0


class MalformedHistory(ValueError):
    """The trace violates well-formedness; no isolation verdict is possible."""


@dataclass(frozen=True)
class Violation:
    rule: str
    txid: int
    detail: str
    event: Optional[Event] = None


@dataclass
class Verdict:
    ok: bool
    violations: List[Violation] = field(default_factory=list)
    timestamps: TimestampAssignment = field(default_factory=dict)
    order: Optional[Tuple[int, ...]] = None  # serializability witness


@dataclass
class _Tx:
    txid: int
    tid: int
    starts: List[int] = field(default_factory=list)
    accesses: List[Event] = field(default_factory=list)
    snapshot_cycle: int = -1
    commit_cycle: int = -1
    abort_cycle: int = -1

    @property
    def committed(self) -> bool:
        return self.commit_cycle >= 0

    @property
    def start_ts(self) -> int:
        return self.starts[-1]

    @property
    def commit_ts(self) -> int:
        if not self.committed:
            return -1
        return self.snapshot_cycle if self.snapshot_cycle >= 0 else self.commit_cycle


def _collect(history: History) -> Dict[int, _Tx]:
    txs: Dict[int, _Tx] = {}
    last_cycle = None
    for ev in history:
        if last_cycle is not None and ev.cycle <= last_cycle:
            raise MalformedHistory(
                f"cycles not strictly increasing at cycle {ev.cycle}"
            )
        last_cycle = ev.cycle
        if ev.txid < 0:
            continue
        tx = txs.get(ev.txid)
        if tx is None:
            tx = txs[ev.txid] = _Tx(ev.txid, ev.tid)
        if tx.commit_cycle >= 0 or tx.abort_cycle >= 0:
            raise MalformedHistory(f"tx {ev.txid}: event after terminal")
        if ev.kind == "start":
            if tx.accesses or tx.snapshot_cycle >= 0:
                raise MalformedHistory(f"tx {ev.txid}: TxStart after accesses")
            tx.starts.append(ev.cycle)
        elif ev.kind in ("read", "write"):
            if not tx.starts:
                raise MalformedHistory(f"tx {ev.txid}: access before TxStart")
            tx.accesses.append(ev)
        elif ev.kind == "snapshot":
            if not tx.starts:
                raise MalformedHistory(f"tx {ev.txid}: snapshot before TxStart")
            if tx.snapshot_cycle >= 0:
                raise MalformedHistory(f"tx {ev.txid}: second snapshot")
            tx.snapshot_cycle = ev.cycle
        elif ev.kind == "commit":
            if not tx.starts:
                raise MalformedHistory(f"tx {ev.txid}: commit before TxStart")
            tx.commit_cycle = ev.cycle
        elif ev.kind == "abort":
            if not tx.starts:
                raise MalformedHistory(f"tx {ev.txid}: abort before TxStart")
            tx.abort_cycle = ev.cycle
        else:
            raise MalformedHistory(f"tx {ev.txid}: unexpected {ev.kind} event")
    for tx in txs.values():
        if tx.commit_cycle < 0 and tx.abort_cycle < 0:
            raise MalformedHistory(f"tx {tx.txid}: no terminal event")
    return txs


def assign_timestamps(history: History) -> TimestampAssignment:
    """Start/commit timestamps for every attempt in the trace."""
    txs = _collect(history)
    return {t.txid: (t.start_ts, t.commit_ts) for t in txs.values()}


def check_si(history: History) -> Verdict:
    """Check one trace against the operational snapshot-isolation rules."""
    txs = _collect(history)
    violations: List[Violation] = []

    # Per-address committed publication log and value attribution map.
    # final value per (committed tx, addr) = its last write event for addr.
    committed = [t for t in txs.values() if t.committed]
    by_value: Dict[Tuple[int, int], List[Tuple[_Tx, int]]] = {}
    final_writes: Dict[Tuple[int, int], int] = {}
    writers_of: Dict[int, List[_Tx]] = {}
    for t in txs.values():
        for ev in t.accesses:
            if ev.kind == "write" and ev.args[1] != RESERVED_LOCK_ADDR:
                key = (ev.args[1], ev.args[2])  # (addr, value)
                lst = by_value.setdefault(key, [])
                if all(w is not t for w, _ in lst):
                    lst.append((t, ev.cycle))
    for t in committed:
        wrote = set()
        for ev in t.accesses:
            if ev.kind == "write" and ev.args[1] != RESERVED_LOCK_ADDR:
                addr = ev.args[1]
                final_writes[(t.txid, addr)] = ev.args[2]
                wrote.add(addr)
        for addr in wrote:
            writers_of.setdefault(addr, []).append(t)
    for lst in writers_of.values():
        lst.sort(key=lambda t: t.commit_ts)

    def expected_value(reader: _Tx, addr: int, read_cycle: int) -> int:
        best = None
        for w in writers_of.get(addr, ()):
            if w.txid == reader.txid:
                continue
            if w.commit_ts < reader.start_ts and w.commit_cycle < read_cycle:
                best = w  # list is commit_ts-sorted
        return final_writes[(best.txid, addr)] if best is not None else 0

    for t in txs.values():
        own: Dict[int, int] = {}
        for ev in t.accesses:
            addr = ev.args[1]
            if addr == RESERVED_LOCK_ADDR:
                continue
            if ev.kind == "write":
                own[addr] = ev.args[2]
                continue
            value = ev.args[2]
            if addr in own:
                if value != own[addr]:
                    violations.append(
                        Violation(
                            "R3",
                            t.txid,
                            f"read of {addr} returned {value}, "
                            f"own buffered write was {own[addr]}",
                            ev,
                        )
                    )
                continue
            # Attribute the observed value to its writer.
            if value == 0:
                writer = None
            else:
                cands = [
                    (w, wc)
                    for w, wc in by_value.get((addr, value), [])
                    if w.txid != t.txid
                ]
                if not cands:
                    raise MalformedHistory(
                        f"tx {t.txid} read value {value} from {addr} "
                        f"that nothing wrote"
                    )
                if len(cands) == 1:
                    writer = cands[0][0]
                else:
                    # Retried bodies reuse their value tokens, so several
                    # attempts may have written this pair. Buffered writes of
                    # aborted hardware attempts are never externally visible;
                    # the observed copy must come from an attempt that
                    # committed and had already issued the write.
                    vis = [w for w, wc in cands if w.committed and wc < ev.cycle]
                    if len(vis) == 1:
                        writer = vis[0]
                    elif not vis:
                        live = sorted(
                            (w for w, wc in cands if wc < ev.cycle),
                            key=lambda w: w.txid,
                        )
                        if not live:
                            raise MalformedHistory(
                                f"tx {t.txid} read value {value} from {addr} "
                                f"before any attempt wrote it"
                            )
                        writer = live[-1]
                    else:
                        raise MalformedHistory(
                            f"value {value} at {addr} written by multiple "
                            f"committed transactions; attribution ambiguous "
                            f"(promoted program?)"
                        )
            if writer is not None and (
                not writer.committed or writer.commit_ts >= t.start_ts
            ):
                who = "uncommitted" if not writer.committed else "later-committed"
                violations.append(
                    Violation(
                        "DirtyRead",
                        t.txid,
                        f"read of {addr} observed value {value} from {who} "
                        f"tx {writer.txid}",
                        ev,
                    )
                )
                continue
            if t.committed:
                exp = expected_value(t, addr, ev.cycle)
                if value != exp:
                    violations.append(
                        Violation(
                            "R1",
                            t.txid,
                            f"read of {addr} returned {value}, snapshot at "
                            f"{t.start_ts} expected {exp}",
                            ev,
                        )
                    )

    # R5: overlapping write-line sets need disjoint [start_ts, commit_ts].
    lines_of: Dict[int, frozenset] = {}
    for t in committed:
        lines_of[t.txid] = frozenset(
            ev.args[0]
            for ev in t.accesses
            if ev.kind == "write" and ev.args[1] != RESERVED_LOCK_ADDR
        )
    ordered = sorted(committed, key=lambda t: t.commit_ts)
    for i, a in enumerate(ordered):
        if not lines_of[a.txid]:
            continue
        for b in ordered[i + 1 :]:
            if not (lines_of[a.txid] & lines_of[b.txid]):
                continue
            if b.start_ts <= a.commit_ts and a.start_ts <= b.commit_ts:
                violations.append(
                    Violation(
                        "R5",
                        b.txid,
                        f"write sets of {a.txid} and {b.txid} overlap on lines "
                        f"{sorted(lines_of[a.txid] & lines_of[b.txid])} with "
                        f"overlapping execution intervals",
                    )
                )

    stamps = {t.txid: (t.start_ts, t.commit_ts) for t in txs.values()}
    return Verdict(ok=not violations, violations=violations, timestamps=stamps)


def check_serializable(history: History, max_committed: int = 8) -> Verdict:
    """Brute-force: is there a serial order of the committed transactions
    reproducing every committed read?  Aborted attempts are ignored."""
    txs = _collect(history)
    committed = sorted(
        (t for t in txs.values() if t.committed), key=lambda t: t.txid
    )
    if len(committed) > max_committed:
        raise ValueError(
            f"{len(committed)} committed transactions; permutation check "
            f"capped at {max_committed}"
        )
    stamps = {t.txid: (t.start_ts, t.commit_ts) for t in txs.values()}

    def replays(order: Sequence[_Tx]) -> bool:
        memory: Dict[int, int] = {}
        for t in order:
            local: Dict[int, int] = {}
            for ev in t.accesses:
                addr = ev.args[1]
                if addr == RESERVED_LOCK_ADDR:
                    continue
                if ev.kind == "write":
                    local[addr] = ev.args[2]
                else:
                    seen = local.get(addr, memory.get(addr, 0))
                    if ev.args[2] != seen:
                        return False
            memory.update(local)
        return True

    for perm in itertools.permutations(committed):
        if replays(perm):
            return Verdict(
                ok=True, timestamps=stamps, order=tuple(t.txid for t in perm)
            )
    return Verdict(
        ok=False,
        violations=[
            Violation(
                "Serializability",
                -1,
                f"no serial order of committed txs "
                f"{[t.txid for t in committed]} reproduces the reads",
            )
        ],
        timestamps=stamps,
    )


def promote_reads(
    program: Program,
    picks: Optional[Sequence[Tuple[int, int, int]]] = None,
) -> Program:
    """Return a copy of the program with reads promoted to writes.

    Each pick (thread, body index, op index) must name a read op; a 'wb' op
    writing back the observed value is inserted right after it, so a
    concurrent writer of the same line now raises a write-write conflict
    instead of slipping past an untracked read.  picks=None promotes every
    read in every non-read-only body.
    """
    wanted = set(picks) if picks is not None else None
    new_threads = []
    for tid, bodies in enumerate(program.threads):
        new_bodies = []
        for bi, body in enumerate(bodies):
            out_ops = []
            touched = False
            for oi, op in enumerate(body.ops):
                out_ops.append(op)
                if op[0] != "r":
                    if wanted is not None and (tid, bi, oi) in wanted:
                        raise ValueError(f"pick {(tid, bi, oi)} is not a read")
                    continue
                if wanted is None:
                    if not body.is_ro:
                        out_ops.append(("wb", op[1]))
                        touched = True
                elif (tid, bi, oi) in wanted:
                    if body.is_ro:
                        raise ValueError(
                            f"cannot promote a read in read-only body {(tid, bi)}"
                        )
                    out_ops.append(("wb", op[1]))
                    touched = True
            if touched:
                new_bodies.append(
                    TxBody(ops=tuple(out_ops), is_ro=False, label=body.label)
                )
            else:
                new_bodies.append(body)
        new_threads.append(tuple(new_bodies))
    if wanted is not None:
        named = {
            (tid, bi, oi)
            for tid, bodies in enumerate(program.threads)
            for bi, body in enumerate(bodies)
            for oi, op in enumerate(body.ops)
            if (tid, bi, oi) in wanted
        }
        missing = wanted - named
        if missing:
            raise ValueError(f"picks out of range: {sorted(missing)}")
    return Program(
        threads=tuple(new_threads),
        topology=program.topology,
        backend=program.backend,
        retry=program.retry,
        name=program.name + "+promoted" if program.name else "promoted",
    )
