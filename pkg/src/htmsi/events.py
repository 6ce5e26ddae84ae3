"""Trace events and the line-oriented history text format.

A history is a list of Event tuples ordered by cycle; cycles strictly
increase along the list.  The text encoding puts one event per line:

    cycle<TAB>tid<TAB>txid<TAB>kind<TAB>args

where args are space-separated and kind-specific:

    start                                (arming state write; cycle is start_ts)
    read      line addr value
    write     line addr value
    snapshot  s0 s1 ... sN-1             (observed thread-state vector)
    commit
    abort     reason                     (Conflict|Capacity|NonTxKill|Explicit)
    state     value                      (thread-state write; 0=inactive 1=completed)
    barrier   sync|lwsync
    lock_acquire
    lock_release

Events not tied to a transaction attempt carry txid -1.  Dumping then
parsing a history is lossless, so the checker accepts both in-memory and
parsed histories.
"""

from __future__ import annotations

from typing import List, NamedTuple, Tuple


class Event(NamedTuple):
    cycle: int
    tid: int
    txid: int
    kind: str
    args: Tuple

    def render(self) -> str:
        args = " ".join(str(a) for a in self.args)
        return f"{self.cycle}\t{self.tid}\t{self.txid}\t{self.kind}\t{args}"


History = List[Event]

EVENT_KINDS = frozenset(
    [
        "start",
        "read",
        "write",
        "snapshot",
        "commit",
        "abort",
        "state",
        "barrier",
        "lock_acquire",
        "lock_release",
    ]
)

_INT_ARG_KINDS = frozenset(["read", "write", "snapshot", "state"])


def dump_history(history: History) -> str:
    return "".join(ev.render() + "\n" for ev in history)


def parse_history(text: str) -> History:
    """Parse the text format back into events. Raises ValueError on bad input."""
    out: History = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip():
            continue
        parts = raw.split("\t")
        if len(parts) != 5:
            raise ValueError(f"history line {lineno}: expected 5 tab fields")
        cycle_s, tid_s, txid_s, kind, args_s = parts
        if kind not in EVENT_KINDS:
            raise ValueError(f"history line {lineno}: unknown kind {kind!r}")
        raw_args = args_s.split() if args_s else []
        if kind in _INT_ARG_KINDS:
            args = tuple(int(a) for a in raw_args)
        else:
            args = tuple(raw_args)
        out.append(Event(int(cycle_s), int(tid_s), int(txid_s), kind, args))
    return out
