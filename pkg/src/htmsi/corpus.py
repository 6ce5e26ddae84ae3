"""Bundled micro-programs for exhaustive interleaving checks.

Each entry is a tiny 2-4 thread program shaped around one concurrency
hazard: dirty-read windows, repeated reads across a concurrent writer,
plain reads landing on tracked writes, write skew (raw and with promoted
reads), write-write races, read-to-write upgrades, lock-path interactions.
They are small enough that every interleaving can be enumerated within the
default exploration bound; the `exhaustive` flag marks the ones meant for
that treatment (the four-thread sampler is run-mode only).

`check` names the history checker an exhaustive sweep should use: the
promoted write-skew program intentionally duplicates write values, which
the value-attribution rules of the snapshot checker reject, so it is
validated with the serializability oracle instead.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict, List, Optional

from .checker import promote_reads
from .htm import LINE_SHIFT
from .program import Backend, Program, TxBody, make_program

X = 1 << LINE_SHIFT
Y = 2 << LINE_SHIFT
Z = 3 << LINE_SHIFT
A = 4 << LINE_SHIFT


@dataclass(frozen=True)
class CorpusEntry:
    name: str
    builder: Callable[[Backend, int], Program]
    retries: int
    exhaustive: bool
    check: str  # "si" or "serializable"
    blurb: str


def _rw(*ops) -> TxBody:
    return TxBody(tuple(ops))


def _ro(*ops) -> TxBody:
    return TxBody(tuple(ops), is_ro=True)


def _dirty_window(backend, retries):
    threads = [
        [_ro(("r", A), ("r", X))],
        [_rw(("w", X, 11))],
    ]
    return make_program(threads, backend, max_retries=retries, name="dirty-window")


def _repeat_read(backend, retries):
    threads = [
        [_ro(("r", X), ("r", X))],
        [_rw(("w", X, 11))],
    ]
    return make_program(threads, backend, max_retries=retries, name="repeat-read")


def _read_kills_writer(backend, retries):
    threads = [
        [_rw(("w", X, 11))],
        [_ro(("r", X))],
    ]
    return make_program(threads, backend, max_retries=retries, name="read-kills-writer")


def _write_skew(backend, retries):
    threads = [
        [_rw(("r", Y), ("w", X, 11))],
        [_rw(("r", X), ("w", Y, 21))],
    ]
    return make_program(threads, backend, max_retries=retries, name="write-skew")


def _write_skew_promoted(backend, retries):
    return promote_reads(_write_skew(backend, retries))


def _sgl_serial(backend, retries):
    threads = [
        [_rw(("w", X, 11))],
        [_rw(("w", X, 21))],
    ]
    return make_program(threads, backend, max_retries=0, name="sgl-serial")


def _two_writer(backend, retries):
    threads = [
        [_rw(("w", X, 11))],
        [_rw(("w", X, 21))],
    ]
    return make_program(threads, backend, max_retries=retries, name="two-writer")


def _upgrade(backend, retries):
    threads = [
        [_rw(("r", X), ("w", X, 11))],
        [_rw(("w", X, 21))],
    ]
    return make_program(threads, backend, max_retries=retries, name="upgrade")


def _ro_vs_sgl(backend, retries):
    threads = [
        [_ro(("r", X), ("r", Y))],
        [_rw(("w", X, 11))],
    ]
    return make_program(threads, backend, max_retries=0, name="ro-vs-sgl")


def _lock_kill(backend, retries):
    # Under the plain-HTM backend thread 1 goes straight to the lock path
    # and its stores kill thread 0's subscribed transaction (NonTxKill).
    threads = [
        [_rw(("r", A), ("r", X))],
        [_rw(("w", X, 11))],
    ]
    return make_program(threads, backend, max_retries=0, name="lock-kill")


def _armed_gap(backend, retries):
    # Zero retry budget sends the writer straight to the lock path, so every
    # schedule has a holder whose release races the readers' arm steps.  The
    # second reader never touches the contended line; it is there so the
    # holder's quiescence scan crosses two independently armed slots.
    threads = [
        [_rw(("w", X, 11))],
        [_ro(("r", X))],
        [_ro(("r", Y))],
    ]
    return make_program(threads, backend, max_retries=0, name="armed-gap")


def _mixed_quartet(backend, retries):
    threads = [
        [_rw(("r", Z), ("w", X, 11))],
        [_rw(("r", X), ("w", Z, 21))],
        [_ro(("r", X), ("r", Y))],
        [_rw(("w", Y, 31))],
    ]
    return make_program(threads, backend, max_retries=retries, name="mixed-quartet")


CORPUS: Dict[str, CorpusEntry] = {
    e.name: e
    for e in [
        CorpusEntry(
            "dirty-window", _dirty_window, 1, True, "si",
            "reader armed before a writer's commit point; the quiescence "
            "wait is what keeps its late read clean",
        ),
        CorpusEntry(
            "repeat-read", _repeat_read, 1, True, "si",
            "same line read twice across a concurrent writer",
        ),
        CorpusEntry(
            "read-kills-writer", _read_kills_writer, 1, True, "si",
            "a plain load landing on a tracked write kills the writer",
        ),
        CorpusEntry(
            "write-skew", _write_skew, 1, True, "si",
            "classic crossed read/write pair; SI admits both commits",
        ),
        CorpusEntry(
            "write-skew-promoted", _write_skew_promoted, 1, True,
            "serializable",
            "write skew with both reads promoted to writes",
        ),
        CorpusEntry(
            "sgl-serial", _sgl_serial, 0, True, "si",
            "zero retry budget; both writers run under the global lock",
        ),
        CorpusEntry(
            "two-writer", _two_writer, 1, True, "si",
            "write-write race on one line",
        ),
        CorpusEntry(
            "upgrade", _upgrade, 1, True, "si",
            "read-then-write against a concurrent writer",
        ),
        CorpusEntry(
            "ro-vs-sgl", _ro_vs_sgl, 0, True, "si",
            "read-only fast path concurrent with a lock-path writer",
        ),
        CorpusEntry(
            "lock-kill", _lock_kill, 0, True, "si",
            "lock-path stores versus an optimistic reader",
        ),
        CorpusEntry(
            "armed-gap", _armed_gap, 0, True, "si",
            "two armed reader slots racing a lock-path writer's release",
        ),
        CorpusEntry(
            "mixed-quartet", _mixed_quartet, 1, False, "si",
            "four-thread sampler of all transaction kinds; run mode only",
        ),
    ]
}


def names(exhaustive_only: bool = False) -> List[str]:
    return [n for n, e in CORPUS.items() if e.exhaustive or not exhaustive_only]


def build(
    name: str,
    backend: Backend = Backend.SI_HTM,
    max_retries: Optional[int] = None,
) -> Program:
    entry = CORPUS[name]
    retries = entry.retries if max_retries is None else max_retries
    return entry.builder(backend, retries)
