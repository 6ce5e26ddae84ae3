"""Programs fed to the scheduler: per-thread lists of transaction bodies.

Bodies are data, not code: each op is a tuple describing one shared-memory
access, so programs are deterministic, statically checkable (a declared
read-only body must not contain writes) and replayable under exhaustive
exploration.

    ('r', addr)         read addr
    ('w', addr, value)  write value to addr
    ('wb', addr)        write back the value this attempt last read from addr

'wb' exists for read promotion: it re-writes the observed value, turning a
read into a write-write conflict source without changing memory contents.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import List, Sequence, Tuple

from .htm import Topology

Op = Tuple


class Backend(Enum):
    SI_HTM = "SiHtm"        # ROT attempts + quiescence protocol + RO fast path
    PLAIN_HTM = "PlainHtm"  # regular HTM attempts with early lock subscription
    SGL_ONLY = "SglOnly"    # every body runs under the single global lock


@dataclass(frozen=True)
class RetryPolicy:
    """How many hardware attempts a body gets before the SGL path."""

    max_retries: int = 5

    def __post_init__(self) -> None:
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")


@dataclass(frozen=True)
class TxBody:
    ops: Tuple[Op, ...]
    is_ro: bool = False
    label: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "ops", tuple(tuple(op) for op in self.ops))
        seen_reads = set()
        for op in self.ops:
            if not op or op[0] not in ("r", "w", "wb"):
                raise ValueError(f"bad op {op!r}")
            if op[0] == "r":
                if len(op) != 2:
                    raise ValueError(f"bad read op {op!r}")
                seen_reads.add(op[1])
            elif op[0] == "w":
                if len(op) != 3:
                    raise ValueError(f"bad write op {op!r}")
            else:
                if len(op) != 2:
                    raise ValueError(f"bad write-back op {op!r}")
                if op[1] not in seen_reads:
                    raise ValueError("'wb' requires a prior read of the same address")
            if self.is_ro and op[0] in ("w", "wb"):
                raise ValueError(f"read-only body contains a write: {op!r}")

    @property
    def writes_lines(self) -> frozenset:
        from .htm import line_of

        return frozenset(line_of(op[1]) for op in self.ops if op[0] in ("w", "wb"))


@dataclass(frozen=True)
class Program:
    """One benchmark or scenario: bodies per thread plus execution policy."""

    threads: Tuple[Tuple[TxBody, ...], ...]
    topology: Topology
    backend: Backend = Backend.SI_HTM
    retry: RetryPolicy = field(default_factory=RetryPolicy)
    name: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "threads", tuple(tuple(bodies) for bodies in self.threads)
        )
        if len(self.threads) != self.topology.n_threads:
            raise ValueError(
                f"program has {len(self.threads)} threads but topology declares "
                f"{self.topology.n_threads}"
            )

    @property
    def n_threads(self) -> int:
        return len(self.threads)


def make_program(
    per_thread_bodies: Sequence[Sequence[TxBody]],
    backend: Backend = Backend.SI_HTM,
    smt_level: int = 1,
    tmcam_lines: int = 64,
    max_retries: int = 5,
    name: str = "",
) -> Program:
    topo = Topology(
        n_threads=len(per_thread_bodies), smt_level=smt_level, tmcam_lines=tmcam_lines
    )
    return Program(
        threads=tuple(tuple(b) for b in per_thread_bodies),
        topology=topo,
        backend=backend,
        retry=RetryPolicy(max_retries=max_retries),
        name=name,
    )
