"""Command-line driver: benchmark grids, verification suites, exploration.

Verbs:
  run      execute a benchmark grid and emit one CSV row per (cell, seed)
  verify   run a named property suite (figures | exhaustive | oracle | anchor)
  explore  enumerate every interleaving of one bundled corpus program

CSV rows are sorted on the full key tuple and the writer uses a fixed
column order and line terminator, so identical configurations produce
byte-identical files regardless of worker count.  Exit codes: 0 all pass,
1 property failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import dataclasses
import io
import sys
from typing import Dict, List, Optional, Tuple

from . import corpus, workloads
from .checker import assign_timestamps, check_serializable, check_si
from .engine import RoundRobin, SeededRandom, explore_all, run
from .events import dump_history
from .htm import SimConfig
from .program import Backend

CSV_COLUMNS = [
    "benchmark", "backend", "threads", "smt", "contention", "mix", "seed",
    "committed", "cycles", "throughput",
    "aborts_conflict", "aborts_capacity", "aborts_nontx",
]

_BACKENDS = {b.value: b for b in Backend}


def _cost_overrides(args) -> Dict[str, int]:
    out = {}
    for key in ("cost_mem", "cost_begin", "cost_end", "cost_proto",
                "cost_sync", "cost_lwsync"):
        val = getattr(args, key, None)
        if val is not None:
            out[key] = val
    return out


def _build_program(cell: dict):
    benchmark = cell["benchmark"]
    backend = _BACKENDS[cell["backend"]]
    if benchmark == "hashmap":
        params = workloads.HashmapParams(
            n_threads=cell["threads"],
            smt_level=cell["smt"],
            contention=cell["contention"],
            footprint=cell["footprint"],
            ro_pct=cell["ro_pct"],
            ops_per_thread=cell["ops"],
            seed=cell["seed"],
        )
        return workloads.hashmap_program(params, backend, cell["retries"])
    params = workloads.TpccParams(
        n_threads=cell["threads"],
        smt_level=cell["smt"],
        contention=cell["contention"],
        mix=cell["mix"],
        ops_per_thread=cell["ops"],
        seed=cell["seed"],
    )
    return workloads.tpcc_lite_program(params, backend, cell["retries"])


def run_cell(cell: dict) -> Dict[str, object]:
    """Execute one grid cell and return its CSV row."""
    program = _build_program(cell)
    config = SimConfig(
        topology=program.topology, record_history=False, **cell["costs"]
    )
    result = run(program, config=config)
    if result.aborts["Explicit"] != 0:
        raise RuntimeError("explicit aborts leaked into a benchmark run")
    return {
        "benchmark": cell["benchmark"],
        "backend": cell["backend"],
        "threads": cell["threads"],
        "smt": cell["smt"],
        "contention": cell["contention"],
        "mix": cell["mix"],
        "seed": cell["seed"],
        "committed": result.committed,
        "cycles": result.total_cycles,
        "throughput": f"{result.throughput:.8f}",
        "aborts_conflict": result.aborts["Conflict"],
        "aborts_capacity": result.aborts["Capacity"],
        "aborts_nontx": result.aborts["NonTxKill"],
    }


def _int_list(text: str) -> List[int]:
    return [int(x) for x in text.split(",") if x]


def _str_list(text: str) -> List[str]:
    return [x for x in text.split(",") if x]


def _grid(args) -> List[dict]:
    cells = []
    costs = _cost_overrides(args)
    for backend in args.backends:
        if backend not in _BACKENDS:
            raise ValueError(f"unknown backend {backend!r}")
    for backend in args.backends:
        for threads in args.threads:
            for smt in args.smt:
                for contention in args.contention:
                    for mix, extra in _mixes(args):
                        for seed in args.seeds:
                            cells.append(
                                {
                                    "benchmark": args.benchmark,
                                    "backend": backend,
                                    "threads": threads,
                                    "smt": smt,
                                    "contention": contention,
                                    "mix": mix,
                                    "seed": seed,
                                    "ops": args.ops,
                                    "retries": args.retries,
                                    "costs": costs,
                                    **extra,
                                }
                            )
    return cells


def _mixes(args) -> List[Tuple[str, dict]]:
    if args.benchmark == "tpcc":
        return [(m, {}) for m in args.mix]
    out = []
    for footprint in args.footprint:
        for ro in args.ro:
            out.append((f"{footprint}-ro{ro}", {"footprint": footprint, "ro_pct": ro}))
    return out


def _row_key(row: Dict[str, object]) -> tuple:
    return (
        row["benchmark"], row["backend"], row["threads"], row["smt"],
        row["contention"], row["mix"], row["seed"],
    )


def rows_to_csv(rows: List[Dict[str, object]]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in sorted(rows, key=_row_key):
        writer.writerow(row)
    return buf.getvalue()


def _cmd_run(args) -> int:
    try:
        cells = _grid(args)
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    if args.workers > 1:
        with concurrent.futures.ProcessPoolExecutor(args.workers) as pool:
            rows = list(pool.map(run_cell, cells))
    else:
        rows = [run_cell(c) for c in cells]
    text = rows_to_csv(rows)
    if args.out:
        with open(args.out, "w") as f:
            f.write(text)
    else:
        sys.stdout.write(text)
    if args.dump_history:
        cell = dict(cells[0])
        program = _build_program(cell)
        config = SimConfig(
            topology=program.topology, record_history=True, **cell["costs"]
        )
        result = run(program, config=config)
        with open(args.dump_history, "w") as f:
            f.write(dump_history(result.history))
    return 0


# -- verification suites ---------------------------------------------------


class _Report:
    def __init__(self) -> None:
        self.failures = 0

    def check(self, name: str, ok: bool, detail: str = "") -> None:
        status = "PASS" if ok else "FAIL"
        line = f"{status} {name}"
        if detail:
            line += f": {detail}"
        print(line)
        if not ok:
            self.failures += 1


def _committed_intervals(history) -> List[Tuple[int, int]]:
    stamps = assign_timestamps(history)
    return [(s, c) for (s, c) in stamps.values() if c >= 0]


def _overlapping_commits(history) -> bool:
    ivals = sorted(_committed_intervals(history))
    for (s1, c1), (s2, c2) in zip(ivals, ivals[1:]):
        if s2 <= c1:
            return True
    return False


def _suite_figures(rep: _Report) -> None:
    r = explore_all(corpus.build("dirty-window"))
    rep.check(
        "dirty-window clean with the safety wait",
        r.n_violations == 0,
        f"{r.n_interleavings} interleavings",
    )

    topo = corpus.build("dirty-window").topology
    ablated = SimConfig(topology=topo, safety_wait=False)
    r = explore_all(corpus.build("dirty-window"), config=ablated)
    dirty = r.violation_rules.get("DirtyRead", 0)
    rep.check(
        "dirty-window flags DirtyRead when the wait is ablated",
        dirty > 0,
        f"{dirty} dirty reads over {r.n_interleavings} interleavings",
    )

    kills = [0]

    def count_kills(history, m):
        if m.aborts["Conflict"] > 0:
            kills[0] += 1

    r = explore_all(corpus.build("read-kills-writer"), visit=count_kills)
    rep.check(
        "read-kills-writer stays clean and kills happen",
        r.n_violations == 0 and kills[0] > 0,
        f"writer killed in {kills[0]} of {r.n_interleavings} interleavings",
    )

    r = explore_all(corpus.build("repeat-read"))
    rep.check(
        "repeat-read never sees a non-repeatable value",
        r.n_violations == 0,
        f"{r.n_interleavings} interleavings",
    )

    stats = {"overlap": 0, "incomplete": 0, "sgl_heavy": 0, "kills": 0}

    def two_writer_visit(history, m):
        if m.per_thread_commits != [1, 1]:
            stats["incomplete"] += 1
        if sum(1 for n in m.per_thread_sgl if n > 0) > 1:
            stats["sgl_heavy"] += 1
        if m.aborts["Conflict"] > 0:
            stats["kills"] += 1
        if _overlapping_commits(history):
            stats["overlap"] += 1

    r = explore_all(corpus.build("two-writer"), visit=two_writer_visit)
    rep.check(
        "two-writer: one line, never two concurrent commits",
        r.n_violations == 0
        and stats["overlap"] == 0
        and stats["incomplete"] == 0
        and stats["sgl_heavy"] == 0
        and stats["kills"] > 0,
        f"{r.n_interleavings} interleavings, {stats['kills']} with a kill",
    )

    skew = {"both_nonserial": 0}

    def skew_visit(history, m):
        if m.per_thread_commits == [1, 1] and not check_serializable(history).ok:
            skew["both_nonserial"] += 1

    r = explore_all(corpus.build("write-skew"), visit=skew_visit)
    rep.check(
        "write-skew: SI-clean yet non-serializable executions exist",
        r.n_violations == 0 and skew["both_nonserial"] > 0,
        f"{skew['both_nonserial']} of {r.n_interleavings} interleavings",
    )

    fixed = {"overlap": 0}

    def promoted_visit(history, m):
        if _overlapping_commits(history):
            fixed["overlap"] += 1

    r = explore_all(
        corpus.build("write-skew-promoted"),
        check=check_serializable,
        visit=promoted_visit,
    )
    rep.check(
        "write-skew-promoted: every interleaving serializable, no "
        "concurrent double-commit",
        r.n_violations == 0 and fixed["overlap"] == 0,
        f"{r.n_interleavings} interleavings",
    )

    program = corpus.build("mixed-quartet")
    ok = True
    for policy in [RoundRobin(), SeededRandom(1), SeededRandom(2)]:
        result = run(program, policy=policy)
        if not check_si(result.history).ok:
            ok = False
    rep.check("mixed-quartet: sampled schedules satisfy the snapshot rules", ok)


def _suite_exhaustive(rep: _Report) -> None:
    for name in corpus.names(exhaustive_only=True):
        entry = corpus.CORPUS[name]
        check = check_si if entry.check == "si" else check_serializable
        r = explore_all(corpus.build(name), check=check)
        rep.check(
            f"{name} [{entry.check}]",
            r.n_violations == 0,
            f"{r.n_interleavings} interleavings, {r.n_violations} violations",
        )


def _suite_anchor(rep: _Report) -> None:
    # Regular HTM is two-phase locking at line granularity, so every history
    # it can produce is serializable.  Sweeping the exhaustive corpus under
    # the PlainHtm backend and brute-forcing each history anchors the oracle
    # (and the simulator) against that ground truth.
    for name in corpus.names(exhaustive_only=True):
        r = explore_all(
            corpus.build(name, backend=Backend.PLAIN_HTM),
            check=check_serializable,
        )
        rep.check(
            f"{name} [PlainHtm serializable]",
            r.n_violations == 0,
            f"{r.n_interleavings} interleavings, {r.n_violations} violations",
        )


def _suite_oracle(rep: _Report) -> None:
    # Two-sided cross-check of the snapshot rules against brute force.
    counts = {"si_ok_serial_bad": 0}

    def skew_visit(history, m):
        if check_si(history).ok and not check_serializable(history).ok:
            counts["si_ok_serial_bad"] += 1

    r = explore_all(corpus.build("write-skew"), visit=skew_visit)
    rep.check(
        "snapshot rules admit the skew the serializability oracle rejects",
        r.n_violations == 0 and counts["si_ok_serial_bad"] > 0,
        f"{counts['si_ok_serial_bad']} of {r.n_interleavings}",
    )

    topo = corpus.build("dirty-window").topology
    ablated = SimConfig(topology=topo, safety_wait=False)
    counts2 = {"si_bad_serial_ok": 0}

    def ablated_visit(history, m):
        if not check_si(history).ok and check_serializable(history).ok:
            counts2["si_bad_serial_ok"] += 1

    r = explore_all(
        corpus.build("dirty-window"), config=ablated, visit=ablated_visit
    )
    rep.check(
        "ablated dirty-window trips the snapshot rules before "
        "serializability breaks",
        counts2["si_bad_serial_ok"] > 0,
        f"{counts2['si_bad_serial_ok']} of {r.n_interleavings}",
    )

    both_ok = True
    for name in ("two-writer", "upgrade", "sgl-serial"):
        r = explore_all(corpus.build(name), check=check_si)
        r2 = explore_all(corpus.build(name), check=check_serializable)
        if r.n_violations or r2.n_violations:
            both_ok = False
    rep.check("conflict-resolved programs pass both checkers", both_ok)


def _cmd_verify(args) -> int:
    rep = _Report()
    suite = {
        "figures": _suite_figures,
        "exhaustive": _suite_exhaustive,
        "oracle": _suite_oracle,
        "anchor": _suite_anchor,
    }[args.suite]
    suite(rep)
    if rep.failures:
        print(f"{rep.failures} check(s) failed")
        return 1
    print("all checks passed")
    return 0


def _cmd_explore(args) -> int:
    if args.program not in corpus.CORPUS:
        print(
            f"error: unknown program {args.program!r}; "
            f"choose from {', '.join(corpus.names())}",
            file=sys.stderr,
        )
        return 2
    backend = _BACKENDS[args.backend]
    program = corpus.build(args.program, backend=backend, max_retries=args.retries)
    config = SimConfig(topology=program.topology, safety_wait=not args.ablate)
    check = check_si if args.check == "si" else check_serializable
    r = explore_all(
        program,
        bound=args.bound,
        config=config,
        check=check,
        max_interleavings=args.max_interleavings,
    )
    print(
        f"{args.program}: {r.n_interleavings} interleavings, "
        f"{r.n_violations} violations, reference length {r.reference_steps}"
    )
    for rule, n in sorted(r.violation_rules.items()):
        print(f"  {rule}: {n}")
    for schedule, history in r.witnesses:
        print(f"witness schedule {schedule}:")
        for ev in history:
            print(f"  {ev.render()}")
    return 1 if r.n_violations else 0


def _load_config_file(path: str) -> Dict[str, str]:
    out = {}
    with open(path) as f:
        for lineno, raw in enumerate(f, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, _, value = line.partition("=")
            out[key.strip()] = value.strip()
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="htmsi",
        description="Simulated transactional-memory benchmarks and checkers",
    )
    sub = parser.add_subparsers(dest="verb", required=True)

    p_run = sub.add_parser("run", help="run a benchmark grid, emit CSV")
    p_run.add_argument("--config", help="key=value file with flag defaults")
    p_run.add_argument("--benchmark", choices=["hashmap", "tpcc"], required=True)
    p_run.add_argument("--backends", type=_str_list, default=["SiHtm", "PlainHtm"])
    p_run.add_argument("--threads", type=_int_list, default=[8])
    p_run.add_argument("--smt", type=_int_list, default=[1])
    p_run.add_argument("--contention", type=_str_list, default=["low"])
    p_run.add_argument("--mix", type=_str_list, default=["standard"],
                       help="tpcc transaction mixes")
    p_run.add_argument("--footprint", type=_str_list, default=["short"],
                       help="hashmap chain lengths (short,large)")
    p_run.add_argument("--ro", type=_int_list, default=[90],
                       help="hashmap read-only percentages")
    p_run.add_argument("--ops", type=int, default=1000)
    p_run.add_argument("--seeds", type=_int_list, default=[1, 2, 3, 4, 5])
    p_run.add_argument("--retries", type=int, default=5)
    p_run.add_argument("--workers", type=int, default=1)
    p_run.add_argument("--out", help="CSV output path (default stdout)")
    p_run.add_argument("--dump-history", metavar="PATH",
                       help="also run the first cell with tracing and dump it")
    for key in ("cost-mem", "cost-begin", "cost-end", "cost-proto",
                "cost-sync", "cost-lwsync"):
        p_run.add_argument(f"--{key}", type=int, default=None)
    p_run.set_defaults(func=_cmd_run)

    p_verify = sub.add_parser("verify", help="run a property suite")
    p_verify.add_argument(
        "suite", choices=["figures", "exhaustive", "oracle", "anchor"]
    )
    p_verify.set_defaults(func=_cmd_verify)

    p_explore = sub.add_parser("explore", help="enumerate interleavings")
    p_explore.add_argument("program")
    p_explore.add_argument("--backend", choices=sorted(_BACKENDS), default="SiHtm")
    p_explore.add_argument("--retries", type=int, default=None)
    p_explore.add_argument("--bound", type=int, default=18)
    p_explore.add_argument("--max-interleavings", type=int, default=10_000_000)
    p_explore.add_argument("--check", choices=["si", "serializable"], default="si")
    p_explore.add_argument("--ablate", action="store_true",
                           help="disable the quiescence wait")
    p_explore.set_defaults(func=_cmd_explore)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args, _ = parser.parse_known_args(argv)
    if getattr(args, "config", None):
        try:
            overrides = _load_config_file(args.config)
        except (OSError, ValueError) as e:
            print(f"error: {e}", file=sys.stderr)
            return 2
        argv = list(sys.argv[1:] if argv is None else argv)
        head, tail = argv[:1], argv[1:]
        injected = []
        for key, value in overrides.items():
            flag = "--" + key.replace("_", "-")
            injected.extend([flag, value])
        argv = head + injected + tail
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
