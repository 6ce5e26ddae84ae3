"""Frozen reference values.

Two kinds of pins live here.  The cycle formulas are derived by hand from
the cost model and written out in the comments; if they drift, the cost
accounting changed.  The interleaving counts are regression pins taken
from the exhaustive enumerations: they cannot be derived by hand (except
where noted), but any drift means the scheduler's enabled-set rules, the
local-op fusion, or the protocol step structure changed, and that must be
a deliberate decision, not an accident.
"""

from htmsi import corpus
from htmsi.checker import check_serializable, check_si
from htmsi.engine import explore_all, run
from htmsi.htm import LINE_SHIFT, SimConfig
from htmsi.program import Backend, TxBody, make_program

X = 1 << LINE_SHIFT

# Exhaustive SiHtm interleaving counts at the default bound, minus the
# armed-gap program (its 833865 interleavings take over a minute; the
# acceptance suite covers it).  All must be violation free.
SI_COUNTS = {
    "dirty-window": 528,
    "repeat-read": 661,
    "read-kills-writer": 241,
    "write-skew": 12816,
    "write-skew-promoted": 18744,
    "sgl-serial": 2,          # derivable: both writers go straight to the
                              # lock, so the only choice is who gets it first
    "two-writer": 714,
    "upgrade": 3348,
    "ro-vs-sgl": 26,
    "lock-kill": 2,           # derivable: same two-order argument
}

# Same corpus under the PlainHtm backend, checked against brute-force
# serializability.  Far smaller trees: plain transactions have no arm,
# snapshot, or quiescence steps to interleave.
PLAIN_COUNTS = {
    "dirty-window": 321,
    "repeat-read": 581,
    "read-kills-writer": 180,
    "write-skew": 1782,
    "write-skew-promoted": 9996,
    "sgl-serial": 2,
    "two-writer": 170,
    "upgrade": 581,
    "ro-vs-sgl": 2,
    "lock-kill": 2,
    "armed-gap": 6,           # derivable: three threads, zero retries, all
                              # under the lock, 3! acquisition orders
}


def test_si_exhaustive_counts_and_cleanliness():
    for name, expected in SI_COUNTS.items():
        entry = corpus.CORPUS[name]
        check = check_si if entry.check == "si" else check_serializable
        r = explore_all(corpus.build(name), check=check)
        assert r.n_interleavings == expected, name
        assert r.n_violations == 0, name


def test_plain_htm_counts_and_serializability():
    for name, expected in PLAIN_COUNTS.items():
        r = explore_all(
            corpus.build(name, backend=Backend.PLAIN_HTM),
            check=check_serializable,
        )
        assert r.n_interleavings == expected, name
        assert r.n_violations == 0, name


def test_ablated_dirty_window_violation_census():
    # Removing the quiescence wait must expose exactly the dirty-read
    # window and nothing else: 270 of the 828 schedules let the reader's
    # second load land between the writer's snapshot and its publish.
    topo = corpus.build("dirty-window").topology
    r = explore_all(
        corpus.build("dirty-window"),
        config=SimConfig(topology=topo, safety_wait=False),
    )
    assert r.n_interleavings == 828
    assert dict(r.violation_rules) == {"DirtyRead": 270}


def test_conflict_census_pins():
    def census(name, predicate):
        hits = [0]

        def visit(history, m):
            if predicate(history, m):
                hits[0] += 1

        r = explore_all(corpus.build(name), visit=visit)
        return hits[0], r.n_interleavings

    # schedules where the plain read lands while the write is tracked
    assert census("read-kills-writer", lambda h, m: m.aborts["Conflict"] > 0) == (184, 241)
    # write-write race: most schedules include at least one kill
    assert census("two-writer", lambda h, m: m.aborts["Conflict"] > 0) == (672, 714)
    # snapshot-clean but non-serializable both-commit executions
    assert census(
        "write-skew",
        lambda h, m: m.per_thread_commits == [1, 1] and not check_serializable(h).ok,
    ) == (5600, 12816)


def ro_cycles(k):
    body = TxBody(tuple(("r", (i + 1) << LINE_SHIFT) for i in range(k)), is_ro=True)
    return run(make_program([[body]])).total_cycles


def rw_cycles(w, backend=Backend.SI_HTM):
    body = TxBody(tuple(("w", (i + 1) << LINE_SHIFT, 5 + i) for i in range(w)))
    return run(make_program([[body]], backend=backend)).total_cycles


def test_single_thread_ro_cost_formula():
    # arm: max(proto 1 + sync 8, 2 events) = 9
    # lock test: 1
    # each read: 1
    # finish: max(proto 1 + lwsync 4, 3 events) = 5
    # total: 15 + k
    for k in (1, 2, 3, 4):
        assert ro_cycles(k) == 15 + k


def test_single_thread_rw_cost_formula():
    # arm 9, lock test 1, tbegin 3, each write 1, suspend 1,
    # completed-state: max(1 + sync 8, 2 events) = 9, resume 1, snapshot 1,
    # tend 3, inactive-state 1; total: 29 + w
    for w in (1, 2, 3):
        assert rw_cycles(w) == 29 + w


def test_single_thread_baseline_cost_formulas():
    # plain HTM: lock poll 1, tbegin 3, lock-word read 1, write 1, tend 3
    assert rw_cycles(1, Backend.PLAIN_HTM) == 9
    # lock only: acquire 1, start mark 1, write 1, commit mark 1, release 1
    assert rw_cycles(1, Backend.SGL_ONLY) == 5
