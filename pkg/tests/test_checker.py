"""History checker rules on hand-built traces.

Events are constructed directly rather than through the simulator so each
rule can be violated in isolation.  Cycle numbers only need to be strictly
increasing; helpers below keep them readable.
"""

import pytest

from htmsi.checker import (
    MalformedHistory,
    RESERVED_LOCK_ADDR,
    assign_timestamps,
    check_serializable,
    check_si,
    promote_reads,
)
from htmsi.corpus import build
from htmsi.events import Event
from htmsi.htm import LINE_SHIFT, line_of
from htmsi.program import TxBody, make_program

A1 = 1 << LINE_SHIFT
A2 = 2 << LINE_SHIFT


def ev(cycle, tid, txid, kind, *args):
    return Event(cycle, tid, txid, kind, tuple(args))


def rd(cycle, tid, txid, addr, value):
    return ev(cycle, tid, txid, "read", line_of(addr), addr, value)


def wr(cycle, tid, txid, addr, value):
    return ev(cycle, tid, txid, "write", line_of(addr), addr, value)


def committed_writer(cycle0, tid, txid, addr, value):
    """start, write, snapshot, commit in four consecutive cycles."""
    return [
        ev(cycle0, tid, txid, "start"),
        wr(cycle0 + 1, tid, txid, addr, value),
        ev(cycle0 + 2, tid, txid, "snapshot"),
        ev(cycle0 + 3, tid, txid, "commit"),
    ]


def test_clean_snapshot_read_passes():
    history = committed_writer(10, 0, 0, A1, 7) + [
        ev(20, 1, 1, "start"),
        rd(21, 1, 1, A1, 7),
        ev(22, 1, 1, "commit"),
    ]
    verdict = check_si(history)
    assert verdict.ok
    assert verdict.timestamps[0] == (10, 12)  # snapshot cycle, not commit
    assert verdict.timestamps[1] == (20, 22)  # no snapshot: commit cycle


def test_r1_flags_a_stale_read():
    # the writer committed well before the reader started, yet the reader
    # returns the initial value
    history = committed_writer(10, 0, 0, A1, 7) + [
        ev(20, 1, 1, "start"),
        rd(21, 1, 1, A1, 0),
        ev(22, 1, 1, "commit"),
    ]
    verdict = check_si(history)
    assert not verdict.ok
    assert [v.rule for v in verdict.violations] == ["R1"]


def test_r1_newest_qualifying_writer_wins():
    history = (
        committed_writer(10, 0, 0, A1, 7)
        + committed_writer(20, 0, 2, A1, 8)
        + [
            ev(30, 1, 1, "start"),
            rd(31, 1, 1, A1, 7),  # expected 8
            ev(32, 1, 1, "commit"),
        ]
    )
    verdict = check_si(history)
    assert [v.rule for v in verdict.violations] == ["R1"]
    assert "expected 8" in verdict.violations[0].detail


def test_reader_armed_before_publication_expects_the_old_value():
    # the writer's snapshot (commit_ts 12) precedes the reader's start, but
    # its Commit event lands after the read; a single-version store cannot
    # show the new value yet, so expecting the old one is correct
    history = [
        ev(10, 0, 0, "start"),
        wr(11, 0, 0, A1, 7),
        ev(12, 0, 0, "snapshot"),
        ev(20, 1, 1, "start"),
        rd(21, 1, 1, A1, 0),
        ev(25, 0, 0, "commit"),
        ev(30, 1, 1, "commit"),
    ]
    assert check_si(history).ok


def test_r3_read_own_write():
    history = [
        ev(10, 0, 0, "start"),
        wr(11, 0, 0, A1, 5),
        rd(12, 0, 0, A1, 6),  # must be 5
        ev(13, 0, 0, "commit"),
    ]
    verdict = check_si(history)
    assert [v.rule for v in verdict.violations] == ["R3"]


def test_dirty_read_of_uncommitted_writer():
    history = [
        ev(10, 0, 0, "start"),
        wr(11, 0, 0, A1, 7),
        ev(20, 1, 1, "start"),
        rd(21, 1, 1, A1, 7),
        ev(22, 1, 1, "commit"),
        ev(23, 0, 0, "abort", "Conflict"),
    ]
    verdict = check_si(history)
    assert [v.rule for v in verdict.violations] == ["DirtyRead"]
    assert "uncommitted" in verdict.violations[0].detail


def test_dirty_read_of_later_committed_writer():
    # reader starts BEFORE the writer's commit_ts yet observes its value
    history = [
        ev(10, 0, 0, "start"),
        wr(11, 0, 0, A1, 7),
        ev(12, 1, 1, "start"),
        ev(14, 0, 0, "snapshot"),
        ev(15, 0, 0, "commit"),
        rd(16, 1, 1, A1, 7),
        ev(17, 1, 1, "commit"),
    ]
    verdict = check_si(history)
    assert [v.rule for v in verdict.violations] == ["DirtyRead"]
    assert "later-committed" in verdict.violations[0].detail


def test_aborted_attempts_are_checked_for_dirty_reads_too():
    history = [
        ev(10, 0, 0, "start"),
        wr(11, 0, 0, A1, 7),
        ev(20, 1, 1, "start"),
        rd(21, 1, 1, A1, 7),
        ev(22, 1, 1, "abort", "Conflict"),
        ev(23, 0, 0, "snapshot"),
        ev(24, 0, 0, "commit"),
    ]
    verdict = check_si(history)
    assert not verdict.ok
    assert verdict.violations[0].txid == 1


def test_r5_overlapping_write_sets_need_disjoint_intervals():
    history = [
        ev(10, 0, 0, "start"),
        ev(12, 1, 1, "start"),
        wr(13, 0, 0, A1, 5),
        wr(14, 1, 1, A1, 6),
        ev(15, 0, 0, "snapshot"),
        ev(16, 0, 0, "commit"),
        ev(17, 1, 1, "snapshot"),
        ev(18, 1, 1, "commit"),
    ]
    verdict = check_si(history)
    assert "R5" in {v.rule for v in verdict.violations}


def test_r5_disjoint_intervals_pass():
    history = committed_writer(10, 0, 0, A1, 5) + committed_writer(20, 1, 1, A1, 6)
    assert check_si(history).ok


def test_r5_ignores_disjoint_write_sets():
    history = [
        ev(10, 0, 0, "start"),
        ev(11, 1, 1, "start"),
        wr(12, 0, 0, A1, 5),
        wr(13, 1, 1, A2, 6),
        ev(14, 0, 0, "commit"),
        ev(15, 1, 1, "commit"),
    ]
    assert check_si(history).ok


def test_retry_attribution_prefers_the_committed_attempt():
    # an aborted attempt wrote the same token earlier (retried bodies reuse
    # their tokens); the read after the second attempt's commit is clean
    history = [
        ev(10, 0, 0, "start"),
        wr(11, 0, 0, A1, 7),
        ev(12, 0, 0, "abort", "Conflict"),
        ev(13, 0, 1, "start"),
        wr(14, 0, 1, A1, 7),
        ev(15, 0, 1, "snapshot"),
        ev(16, 0, 1, "commit"),
        ev(20, 1, 2, "start"),
        rd(21, 1, 2, A1, 7),
        ev(22, 1, 2, "commit"),
    ]
    assert check_si(history).ok


def test_retry_attribution_falls_back_to_the_aborted_attempt():
    # nothing committed: the observed value is dirty no matter which
    # aborted attempt it leaked from
    history = [
        ev(10, 0, 0, "start"),
        wr(11, 0, 0, A1, 7),
        ev(12, 0, 0, "abort", "Conflict"),
        ev(13, 0, 1, "start"),
        wr(14, 0, 1, A1, 7),
        ev(20, 1, 2, "start"),
        rd(21, 1, 2, A1, 7),
        ev(22, 1, 2, "commit"),
        ev(23, 0, 1, "abort", "Conflict"),
    ]
    verdict = check_si(history)
    assert [v.rule for v in verdict.violations] == ["DirtyRead"]


def test_two_committed_writers_of_one_token_are_malformed():
    history = (
        committed_writer(10, 0, 0, A1, 7)
        + committed_writer(20, 0, 1, A1, 7)
        + [
            ev(30, 1, 2, "start"),
            rd(31, 1, 2, A1, 7),
            ev(32, 1, 2, "commit"),
        ]
    )
    with pytest.raises(MalformedHistory, match="ambiguous"):
        check_si(history)


def test_unattributable_value_is_malformed():
    history = [
        ev(10, 0, 0, "start"),
        rd(11, 0, 0, A1, 42),
        ev(12, 0, 0, "commit"),
    ]
    with pytest.raises(MalformedHistory, match="nothing wrote"):
        check_si(history)


def test_lock_word_accesses_are_skipped():
    # subscription read of lock=1 and the holder's stores carry txid -1 and
    # address 0; neither may influence any rule
    history = [
        ev(8, 1, -1, "write", 0, RESERVED_LOCK_ADDR, 1),
        ev(10, 0, 0, "start"),
        rd(11, 0, 0, RESERVED_LOCK_ADDR, 1),
        rd(12, 0, 0, A1, 0),
        ev(13, 0, 0, "commit"),
        ev(14, 1, -1, "write", 0, RESERVED_LOCK_ADDR, 0),
    ]
    assert check_si(history).ok
    assert check_serializable(history).ok


def test_malformed_structural_cases():
    with pytest.raises(MalformedHistory, match="strictly increasing"):
        check_si([ev(10, 0, 0, "start"), ev(10, 0, 0, "commit")])
    with pytest.raises(MalformedHistory, match="before TxStart"):
        check_si([rd(10, 0, 0, A1, 0), ev(11, 0, 0, "commit")])
    with pytest.raises(MalformedHistory, match="no terminal"):
        check_si([ev(10, 0, 0, "start"), rd(11, 0, 0, A1, 0)])
    with pytest.raises(MalformedHistory, match="after terminal"):
        check_si(
            [ev(10, 0, 0, "start"), ev(11, 0, 0, "commit"), rd(12, 0, 0, A1, 0)]
        )
    with pytest.raises(MalformedHistory, match="TxStart after accesses"):
        check_si(
            [
                ev(10, 0, 0, "start"),
                rd(11, 0, 0, A1, 0),
                ev(12, 0, 0, "start"),
                ev(13, 0, 0, "commit"),
            ]
        )


def test_assign_timestamps_last_start_wins():
    history = [
        ev(10, 0, 0, "start"),
        ev(15, 0, 0, "start"),  # re-arm after parking on the lock
        rd(16, 0, 0, A1, 0),
        ev(17, 0, 0, "commit"),
        ev(20, 1, 1, "start"),
        ev(21, 1, 1, "abort", "Conflict"),
    ]
    stamps = assign_timestamps(history)
    assert stamps[0] == (15, 17)
    assert stamps[1] == (20, -1)  # aborted: no commit timestamp


def test_serializable_accepts_a_serial_witness():
    history = committed_writer(10, 0, 0, A1, 5) + [
        ev(20, 1, 1, "start"),
        rd(21, 1, 1, A1, 5),
        wr(22, 1, 1, A2, 6),
        ev(23, 1, 1, "commit"),
    ]
    verdict = check_serializable(history)
    assert verdict.ok
    assert verdict.order == (0, 1)


def test_serializable_rejects_write_skew_shape():
    # t0 reads A2 then writes A1; t1 reads A1 then writes A2; both read the
    # initial 0, which no serial order reproduces
    history = [
        ev(10, 0, 0, "start"),
        ev(11, 1, 1, "start"),
        rd(12, 0, 0, A2, 0),
        rd(13, 1, 1, A1, 0),
        wr(14, 0, 0, A1, 5),
        wr(15, 1, 1, A2, 6),
        ev(16, 0, 0, "commit"),
        ev(17, 1, 1, "commit"),
    ]
    verdict = check_serializable(history)
    assert not verdict.ok
    assert verdict.violations[0].rule == "Serializability"


def test_serializable_caps_committed_set_size():
    history = []
    for i in range(9):
        history += committed_writer(10 * (i + 1), 0, i, (i + 1) << LINE_SHIFT, i + 1)
    with pytest.raises(ValueError, match="capped"):
        check_serializable(history)


def test_promote_reads_inserts_write_backs():
    program = make_program(
        [
            [TxBody((("r", A2), ("w", A1, 5)))],
            [TxBody((("r", A1),), is_ro=True)],
        ]
    )
    promoted = promote_reads(program)
    assert promoted.threads[0][0].ops == (("r", A2), ("wb", A2), ("w", A1, 5))
    assert promoted.threads[1][0].ops == (("r", A1),)  # RO bodies untouched
    assert promoted.name == "promoted"  # unnamed input: no joining separator


def test_promote_reads_validates_picks():
    program = make_program([[TxBody((("r", A2), ("w", A1, 5)))]])
    picked = promote_reads(program, picks=[(0, 0, 0)])
    assert picked.threads[0][0].ops == (("r", A2), ("wb", A2), ("w", A1, 5))
    with pytest.raises(ValueError, match="not a read"):
        promote_reads(program, picks=[(0, 0, 1)])
    with pytest.raises(ValueError, match="out of range"):
        promote_reads(program, picks=[(0, 0, 9)])


def test_checkers_accept_simulator_output():
    result = None
    from htmsi.engine import run

    result = run(build("mixed-quartet"))
    assert check_si(result.history).ok
