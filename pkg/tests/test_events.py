"""History text format round-trips and input validation."""

import pytest

from htmsi.events import Event, dump_history, parse_history


def test_round_trip_is_lossless():
    history = [
        Event(2, 0, 0, "start", ()),
        Event(3, 0, -1, "barrier", ("sync",)),
        Event(11, 0, 0, "read", (1, 128, 0)),
        Event(12, 1, -1, "state", (0,)),
        Event(13, 0, 0, "snapshot", (4, 0)),
        Event(14, 0, 0, "write", (1, 128, 77)),
        Event(20, 0, 0, "commit", ()),
        Event(21, 1, 1, "abort", ("Conflict",)),
        Event(25, 1, -1, "lock_acquire", ()),
        Event(30, 1, -1, "lock_release", ()),
    ]
    text = dump_history(history)
    assert parse_history(text) == history
    # stable under a second round trip
    assert dump_history(parse_history(text)) == text


def test_blank_lines_are_skipped():
    text = "2\t0\t0\tstart\t\n\n5\t0\t0\tcommit\t\n"
    assert len(parse_history(text)) == 2


def test_int_args_are_parsed_as_ints():
    (ev,) = parse_history("7\t1\t3\tread\t1 128 42\n")
    assert ev.args == (1, 128, 42)
    (ev,) = parse_history("7\t1\t3\tabort\tCapacity\n")
    assert ev.args == ("Capacity",)


def test_rejects_wrong_field_count():
    with pytest.raises(ValueError, match="5 tab fields"):
        parse_history("2\t0\tstart\t\n")


def test_rejects_unknown_kind():
    with pytest.raises(ValueError, match="unknown kind"):
        parse_history("2\t0\t0\tbegin\t\n")
