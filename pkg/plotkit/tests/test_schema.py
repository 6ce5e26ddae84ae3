"""Input validation and the script's exit codes."""

import pytest

from plotkit import SchemaError, load_rows
from plotkit.cli import main

HEADER = (
    "benchmark,backend,threads,smt,contention,mix,seed,"
    "committed,cycles,throughput,"
    "aborts_conflict,aborts_capacity,aborts_nontx"
)


def test_missing_columns_are_rejected_with_a_diff(tmp_path, capsys):
    csv = tmp_path / "bad.csv"
    csv.write_text("benchmark,backend,threads\nhashmap,SiHtm,2\n")
    rc = main([str(csv), str(tmp_path / "out")])
    assert rc == 2
    err = capsys.readouterr().err
    assert "missing columns" in err
    assert "throughput" in err and "aborts_capacity" in err
    with pytest.raises(SchemaError):
        load_rows(str(csv))


def test_header_only_csv_warns_and_exits_zero(tmp_path, capsys):
    csv = tmp_path / "empty.csv"
    csv.write_text(HEADER + "\n")
    out = tmp_path / "out"
    rc = main([str(csv), str(out)])
    assert rc == 0
    assert "no result rows" in capsys.readouterr().out
    assert not list(out.glob("*.svg"))


def test_zero_byte_file_is_rejected(tmp_path, capsys):
    csv = tmp_path / "zero.csv"
    csv.write_text("")
    rc = main([str(csv), str(tmp_path / "out")])
    assert rc == 2
    assert "empty file" in capsys.readouterr().err


def test_unreadable_path_is_an_error(tmp_path, capsys):
    rc = main([str(tmp_path / "absent.csv"), str(tmp_path / "out")])
    assert rc == 2
    assert "error:" in capsys.readouterr().err


def test_extra_columns_are_tolerated(tmp_path):
    csv = tmp_path / "extra.csv"
    csv.write_text(
        HEADER + ",note\n"
        "hashmap,SiHtm,2,1,low,short-ro90,1,20,100,0.20000000,0,0,0,ok\n"
    )
    rc = main([str(csv), str(tmp_path / "out")])
    assert rc == 0
    assert list((tmp_path / "out").glob("*.svg"))
