"""Rendering: determinism, panel fan-out, seed aggregation."""

from pathlib import Path

from plotkit import FigureSpec, load_rows, panel_groups, render
from plotkit.figures import _abort_shares, _aggregate

GOLDEN = Path(__file__).parent / "data" / "golden.csv"


def test_golden_csv_loads_and_groups():
    rows = load_rows(str(GOLDEN))
    assert len(rows) == 16
    groups = panel_groups(rows)
    assert list(groups) == [("hashmap", "low", "large-ro90")]


def test_golden_panel_renders_identical_bytes_twice(tmp_path):
    a = render(FigureSpec(str(GOLDEN), str(tmp_path / "a")))
    b = render(FigureSpec(str(GOLDEN), str(tmp_path / "b")))
    assert [Path(p).name for p in a] == ["hashmap-low-large-ro90.svg"]
    assert [Path(p).name for p in b] == ["hashmap-low-large-ro90.svg"]
    assert Path(a[0]).read_bytes() == Path(b[0]).read_bytes()


def test_whiskers_flag_changes_the_image_deterministically(tmp_path):
    plain = render(FigureSpec(str(GOLDEN), str(tmp_path / "plain")))
    w1 = render(FigureSpec(str(GOLDEN), str(tmp_path / "w1"), whiskers=True))
    w2 = render(FigureSpec(str(GOLDEN), str(tmp_path / "w2"), whiskers=True))
    assert Path(w1[0]).read_bytes() == Path(w2[0]).read_bytes()
    assert Path(w1[0]).read_bytes() != Path(plain[0]).read_bytes()


def synth_csv(path, rows):
    header = (
        "benchmark,backend,threads,smt,contention,mix,seed,"
        "committed,cycles,throughput,"
        "aborts_conflict,aborts_capacity,aborts_nontx"
    )
    path.write_text("\n".join([header, *rows]) + "\n")


def test_one_image_per_panel_group(tmp_path):
    csv = tmp_path / "two.csv"
    synth_csv(
        csv,
        [
            "hashmap,SiHtm,2,1,low,short-ro90,1,20,100,0.20000000,0,0,0",
            "hashmap,SiHtm,2,1,high,short-ro90,1,20,200,0.10000000,2,0,0",
            "tpcc,SiHtm,2,1,low,standard,1,20,300,0.06666667,0,0,1",
        ],
    )
    written = render(FigureSpec(str(csv), str(tmp_path / "out")))
    assert [Path(p).name for p in written] == [
        "hashmap-high-short-ro90.svg",
        "hashmap-low-short-ro90.svg",
        "tpcc-low-standard.svg",
    ]


def test_aggregate_means_across_seeds():
    rows = [
        {
            "backend": "SiHtm", "threads": "4", "throughput": "0.30000000",
            "committed": "90", "aborts_conflict": "10",
            "aborts_capacity": "0", "aborts_nontx": "0",
        },
        {
            "backend": "SiHtm", "threads": "4", "throughput": "0.10000000",
            "committed": "30", "aborts_conflict": "0",
            "aborts_capacity": "10", "aborts_nontx": "0",
        },
    ]
    series = _aggregate(rows)
    assert list(series) == ["SiHtm"]
    (threads, thr, shares), = series["SiHtm"]
    assert threads == 4
    assert thr == [0.3, 0.1]
    # per-seed shares 10/100 and 10/40, averaged per cause
    assert shares[0] == (0.1 + 0.0) / 2
    assert shares[1] == (0.0 + 0.25) / 2
    assert shares[2] == 0.0


def test_abort_shares_guard_zero_attempts():
    row = {
        "committed": "0", "aborts_conflict": "0",
        "aborts_capacity": "0", "aborts_nontx": "0",
    }
    assert _abort_shares(row) == [0.0, 0.0, 0.0]
