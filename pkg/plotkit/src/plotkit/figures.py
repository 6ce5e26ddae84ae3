"""CSV loading, panel grouping, and panel rendering.

One image per (benchmark, contention, mix) group: throughput curves on
top (one series per backend, mean across seeds), stacked abort-share bars
below (conflict / capacity / non-transactional, as fractions of attempts,
clustered by backend).  Output is SVG with a fixed hash salt, fixed fonts
and sizes, and no embedded date, so rendering the same CSV twice produces
identical bytes.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from statistics import mean
from typing import Dict, List, Tuple

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

REQUIRED_COLUMNS = [
    "benchmark", "backend", "threads", "smt", "contention", "mix", "seed",
    "committed", "cycles", "throughput",
    "aborts_conflict", "aborts_capacity", "aborts_nontx",
]

# (csv column, legend label, fill color), stacked bottom-up in this order
ABORT_KINDS = [
    ("aborts_conflict", "conflict", "#d62728"),
    ("aborts_capacity", "capacity", "#9467bd"),
    ("aborts_nontx", "non-tx kill", "#8c564b"),
]

_SERIES_STYLE = {
    "SiHtm": ("#1f77b4", "o"),
    "PlainHtm": ("#ff7f0e", "s"),
    "SglOnly": ("#2ca02c", "^"),
}
_FALLBACK_STYLES = [("#7f7f7f", "D"), ("#bcbd22", "v"), ("#17becf", "P")]

_RC = {
    "font.family": "DejaVu Sans",
    "font.size": 9,
    "figure.dpi": 100,
    "savefig.dpi": 100,
    "svg.hashsalt": "plotkit",
}


class SchemaError(ValueError):
    """The CSV does not carry the expected result-row columns."""


@dataclass(frozen=True)
class FigureSpec:
    csv_path: str
    out_dir: str
    whiskers: bool = False  # min/max across seeds on the throughput curves


def load_rows(path: str) -> List[dict]:
    """Read and schema-check the CSV; returns possibly zero data rows."""
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        header = reader.fieldnames
        if header is None:
            raise SchemaError(f"{path}: empty file, expected a result-row header")
        missing = [c for c in REQUIRED_COLUMNS if c not in header]
        if missing:
            raise SchemaError(
                f"{path}: missing columns: {', '.join(missing)} "
                f"(found: {', '.join(header)})"
            )
        return list(reader)


def panel_groups(rows: List[dict]) -> Dict[Tuple[str, str, str], List[dict]]:
    groups: Dict[Tuple[str, str, str], List[dict]] = {}
    for row in rows:
        key = (row["benchmark"], row["contention"], row["mix"])
        groups.setdefault(key, []).append(row)
    return dict(sorted(groups.items()))


def _abort_shares(row: dict) -> List[float]:
    # fraction of attempts lost to each cause; attempts = commits + aborts
    counts = [int(row[col]) for col, _, _ in ABORT_KINDS]
    attempts = int(row["committed"]) + sum(counts)
    if attempts == 0:
        return [0.0] * len(counts)
    return [c / attempts for c in counts]


def _aggregate(rows: List[dict]) -> Dict[str, List[tuple]]:
    """-> {backend: [(threads, seed throughputs, mean abort shares), ...]},
    backends and thread counts in sorted order."""
    cells: Dict[Tuple[str, int], List[dict]] = {}
    for row in rows:
        cells.setdefault((row["backend"], int(row["threads"])), []).append(row)
    out: Dict[str, List[tuple]] = {}
    for (backend, threads), group in sorted(cells.items()):
        thr = [float(r["throughput"]) for r in group]
        shares = [_abort_shares(r) for r in group]
        share_means = [mean(col) for col in zip(*shares)]
        out.setdefault(backend, []).append((threads, thr, share_means))
    return out


def _style_table(backends) -> Dict[str, tuple]:
    table = dict(_SERIES_STYLE)
    unknown = sorted(b for b in backends if b not in table)
    for i, b in enumerate(unknown):
        table[b] = _FALLBACK_STYLES[i % len(_FALLBACK_STYLES)]
    return table


def _render_panel(key, rows, whiskers, path) -> None:
    benchmark, contention, mix = key
    series = _aggregate(rows)
    styles = _style_table(series)
    thread_axis = sorted({int(r["threads"]) for r in rows})
    pos = {t: i for i, t in enumerate(thread_axis)}

    fig, (top, bot) = plt.subplots(
        2, 1, figsize=(4.2, 4.8), sharex=True,
        gridspec_kw={"height_ratios": [3, 2]},
    )

    for backend, points in series.items():
        color, marker = styles[backend]
        xs = [pos[p[0]] for p in points]
        ys = [mean(p[1]) for p in points]
        if whiskers:
            lo = [y - min(p[1]) for y, p in zip(ys, points)]
            hi = [max(p[1]) - y for y, p in zip(ys, points)]
            top.errorbar(
                xs, ys, yerr=[lo, hi], marker=marker, color=color,
                label=backend, markersize=4, capsize=2, linewidth=1.2,
            )
        else:
            top.plot(
                xs, ys, marker=marker, color=color,
                label=backend, markersize=4, linewidth=1.2,
            )
    top.set_ylabel("throughput (commits / cycle)")
    top.set_ylim(bottom=0)
    top.set_title(f"{benchmark} {mix} ({contention} contention)")
    top.legend(frameon=False)

    width = 0.8 / max(len(series), 1)
    for i, (backend, points) in enumerate(series.items()):
        color, _ = styles[backend]
        offset = (i - (len(series) - 1) / 2) * width
        xs = [pos[p[0]] + offset for p in points]
        bottoms = [0.0] * len(points)
        for k, (_, label, fill) in enumerate(ABORT_KINDS):
            heights = [p[2][k] for p in points]
            bot.bar(
                xs, heights, width, bottom=bottoms, color=fill,
                edgecolor=color, linewidth=0.6,
                label=label if i == 0 else None,
            )
            bottoms = [b + h for b, h in zip(bottoms, heights)]
    bot.set_ylabel("aborts / attempt")
    bot.set_ylim(bottom=0)
    bot.set_xticks(range(len(thread_axis)))
    bot.set_xticklabels([str(t) for t in thread_axis])
    bot.set_xlabel("threads")
    bot.legend(frameon=False, fontsize=8)

    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def render(spec: FigureSpec) -> List[str]:
    """Render one image per panel group; returns the written paths."""
    rows = load_rows(spec.csv_path)
    out_dir = Path(spec.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    with plt.rc_context(_RC):
        for key, panel_rows in panel_groups(rows).items():
            benchmark, contention, mix = key
            path = out_dir / f"{benchmark}-{contention}-{mix}.svg"
            _render_panel(key, panel_rows, spec.whiskers, path)
            written.append(str(path))
    return written
