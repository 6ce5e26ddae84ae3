"""Figure rendering for benchmark result CSVs.

The input contract is the CSV format alone: a header with the result-row
columns and one row per (cell, seed).  Nothing here imports the simulator.
"""

from .figures import (
    REQUIRED_COLUMNS,
    FigureSpec,
    SchemaError,
    load_rows,
    panel_groups,
    render,
)

__all__ = [
    "REQUIRED_COLUMNS",
    "FigureSpec",
    "SchemaError",
    "load_rows",
    "panel_groups",
    "render",
]

__version__ = "0.1.0"
