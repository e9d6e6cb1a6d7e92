"""CSV-to-SVG line plots of flow series."""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .errors import QLiangError


class PlotError(QLiangError, ValueError):
    pass


def read_columns(csv_path: str | Path) -> tuple[list[str], list[list[float]]]:
    with open(csv_path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise PlotError(f"{csv_path}: empty file")
    header, body = rows[0], rows[1:]
    if len(header) < 2:
        raise PlotError(f"{csv_path}: need a time column and at least one series")
    if not body:
        raise PlotError(f"{csv_path}: no data rows")
    cols: list[list[float]] = [[] for _ in header]
    for lineno, row in enumerate(body, start=2):
        if len(row) != len(header):
            raise PlotError(f"{csv_path}:{lineno}: expected {len(header)} fields, got {len(row)}")
        try:
            for col, value in zip(cols, row):
                col.append(float(value))
        except ValueError:
            raise PlotError(f"{csv_path}:{lineno}: non-numeric field") from None
    return header, cols


def plot(csv_path: str | Path, svg_path: str | Path) -> Path:
    """Plot every column of ``csv_path`` against the first one."""
    header, cols = read_columns(csv_path)
    with plt.rc_context({"svg.hashsalt": "qliang", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(6, 4))
        for name, values in zip(header[1:], cols[1:]):
            ax.plot(cols[0], values, label=name)
        ax.set_xlabel("t")
        ax.set_ylabel("bits")
        ax.legend()
        fig.tight_layout()
        svg_path = Path(svg_path)
        fig.savefig(svg_path, format="svg", metadata={"Date": None})
        plt.close(fig)
    return svg_path
