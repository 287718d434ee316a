"""Artifact writers: probe series CSV, field dumps, plot scripts, reports.

Numbers are written with 17 significant digits throughout, enough to round
trip any double exactly.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .grid import Field, Grid


def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


def write_series_csv(path, times, names, table, index_name: str = "t") -> Path:
    """Probe table as CSV with header t,<probe names>."""
    path = Path(path)
    times = np.asarray(times, dtype=np.float64)
    table = np.asarray(table, dtype=np.float64)
    if table.ndim != 2 or table.shape[0] != times.size or table.shape[1] != len(names):
        raise ValueError("table shape does not match times and names")
    lines = [index_name + "," + ",".join(names)]
    for t, row in zip(times, table):
        lines.append(",".join([_fmt(t)] + [_fmt(x) for x in row]))
    path.write_text("\n".join(lines) + "\n")
    return path


def read_series_csv(path) -> tuple[list[str], np.ndarray]:
    """Header names (including leading t) and the data block."""
    lines = Path(path).read_text().strip().splitlines()
    names = lines[0].split(",")
    data = np.array([[float(x) for x in line.split(",")] for line in lines[1:]])
    return names, data


def write_field_dump(path, field: Field, t: float) -> Path:
    """Flat nodal values, one per line, under a shape-and-time header."""
    path = Path(path)
    grid = field.grid
    dims = "x".join(str(s) for s in grid.shape)
    h = float(grid.h[0])
    header = f"# dims={dims} h={_fmt(h)} t={_fmt(t)}"
    body = "\n".join(_fmt(x) for x in field.values)
    path.write_text(header + "\n" + body + "\n")
    return path


def read_field_dump(path) -> tuple[Field, float]:
    """Rebuild a Field (on a fresh unit-box grid) from a dump file."""
    lines = Path(path).read_text().strip().splitlines()
    head = lines[0]
    if not head.startswith("# dims="):
        raise ValueError(f"{path} does not look like a field dump")
    parts = dict(item.split("=", 1) for item in head[2:].split())
    shape = tuple(int(s) for s in parts["dims"].split("x"))
    t = float(parts["t"])
    values = np.array([float(x) for x in lines[1:]])
    grid = Grid(dim=len(shape), cells_per_axis=shape[0] + 1)
    return Field(grid, values), t


def _jsonable(x):
    # numpy scalars and arrays leak into reports from every study; flatten
    # them here instead of chasing casts at each call site
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"cannot serialize {type(x).__name__}")


def write_report(path, obj) -> Path:
    path = Path(path)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n")
    return path


_PLOT_TEMPLATE = '''"""Plot the probe series written next to this script."""

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

HERE = os.path.dirname(os.path.abspath(__file__))
CSV = os.path.join(HERE, {csv_name!r})

with open(CSV) as fh:
    names = fh.readline().strip().split(",")
data = np.genfromtxt(CSV, delimiter=",", skip_header=1)
data = np.atleast_2d(data)

fig, ax = plt.subplots(figsize=(7, 4.5))
for col, name in enumerate(names[1:], start=1):
    ax.plot(data[:, 0], data[:, col], label=name)
ax.set_xlabel(names[0])
ax.legend(loc="best", fontsize=8)
ax.grid(True, alpha=0.3)
fig.tight_layout()
out = os.path.join(HERE, {png_name!r})
fig.savefig(out, dpi=150)
print("wrote", out)
'''


def emit_plot_script(csv_path, script_path=None) -> Path:
    """Standalone matplotlib script living next to the CSV it plots."""
    csv_path = Path(csv_path)
    if script_path is None:
        script_path = csv_path.with_name("plot_" + csv_path.stem + ".py")
    script_path = Path(script_path)
    png_name = csv_path.stem + ".png"
    script_path.write_text(_PLOT_TEMPLATE.format(csv_name=csv_path.name, png_name=png_name))
    return script_path
