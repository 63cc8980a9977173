"""CSV, manifest and gnuplot emitters.

Floats are written with 17 significant digits, so identical runs give
byte-identical files and every value round-trips exactly.
"""

from __future__ import annotations

import csv
import json
import os
from datetime import datetime, timezone

from . import __version__

SERIES_COLUMNS = ("t", "mean", "second_moment", "c_f", "rejected_fraction")
GRID_COLUMNS = ("cell_center", "density")
SWEEP_COLUMNS = ("gamma", "sigma2", "effective_lambda", "L1_to_fp", "L1_to_closed_form",
                 "W1_to_fp", "rejected_fraction")
RUNTIME_COLUMNS = ("gamma", "runtime_seconds")


def fmt(x):
    if isinstance(x, bool):
        return str(int(x))
    if isinstance(x, int):
        return str(x)
    return format(float(x), ".17g")


def write_rows(path, header, rows):
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([fmt(v) for v in row])
    except OSError as e:
        raise OSError(f"cannot write {path}: {e.strerror}") from None
    return path


def write_series(series, path):
    return write_rows(path, SERIES_COLUMNS,
                      ([getattr(r, c) for c in SERIES_COLUMNS] for r in series))


def write_grid(grid, path):
    return write_rows(path, GRID_COLUMNS, zip(grid.centers, grid.values))


def write_sweep(result, path):
    rows = [[getattr(r, c) for c in SWEEP_COLUMNS] for r in result.rows]
    return write_rows(path, SWEEP_COLUMNS, rows)


def write_sweep_runtime(result, path):
    """Wall-clock times kept apart from the sweep table, which stays reproducible."""
    return write_rows(path, RUNTIME_COLUMNS, [[r.gamma, r.runtime_seconds] for r in result.rows])


def write_manifest(path, command, resolved, outputs, extra=None):
    body = {
        "command": command,
        "config": resolved,
        "seed": resolved["numerics"]["seed"],
        "version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "outputs": [os.path.basename(p) for p in outputs],
    }
    if extra:
        body["results"] = extra
    try:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(body, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as e:
        raise OSError(f"cannot write {path}: {e.strerror}") from None
    return path


def read_manifest(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as e:
        raise OSError(f"cannot read {path}: {e.strerror}") from None


_PLOTS = {
    "moments.csv": ("t", "c_f", "set logscale y", "1:4"),
    "histogram.csv": ("w", "density", "", "1:2"),
    "grid.csv": ("w", "density", "", "1:2"),
    "stationary.csv": ("w", "density", "", "1:2"),
    "sweep.csv": ("gamma", "L1 distance", "set logscale x", "1:5"),
}


def write_gnuplot(out_dir, outputs):
    """A gnuplot script with one PNG plot per recognised CSV."""
    lines = ["set datafile separator ','", "set key off", "set terminal pngcairo size 800,500"]
    for p in outputs:
        name = os.path.basename(p)
        if name not in _PLOTS:
            continue
        xl, yl, extra, cols = _PLOTS[name]
        lines += [f"set output '{name[:-4]}.png'",
                  f"set xlabel '{xl}'", f"set ylabel '{yl}'", "unset logscale"]
        if extra:
            lines.append(extra)
        lines.append(f"plot '{name}' every ::1 using {cols} with lines")
    path = os.path.join(out_dir, "plot.gp")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    return path
