"""Plain-text result files: CSV trajectories and key=value summaries.

Floats are written with 17 significant digits so they round-trip exactly.
"""

from __future__ import annotations

import csv
import io
from pathlib import Path

import numpy as np

from .collision import TrajectoryRecord


def fmt(x) -> str:
    if x is None:
        return "none"
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def trajectory_header(L: int) -> list[str]:
    return ["collision_index", "time"] + [f"m_{s}" for s in range(1, L + 1)] + [f"j_{l}" for l in range(1, L)]


def trajectory_csv(record: TrajectoryRecord) -> str:
    L = record.magnetizations.shape[1]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(trajectory_header(L))
    for k in range(len(record)):
        row = [fmt(int(record.index[k])), fmt(float(record.time[k]))]
        row += [fmt(float(v)) for v in record.magnetizations[k]]
        row += [fmt(float(v)) for v in record.currents[k]]
        w.writerow(row)
    return buf.getvalue()


def write_trajectory(path, record: TrajectoryRecord) -> Path:
    path = Path(path)
    path.write_text(trajectory_csv(record))
    return path


def read_trajectory(path) -> TrajectoryRecord:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    L = sum(1 for h in header if h.startswith("m_"))
    data = np.array([[float(v) for v in row] for row in body]).reshape(len(body), len(header))
    return TrajectoryRecord(
        data[:, 0].astype(int), data[:, 1], data[:, 2 : 2 + L], data[:, 2 + L :]
    )


def summary_text(items: dict) -> str:
    return "".join(f"{k}={fmt(v)}\n" for k, v in items.items())


def write_summary(path, items: dict) -> Path:
    path = Path(path)
    path.write_text(summary_text(items))
    return path


def read_summary(path) -> dict[str, str]:
    out = {}
    for line in Path(path).read_text().splitlines():
        if line and not line.startswith("#"):
            k, _, v = line.partition("=")
            out[k] = v
    return out
