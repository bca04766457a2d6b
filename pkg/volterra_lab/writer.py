from __future__ import annotations

import csv
import io
import math
import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

TRAJECTORY_HEADER = ("t", "x", "H", "Z", "M_t", "clock_ratio", "xh_ratio", "xsigma_ratio")


def snapshot_indices(n: int, count: int = 512) -> np.ndarray:
    """
    About `count` grid indices in 0..n, spaced geometrically so early
    transients and the long tail are both represented. 0 and n are always in.
    """
    n = int(n)
    if n + 1 <= count:
        return np.arange(n + 1)
    idx = np.rint(np.geomspace(1, n, count - 1)).astype(int)
    return np.unique(np.concatenate(([0], idx, [n])))


def format_number(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return f"{v:.12g}"


def format_value(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, tuple):
        return "[" + ", ".join(format_number(x) for x in v) + "]"
    return format_number(v)


def render_report(items: Iterable[tuple[str, object]]) -> str:
    return "".join(f"{k} = {format_value(v)}\n" for k, v in items)


def _csv_field(v: float) -> str:
    return "" if math.isnan(v) else format_number(v)


def render_csv(rows: Sequence[Sequence[float]], header: Sequence[str] = TRAJECTORY_HEADER) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_csv_field(float(v)) for v in row])
    return buf.getvalue()


def write_atomic(path: str, content: str) -> str:
    """Write via a temp file in the target directory; readers never see a partial file."""
    out_dir = os.path.dirname(os.path.abspath(path))
    Path(out_dir).mkdir(parents=True, exist_ok=True)
    tmp_path = ""
    try:
        fd, tmp_path = tempfile.mkstemp(prefix=f".{os.path.basename(path)}.", suffix=".tmp", dir=out_dir)
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(content)
        os.replace(tmp_path, path)
        tmp_path = ""
    finally:
        if tmp_path:
            try:
                os.remove(tmp_path)
            except Exception:
                pass
    return path
