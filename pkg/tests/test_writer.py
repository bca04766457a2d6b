from __future__ import annotations

import math
import os

import numpy as np

from volterra_lab.writer import (
    TRAJECTORY_HEADER,
    format_number,
    format_value,
    render_csv,
    render_report,
    snapshot_indices,
    write_atomic,
)


def test_snapshot_indices_small_grid_keeps_everything():
    np.testing.assert_array_equal(snapshot_indices(10), np.arange(11))


def test_snapshot_indices_geometric():
    idx = snapshot_indices(10**6, 512)
    assert idx[0] == 0 and idx[-1] == 10**6
    assert np.all(np.diff(idx) > 0)
    assert idx.size <= 512
    # dense near the start, sparse in the tail
    assert idx[10] < 100


def test_format_number():
    assert format_number(None) == "none"
    assert format_number(True) == "true"
    assert format_number(np.bool_(False)) == "false"
    assert format_number(7) == "7"
    assert format_number(np.int64(3)) == "3"
    assert format_number(math.nan) == "nan"
    assert format_number(-math.inf) == "-inf"
    assert format_number(1.0 / 3.0) == "0.333333333333"
    assert format_number(2.0) == "2"


def test_render_report():
    text = render_report([("L", 2.0), ("regime", "intermediate_high"), ("bound.x", (1.5, math.inf))])
    assert text == "L = 2\nregime = intermediate_high\nbound.x = [1.5, inf]\n"
    assert format_value("n/a") == "n/a"


def test_render_csv_blanks_nan():
    text = render_csv([[0.0, 1.0, 0.0, math.nan, 0.0, math.nan, math.nan, math.nan]])
    lines = text.splitlines()
    assert lines[0] == ",".join(TRAJECTORY_HEADER)
    assert lines[1] == "0,1,0,,0,,,"
    assert text.endswith("\n") and "\r" not in text


def test_write_atomic(tmp_path):
    target = tmp_path / "nested" / "out" / "report.txt"
    assert write_atomic(str(target), "a = 1\n") == str(target)
    write_atomic(str(target), "a = 2\n")
    assert target.read_text(encoding="utf-8") == "a = 2\n"
    assert os.listdir(target.parent) == ["report.txt"]
