"""Bit-exact persistence: binary state snapshots and round-trippable CSV
time series.

Snapshot layout (little-endian): magic "PENS", u8 version=1, u8 d,
u16 reserved=0, u64 N, f64 L, f64 t, then rho, u_1..u_d, v_1..v_d as f64
arrays, row-major with the last axis fastest.
"""

from __future__ import annotations

import struct

import numpy as np

from .diagnostics import TimeSeries
from .errors import SnapshotError
from .fields import RealField
from .grid import Grid
from .solver import SimState

MAGIC = b"PENS"
VERSION = 1
_HEADER = struct.Struct("<4sBBHQdd")


def write_snapshot(state: SimState, path):
    grid = state.grid
    header = _HEADER.pack(MAGIC, VERSION, grid.d, 0, grid.N, grid.L, state.t)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(state.rho.values[0], dtype="<f8").tobytes())
        for j in range(grid.d):
            fh.write(np.ascontiguousarray(state.u.values[j], dtype="<f8").tobytes())
        for j in range(grid.d):
            fh.write(np.ascontiguousarray(state.v.values[j], dtype="<f8").tobytes())


def read_snapshot(path) -> SimState:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise SnapshotError("truncated snapshot header")
    magic, version, d, reserved, N, L, t = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise SnapshotError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise SnapshotError(f"unsupported version {version}")
    if reserved != 0:
        raise SnapshotError("nonzero reserved header field")
    try:
        grid = Grid(d, N, L)
    except ValueError as exc:
        raise SnapshotError(f"invalid grid in snapshot: {exc}")
    count = (1 + 2 * d) * N**d
    payload = raw[_HEADER.size:]
    if len(payload) != count * 8:
        raise SnapshotError(
            f"truncated payload: {len(payload)} bytes, expected {count * 8}")
    data = np.frombuffer(payload, dtype="<f8").astype(np.float64)
    fields = data.reshape((1 + 2 * d,) + grid.shape)
    return SimState(grid,
                    RealField(grid, fields[0][None]),
                    RealField(grid, fields[1:1 + d]),
                    RealField(grid, fields[1 + d:]),
                    t=t)


def emit_timeseries(series: TimeSeries, path):
    """CSV with a 'time' column followed by channels in sorted order; floats
    rendered in shortest round-trip decimal form."""
    if series.times.size == 0:
        raise ValueError("refusing to emit an empty series")
    names = sorted(series.channels)
    with open(path, "w", newline="") as fh:
        fh.write(",".join(["time"] + names) + "\n")
        for i, t in enumerate(series.times):
            row = [repr(float(t))] + [repr(float(series.channels[n][i])) for n in names]
            fh.write(",".join(row) + "\n")


def read_timeseries(path, meta: dict = None) -> TimeSeries:
    with open(path) as fh:
        header = fh.readline().strip()
        columns = header.split(",")
        if not columns or columns[0] != "time":
            raise ValueError("first CSV column must be 'time'")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    data = np.array([[float(x) for x in row] for row in rows])
    if data.ndim != 2 or data.shape[1] != len(columns):
        raise ValueError("ragged CSV rows")
    channels = {name: data[:, j + 1] for j, name in enumerate(columns[1:])}
    return TimeSeries(data[:, 0], channels, meta=dict(meta or {}))
