"""ASCII checkpoints.

Layout::

    OLDREG1 <nx> <ny> <lx> <ly> <time>
    [u] <rows> <cols>
    <row-major values, one row per line>
    [v] ...
    [pressure] ...
    [T11] ...
    [T12] ...
    [T22] ...

Floats are written with 17 significant digits, which round-trips every
IEEE double, so write -> read -> write is byte-identical.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

from oldreg.errors import ValidationError
from oldreg.solver.grid import Grid, State

MAGIC = "OLDREG1"
SECTIONS = ("u", "v", "pressure", "T11", "T12", "T22")


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _arrays(state: State):
    return {
        "u": state.u,
        "v": state.v,
        "pressure": state.pressure,
        "T11": state.stress[..., 0],
        "T12": state.stress[..., 1],
        "T22": state.stress[..., 2],
    }


def dumps(state: State, grid: Grid) -> str:
    lines = [" ".join([MAGIC, str(grid.nx), str(grid.ny), _fmt(grid.lx), _fmt(grid.ly), _fmt(state.time)])]
    for name, arr in _arrays(state).items():
        rows, cols = arr.shape
        lines.append(f"[{name}] {rows} {cols}")
        lines.extend(" ".join(_fmt(x) for x in row) for row in arr)
    return "\n".join(lines) + "\n"


def loads(text: str) -> tuple[State, Grid]:
    lines = text.splitlines()
    if not lines:
        raise ValidationError("empty checkpoint")
    head = lines[0].split()
    if len(head) != 6 or head[0] != MAGIC:
        raise ValidationError(f"not an {MAGIC} checkpoint header: {lines[0]!r}")
    grid = Grid(int(head[1]), int(head[2]), float(head[3]), float(head[4]))
    time = float(head[5])
    arrays = {}
    k = 1
    while k < len(lines):
        parts = lines[k].split()
        if len(parts) != 3 or not (parts[0].startswith("[") and parts[0].endswith("]")):
            raise ValidationError(f"checkpoint line {k + 1}: expected a section header")
        name = parts[0][1:-1]
        rows, cols = int(parts[1]), int(parts[2])
        block = lines[k + 1 : k + 1 + rows]
        if len(block) != rows:
            raise ValidationError(f"checkpoint section [{name}] is truncated")
        arr = np.array([[float(x) for x in row.split()] for row in block], dtype=float)
        if arr.shape != (rows, cols):
            raise ValidationError(f"checkpoint section [{name}] has shape {arr.shape}, expected {(rows, cols)}")
        arrays[name] = arr
        k += 1 + rows
    missing = [s for s in SECTIONS if s not in arrays]
    if missing:
        raise ValidationError(f"checkpoint is missing sections {missing}")
    stress = np.stack([arrays["T11"], arrays["T12"], arrays["T22"]], axis=-1)
    state = State(time, arrays["u"], arrays["v"], stress, arrays["pressure"])
    expected = {"u": (grid.nx + 1, grid.ny), "v": (grid.nx, grid.ny + 1), "pressure": (grid.nx, grid.ny)}
    for name, shape in expected.items():
        if arrays[name].shape != shape:
            raise ValidationError(f"checkpoint section [{name}] does not match the grid")
    return state, grid


def write(path, state: State, grid: Grid) -> None:
    Path(path).write_text(dumps(state, grid))


def read(path) -> tuple[State, Grid]:
    return loads(Path(path).read_text())
