"""MAC grid, fields and boundary handling.

Layout on ``[0, lx] x [0, ly]`` with ``nx x ny`` cells:

* ``u[i, j]`` sits on the vertical face ``x = i hx``, ``y = (j + 1/2) hy``,
  shape ``(nx + 1, ny)``;
* ``v[i, j]`` sits on the horizontal face ``x = (i + 1/2) hx``, ``y = j hy``,
  shape ``(nx, ny + 1)``;
* pressure and stress live at cell centres, shape ``(nx, ny)``; the stress
  has a trailing axis ``[T11, T12, T22]``.

Fields hold interior values only. Ghost layers are produced on demand by
:func:`velocity_ghosts` and :func:`stress_ghosts`.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from oldreg.errors import NumericalError, ValidationError


@dataclass(frozen=True)
class Grid:
    nx: int
    ny: int
    lx: float = 1.0
    ly: float = 1.0

    def __post_init__(self):
        if self.nx < 4 or self.ny < 4:
            raise ValidationError(f"grid needs nx, ny >= 4 (got {self.nx}, {self.ny})")
        if not (self.lx > 0 and self.ly > 0):
            raise ValidationError("domain extents must be positive")

    @property
    def hx(self) -> float:
        return self.lx / self.nx

    @property
    def hy(self) -> float:
        return self.ly / self.ny

    @property
    def h(self) -> float:
        return min(self.hx, self.hy)

    @property
    def cell_volume(self) -> float:
        return self.hx * self.hy

    @property
    def area(self) -> float:
        return self.lx * self.ly

    def cell_centers(self):
        x = (np.arange(self.nx) + 0.5) * self.hx
        y = (np.arange(self.ny) + 0.5) * self.hy
        return np.meshgrid(x, y, indexing="ij")

    def u_points(self):
        x = np.arange(self.nx + 1) * self.hx
        y = (np.arange(self.ny) + 0.5) * self.hy
        return np.meshgrid(x, y, indexing="ij")

    def v_points(self):
        x = (np.arange(self.nx) + 0.5) * self.hx
        y = np.arange(self.ny + 1) * self.hy
        return np.meshgrid(x, y, indexing="ij")

    def zero_velocity(self):
        return np.zeros((self.nx + 1, self.ny)), np.zeros((self.nx, self.ny + 1))

    def zero_stress(self):
        return np.zeros((self.nx, self.ny, 3))


@dataclass
class State:
    time: float
    u: np.ndarray
    v: np.ndarray
    stress: np.ndarray
    pressure: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.pressure is None:
            self.pressure = np.zeros(self.stress.shape[:2])

    @classmethod
    def zeros(cls, grid: Grid, time: float = 0.0) -> "State":
        u, v = grid.zero_velocity()
        return cls(time, u, v, grid.zero_stress())

    def copy(self) -> "State":
        return replace(
            self,
            u=self.u.copy(),
            v=self.v.copy(),
            stress=self.stress.copy(),
            pressure=self.pressure.copy(),
        )

    def check_finite(self):
        for name in ("u", "v", "stress", "pressure"):
            arr = getattr(self, name)
            bad = ~np.isfinite(arr)
            if bad.any():
                loc = tuple(int(k) for k in np.argwhere(bad)[0])
                raise NumericalError(
                    f"non-finite value in {name} at index {loc} (t = {self.time!r})"
                )


def apply_boundary(state: State, grid: Grid) -> State:
    """Enforce no-slip on the wall-normal faces.

    Tangential no-slip and the stress Neumann condition are carried by the
    ghost layers, see :func:`velocity_ghosts` and :func:`stress_ghosts`.
    """
    out = state.copy()
    out.u[0, :] = 0.0
    out.u[-1, :] = 0.0
    out.v[:, 0] = 0.0
    out.v[:, -1] = 0.0
    return out


def velocity_ghosts(u: np.ndarray, v: np.ndarray):
    """Pad ``u`` in ``y`` and ``v`` in ``x`` by one reflected ghost layer.

    The ghost value is the negated interior neighbour, so the average across
    the wall, i.e. the wall value, is exactly zero.
    """
    ug = np.empty((u.shape[0], u.shape[1] + 2))
    ug[:, 1:-1] = u
    ug[:, 0] = -u[:, 0]
    ug[:, -1] = -u[:, -1]
    vg = np.empty((v.shape[0] + 2, v.shape[1]))
    vg[1:-1, :] = v
    vg[0, :] = -v[0, :]
    vg[-1, :] = -v[-1, :]
    return ug, vg


def stress_ghosts(stress: np.ndarray) -> np.ndarray:
    """Pad a cell field by one ghost cell copying its interior neighbour."""
    pad = [(1, 1), (1, 1)] + [(0, 0)] * (stress.ndim - 2)
    return np.pad(stress, pad, mode="edge")
