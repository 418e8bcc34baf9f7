"""Scenario execution: initial data, the time loop, records and captures."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from oldreg import tensors
from oldreg.diagnostics import Accumulators, EnergyRecord, energy_record
from oldreg.errors import OldregError, ValidationError
from oldreg.maximal import SpaceTimeField
from oldreg.scenario import Scenario
from oldreg.solver import checkpoint
from oldreg.solver.grid import Grid, State, apply_boundary
from oldreg.solver.poisson import NeumannPoisson, project
from oldreg.solver.stepper import Forcing, adaptive_dt, step

log = logging.getLogger(__name__)


def curl_velocity(psi: np.ndarray, grid: Grid):
    """Face velocities ``(d psi/dy, -d psi/dx)`` of a node stream function.

    ``psi`` has shape ``(nx + 1, ny + 1)``. The result is exactly discretely
    divergence free, and the wall-normal faces vanish when ``psi`` is zero on
    the boundary.
    """
    u = np.diff(psi, axis=1) / grid.hy
    v = -np.diff(psi, axis=0) / grid.hx
    return u, v


def taylor_green_velocity(grid: Grid, amplitude: float = 1.0):
    """Single no-slip vortex from ``psi = A ly/pi sin^2(pi x/lx) sin^2(pi y/ly)``."""
    x = np.linspace(0.0, grid.lx, grid.nx + 1)[:, None]
    y = np.linspace(0.0, grid.ly, grid.ny + 1)[None, :]
    psi = amplitude * grid.ly / np.pi * np.sin(np.pi * x / grid.lx) ** 2 * np.sin(np.pi * y / grid.ly) ** 2
    return curl_velocity(psi, grid)


def initial_state(scenario: Scenario) -> State:
    """Initial data selected by ``scenario.initial``, seeded by ``scenario.seed``."""
    grid = scenario.grid
    ic = scenario.initial
    rng = np.random.default_rng(scenario.seed)
    if ic.velocity == "checkpoint":
        state, cgrid = checkpoint.read(ic.path)
        if (cgrid.nx, cgrid.ny, cgrid.lx, cgrid.ly) != (grid.nx, grid.ny, grid.lx, grid.ly):
            raise ValidationError(f"checkpoint grid {cgrid} does not match the scenario grid {grid}")
        state = state.copy()
        state.time = 0.0
        return apply_boundary(state, grid)

    state = State.zeros(grid)
    if ic.velocity == "taylor-green":
        state.u, state.v = taylor_green_velocity(grid, ic.amplitude)
    elif ic.velocity == "random":
        u = rng.uniform(-ic.amplitude, ic.amplitude, state.u.shape)
        v = rng.uniform(-ic.amplitude, ic.amplitude, state.v.shape)
        u[0] = u[-1] = 0.0
        v[:, 0] = v[:, -1] = 0.0
        state.u, state.v, _ = project(u, v, grid, scenario.params.projection_tol)

    if ic.stress == "constant":
        state.stress[...] = np.asarray(ic.constant, dtype=float)
    elif ic.stress == "random":
        state.stress = rng.uniform(-ic.stress_amplitude, ic.stress_amplitude, state.stress.shape)
    return apply_boundary(state, grid)


def capture_sample(name: str, state: State) -> np.ndarray:
    """Cell-centred sample of a captured field."""
    uc = 0.5 * (state.u[1:] + state.u[:-1])
    vc = 0.5 * (state.v[:, 1:] + state.v[:, :-1])
    if name == "speed":
        return np.sqrt(uc * uc + vc * vc)
    if name == "velocity":
        return np.stack([uc, vc], axis=-1)
    if name == "stress_norm":
        return np.sqrt(tensors.sym_norm_sq(state.stress))
    raise ValueError(f"unknown capture field {name!r}")


@dataclass
class RunResult:
    state: State
    records: list[EnergyRecord]
    captures: dict[str, SpaceTimeField] = field(default_factory=dict)
    vmax: float = 0.0
    sup_energy: float = 0.0
    steps: int = 0
    step_records: list[EnergyRecord] = field(default_factory=list)


class _Captures:
    def __init__(self, names, interval: float, grid: Grid):
        self.names = tuple(names)
        self.interval = interval
        self.grid = grid
        self.samples = {n: [] for n in self.names}
        self.times: list[float] = []
        self.next_time = 0.0

    def offer(self, state: State, every_step: bool) -> bool:
        if not self.names:
            return False
        due = every_step or state.time >= self.next_time * (1 - 1e-12)
        if not due:
            return False
        for n in self.names:
            self.samples[n].append(capture_sample(n, state))
        self.times.append(state.time)
        if self.interval > 0:
            self.next_time = len(self.times) * self.interval
        return True

    def fields(self, dt: float) -> dict[str, SpaceTimeField]:
        if not self.times:
            return {}
        if self.interval > 0:
            spacing = self.interval
        else:
            spacing = dt if dt > 0 else 1.0
        return {
            n: SpaceTimeField(np.stack(s), spacing, self.grid.hx, self.grid.hy, (self.times[0], 0.0, 0.0))
            for n, s in self.samples.items()
        }


def run(
    scenario: Scenario,
    forcing: Forcing | None = None,
    keep_step_records: bool = False,
    state: State | None = None,
    on_capture=None,
) -> RunResult:
    """Advance the scenario from its initial data to ``t_end``.

    A record is computed after every step; one is emitted at the start, every
    ``record_interval`` steps and at the end. Emitted ``energy_residual`` is the
    largest per-step residual since the previous emitted record. On a solver
    failure the exception carries the partial result as ``exc.partial``.
    ``on_capture`` is called with each captured state.
    """
    grid, params = scenario.grid, scenario.params
    state = initial_state(scenario) if state is None else state
    poisson = NeumannPoisson(grid)
    acc = Accumulators()
    rec = energy_record(state, acc, params, grid)
    records = [rec]
    step_records = [rec] if keep_step_records else []
    caps = _Captures(scenario.capture, scenario.capture_interval, grid)
    fixed = scenario.dt > 0
    every_step = caps.interval <= 0
    if caps.offer(state, every_step) and on_capture:
        on_capture(state)
    vmax = _speed_max(state)
    sup_energy = rec.energy
    nsteps = 0
    pending = 0.0
    emitted = True
    t_end = params.t_end

    def result():
        return RunResult(state, records, caps.fields(scenario.dt), vmax, sup_energy, nsteps, step_records)

    try:
        while t_end - state.time > 1e-12 * max(t_end, 1.0):
            if nsteps >= scenario.max_steps:
                log.warning("stopped after run.max_steps = %d steps at t = %r", nsteps, state.time)
                break
            if fixed:
                dt = min(scenario.dt, t_end - state.time)
            else:
                dt = adaptive_dt(state, params, grid)
            if caps.names and caps.interval > 0 and caps.next_time > state.time:
                dt = min(dt, caps.next_time - state.time)
            state = step(state, params, grid, dt, forcing, poisson)
            nsteps += 1
            if t_end - state.time <= 1e-12 * max(t_end, 1.0):
                state.time = t_end
            acc.advance(dt)
            rec = energy_record(state, acc, params, grid, dt)
            if keep_step_records:
                step_records.append(rec)
            pending = max(pending, rec.energy_residual)
            vmax = max(vmax, _speed_max(state))
            sup_energy = max(sup_energy, rec.energy)
            if caps.offer(state, every_step) and on_capture:
                on_capture(state)
            emitted = nsteps % scenario.record_interval == 0
            if emitted:
                records.append(replace(rec, energy_residual=pending))
                pending = 0.0
        if nsteps and not emitted:
            records.append(replace(rec, energy_residual=pending))
    except OldregError as exc:
        exc.partial = result()
        raise
    return result()


def _speed_max(state: State) -> float:
    return max(float(np.max(np.abs(state.u))), float(np.max(np.abs(state.v))))
