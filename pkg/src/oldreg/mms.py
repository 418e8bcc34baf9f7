"""Manufactured-solution convergence studies.

The exact solution is steady: a no-slip vortex from the stream function
``psi = A sin^2(pi x) sin^2(pi y)`` (scaled to the box) and cosine stress
modes with zero normal derivative. Forcing that makes it an exact solution
of the continuous system is derived symbolically. Because the solution is
steady, forward Euler adds no temporal truncation error and the spatial
study isolates the discretization in space.

The temporal study starts from rest under the same forcing (an unsteady
transient) and measures self-convergence: successive differences of the
final states under dt-halving on a fixed grid.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np
import sympy as sp

from oldreg.solver.grid import Grid, State, apply_boundary
from oldreg.solver.poisson import NeumannPoisson
from oldreg.solver.stepper import FluidParams, Forcing, step


class ManufacturedSolution:
    """Exact fields and the matching forcing for given parameters.

    The velocity amplitude must keep ``|v| <= m`` so the cut-off is inactive.
    """

    def __init__(self, params: FluidParams, lx: float = 1.0, ly: float = 1.0, amplitude: float = 0.2, stress_amplitude: float = 0.5):
        self.params = params
        self.lx, self.ly = lx, ly
        x, y = sp.symbols("x y", real=True)
        kx, ky = sp.pi / lx, sp.pi / ly
        psi = amplitude * ly / sp.pi * sp.sin(kx * x) ** 2 * sp.sin(ky * y) ** 2
        vel = [sp.diff(psi, y), -sp.diff(psi, x)]
        s = stress_amplitude
        t11 = s * sp.cos(kx * x) * sp.cos(2 * ky * y)
        t12 = s * sp.cos(2 * kx * x) * sp.cos(ky * y)
        t22 = s * sp.cos(kx * x) * sp.cos(ky * y)
        T = sp.Matrix([[t11, t12], [t12, t22]])
        X = (x, y)

        G = sp.Matrix(2, 2, lambda i, j: sp.diff(vel[i], X[j]))
        D = (G + G.T) / 2
        W = (G - G.T) / 2
        visc, diff = params.viscosity, params.diffusion
        d_sq = sum(D[i, j] ** 2 for i in range(2) for j in range(2))
        mu = visc.mu1 * (visc.kappa**2 + d_sq) ** (sp.Rational(visc.p - 2).limit_denominator(10**6) / 2)
        S = mu * D
        g_sq = sum(sp.diff(T[i, j], X[k]) ** 2 for i in range(2) for j in range(2) for k in range(2))
        gamma = diff.gamma1 * (diff.kappa_t**2 + g_sq) ** (sp.Rational(diff.q - 2).limit_denominator(10**6) / 2)

        # Exact stress has zero mean, so the regularization coefficient is 0
        # unless q = 2, where it is 1/m.
        reg = sp.Rational(1, params.m) if params.q == 2 else 0
        m = params.m

        f_vel = []
        for i in range(2):
            conv = sum(sp.diff(vel[i] * vel[j], X[j]) for j in range(2))
            visc_term = sum(sp.diff(S[i, j], X[j]) for j in range(2))
            div_t = sum(sp.diff(T[i, j], X[j]) for j in range(2))
            f_vel.append(conv - visc_term - div_t)
        B = W * T - T * W + params.a * (D * T + T * D)
        f_t = []
        for i, j in ((0, 0), (0, 1), (1, 1)):
            adv = sum(vel[k] * sp.diff(T[i, j], X[k]) for k in range(2))
            dif = sum(sp.diff(gamma * sp.diff(T[i, j], X[k]), X[k]) for k in range(2))
            f_t.append(adv - params.epsilon * dif + (1 + reg) * T[i, j] - 2 * params.mu0 * D[i, j] - B[i, j])

        # |psi_y| <= A and |psi_x| <= A ly/lx.
        self.max_speed = amplitude * math.hypot(1.0, ly / lx)
        if self.max_speed > m:
            raise ValueError(f"amplitude too large: |v| may exceed the cut-off level m = {m}")
        lam = lambda e: sp.lambdify((x, y), e, "numpy")
        self._psi = lam(psi)
        self._vel = [lam(e) for e in vel]
        self._stress = [lam(e) for e in (t11, t12, t22)]
        self._fv = [lam(e) for e in f_vel]
        self._ft = [lam(e) for e in f_t]

    @staticmethod
    def _eval(fn, x, y):
        return np.broadcast_to(np.asarray(fn(x, y), dtype=float), np.broadcast(x, y).shape).copy()

    def initial_state(self, grid: Grid) -> State:
        """Exact data; the velocity is the discrete curl of the nodal stream function."""
        xn = np.linspace(0.0, grid.lx, grid.nx + 1)[:, None]
        yn = np.linspace(0.0, grid.ly, grid.ny + 1)[None, :]
        psi = self._eval(self._psi, xn, yn)
        u = np.diff(psi, axis=1) / grid.hy
        v = -np.diff(psi, axis=0) / grid.hx
        return apply_boundary(State(0.0, u, v, self.stress(grid)), grid)

    def velocity(self, grid: Grid):
        xu, yu = grid.u_points()
        xv, yv = grid.v_points()
        return self._eval(self._vel[0], xu, yu), self._eval(self._vel[1], xv, yv)

    def stress(self, grid: Grid) -> np.ndarray:
        xc, yc = grid.cell_centers()
        return np.stack([self._eval(f, xc, yc) for f in self._stress], axis=-1)

    def forcing(self, grid: Grid) -> Forcing:
        xu, yu = grid.u_points()
        xv, yv = grid.v_points()
        xc, yc = grid.cell_centers()
        fu = self._eval(self._fv[0], xu, yu)
        fv = self._eval(self._fv[1], xv, yv)
        ft = np.stack([self._eval(f, xc, yc) for f in self._ft], axis=-1)
        return Forcing(velocity=lambda t: (fu, fv), stress=lambda t: ft)

    def error(self, state: State, grid: Grid) -> float:
        """Discrete L2 error of velocity and stress against the exact fields."""
        ue, ve = self.velocity(grid)
        te = self.stress(grid)
        vol = grid.cell_volume
        e = np.sum((state.u - ue) ** 2) + np.sum((state.v - ve) ** 2)
        e += np.sum(np.array([1.0, 2.0, 1.0]) * (state.stress - te) ** 2)
        return math.sqrt(vol * float(e))


def _integrate(state: State, params: FluidParams, grid: Grid, dt: float, t_end: float, forcing: Forcing) -> State:
    poisson = NeumannPoisson(grid)
    nsteps = max(1, int(round(t_end / dt)))
    for _ in range(nsteps):
        state = step(state, params, grid, dt, forcing, poisson)
    return state


def stable_dt(params: FluidParams, n: int, lx: float = 1.0, safety: float = 0.2) -> float:
    """A fixed step well inside the explicit stability limit on an n x n grid."""
    h = lx / n
    mu = params.viscosity.mu1 * max(1.0, params.p - 1.0) * params.viscosity.kappa ** (params.p - 2.0)
    gam = params.diffusion.gamma1 * max(1.0, params.q - 1.0) * max(params.diffusion.kappa_t, 1.0) ** (params.q - 2.0)
    return safety * h * h / (4.0 * max(mu, params.epsilon * gam))


@dataclass
class ConvergenceRow:
    kind: str
    n: int
    dt: float
    error: float
    order: float


@dataclass
class ConvergenceTable:
    rows: list[ConvergenceRow]

    def orders(self, kind: str) -> list[float]:
        return [r.order for r in self.rows if r.kind == kind and math.isfinite(r.order)]

    def fitted_order(self, kind: str) -> float:
        """Least-squares slope of ``-log(error)`` against ``log(1/h)`` or ``log(1/dt)``."""
        rows = [r for r in self.rows if r.kind == kind and r.error > 0]
        if len(rows) < 2:
            return float("nan")
        if kind == "space":
            xs = np.log([r.n for r in rows])
        else:
            xs = -np.log([r.dt for r in rows])
        ys = -np.log([r.error for r in rows])
        return float(np.polyfit(xs, ys, 1)[0])

    def as_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("kind", "n", "dt", "error", "order"))
        for r in self.rows:
            w.writerow((r.kind, r.n, format(r.dt, ".17g"), format(r.error, ".17g"), format(r.order, ".17g")))
        return buf.getvalue()


def spatial_study(params: FluidParams, grids=(16, 32, 64), t_end: float = 0.05, dt: float = 0.0) -> list[ConvergenceRow]:
    """Error of the steady manufactured solution after ``t_end`` per grid."""
    grids = sorted(grids)
    if dt <= 0:
        dt = stable_dt(params, grids[-1])
    rows = []
    prev = None
    for n in grids:
        grid = Grid(n, n)
        sol = ManufacturedSolution(params, grid.lx, grid.ly)
        final = _integrate(sol.initial_state(grid), params, grid, dt, t_end, sol.forcing(grid))
        err = sol.error(final, grid)
        order = float("nan") if prev is None else math.log(prev[1] / err) / math.log(n / prev[0])
        rows.append(ConvergenceRow("space", n, dt, err, order))
        prev = (n, err)
    return rows


def temporal_study(params: FluidParams, n: int = 32, t_end: float = 0.05, dts=()) -> list[ConvergenceRow]:
    """Self-convergence under dt-halving from rest, forced towards the exact state.

    The error of step ``dt`` is ``||U_dt - U_(dt/2)||``; ``dts`` must halve.
    """
    grid = Grid(n, n)
    sol = ManufacturedSolution(params, grid.lx, grid.ly)
    forcing = sol.forcing(grid)
    if not dts:
        base = stable_dt(params, n, safety=0.8)
        base = t_end / math.ceil(t_end / base)
        dts = [base / 2**k for k in range(5)]
    dts = sorted(dts, reverse=True)
    finals = []
    for dt in dts:
        finals.append(_integrate(State.zeros(grid), params, grid, dt, t_end, forcing))
    vol = grid.cell_volume
    rows = []
    prev = None
    for k in range(len(dts) - 1):
        a, b = finals[k], finals[k + 1]
        e = np.sum((a.u - b.u) ** 2) + np.sum((a.v - b.v) ** 2) + np.sum(np.array([1.0, 2.0, 1.0]) * (a.stress - b.stress) ** 2)
        err = math.sqrt(vol * float(e))
        order = float("nan") if prev is None else math.log(prev[1] / err) / math.log(prev[0] / dts[k])
        rows.append(ConvergenceRow("time", n, dts[k], err, order))
        prev = (dts[k], err)
    return rows


def convergence_study(params: FluidParams, grids=(16, 32, 64), t_end: float = 0.05, dt: float = 0.0, time_grid: int = 32, dts=()) -> ConvergenceTable:
    return ConvergenceTable(spatial_study(params, grids, t_end, dt) + temporal_study(params, time_grid, t_end, dts))

