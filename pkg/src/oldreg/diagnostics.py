"""Norms of the a-priori estimates, discrete energy monitors and the m-sweep.

The combined energy is ``E = mu0 ||v||^2 + ||T||^2 / 2``. For the explicit
scheme its exact one-step balance reads

    E_{n+1} - E_n = -dt (Diss_n - Work_n) + O(dt^2)

with ``Diss = 2 mu0 <mu(D) D, D> + eps <gamma(grad T) grad T, grad T>
+ (1 + reg) ||T||^2`` and ``Work = <T, B(v, T)>`` (zero for ``a = 0``). The
coupling terms ``2 mu0 <div T, v>`` and ``2 mu0 <D, T>`` cancel exactly on the
staggered grid, and convection and advection are skew. ``energy_residual``
is the positive part of the balance defect and is ``O(dt^2)`` per step.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace

import numpy as np

from oldreg import tensors
from oldreg.constitutive import viscous_stress
from oldreg.solver import operators as ops
from oldreg.solver.grid import Grid, State
from oldreg.solver.stepper import (
    FluidParams,
    exponents_admissible,
    regularization_coefficient,
    stress_mean,
)

CSV_HEADER = (
    "time",
    "dt",
    "kinetic_l2",
    "stress_l2",
    "grad_v_lp",
    "grad_t_lq",
    "tm_11",
    "tm_12",
    "tm_22",
    "reg_l1",
    "div_residual",
    "energy_residual",
)


@dataclass
class EnergyRecord:
    time: float
    dt: float
    kinetic_l2: float
    stress_l2: float
    grad_v_lp: float
    grad_t_lq: float
    t_mean: np.ndarray
    reg_l1: float
    div_residual: float
    energy_residual: float
    # Instantaneous quantities used by the monitors (not written to CSV).
    energy: float = 0.0
    grad_v_lp_rate: float = 0.0
    grad_t_lq_rate: float = 0.0
    strain_lp_rate: float = 0.0
    visc_dissipation: float = 0.0
    diff_dissipation: float = 0.0
    dissipation: float = 0.0
    coupling_work: float = 0.0
    vel_cross: float = 0.0
    stress_cross: float = 0.0
    mean_source: float = 0.0

    def csv_row(self) -> list[str]:
        vals = [
            self.time,
            self.dt,
            self.kinetic_l2,
            self.stress_l2,
            self.grad_v_lp,
            self.grad_t_lq,
            self.t_mean[0],
            self.t_mean[1],
            self.t_mean[2],
            self.reg_l1,
            self.div_residual,
            self.energy_residual,
        ]
        return [format(float(x), ".17g") for x in vals]


@dataclass
class Accumulators:
    """Left-endpoint time integrals and the previous record."""

    grad_v_lp: float = 0.0
    grad_t_lq: float = 0.0
    previous: EnergyRecord | None = None

    def advance(self, dt: float) -> None:
        if self.previous is not None:
            self.grad_v_lp += dt * self.previous.grad_v_lp_rate
            self.grad_t_lq += dt * self.previous.grad_t_lq_rate


def combined_energy(kinetic_l2: float, stress_l2: float, mu0: float) -> float:
    return mu0 * kinetic_l2 + 0.5 * stress_l2


def _cell_speed(u, v):
    uc = 0.5 * (u[1:] + u[:-1])
    vc = 0.5 * (v[:, 1:] + v[:, :-1])
    return np.sqrt(uc * uc + vc * vc)


def energy_record(
    state: State,
    acc: Accumulators,
    params: FluidParams,
    grid: Grid,
    dt: float = 0.0,
    update: bool = True,
) -> EnergyRecord:
    """Snapshot of every norm of the a-priori estimates (midpoint quadrature).

    ``acc`` must already hold the time integrals up to ``state.time`` (call
    ``acc.advance(dt)`` after each step). With ``update`` the new record
    becomes ``acc.previous``.
    """
    vol = grid.cell_volume
    u, v, t = state.u, state.v, state.stress
    kinetic = ops.face_dot(u, v, u, v, grid)
    stress_l2 = ops.cell_dot(t, t, grid)

    g = ops.velocity_gradient(u, v, grid)
    dmat = tensors.sym_part(g)
    gnorm = np.sqrt(np.sum(g * g, axis=(-2, -1)))
    d_sq = tensors.sym_norm_sq(dmat)
    p, q = params.p, params.q
    grad_v_rate = vol * float(np.sum(gnorm**p))
    strain_rate = vol * float(np.sum(d_sq ** (p / 2.0)))

    _, t_nsq, diff_diss = ops.stress_diffusion(t, params.diffusion, grid)
    grad_t_rate = vol * float(np.sum(t_nsq ** (q / 2.0)))

    tm = stress_mean(t, grid)
    reg = regularization_coefficient(t, params, grid)
    tnorm = np.sqrt(tensors.sym_norm_sq(t))
    reg_l1 = reg * vol * float(np.sum(tnorm))
    div_res = float(np.max(np.abs(ops.divergence(u, v, grid))))

    visc_diss = ops.cell_dot(viscous_stress(dmat, params.viscosity), dmat, grid)
    b = tensors.coupling_b(g, t, params.a)
    work = ops.cell_dot(t, b, grid)
    dissipation = 2.0 * params.mu0 * visc_diss + params.epsilon * diff_diss + (1.0 + reg) * stress_l2

    fu, fv = ops.stress_divergence(t, grid)
    vel_cross = vol * (float(np.sum(np.abs(u * fu))) + float(np.sum(np.abs(v * fv))))
    stress_cross = vol * float(np.sum(np.abs(tensors.sym_dot(t, b))))
    mean_b = b.reshape(-1, 3).sum(axis=0) * vol / grid.area
    mean_source = math.sqrt(float(tensors.sym_norm_sq(mean_b)))

    energy = combined_energy(kinetic, stress_l2, params.mu0)
    residual = 0.0
    prev = acc.previous
    if prev is not None and dt > 0:
        residual = max(0.0, energy - prev.energy + dt * (prev.dissipation - prev.coupling_work))

    rec = EnergyRecord(
        time=state.time,
        dt=dt,
        kinetic_l2=kinetic,
        stress_l2=stress_l2,
        grad_v_lp=acc.grad_v_lp,
        grad_t_lq=acc.grad_t_lq,
        t_mean=tm,
        reg_l1=reg_l1,
        div_residual=div_res,
        energy_residual=residual,
        energy=energy,
        grad_v_lp_rate=grad_v_rate,
        grad_t_lq_rate=grad_t_rate,
        strain_lp_rate=strain_rate,
        visc_dissipation=visc_diss,
        diff_dissipation=diff_diss,
        dissipation=dissipation,
        coupling_work=work,
        vel_cross=vel_cross,
        stress_cross=stress_cross,
        mean_source=mean_source,
    )
    if update:
        acc.previous = rec
    return rec


def records_to_csv(records) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for rec in records:
        writer.writerow(rec.csv_row())
    return buf.getvalue()


def gronwall_exponent_checks(p: float, q: float) -> dict[str, dict]:
    """Exponent preconditions of the two closing arguments of the estimate.

    For ``p <= 2`` the kinetic energy satisfies ``y(s) <= C (1 + (int y)^e)``
    with ``e = 1/2 + 1/(q - 2)``; Gronwall closes for ``e <= 1``, i.e.
    ``q >= 4``. For ``p > 2`` the gradient bound
    ``X <= C (1 + X^(1 + 2/(q - 2)) / ...)`` absorbs when
    ``1 + 2/(q - 2) < p``, i.e. ``q > 2p/(p - 1)``.
    """
    e_low = math.inf if q <= 2 else 0.5 + 1.0 / (q - 2.0)
    e_high = math.inf if q <= 2 else 1.0 + 2.0 / (q - 2.0)
    return {
        "velocity_gronwall": {
            "applies": p <= 2.0,
            "exponent": e_low,
            "limit": 1.0,
            "ok": e_low <= 1.0,
        },
        "gradient_absorption": {
            "applies": p > 2.0,
            "exponent": e_high,
            "limit": p,
            "ok": e_high < p,
        },
    }


@dataclass
class MonitorReport:
    steps: int
    combined_residual_max: float
    combined_constant: float
    velocity_residual_max: float
    stress_residual_max: float
    mean_residual_max: float
    mean_bound: list[float]
    mean_norms: list[float]
    mean_bound_violation: float
    exponent_checks: dict
    failing_checks: list[str]
    admissible: bool
    energy_increase_max: float = 0.0


def inequality_monitor(records, params: FluidParams, grid: Grid) -> MonitorReport:
    """Evaluate the discrete energy inequalities step by step.

    Every record must come from consecutive steps (record interval 1). The
    coercivity constants ``c``, ``phi`` are those of the laws; cross terms
    are the discrete face/cell sums stored in the records.
    """
    records = list(records)
    if len(records) < 2:
        raise ValueError("inequality_monitor needs at least two records")
    area = grid.area
    cv, phi1, _, _ = params.viscosity.constants()
    cd, phi3, _, _ = params.diffusion.constants()
    mu0, eps = params.mu0, params.epsilon

    comb = []
    vel = []
    strs = []
    mean = []
    const = []
    increase = []
    norms = [math.sqrt(float(tensors.sym_norm_sq(records[0].t_mean)))]
    bound = [norms[0]]
    for prev, cur in zip(records[:-1], records[1:]):
        dt = cur.dt
        if dt <= 0:
            continue
        lhs = cur.energy - prev.energy + dt * (
            2 * mu0 * cv * prev.strain_lp_rate + eps * cd * prev.grad_t_lq_rate + prev.stress_l2
        )
        rhs = dt * (2 * mu0 * phi1 * area + eps * phi3 * area + prev.coupling_work)
        r = max(0.0, lhs - rhs)
        comb.append(r)
        const.append(r / (dt * dt))
        increase.append(cur.energy - prev.energy)

        lhs = 0.5 * (cur.kinetic_l2 - prev.kinetic_l2) + dt * cv * prev.strain_lp_rate
        rhs = dt * (phi1 * area + prev.vel_cross)
        vel.append(max(0.0, lhs - rhs))

        lhs = 0.5 * (cur.stress_l2 - prev.stress_l2) + dt * (eps * cd * prev.grad_t_lq_rate + prev.stress_l2)
        rhs = dt * (eps * phi3 * area + 2 * mu0 * prev.vel_cross + prev.stress_cross)
        strs.append(max(0.0, lhs - rhs))

        m_prev = math.sqrt(float(tensors.sym_norm_sq(prev.t_mean)))
        m_cur = math.sqrt(float(tensors.sym_norm_sq(cur.t_mean)))
        lhs = 0.5 * (m_cur**2 - m_prev**2) + dt * m_prev**2
        rhs = dt * m_prev * prev.mean_source
        mean.append(max(0.0, lhs - rhs))
        norms.append(m_cur)
        bound.append(math.exp(-dt) * (bound[-1] + dt * prev.mean_source))

    checks = gronwall_exponent_checks(params.p, params.q)
    failing = [k for k, c in checks.items() if c["applies"] and not c["ok"]]
    return MonitorReport(
        steps=len(comb),
        combined_residual_max=max(comb, default=0.0),
        combined_constant=max(const, default=0.0),
        velocity_residual_max=max(vel, default=0.0),
        stress_residual_max=max(strs, default=0.0),
        mean_residual_max=max(mean, default=0.0),
        mean_bound=bound,
        mean_norms=norms,
        mean_bound_violation=max((n - b for n, b in zip(norms, bound)), default=0.0),
        exponent_checks=checks,
        failing_checks=failing,
        admissible=exponents_admissible(params.p, params.q)[0],
        energy_increase_max=max(increase, default=0.0),
    )


@dataclass
class SweepReport:
    m_values: list
    reg_l1_finals: list
    sup_energy: list
    ratio_table: list
    vmax: list = field(default_factory=list)
    errors: list = field(default_factory=list)

    def as_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("m", "reg_l1_final", "sup_energy", "vmax", "ratio", "error"))
        for k, m in enumerate(self.m_values):
            ratio = self.ratio_table[k - 1] if k > 0 else float("nan")
            w.writerow(
                (
                    format(float(m), ".17g"),
                    format(float(self.reg_l1_finals[k]), ".17g"),
                    format(float(self.sup_energy[k]), ".17g"),
                    format(float(self.vmax[k]), ".17g"),
                    format(float(ratio), ".17g"),
                    self.errors[k] or "",
                )
            )
        return buf.getvalue()

    @property
    def energy_spread(self) -> float:
        vals = [e for e in self.sup_energy if math.isfinite(e)]
        if not vals or max(vals) == 0:
            return 0.0
        return (max(vals) - min(vals)) / max(vals)


def m_sweep(scenario, m_values) -> SweepReport:
    """Run ``scenario`` once per ``m`` and tabulate the regularization term."""
    from oldreg.driver import run
    from oldreg.errors import OldregError

    m_values = list(m_values)
    if any(b <= a for a, b in zip(m_values[:-1], m_values[1:])):
        raise ValueError("m_values must be strictly increasing")
    finals, sups, vmaxes, errors = [], [], [], []
    for m in m_values:
        sc = replace(scenario, params=replace(scenario.params, m=m), capture=())
        try:
            result = run(sc)
        except OldregError as exc:
            finals.append(float("nan"))
            sups.append(float("nan"))
            vmaxes.append(float("nan"))
            errors.append(str(exc))
            continue
        finals.append(result.records[-1].reg_l1)
        sups.append(result.sup_energy)
        vmaxes.append(result.vmax)
        errors.append(None)
    ratios = []
    for a, b in zip(finals[:-1], finals[1:]):
        ratios.append(b / a if a != 0 and math.isfinite(a) and math.isfinite(b) else float("nan"))
    return SweepReport(m_values, finals, sups, ratios, vmaxes, errors)
