"""Explicit time stepping of the cut-off, mean-regularized system."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from oldreg import tensors
from oldreg.constitutive import DiffusionLaw, ViscosityLaw, viscous_stress
from oldreg.errors import NumericalError, ValidationError
from oldreg.solver import operators as ops
from oldreg.solver.grid import Grid, State, apply_boundary
from oldreg.solver.poisson import NeumannPoisson, project

DIM = 2


def exponents_admissible(p: float, q: float) -> tuple[bool, str]:
    """Exponent condition of the existence theorem, with the failing branch."""
    if p <= 2.0:
        if p <= 6.0 / 5.0:
            return False, f"p = {p:g} <= 6/5: the branch 6/5 < p <= 2 requires p > 6/5"
        if q >= 4.0:
            return True, "6/5 < p <= 2 and q >= 4"
        return False, f"branch 6/5 < p <= 2 requires q >= 4 (got q = {q:g})"
    bound = 2.0 * p / (p - 1.0)
    if q > bound:
        return True, f"p > 2 and q > 2p/(p-1) = {bound:g}"
    return False, f"branch p > 2 requires q > 2p/(p-1) = {bound:g} (got q = {q:g})"


@dataclass(frozen=True)
class FluidParams:
    epsilon: float = 0.1
    mu0: float = 1.0
    a: float = 0.0
    m: int = 1
    viscosity: ViscosityLaw = field(default_factory=ViscosityLaw)
    diffusion: DiffusionLaw = field(default_factory=DiffusionLaw)
    t_end: float = 1.0
    cfl: float = 0.5
    projection_tol: float = 1e-10

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValidationError(f"epsilon must be > 0 (got {self.epsilon})")
        if not self.mu0 >= 0:
            raise ValidationError(f"mu0 must be >= 0 (got {self.mu0})")
        if not -1.0 <= self.a <= 1.0:
            raise ValidationError(f"a must lie in [-1, 1] (got {self.a})")
        if not self.m >= 1:
            raise ValidationError(f"m must be >= 1 (got {self.m})")
        if not self.t_end >= 0:
            raise ValidationError(f"t_end must be >= 0 (got {self.t_end})")
        if not 0 < self.cfl < 1:
            raise ValidationError(f"cfl must lie in (0, 1) (got {self.cfl})")
        if not self.projection_tol > 0:
            raise ValidationError("projection_tol must be > 0")

    @property
    def p(self) -> float:
        return self.viscosity.p

    @property
    def q(self) -> float:
        return self.diffusion.q

    @property
    def admissible(self) -> bool:
        return exponents_admissible(self.p, self.q)[0]


def cutoff_xi(s, m: float = 1.0):
    """``xi(s / m)`` with ``xi = 1`` on ``[0, 1]``, ``0`` on ``[2, inf)``.

    On ``(1, 2)`` the cubic ``1 - 3 (r-1)**2 + 2 (r-1)**3`` joins the two
    plateaus with matching first derivatives; its slope lies in ``[-1.5, 0]``.
    """
    r = np.asarray(s, dtype=float) / m
    x = np.clip(r - 1.0, 0.0, 1.0)
    out = 1.0 - 3.0 * x * x + 2.0 * x * x * x
    return float(out) if out.ndim == 0 else out


def cutoff_xi_derivative(s, m: float = 1.0):
    r = np.asarray(s, dtype=float) / m
    x = np.clip(r - 1.0, 0.0, 1.0)
    out = (-6.0 * x + 6.0 * x * x) / m
    return float(out) if out.ndim == 0 else out


def stress_mean(stress: np.ndarray, grid: Grid) -> np.ndarray:
    """Area-weighted mean of a cell field (uniform cells)."""
    return stress.reshape(-1, stress.shape[-1]).sum(axis=0) * grid.cell_volume / grid.area


def regularization_coefficient(stress: np.ndarray, params: FluidParams, grid: Grid) -> float:
    """``|T_M|**(q - 2) / m`` for the current mean stress (``q = 2`` gives ``1/m``)."""
    tm = stress_mean(stress, grid)
    norm = math.sqrt(float(tensors.sym_norm_sq(tm)))
    q = params.q
    if q == 2.0:
        return 1.0 / params.m
    return norm ** (q - 2.0) / params.m


@dataclass
class Forcing:
    """Optional body forces for manufactured-solution tests.

    Each callable receives the time and returns the field on the native
    locations: ``(fu, fv)`` on the faces and ``fT`` on the cells.
    """

    velocity: Optional[Callable[[float], tuple[np.ndarray, np.ndarray]]] = None
    stress: Optional[Callable[[float], np.ndarray]] = None


def _check_finite_fields(state: State):
    for name in ("u", "v", "stress"):
        if not np.all(np.isfinite(getattr(state, name))):
            state.check_finite()


def adaptive_dt(state: State, params: FluidParams, grid: Grid) -> float:
    """Largest stable explicit step times ``cfl``, capped by ``t_end - time``.

    Limits: convection ``h / |v|max``, viscosity ``h**2 / (2 d mu_max)``,
    stress diffusion ``h**2 / (2 d eps gamma_max)`` and the local reaction
    rate of the stress equation. ``mu_max``, ``gamma_max`` bound the tangent
    coefficients of the current state.
    """
    _check_finite_fields(state)
    h = grid.h
    vmax = max(float(np.max(np.abs(state.u))), float(np.max(np.abs(state.v))))
    g = ops.velocity_gradient(state.u, state.v, grid)
    d_sq = tensors.sym_norm_sq(tensors.sym_part(g))
    mu_max = float(np.max(params.viscosity.tangent_bound(d_sq)))
    gx, gy = ops.stress_face_gradients(state.stress, grid)
    gam_max = float(np.max(params.diffusion.tangent_bound(ops.stress_gradient_norm_sq(gx, gy))))
    gmax = float(np.max(np.sqrt(np.sum(g * g, axis=(-2, -1)))))
    reg = regularization_coefficient(state.stress, params, grid)

    # A degenerate law (kappa = 0 at a vanishing gradient) imposes no limit.
    limits = []
    if mu_max > 0:
        limits.append(h * h / (2 * DIM * mu_max))
    if gam_max > 0:
        limits.append(h * h / (2 * DIM * params.epsilon * gam_max))
    if vmax > 0:
        limits.append(h / vmax)
    limits.append(1.0 / (1.0 + reg + 2.0 * (1.0 + abs(params.a)) * gmax))
    dt = params.cfl * min(limits)
    remaining = params.t_end - state.time
    if dt >= remaining:
        return max(remaining, 0.0)
    if dt < 1e-12 * params.t_end:
        raise NumericalError(f"time step {dt:.3e} fell below 1e-12 * t_end at t = {state.time!r}")
    return dt


@dataclass
class StepTerms:
    """Right-hand sides of one explicit step, evaluated at the old state."""

    rhs_u: np.ndarray
    rhs_v: np.ndarray
    rhs_t: np.ndarray
    grad_v: np.ndarray
    strain: np.ndarray
    reg: float


def step_terms(state: State, params: FluidParams, grid: Grid, forcing: Forcing | None = None) -> StepTerms:
    u, v, t = state.u, state.v, state.stress
    g = ops.velocity_gradient(u, v, grid)
    dmat = tensors.sym_part(g)

    su, sv = ops.face_speed(u, v)
    m = params.m
    cu, cv = ops.convect_velocity(u, v, cutoff_xi(su, m) * u, cutoff_xi(sv, m) * v, grid)
    vu, vv = ops.stress_divergence(viscous_stress(dmat, params.viscosity), grid)
    eu, ev = ops.stress_divergence(t, grid)
    rhs_u = -cu + vu + eu
    rhs_v = -cv + vv + ev

    diff, _, _ = ops.stress_diffusion(t, params.diffusion, grid)
    reg = regularization_coefficient(t, params, grid)
    rhs_t = (
        -ops.advect_stress(t, u, v, grid)
        + params.epsilon * diff
        - (1.0 + reg) * t
        + 2.0 * params.mu0 * dmat
        + tensors.coupling_b(g, t, params.a)
    )
    if forcing is not None:
        if forcing.velocity is not None:
            fu, fv = forcing.velocity(state.time)
            rhs_u = rhs_u + fu
            rhs_v = rhs_v + fv
        if forcing.stress is not None:
            rhs_t = rhs_t + forcing.stress(state.time)
    rhs_u[0] = rhs_u[-1] = 0.0
    rhs_v[:, 0] = rhs_v[:, -1] = 0.0
    return StepTerms(rhs_u, rhs_v, rhs_t, g, dmat, reg)


def step(
    state: State,
    params: FluidParams,
    grid: Grid,
    dt: float,
    forcing: Forcing | None = None,
    poisson: NeumannPoisson | None = None,
) -> State:
    """Advance ``state`` by one forward-Euler step followed by projection."""
    if not dt > 0:
        raise ValueError(f"dt must be positive (got {dt})")
    terms = step_terms(state, params, grid, forcing)
    u_star = state.u + dt * terms.rhs_u
    v_star = state.v + dt * terms.rhs_v
    stress = state.stress + dt * terms.rhs_t
    State(state.time + dt, u_star, v_star, stress).check_finite()
    u, v, phi = project(u_star, v_star, grid, params.projection_tol, solver=poisson)
    out = apply_boundary(State(state.time + dt, u, v, stress, phi / dt), grid)
    out.check_finite()
    return out
