"""Staggered operators, projection, time stepping and checkpoints."""
from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from oldreg import tensors
from oldreg.constitutive import DiffusionLaw, ViscosityLaw
from oldreg.driver import taylor_green_velocity
from oldreg.errors import NumericalError, ProjectionError, ValidationError
from oldreg.solver import checkpoint
from oldreg.solver import operators as ops
from oldreg.solver.grid import Grid, State, apply_boundary, stress_ghosts, velocity_ghosts
from oldreg.solver.poisson import NeumannPoisson, project
from oldreg.solver.stepper import (
    FluidParams,
    adaptive_dt,
    cutoff_xi,
    cutoff_xi_derivative,
    exponents_admissible,
    regularization_coefficient,
    step,
    stress_mean,
)


def random_velocity(grid, rng, amplitude=1.0):
    u = rng.uniform(-amplitude, amplitude, (grid.nx + 1, grid.ny))
    v = rng.uniform(-amplitude, amplitude, (grid.nx, grid.ny + 1))
    u[0] = u[-1] = 0.0
    v[:, 0] = v[:, -1] = 0.0
    return u, v


def random_state(grid, seed, amplitude=0.5):
    rng = np.random.default_rng(seed)
    u, v = random_velocity(grid, rng)
    u, v, _ = project(u, v, grid)
    return State(0.0, amplitude * u, amplitude * v, rng.uniform(-amplitude, amplitude, (grid.nx, grid.ny, 3)))


# Grid and boundary ---------------------------------------------------------


def test_grid_validation():
    with pytest.raises(ValidationError):
        Grid(3, 8)
    with pytest.raises(ValidationError):
        Grid(8, 8, lx=0.0)
    g = Grid(8, 4, lx=2.0, ly=0.5)
    assert (g.hx, g.hy, g.cell_volume, g.area) == (0.25, 0.125, 0.03125, 1.0)


def test_zero_velocity_ghosts():
    g = Grid(6, 5)
    ug, vg = velocity_ghosts(*g.zero_velocity())
    assert not ug.any() and not vg.any()


def test_velocity_ghost_wall_average_is_zero():
    g = Grid(6, 5)
    u, v = random_velocity(g, np.random.default_rng(0))
    ug, vg = velocity_ghosts(u, v)
    assert np.array_equal(ug[:, 0] + ug[:, 1], np.zeros(g.nx + 1))
    assert np.array_equal(vg[-1] + vg[-2], np.zeros(g.ny + 1))


def test_apply_boundary_zeroes_normal_faces():
    g = Grid(6, 5)
    rng = np.random.default_rng(1)
    s = State(0.0, rng.random((7, 5)), rng.random((6, 6)), rng.random((6, 5, 3)))
    out = apply_boundary(s, g)
    assert not out.u[[0, -1]].any() and not out.v[:, [0, -1]].any()
    assert np.array_equal(out.u[1:-1], s.u[1:-1])
    assert s.u[0].any()  # input untouched


def test_constant_stress_ghosts_and_zero_normal_gradient():
    g = Grid(5, 4)
    t = np.broadcast_to([0.3, -0.2, 1.1], (5, 4, 3)).copy()
    gh = stress_ghosts(t)
    assert np.array_equal(gh, np.broadcast_to([0.3, -0.2, 1.1], (7, 6, 3)))
    gx, gy = ops.stress_face_gradients(t, g)
    assert not gx.any() and not gy.any()


def test_linear_stress_neumann_mismatch_is_first_order():
    # A field linear in x violates the Neumann condition; the mirror ghost
    # differs from the linear extension by slope * h, which is O(h).
    mismatches = []
    for n in (8, 16, 32):
        g = Grid(n, n)
        xc, _ = g.cell_centers()
        t = np.stack([2.0 * xc, 0 * xc, 0 * xc], axis=-1)
        gh = stress_ghosts(t)
        extension = 2.0 * (-0.5 * g.hx)
        mismatches.append(abs(gh[0, 1, 0] - extension))
    np.testing.assert_allclose(mismatches, [2.0 / 8, 2.0 / 16, 2.0 / 32], rtol=1e-12)


# Operator identities -------------------------------------------------------


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(4, 9), st.integers(4, 9))
def test_stress_divergence_is_adjoint_of_strain_rate(seed, nx, ny):
    g = Grid(nx, ny, lx=1.0, ly=0.7)
    rng = np.random.default_rng(seed)
    u, v = random_velocity(g, rng)
    s = rng.standard_normal((nx, ny, 3))
    fu, fv = ops.stress_divergence(s, g)
    lhs = ops.face_dot(fu, fv, u, v, g)
    rhs = -ops.cell_dot(s, ops.strain_rate(u, v, g), g)
    assert lhs == pytest.approx(rhs, abs=1e-12 * (1 + abs(rhs)))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_convection_and_advection_are_skew(seed):
    g = Grid(7, 6)
    rng = np.random.default_rng(seed)
    u, v = random_velocity(g, rng)
    wu, wv = random_velocity(g, rng)
    cu, cv = ops.convect_velocity(u, v, wu, wv, g)
    assert abs(ops.face_dot(cu, cv, u, v, g)) < 1e-12
    t = rng.standard_normal((7, 6, 3))
    assert abs(ops.cell_dot(ops.advect_stress(t, wu, wv, g), t, g)) < 1e-12


def test_gradient_is_minus_adjoint_of_divergence():
    g = Grid(6, 8)
    rng = np.random.default_rng(3)
    u, v = random_velocity(g, rng)
    phi = rng.standard_normal((6, 8))
    gx, gy = ops.gradient(phi, g)
    lhs = ops.face_dot(gx, gy, u, v, g)
    rhs = -g.cell_volume * float(np.sum(phi * ops.divergence(u, v, g)))
    assert lhs == pytest.approx(rhs, abs=1e-12)


def test_stress_diffusion_dissipates():
    g = Grid(8, 8)
    t = np.random.default_rng(4).standard_normal((8, 8, 3))
    for law in (DiffusionLaw(q=2.0), DiffusionLaw(q=4.0, kappa_t=0.5)):
        diff, _, _ = ops.stress_diffusion(t, law, g)
        assert ops.cell_dot(diff, t, g) < 0


def test_strain_rate_of_linear_shear():
    # u = y on interior faces; the reflected ghosts make the wall rows differ.
    g = Grid(8, 8)
    _, yu = g.u_points()
    u = yu.copy()
    u[0] = u[-1] = 0.0
    v = np.zeros((8, 9))
    d = ops.strain_rate(u, v, g)
    np.testing.assert_allclose(d[2:-2, 2:-2, 1], 0.5, rtol=1e-13)
    np.testing.assert_allclose(d[2:-2, 2:-2, [0, 2]], 0.0, atol=1e-13)


# Projection ----------------------------------------------------------------


@pytest.mark.parametrize("preconditioner", ["dct", "none"])
def test_projection_random_field(preconditioner):
    g = Grid(16, 12, ly=0.75)
    u, v = random_velocity(g, np.random.default_rng(5))
    solver = NeumannPoisson(g, preconditioner)
    pu, pv, phi = project(u, v, g, tol=1e-10, solver=solver)
    assert np.max(np.abs(ops.divergence(pu, pv, g))) <= 1e-10
    gx, gy = ops.gradient(phi, g)
    np.testing.assert_allclose(pu, u - gx, atol=1e-15)
    np.testing.assert_allclose(pv, v - gy, atol=1e-15)
    assert abs(phi.mean()) < 1e-12
    assert not pu[[0, -1]].any() and not pv[:, [0, -1]].any()


def test_projection_keeps_divergence_free_field():
    g = Grid(12, 12)
    u, v = taylor_green_velocity(g, 0.7)
    pu, pv, _ = project(u, v, g)
    np.testing.assert_allclose(pu, u, atol=1e-10)
    np.testing.assert_allclose(pv, v, atol=1e-10)


def test_projection_annihilates_gradients():
    g = Grid(10, 14)
    phi = np.random.default_rng(6).standard_normal((10, 14))
    gx, gy = ops.gradient(phi, g)
    pu, pv, _ = project(gx, gy, g)
    assert np.max(np.abs(pu)) < 1e-9 and np.max(np.abs(pv)) < 1e-9


def test_projection_iteration_cap():
    g = Grid(16, 16)
    u, v = random_velocity(g, np.random.default_rng(7))
    with pytest.raises(ProjectionError):
        project(u, v, g, tol=1e-12, solver=NeumannPoisson(g, "none", max_iter=2))


# Cut-off, mean, regularization ---------------------------------------------


def test_cutoff_examples():
    assert cutoff_xi(0.5, 1) == 1.0
    assert cutoff_xi(3.0, 1) == 0.0
    assert cutoff_xi(1.5, 1) == 0.5
    assert cutoff_xi(7.0, 5) == cutoff_xi(1.4, 1)


def test_cutoff_shape():
    s = np.linspace(0.0, 5.0, 5001)
    xi = cutoff_xi(s, 2)
    assert np.all(np.diff(xi) <= 0)
    assert np.all(xi[s <= 2] == 1.0) and np.all(xi[s >= 4] == 0.0)
    d = cutoff_xi_derivative(s, 1)
    assert d.min() == pytest.approx(-1.5) and d.max() == 0.0
    num = np.gradient(cutoff_xi(s, 1), s)
    assert num.min() >= -1.5 - 1e-6 and num.max() <= 1e-12
    # C1 junctions
    assert cutoff_xi_derivative(1.0, 1) == 0.0 and cutoff_xi_derivative(2.0, 1) == 0.0


def test_stress_mean_examples():
    g = Grid(6, 4)
    c = np.array([0.4, -1.0, 2.5])
    np.testing.assert_allclose(stress_mean(np.broadcast_to(c, (6, 4, 3)), g), c, rtol=1e-15)
    assert not stress_mean(g.zero_stress(), g).any()
    i, j = np.indices((6, 4))
    sign = np.where((i + j) % 2 == 0, 1.0, -1.0)[..., None]
    checker = sign * np.array([1.0, 0.0, 1.0])
    assert np.max(np.abs(stress_mean(checker, g))) < 1e-15


def test_regularization_coefficient():
    g = Grid(4, 4)
    t = np.broadcast_to([3.0, 0.0, 4.0], (4, 4, 3)).copy()
    assert regularization_coefficient(t, FluidParams(m=4, diffusion=DiffusionLaw(q=2.0)), g) == 0.25
    assert regularization_coefficient(t, FluidParams(m=5, diffusion=DiffusionLaw(q=4.0)), g) == pytest.approx(25.0 / 5)


def test_exponent_admissibility():
    assert exponents_admissible(1.8, 4.0)[0]
    assert not exponents_admissible(1.8, 3.9)[0]
    assert not exponents_admissible(1.2, 6.0)[0]
    assert exponents_admissible(3.0, 3.01)[0]
    assert not exponents_admissible(3.0, 3.0)[0]


def test_params_validation():
    for kw in ({"epsilon": 0.0}, {"a": 1.5}, {"m": 0}, {"cfl": 1.0}, {"mu0": -1.0}, {"t_end": -1.0}):
        with pytest.raises(ValidationError):
            FluidParams(**kw)


# Time step -----------------------------------------------------------------


def test_adaptive_dt_at_rest():
    params = FluidParams(
        epsilon=0.1, cfl=0.5, viscosity=ViscosityLaw(mu1=1.0, p=2.0), diffusion=DiffusionLaw(gamma1=3.0, q=2.0), t_end=10.0
    )
    for n in (8, 16):
        g = Grid(n, n)
        # The reaction limit 1/(1 + 1/m) is far larger here.
        assert adaptive_dt(State.zeros(g), params, g) == pytest.approx(0.5 * g.h**2 / (4 * max(1.0, 0.3)), rel=1e-14)
    g8, g16 = Grid(8, 8), Grid(16, 16)
    assert adaptive_dt(State.zeros(g8), params, g8) == pytest.approx(4 * adaptive_dt(State.zeros(g16), params, g16))


def test_adaptive_dt_convective_branch_and_cap():
    g = Grid(64, 64)
    params = FluidParams(t_end=10.0, viscosity=ViscosityLaw(mu1=1e-6, p=2.0), diffusion=DiffusionLaw(gamma1=1e-6, q=2.0))
    s = State(0.0, *taylor_green_velocity(g, 100.0), g.zero_stress())
    vmax = max(np.max(np.abs(s.u)), np.max(np.abs(s.v)))
    assert adaptive_dt(s, params, g) == pytest.approx(params.cfl * g.h / vmax, rel=1e-14)
    s0 = State.zeros(g, time=10.0 - 1e-9)
    assert adaptive_dt(s0, params, g) == pytest.approx(1e-9)


def test_adaptive_dt_rejects_non_finite():
    g = Grid(6, 6)
    s = State.zeros(g)
    s.stress[2, 3, 1] = np.nan
    with pytest.raises(NumericalError, match=r"stress at index \(2, 3, 1\)"):
        adaptive_dt(s, FluidParams(), g)


# Stepping ------------------------------------------------------------------


@pytest.mark.parametrize("p,q,a", [(2.0, 2.0, 0.0), (1.8, 4.0, 0.7), (2.5, 6.0, -1.0)])
def test_zero_state_is_fixed_point(p, q, a):
    g = Grid(8, 8)
    params = FluidParams(a=a, viscosity=ViscosityLaw(p=p), diffusion=DiffusionLaw(q=q, kappa_t=0.0 if q > 2 else 1.0))
    out = step(State.zeros(g), params, g, 1e-3)
    assert out.time == 1e-3
    assert not out.u.any() and not out.v.any() and not out.stress.any()


@pytest.mark.parametrize("q,m", [(2.0, 1), (4.0, 3), (6.0, 2)])
def test_constant_stress_ode_reduction(q, m):
    g = Grid(6, 6)
    c = np.array([0.6, -0.3, 0.9])
    params = FluidParams(m=m, a=0.4, diffusion=DiffusionLaw(q=q, kappa_t=0.0 if q > 2 else 1.0))
    norm_sq = float(tensors.sym_norm_sq(c))

    def rhs(_, y):
        # dT/dt = -(1 + |T|^(q-2)/m) T for a spatially constant stress.
        n2 = y[0] ** 2 + 2 * y[1] ** 2 + y[2] ** 2
        reg = 1.0 / m if q == 2 else n2 ** ((q - 2) / 2) / m
        return -(1.0 + reg) * y

    errors = []
    for dt in (1e-2, 5e-3, 2.5e-3):
        s = State(0.0, *g.zero_velocity(), np.broadcast_to(c, (6, 6, 3)).copy())
        out = step(s, params, g, dt)
        assert not out.u.any() and not out.v.any()
        reg = 1.0 / m if q == 2 else norm_sq ** ((q - 2) / 2) / m
        np.testing.assert_allclose(out.stress, np.broadcast_to(c - dt * (1 + reg) * c, (6, 6, 3)), rtol=1e-14, atol=1e-15)
        ref = solve_ivp(rhs, (0.0, dt), c, rtol=1e-13, atol=1e-15).y[:, -1]
        errors.append(np.max(np.abs(out.stress[0, 0] - ref)))
    ratios = np.array(errors[:-1]) / np.array(errors[1:])
    np.testing.assert_allclose(ratios, 4.0, rtol=0.05)


def test_step_preserves_divergence_and_walls():
    g = Grid(12, 10)
    params = FluidParams(a=0.5, viscosity=ViscosityLaw(p=1.8), diffusion=DiffusionLaw(q=4.0, kappa_t=0.0))
    s = random_state(g, 8)
    for _ in range(5):
        s = step(s, params, g, adaptive_dt(s, params, g))
        assert np.max(np.abs(ops.divergence(s.u, s.v, g))) <= params.projection_tol
        assert not s.u[[0, -1]].any() and not s.v[:, [0, -1]].any()


def test_step_rejects_bad_dt_and_reports_blow_up():
    g = Grid(8, 8)
    with pytest.raises(ValueError):
        step(State.zeros(g), FluidParams(), g, 0.0)
    s = random_state(g, 9, amplitude=1.0)
    params = FluidParams(diffusion=DiffusionLaw(q=4.0, kappa_t=0.0))
    with pytest.raises(NumericalError):
        for _ in range(200):
            s = step(s, params, g, 1.0)


def test_taylor_green_kinetic_energy_decays():
    g = Grid(16, 16)
    params = FluidParams(t_end=0.1)
    s = State(0.0, *taylor_green_velocity(g, 0.5), g.zero_stress())
    kinetic = [ops.face_dot(s.u, s.v, s.u, s.v, g)]
    while s.time < params.t_end - 1e-14:
        s = step(s, params, g, adaptive_dt(s, params, g))
        kinetic.append(ops.face_dot(s.u, s.v, s.u, s.v, g))
    assert np.all(np.diff(kinetic) < 0)


def test_cutoff_inactive_below_level():
    g = Grid(12, 12)
    base = dict(a=0.3, viscosity=ViscosityLaw(p=1.8), diffusion=DiffusionLaw(q=4.0, kappa_t=0.0))
    p1, pbig = FluidParams(m=1, **base), FluidParams(m=10**6, **base)
    s1 = sbig = State(0.0, *taylor_green_velocity(g, 0.5), g.zero_stress())
    for _ in range(10):
        assert max(np.max(np.abs(s1.u)), np.max(np.abs(s1.v))) <= 1.0
        s1 = step(s1, p1, g, 1e-3)
        sbig = step(sbig, pbig, g, 1e-3)
    # Zero mean stress keeps the regularization off for q > 2 as well.
    np.testing.assert_allclose(s1.u, sbig.u, atol=1e-13)
    np.testing.assert_allclose(s1.stress, sbig.stress, atol=1e-13)


# Checkpoints ---------------------------------------------------------------


def test_checkpoint_round_trip_is_byte_identical(tmp_path):
    g = Grid(5, 7, lx=1.3, ly=0.1)
    s = random_state(g, 10)
    s.time = 0.1 + 0.2
    s.pressure = np.random.default_rng(11).standard_normal((5, 7)) * 1e-300
    text = checkpoint.dumps(s, g)
    assert text.splitlines()[0] == f"OLDREG1 5 7 1.3 0.10000000000000001 {format(0.1 + 0.2, '.17g')}"
    checkpoint.write(tmp_path / "c.txt", s, g)
    back, g2 = checkpoint.read(tmp_path / "c.txt")
    assert g2 == g and back.time == s.time
    for name in ("u", "v", "stress", "pressure"):
        assert np.array_equal(getattr(back, name), getattr(s, name))
    assert checkpoint.dumps(back, g2) == text


@pytest.mark.parametrize(
    "mutate,match",
    [
        (lambda t: "", "empty"),
        (lambda t: t.replace("OLDREG1", "OLDREG2", 1), "header"),
        (lambda t: t.replace("[T22]", "[T33]"), "missing"),
        (lambda t: "\n".join(t.splitlines()[:-1]), "truncated"),
        (lambda t: t.replace("[u] 5 4", "[u] 4 4").replace("[v] 4 5", "[v] 4 5"), "section"),
    ],
)
def test_checkpoint_rejects_malformed(mutate, match):
    g = Grid(4, 4)
    text = checkpoint.dumps(State.zeros(g), g)
    with pytest.raises(ValidationError, match=match):
        checkpoint.loads(mutate(text))
