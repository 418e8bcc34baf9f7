"""Second-order staggered stencils.

The operators are built so that the discrete analogues of the integration by
parts identities used in the energy estimate hold exactly:

* ``stress_divergence`` is the negative adjoint of ``strain_rate`` with
  respect to the cell inner product ``sum(vol * S : D)`` and the face inner
  product ``sum(vol * f . w)``, so the coupling terms ``2 mu0 div T . v`` and
  ``2 mu0 D : T`` cancel to round-off;
* ``convect_velocity`` and ``advect_stress`` are skew-symmetric, so they
  neither create nor destroy kinetic or stress energy;
* the viscous force is ``stress_divergence(mu(D) D)`` and the stress
  diffusion is the gradient of a convex face functional, so both only
  dissipate.
"""
from __future__ import annotations

import numpy as np

from oldreg import tensors
from oldreg.solver.grid import Grid, stress_ghosts, velocity_ghosts

# Frobenius weights of [T11, T12, T22].
SYM_W = np.array([1.0, 2.0, 1.0])


def _avg4(a: np.ndarray) -> np.ndarray:
    return 0.25 * (a[:-1, :-1] + a[1:, :-1] + a[:-1, 1:] + a[1:, 1:])


def divergence(u: np.ndarray, v: np.ndarray, grid: Grid) -> np.ndarray:
    return (u[1:, :] - u[:-1, :]) / grid.hx + (v[:, 1:] - v[:, :-1]) / grid.hy


def gradient(phi: np.ndarray, grid: Grid):
    """Face gradient of a cell field; zero on wall faces."""
    gx = np.zeros((grid.nx + 1, grid.ny))
    gy = np.zeros((grid.nx, grid.ny + 1))
    gx[1:-1, :] = (phi[1:, :] - phi[:-1, :]) / grid.hx
    gy[:, 1:-1] = (phi[:, 1:] - phi[:, :-1]) / grid.hy
    return gx, gy


def laplacian(phi: np.ndarray, grid: Grid) -> np.ndarray:
    """Five-point Neumann Laplacian, ``divergence(gradient(phi))``."""
    gx, gy = gradient(phi, grid)
    return divergence(gx, gy, grid)


def _node_derivatives(u: np.ndarray, v: np.ndarray, grid: Grid):
    """``du/dy`` and ``dv/dx`` on the ``(nx + 1) x (ny + 1)`` cell corners."""
    ug, vg = velocity_ghosts(u, v)
    dudy = (ug[:, 1:] - ug[:, :-1]) / grid.hy
    dvdx = (vg[1:, :] - vg[:-1, :]) / grid.hx
    return dudy, dvdx


def velocity_gradient(u: np.ndarray, v: np.ndarray, grid: Grid) -> np.ndarray:
    """Cell-centred ``grad v`` with ``G[..., i, j] = d v_i / d x_j``."""
    dudy, dvdx = _node_derivatives(u, v, grid)
    g = np.empty((grid.nx, grid.ny, 2, 2))
    g[..., 0, 0] = (u[1:, :] - u[:-1, :]) / grid.hx
    g[..., 0, 1] = _avg4(dudy)
    g[..., 1, 0] = _avg4(dvdx)
    g[..., 1, 1] = (v[:, 1:] - v[:, :-1]) / grid.hy
    return g


def strain_rate(u: np.ndarray, v: np.ndarray, grid: Grid) -> np.ndarray:
    return tensors.sym_part(velocity_gradient(u, v, grid))


def stress_divergence(s: np.ndarray, grid: Grid):
    """Face force ``div S`` of a cell-centred symmetric field ``S``.

    Defined as minus the adjoint of :func:`strain_rate`, so
    ``<div S, w>_faces = -<S, D(w)>_cells`` for every ``w`` vanishing on the
    wall-normal faces.
    """
    hx, hy = grid.hx, grid.hy
    fu = np.zeros((grid.nx + 1, grid.ny))
    fv = np.zeros((grid.nx, grid.ny + 1))
    fu[1:-1, :] = (s[1:, :, 0] - s[:-1, :, 0]) / hx
    fv[:, 1:-1] = (s[:, 1:, 2] - s[:, :-1, 2]) / hy

    # Corner values of S12 seen by the averaging in strain_rate (zero outside).
    sn = _avg4(np.pad(s[..., 1], 1))

    # Adjoint of du/dy on corners, including the reflected ghost rows.
    adj_ug = np.zeros((grid.nx + 1, grid.ny + 2))
    adj_ug[:, :-1] -= sn / hy
    adj_ug[:, 1:] += sn / hy
    adj_u = adj_ug[:, 1:-1].copy()
    adj_u[:, 0] -= adj_ug[:, 0]
    adj_u[:, -1] -= adj_ug[:, -1]

    adj_vg = np.zeros((grid.nx + 2, grid.ny + 1))
    adj_vg[:-1, :] -= sn / hx
    adj_vg[1:, :] += sn / hx
    adj_v = adj_vg[1:-1, :].copy()
    adj_v[0, :] -= adj_vg[0, :]
    adj_v[-1, :] -= adj_vg[-1, :]

    fu[1:-1, :] -= adj_u[1:-1, :]
    fv[:, 1:-1] -= adj_v[:, 1:-1]
    return fu, fv


def stress_face_gradients(t: np.ndarray, grid: Grid):
    """Face gradients of each stress component; zero on walls (Neumann)."""
    tg = stress_ghosts(t)
    gx = (tg[1:, 1:-1] - tg[:-1, 1:-1]) / grid.hx
    gy = (tg[1:-1, 1:] - tg[1:-1, :-1]) / grid.hy
    return gx, gy


def stress_gradient_norm_sq(gx: np.ndarray, gy: np.ndarray) -> np.ndarray:
    """Cell value of ``|grad T|**2`` from the face gradients.

    Each direction contributes the mean of the squares on its two faces.
    """
    sx = 0.5 * (gx[1:] ** 2 + gx[:-1] ** 2)
    sy = 0.5 * (gy[:, 1:] ** 2 + gy[:, :-1] ** 2)
    return np.sum(SYM_W * (sx + sy), axis=-1)


def stress_diffusion(t: np.ndarray, law, grid: Grid):
    """``div(gamma(grad T) grad T)`` at cells.

    Returns ``(term, cell_norm_sq, face_dissipation)`` where
    ``face_dissipation`` is ``sum(vol * flux : grad T)`` over all faces.
    """
    gx, gy = stress_face_gradients(t, grid)
    nsq = stress_gradient_norm_sq(gx, gy)
    gam = law.coefficient(nsq)
    gam_x = np.zeros((grid.nx + 1, grid.ny))
    gam_y = np.zeros((grid.nx, grid.ny + 1))
    gam_x[1:-1] = 0.5 * (gam[1:] + gam[:-1])
    gam_y[:, 1:-1] = 0.5 * (gam[:, 1:] + gam[:, :-1])
    fx = gam_x[..., None] * gx
    fy = gam_y[..., None] * gy
    term = (fx[1:] - fx[:-1]) / grid.hx + (fy[:, 1:] - fy[:, :-1]) / grid.hy
    diss = grid.cell_volume * (np.sum(SYM_W * fx * gx) + np.sum(SYM_W * fy * gy))
    return term, nsq, diss


def face_speed(u: np.ndarray, v: np.ndarray):
    """``|v|`` on the u-faces and the v-faces (4-point tangential averages)."""
    vp = np.pad(v, ((1, 1), (0, 0)))
    v_at_u = _avg4(vp)
    up = np.pad(u, ((0, 0), (1, 1)))
    u_at_v = _avg4(up)
    return np.sqrt(u * u + v_at_u * v_at_u), np.sqrt(v * v + u_at_v * u_at_v)


def convect_velocity(u: np.ndarray, v: np.ndarray, wu: np.ndarray, wv: np.ndarray, grid: Grid):
    """Skew-symmetric form of ``div(v (x) w)`` for a transporting field ``w``.

    Equals ``div(v (x) w) - v div(w) / 2`` with centred face fluxes; the
    result is orthogonal to ``(u, v)`` exactly.
    """
    hx, hy = grid.hx, grid.hy
    nx, ny = grid.nx, grid.ny

    # u-momentum: x-fluxes at cell centres, y-fluxes at corners.
    fxc = 0.5 * (wu[1:] + wu[:-1])
    fyn = np.zeros((nx + 1, ny + 1))
    fyn[1:-1] = 0.5 * (wv[1:] + wv[:-1])
    up = np.pad(u, ((0, 0), (1, 1)))
    cu = np.zeros_like(u)
    cu[1:-1] = (
        (fxc[1:] * u[2:] - fxc[:-1] * u[:-2]) / (2 * hx)
        + (fyn[1:-1, 1:] * up[1:-1, 2:] - fyn[1:-1, :-1] * up[1:-1, :-2]) / (2 * hy)
    )

    # v-momentum: y-fluxes at cell centres, x-fluxes at corners.
    fyc = 0.5 * (wv[:, 1:] + wv[:, :-1])
    fxn = np.zeros((nx + 1, ny + 1))
    fxn[:, 1:-1] = 0.5 * (wu[:, 1:] + wu[:, :-1])
    vp = np.pad(v, ((1, 1), (0, 0)))
    cv = np.zeros_like(v)
    cv[:, 1:-1] = (
        (fyc[:, 1:] * v[:, 2:] - fyc[:, :-1] * v[:, :-2]) / (2 * hy)
        + (fxn[1:, 1:-1] * vp[2:, 1:-1] - fxn[:-1, 1:-1] * vp[:-2, 1:-1]) / (2 * hx)
    )
    return cu, cv


def advect_stress(t: np.ndarray, u: np.ndarray, v: np.ndarray, grid: Grid) -> np.ndarray:
    """Skew-symmetric ``v . grad T`` at cells using the native face velocities."""
    pad = ((1, 1), (1, 1), (0, 0))
    tp = np.pad(t, pad)
    ue = u[1:, :, None]
    uw = u[:-1, :, None]
    vn = v[:, 1:, None]
    vs = v[:, :-1, None]
    return (ue * tp[2:, 1:-1] - uw * tp[:-2, 1:-1]) / (2 * grid.hx) + (
        vn * tp[1:-1, 2:] - vs * tp[1:-1, :-2]
    ) / (2 * grid.hy)


def face_dot(au, av, bu, bv, grid: Grid) -> float:
    """Face inner product ``sum(vol * a . b)``."""
    return grid.cell_volume * (float(np.sum(au * bu)) + float(np.sum(av * bv)))


def cell_dot(a: np.ndarray, b: np.ndarray, grid: Grid) -> float:
    """Cell inner product ``sum(vol * A : B)`` of symmetric fields."""
    return grid.cell_volume * float(np.sum(SYM_W * a * b))
