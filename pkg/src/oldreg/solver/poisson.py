"""Pressure projection on the MAC grid.

The Neumann Poisson problem is solved with conjugate gradients on the
five-point Laplacian. The default preconditioner is the exact inverse of that
Laplacian in the cosine basis (it diagonalises the cell-centred Neumann
stencil), which makes CG converge in one or two iterations; ``"none"`` gives
plain CG.
"""
from __future__ import annotations

import numpy as np
from scipy import fft

from oldreg.errors import ProjectionError
from oldreg.solver import operators as ops
from oldreg.solver.grid import Grid


class NeumannPoisson:
    """Solver for ``laplacian(phi) = rhs`` with ``mean(phi) = 0``."""

    def __init__(self, grid: Grid, preconditioner: str = "dct", max_iter: int | None = None):
        if preconditioner not in ("dct", "none"):
            raise ValueError(f"unknown preconditioner {preconditioner!r}")
        self.grid = grid
        self.preconditioner = preconditioner
        self.max_iter = max_iter or 4 * grid.nx * grid.ny
        kx = np.arange(grid.nx)
        ky = np.arange(grid.ny)
        lam_x = (2.0 * np.cos(np.pi * kx / grid.nx) - 2.0) / grid.hx**2
        lam_y = (2.0 * np.cos(np.pi * ky / grid.ny) - 2.0) / grid.hy**2
        eig = lam_x[:, None] + lam_y[None, :]
        eig[0, 0] = 1.0
        self._inv_eig = 1.0 / eig
        self._inv_eig[0, 0] = 0.0
        self.last_iterations = 0

    def _apply_inverse(self, r: np.ndarray) -> np.ndarray:
        rh = fft.dctn(r, type=2, norm="ortho")
        rh *= self._inv_eig
        return fft.idctn(rh, type=2, norm="ortho")

    def solve(self, rhs: np.ndarray, tol: float, x0: np.ndarray | None = None) -> np.ndarray:
        """Solve until ``max|laplacian(phi) - rhs| <= tol``.

        The constant mode of ``rhs`` is removed first (compatibility), and
        the returned ``phi`` has zero mean.
        """
        grid = self.grid
        b = rhs - rhs.mean()
        x = np.zeros_like(b) if x0 is None else x0 - x0.mean()
        # CG on A = -laplacian (SPD on mean-zero fields) with A x = -b;
        # the CG residual -b - A x is then laplacian(x) - b.
        r = ops.laplacian(x, grid) - b
        if np.max(np.abs(r)) <= tol:
            self.last_iterations = 0
            return x
        z = self._precondition(r)
        p = z.copy()
        rz = float(np.sum(r * z))
        for it in range(1, self.max_iter + 1):
            ap = -ops.laplacian(p, grid)
            denom = float(np.sum(p * ap))
            if denom <= 0.0:
                break
            alpha = rz / denom
            x += alpha * p
            r -= alpha * ap
            if np.max(np.abs(r)) <= tol:
                # Recompute the true residual to guard against drift.
                r = ops.laplacian(x, grid) - b
                if np.max(np.abs(r)) <= tol:
                    self.last_iterations = it
                    return x - x.mean()
            z = self._precondition(r)
            rz_new = float(np.sum(r * z))
            p = z + (rz_new / rz) * p
            rz = rz_new
        res = float(np.max(np.abs(ops.laplacian(x, grid) - b)))
        raise ProjectionError(
            f"pressure CG did not reach tol {tol:g} in {self.max_iter} iterations (residual {res:.3e})"
        )

    def _precondition(self, r):
        if self.preconditioner == "dct":
            return -self._apply_inverse(r)
        return r - r.mean()


def project(u_star, v_star, grid: Grid, tol: float = 1e-10, solver: NeumannPoisson | None = None, x0=None):
    """Remove the discrete gradient part of ``(u_star, v_star)``.

    Returns ``(u, v, phi)`` with ``max|divergence(u, v)| <= tol`` and
    ``(u, v) = (u_star, v_star) - gradient(phi)``.
    """
    solver = solver or NeumannPoisson(grid)
    div = ops.divergence(u_star, v_star, grid)
    # The residual of the solve is exactly the divergence left behind; aim a
    # little below tol because the mean removal is not part of that residual.
    phi = solver.solve(div, 0.5 * tol, x0=x0)
    gx, gy = ops.gradient(phi, grid)
    u = u_star - gx
    v = v_star - gy
    res = float(np.max(np.abs(ops.divergence(u, v, grid))))
    if res > tol:
        raise ProjectionError(f"projected divergence {res:.3e} exceeds tol {tol:g}")
    return u, v, phi
