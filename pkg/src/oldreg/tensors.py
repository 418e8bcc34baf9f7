"""Symmetric-tensor algebra for the velocity gradient and the stress coupling.

Symmetric tensors are stored in upper-triangular order along the last axis:

    d = 2:  [xx, xy, yy]
    d = 3:  [xx, xy, xz, yy, yz, zz]

Full tensors carry two trailing axes of size ``d``. Every kernel broadcasts
over leading axes, so a whole grid of cells can be processed in one call.
"""
from __future__ import annotations

import numpy as np

_UPPER = {
    2: ((0, 0), (0, 1), (1, 1)),
    3: ((0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)),
}
_NSYM = {2: 3, 3: 6}
_DIM_OF_NSYM = {3: 2, 6: 3}


def sym_size(d: int) -> int:
    """Number of stored entries of a symmetric ``d x d`` tensor."""
    try:
        return _NSYM[d]
    except KeyError:
        raise ValueError(f"dimension must be 2 or 3, got {d}") from None


def sym_dim(sym: np.ndarray) -> int:
    try:
        return _DIM_OF_NSYM[np.shape(sym)[-1]]
    except KeyError:
        raise ValueError(
            f"last axis of a symmetric tensor must have length 3 or 6, got {np.shape(sym)[-1]}"
        ) from None


def sym_weights(d: int) -> np.ndarray:
    """Frobenius weights of the stored entries (off-diagonals count twice)."""
    return np.array([1.0 if i == j else 2.0 for i, j in _UPPER[d]])


def to_full(sym: np.ndarray) -> np.ndarray:
    sym = np.asarray(sym, dtype=float)
    d = sym_dim(sym)
    full = np.empty(sym.shape[:-1] + (d, d))
    for k, (i, j) in enumerate(_UPPER[d]):
        full[..., i, j] = sym[..., k]
        full[..., j, i] = sym[..., k]
    return full


def from_full(full: np.ndarray) -> np.ndarray:
    """Upper-triangular entries of ``full``; the lower triangle is ignored."""
    full = np.asarray(full, dtype=float)
    d = full.shape[-1]
    return np.stack([full[..., i, j] for i, j in _UPPER[d]], axis=-1)


def identity(d: int) -> np.ndarray:
    return np.array([1.0 if i == j else 0.0 for i, j in _UPPER[d]])


def sym_dot(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Frobenius contraction ``a : b`` of two symmetric tensors."""
    a = np.asarray(a, dtype=float)
    w = sym_weights(sym_dim(a))
    return np.sum(w * a * np.asarray(b, dtype=float), axis=-1)


def sym_norm_sq(a: np.ndarray) -> np.ndarray:
    return sym_dot(a, a)


def full_dot(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.sum(np.asarray(a) * np.asarray(b), axis=(-2, -1))


def sym_part(grad: np.ndarray) -> np.ndarray:
    """Symmetric part ``(G + G^T) / 2`` in symmetric storage."""
    grad = np.asarray(grad, dtype=float)
    d = grad.shape[-1]
    return np.stack(
        [0.5 * (grad[..., i, j] + grad[..., j, i]) for i, j in _UPPER[d]], axis=-1
    )


def skew_part(grad: np.ndarray) -> np.ndarray:
    """Skew-symmetric part ``(G - G^T) / 2`` as a full tensor."""
    grad = np.asarray(grad, dtype=float)
    return 0.5 * (grad - np.swapaxes(grad, -1, -2))


def coupling_b(grad_v: np.ndarray, stress: np.ndarray, a: float) -> np.ndarray:
    """Objective-derivative coupling ``W T - T W + a (D T + T D)``.

    ``grad_v[..., i, j]`` is ``d v_i / d x_j``. The result is assembled
    directly in symmetric storage: ``W T - T W`` and ``D T + T D`` are both
    symmetric whenever ``T`` is.
    """
    t = to_full(stress)
    w = skew_part(grad_v)
    dmat = to_full(sym_part(grad_v))
    wt = w @ t
    dt = dmat @ t
    # (W T)^T = -T W and (D T)^T = T D, so only one product is needed each.
    return sym_part(2.0 * wt + 2.0 * a * dt)


def coupling_a(stress: np.ndarray, psi: np.ndarray, a: float) -> np.ndarray:
    """Dual coupling ``psi T - T psi + a (T psi + psi T)`` as a full tensor.

    Satisfies ``grad_v : coupling_a(T, psi, a) == coupling_b(grad_v, T, a) : psi``
    for every velocity gradient and symmetric ``T``, ``psi``.
    """
    t = to_full(stress)
    s = to_full(psi)
    tp = t @ s
    pt = s @ t
    return pt - tp + a * (tp + pt)
