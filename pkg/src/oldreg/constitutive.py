"""Carreau-type viscosity and stress-diffusion laws and sampling validators.

Both laws have the form ``flux(X) = c1 * (kappa**2 + |X|**2) ** ((r - 2) / 2) * X``
with ``r`` the growth exponent. ``kappa > 0`` keeps the coefficient finite at
``X = 0`` when ``r < 2``.

Structural constants
--------------------
For ``s = |X|`` and ``g(s) = c1 * (kappa**2 + s**2) ** ((r - 2) / 2)`` the
validator checks

    coercivity   g(s) s**2 >= c s**r - phi_coerce
    growth       g(s) s    <= C s**(r - 1) + phi_growth
    monotonicity (flux(X1) - flux(X2)) : (X1 - X2) > 0   for X1 != X2

with constants chosen as follows (``beta = 2 ** ((r - 2) / 2)``):

* ``r >= 2``: ``kappa**2 + s**2 >= s**2`` gives ``c = c1`` and
  ``phi_coerce = 0``. For growth, ``kappa**2 + s**2 <= 2 max(kappa, s)**2``
  gives ``C = beta c1`` and ``phi_growth = beta c1 kappa**(r - 1)``.
* ``r < 2``: ``kappa**2 + s**2 <= s**2`` fails only for ``s < kappa``; on
  ``s >= kappa`` the bound ``kappa**2 + s**2 <= 2 s**2`` gives ``c = beta c1``
  and for ``s < kappa`` the right-hand side is negative once
  ``phi_coerce = c kappa**r``. Growth holds with ``C = c1`` and
  ``phi_growth = 0`` because the coefficient exponent is non-positive.

The ``phi`` terms are spatially constant, hence integrable on a bounded
space-time cylinder.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Protocol

import numpy as np

from oldreg import tensors

SAMPLE_BOUND = 10.0
# Relative slack for inequalities that hold with equality (e.g. r = 2).
REL_SLACK = 1e-12


class Law(Protocol):
    exponent: float

    def coefficient(self, norm_sq: np.ndarray) -> np.ndarray: ...

    def constants(self) -> tuple[float, float, float, float]: ...


def _carreau_coefficient(c1, kappa, r, norm_sq):
    return c1 * (kappa * kappa + norm_sq) ** ((r - 2.0) / 2.0)


def _carreau_constants(c1, kappa, r):
    beta = 2.0 ** ((r - 2.0) / 2.0)
    if r >= 2.0:
        return c1, 0.0, beta * c1, beta * c1 * kappa ** (r - 1.0)
    c = beta * c1
    return c, c * kappa**r, c1, 0.0


@dataclass(frozen=True)
class ViscosityLaw:
    """``mu(D) = mu1 * (kappa**2 + |D|**2) ** ((p - 2) / 2)``."""

    mu1: float = 1.0
    kappa: float = 1.0
    p: float = 2.0

    def __post_init__(self):
        if not (self.mu1 > 0 and self.kappa > 0 and self.p > 1):
            raise ValueError(
                f"viscosity law needs mu1 > 0, kappa > 0, p > 1 (got {self.mu1}, {self.kappa}, {self.p})"
            )

    @property
    def exponent(self) -> float:
        return self.p

    def coefficient(self, norm_sq):
        return _carreau_coefficient(self.mu1, self.kappa, self.p, norm_sq)

    def tangent_bound(self, norm_sq):
        """Upper bound of the differential viscosity at ``|D|**2 = norm_sq``."""
        return max(1.0, self.p - 1.0) * self.coefficient(norm_sq)

    def constants(self):
        return _carreau_constants(self.mu1, self.kappa, self.p)


@dataclass(frozen=True)
class DiffusionLaw:
    """``gamma(G) = gamma1 * (kappa_t**2 + |G|**2) ** ((q - 2) / 2)``."""

    gamma1: float = 1.0
    kappa_t: float = 1.0
    q: float = 4.0

    def __post_init__(self):
        if not (self.gamma1 > 0 and self.kappa_t >= 0 and self.q > 1):
            raise ValueError(
                f"diffusion law needs gamma1 > 0, kappa_t >= 0, q > 1 (got {self.gamma1}, {self.kappa_t}, {self.q})"
            )
        if self.kappa_t == 0 and self.q < 2:
            raise ValueError("kappa_t = 0 is only allowed for q >= 2")

    @property
    def exponent(self) -> float:
        return self.q

    def coefficient(self, norm_sq):
        return _carreau_coefficient(self.gamma1, self.kappa_t, self.q, norm_sq)

    def tangent_bound(self, norm_sq):
        return max(1.0, self.q - 1.0) * self.coefficient(norm_sq)

    def constants(self):
        return _carreau_constants(self.gamma1, self.kappa_t, self.q)


@dataclass(frozen=True)
class GenericLaw:
    """User-supplied scalar coefficient ``g(|X|**2)`` with its claimed constants.

    ``constants`` is ``(c_coercive, phi_coercive, c_growth, phi_growth)``.
    """

    coefficient_fn: Callable[[np.ndarray], np.ndarray]
    exponent: float
    claimed: tuple[float, float, float, float]

    def coefficient(self, norm_sq):
        return np.asarray(self.coefficient_fn(norm_sq), dtype=float)

    def constants(self):
        return self.claimed


def viscous_stress(D: np.ndarray, law: Law) -> np.ndarray:
    """``mu(D) D`` for symmetric-storage ``D``."""
    D = np.asarray(D, dtype=float)
    mu = law.coefficient(tensors.sym_norm_sq(D))
    return mu[..., None] * D


def diffusive_flux(grad_t: np.ndarray, law: Law) -> np.ndarray:
    """``gamma(grad T) grad T`` for a gradient with three trailing axes."""
    grad_t = np.asarray(grad_t, dtype=float)
    norm_sq = np.sum(grad_t * grad_t, axis=(-3, -2, -1))
    return law.coefficient(norm_sq)[..., None, None, None] * grad_t


@dataclass
class AssumptionReport:
    kind: str
    exponent: float
    samples: int
    pairs_checked: int
    pairs_skipped: int
    min_monotonicity: float
    coercivity_constant: float
    coercivity_phi: float
    growth_constant: float
    growth_phi: float
    coercivity_violations: int
    growth_violations: int
    monotonicity_violations: int

    @property
    def violations(self) -> int:
        return self.coercivity_violations + self.growth_violations + self.monotonicity_violations

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def as_text(self) -> str:
        rows = [
            ("kind", self.kind),
            ("exponent", repr(float(self.exponent))),
            ("samples", str(self.samples)),
            ("pairs_checked", str(self.pairs_checked)),
            ("pairs_skipped", str(self.pairs_skipped)),
            ("min_monotonicity", repr(float(self.min_monotonicity))),
            ("coercivity_constant", repr(float(self.coercivity_constant))),
            ("coercivity_phi", repr(float(self.coercivity_phi))),
            ("growth_constant", repr(float(self.growth_constant))),
            ("growth_phi", repr(float(self.growth_phi))),
            ("coercivity_violations", str(self.coercivity_violations)),
            ("growth_violations", str(self.growth_violations)),
            ("monotonicity_violations", str(self.monotonicity_violations)),
            ("violations", str(self.violations)),
            ("passed", "true" if self.passed else "false"),
        ]
        return "".join(f"{k} = {v}\n" for k, v in rows)


def _corner_cases(shape: tuple[int, ...], rng: np.random.Generator) -> np.ndarray:
    """Zero, tiny, unit-axis and large inputs of the given trailing shape."""
    size = int(np.prod(shape))
    cases = [np.zeros(size)]
    for scale in (1e-12, 1e-6, 1e-2, 1.0, SAMPLE_BOUND):
        for k in range(size):
            e = np.zeros(size)
            e[k] = scale
            cases.append(e)
            cases.append(-e)
        cases.append(scale * rng.uniform(-1.0, 1.0, size))
    return np.array(cases).reshape((-1,) + shape)


def _symmetrize_gradient(g: np.ndarray) -> np.ndarray:
    return 0.5 * (g + np.swapaxes(g, -3, -2))


def sample_inputs(kind: str, samples: int, seed: int, dim: int = 3) -> np.ndarray:
    """Sampling distribution of :func:`verify_assumptions`.

    Entries are i.i.d. uniform on ``[-10, 10]`` (symmetric tensors for the
    viscosity, gradients symmetric in their first two axes for the diffusion),
    followed by the deterministic corner cases of ``_corner_cases``.
    """
    rng = np.random.default_rng(seed)
    if kind == "viscosity":
        shape = (tensors.sym_size(dim),)
        bulk = rng.uniform(-SAMPLE_BOUND, SAMPLE_BOUND, (samples,) + shape)
        return np.concatenate([bulk, _corner_cases(shape, rng)])
    shape = (dim, dim, dim)
    bulk = _symmetrize_gradient(rng.uniform(-SAMPLE_BOUND, SAMPLE_BOUND, (samples,) + shape))
    corners = _symmetrize_gradient(_corner_cases(shape, rng))
    return np.concatenate([bulk, corners])


def verify_assumptions(
    law: Law,
    samples: int = 10_000,
    seed: int = 0,
    kind: str | None = None,
    dim: int = 3,
    extra_pairs: tuple[np.ndarray, np.ndarray] | None = None,
) -> AssumptionReport:
    """Sample the coercivity, growth and monotonicity conditions of ``law``.

    Each sampled input is paired with the next one in a random permutation,
    so ``samples`` pairs are tested. Pairs with identical members are skipped
    since strict monotonicity only concerns distinct inputs. ``extra_pairs``
    appends caller-supplied pairs ``(X1, X2)`` of matching shape.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    if kind is None:
        kind = "diffusion" if isinstance(law, DiffusionLaw) else "viscosity"
    x = sample_inputs(kind, samples, seed, dim)
    axes = tuple(range(1, x.ndim))
    r = float(law.exponent)
    c_co, phi_co, c_gr, phi_gr = law.constants()

    norm_sq = np.sum(x * x, axis=axes) if kind == "diffusion" else tensors.sym_norm_sq(x)
    s = np.sqrt(norm_sq)
    g = law.coefficient(norm_sq)

    lhs = g * norm_sq
    rhs = c_co * s**r - phi_co
    coerc_bad = int(np.sum(lhs < rhs - REL_SLACK * np.maximum(abs(lhs), abs(rhs))))

    lhs = g * s
    rhs = c_gr * s ** (r - 1.0) + phi_gr
    growth_bad = int(np.sum(lhs > rhs + REL_SLACK * np.maximum(abs(lhs), abs(rhs))))

    rng = np.random.default_rng(seed + 1)
    perm = rng.permutation(len(x))
    x1 = x
    x2 = x[perm]
    if extra_pairs is not None:
        x1 = np.concatenate([x1, np.asarray(extra_pairs[0], dtype=float)])
        x2 = np.concatenate([x2, np.asarray(extra_pairs[1], dtype=float)])

    def flux(z):
        return diffusive_flux(z, law) if kind == "diffusion" else viscous_stress(z, law)

    def dot(a, b):
        return np.sum(a * b, axis=axes) if kind == "diffusion" else tensors.sym_dot(a, b)

    diff = x1 - x2
    dist_sq = dot(diff, diff)
    distinct = np.any(diff != 0.0, axis=axes)
    pairing = dot(flux(x1) - flux(x2), diff)
    checked = pairing[distinct]
    mono_bad = int(np.sum(checked <= 0.0))
    normalized = checked / dist_sq[distinct]
    min_mono = float(np.min(normalized)) if normalized.size else float("nan")

    return AssumptionReport(
        kind=kind,
        exponent=r,
        samples=len(x),
        pairs_checked=int(np.sum(distinct)),
        pairs_skipped=int(np.sum(~distinct)),
        min_monotonicity=min_mono,
        coercivity_constant=float(c_co),
        coercivity_phi=float(phi_co),
        growth_constant=float(c_gr),
        growth_phi=float(phi_gr),
        coercivity_violations=coerc_bad,
        growth_violations=growth_bad,
        monotonicity_violations=mono_bad,
    )
