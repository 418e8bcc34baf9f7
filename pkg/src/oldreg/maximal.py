"""Discrete parabolic maximal operators, level sets and a truncation surrogate.

Cylinder family
---------------
Cylinders are grid aligned and centred on grid points ``(it, ix, iy)``.
A cylinder of spatial index radius ``rho`` covers ``ix - rho .. ix + rho`` and
``iy - rho .. iy + rho``; its temporal half-width in steps is

    tau(rho) = floor(alpha * (rho * h)**2 / dt + 1/2),   h = max(hx, hy),

so the temporal radius is ``alpha`` times the squared spatial radius, rounded
to the grid. Radii run over ``rho = 0`` (the single grid point) and the
dyadic values ``1, 2, 4, ...`` up to the first one reaching across the whole
grid. Cylinders are clipped to the sampled window and the mean is taken over
the grid points that remain.

By default the cylinder sums are accumulated in exact integer arithmetic and
each mean is rounded once, so the result does not depend on summation order.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage


@dataclass
class SpaceTimeField:
    """Samples ``data[it, ix, iy, ...]`` on a uniform space-time grid."""

    data: np.ndarray
    dt: float
    hx: float
    hy: float
    origin: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float)
        if self.data.ndim < 3:
            raise ValueError("space-time data needs at least three axes (t, x, y)")
        if not (self.dt > 0 and self.hx > 0 and self.hy > 0):
            raise ValueError("space-time spacings must be positive")

    @property
    def shape(self):
        return self.data.shape[:3]

    @property
    def cell_measure(self) -> float:
        return self.dt * self.hx * self.hy

    def with_data(self, data) -> "SpaceTimeField":
        return SpaceTimeField(data, self.dt, self.hx, self.hy, self.origin)

    def magnitude(self) -> np.ndarray:
        """Pointwise Euclidean norm over trailing component axes."""
        if self.data.ndim == 3:
            return np.abs(self.data)
        axes = tuple(range(3, self.data.ndim))
        return np.sqrt(np.sum(self.data * self.data, axis=axes))


@dataclass(frozen=True)
class ParabolicCylinder:
    """``I x B`` with spatial radius ``r_b`` and temporal radius ``alpha * r_b**2``."""

    center: tuple[float, float, float]
    r_b: float
    alpha: float

    @property
    def r_i(self) -> float:
        return self.alpha * self.r_b**2

    def contains(self, t: float, x: float, y: float) -> bool:
        ct, cx, cy = self.center
        return abs(t - ct) <= self.r_i and abs(x - cx) <= self.r_b and abs(y - cy) <= self.r_b


def cylinder_radii(shape, dt: float, hx: float, hy: float, alpha: float) -> list[tuple[int, int]]:
    """``(rho, tau)`` pairs of the cylinder family for a grid of ``shape``."""
    nt, nx, ny = shape
    h = max(hx, hy)
    span = max(nx, ny) - 1
    rhos = [0]
    r = 1
    while True:
        rhos.append(r)
        if r >= span:
            break
        r *= 2
    out = []
    for rho in rhos:
        tau = int(np.floor(alpha * (rho * h) ** 2 / dt + 0.5))
        out.append((rho, min(tau, nt - 1)))
    return out


def grid_cylinder(f: SpaceTimeField, center: tuple[int, int, int], rho: int, alpha: float) -> ParabolicCylinder:
    """The continuous cylinder approximated by the grid cylinder of radius ``rho``.

    Its grid half-width in time is ``tau(rho)``, the rounded ``r_i / dt``.
    """
    it, ix, iy = center
    t0, x0, y0 = f.origin
    return ParabolicCylinder((t0 + it * f.dt, x0 + ix * f.hx, y0 + iy * f.hy), rho * max(f.hx, f.hy), alpha)


def _to_exact_ints(a: np.ndarray, power: int = 1):
    """Exact integers ``n`` and an exponent ``e`` with ``a**power == n * 2**e``."""
    nz = a[a != 0]
    if nz.size == 0:
        return None, 0
    mant, expo = np.frexp(a)
    ints = np.ldexp(mant, 53).astype(np.int64)
    e = expo.astype(np.int64) - 53
    emin = int(e[a != 0].min())
    # Zeros carry an arbitrary exponent; their integer is 0 anyway.
    shift = np.where(a != 0, e - emin, 0).astype(object)
    exact = ints.astype(object) << shift
    if power != 1:
        exact = exact**power
    return exact, emin * power


def _box_sums(prefix: np.ndarray, rho: int, tau: int):
    """Sums over clipped boxes of half-widths ``(tau, rho, rho)`` at every centre."""
    nt, nx, ny = (s - 1 for s in prefix.shape)
    it = np.arange(nt)
    ix = np.arange(nx)
    iy = np.arange(ny)
    t0 = np.clip(it - tau, 0, nt)[:, None, None]
    t1 = np.clip(it + tau + 1, 0, nt)[:, None, None]
    x0 = np.clip(ix - rho, 0, nx)[None, :, None]
    x1 = np.clip(ix + rho + 1, 0, nx)[None, :, None]
    y0 = np.clip(iy - rho, 0, ny)[None, None, :]
    y1 = np.clip(iy + rho + 1, 0, ny)[None, None, :]
    s = (
        prefix[t1, x1, y1]
        - prefix[t0, x1, y1]
        - prefix[t1, x0, y1]
        - prefix[t1, x1, y0]
        + prefix[t0, x0, y1]
        + prefix[t0, x1, y0]
        + prefix[t1, x0, y0]
        - prefix[t0, x0, y0]
    )
    count = (t1 - t0) * (x1 - x0) * (y1 - y0)
    return s, count


def _prefix(a: np.ndarray) -> np.ndarray:
    out = np.zeros(tuple(s + 1 for s in a.shape), dtype=a.dtype)
    out[1:, 1:, 1:] = a
    for ax in range(3):
        out = np.cumsum(out, axis=ax, dtype=a.dtype)
    return out


def cylinder_means(values: np.ndarray, rho: int, tau: int, exact: bool = True, power: int = 1) -> np.ndarray:
    """Mean of ``values**power`` over the clipped cylinder centred at each grid point.

    In exact mode the sum is accumulated in integers and rounded once.
    """
    if not exact:
        s, count = _box_sums(_prefix(values.astype(float) ** power), rho, tau)
        return s / count
    ints, emin = _to_exact_ints(values, power)
    if ints is None:
        return np.zeros(values.shape)
    s, count = _box_sums(_prefix(ints), rho, tau)
    if emin >= 0:
        num = s * (1 << emin)
        den = count.astype(object)
    else:
        num = s
        den = count.astype(object) * (1 << -emin)
    return (num / den).astype(float)


def parabolic_maximal(f: SpaceTimeField, alpha: float, s: float = 1.0, exact: bool = True) -> SpaceTimeField:
    """``(M^alpha |f|^s)^(1/s)`` over the documented cylinder family."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    if not s >= 1:
        raise ValueError("s must be >= 1")
    mag = f.magnitude()
    if not np.all(np.isfinite(mag)):
        raise ValueError("field must be finite")
    if float(s).is_integer():
        vals, power = mag, int(s)
    else:
        vals, power = mag**s, 1
    best = np.full(vals.shape, -np.inf)
    for rho, tau in cylinder_radii(f.shape, f.dt, f.hx, f.hy, alpha):
        means = cylinder_means(vals, rho, tau, exact, power)
        # A point lies in every cylinder whose centre is within the half-widths.
        spread = ndimage.maximum_filter(means, size=(2 * tau + 1, 2 * rho + 1, 2 * rho + 1), mode="nearest")
        np.maximum(best, spread, out=best)
    out = best if s == 1 else best ** (1.0 / s)
    return f.with_data(out)


def superlevel_measure(g: SpaceTimeField, lam: float) -> float:
    """Space-time measure of ``{g > lam}``."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    return g.cell_measure * int(np.count_nonzero(g.magnitude() > lam))


@dataclass
class LevelSetReport:
    lambda_values: list[float]
    measures: list[float]
    weak_constants: list[float]
    norm_p: float
    p: float
    alpha: float

    @property
    def constant(self) -> float:
        return max(self.weak_constants, default=0.0)

    def as_csv(self) -> str:
        lines = ["lambda,measure,weak_constant"]
        for lam, meas, c in zip(self.lambda_values, self.measures, self.weak_constants):
            lines.append(f"{lam:.17g},{meas:.17g},{c:.17g}")
        return "\n".join(lines) + "\n"


def weak_bound_check(f: SpaceTimeField, p: float, alpha: float, lambda_values, exact: bool = True, maximal=None) -> LevelSetReport:
    """Ratios ``lam**p |{M^alpha f > lam}| / ||f||_p**p`` along a level sweep.

    ``maximal`` may pass a precomputed ``M^alpha f`` to reuse across sweeps.
    """
    lams = [float(x) for x in lambda_values]
    if any(x <= 0 for x in lams) or any(b <= a for a, b in zip(lams[:-1], lams[1:])):
        raise ValueError("lambda_values must be positive and increasing")
    if not p > 1:
        raise ValueError("p must be > 1")
    mf = maximal if maximal is not None else parabolic_maximal(f, alpha, 1.0, exact)
    norm = f.cell_measure * float(np.sum(f.magnitude() ** p))
    measures = [superlevel_measure(mf, lam) for lam in lams]
    if norm == 0:
        ratios = [0.0] * len(lams)
    else:
        ratios = [lam**p * meas / norm for lam, meas in zip(lams, measures)]
    return LevelSetReport(lams, measures, ratios, norm, p, alpha)


def _edge_slopes(data: np.ndarray, f: SpaceTimeField, alpha: float):
    """Parabolic difference quotients along the t, x and y grid edges."""
    tdist = np.sqrt(f.dt / alpha)

    def mag(d):
        if d.ndim == 3:
            return np.abs(d)
        return np.sqrt(np.sum(d * d, axis=tuple(range(3, d.ndim))))

    st = mag(np.diff(data, axis=0)) / tdist
    sx = mag(np.diff(data, axis=1)) / f.hx
    sy = mag(np.diff(data, axis=2)) / f.hy
    return st, sx, sy


def parabolic_lipschitz(f: SpaceTimeField, alpha: float, data=None) -> float:
    """Largest difference quotient over adjacent grid points.

    Distances are ``hx``, ``hy`` for spatial neighbours and
    ``sqrt(dt / alpha)`` for temporal ones.
    """
    data = f.data if data is None else data
    return max(float(np.max(s, initial=0.0)) for s in _edge_slopes(data, f, alpha))


def local_slope(f: SpaceTimeField, alpha: float) -> np.ndarray:
    """At each grid point, the largest slope of its incident edges."""
    st, sx, sy = _edge_slopes(f.data, f, alpha)
    g = np.zeros(f.shape)
    for s, ax in ((st, 0), (sx, 1), (sy, 2)):
        lo = [slice(None)] * 3
        hi = [slice(None)] * 3
        lo[ax] = slice(None, -1)
        hi[ax] = slice(1, None)
        g[tuple(lo)] = np.maximum(g[tuple(lo)], s)
        g[tuple(hi)] = np.maximum(g[tuple(hi)], s)
    return g


@dataclass
class TruncationResult:
    field: SpaceTimeField
    bad_set: np.ndarray
    bad_measure: float
    lipschitz_constant: float


def clamp_truncate(u: SpaceTimeField, lam: float, alpha: float, exact: bool = True) -> TruncationResult:
    """Zero ``u`` where the maximal slope exceeds ``lam``, then smooth the seam.

    The bad set is ``{M^alpha(local_slope(u)) > lam}``. Bad points are set to
    zero; bad points with a good neighbour are then replaced once by the mean
    of their in-grid six-neighbourhood (including themselves). Points outside
    the bad set are never modified.
    """
    if not (lam > 0 and alpha > 0):
        raise ValueError("lambda and alpha must be positive")
    if not np.all(np.isfinite(u.data)):
        raise ValueError("field must be finite")
    slope = u.with_data(local_slope(u, alpha))
    bad = parabolic_maximal(slope, alpha, 1.0, exact).data > lam
    out = u.data.copy()
    out[bad] = 0.0

    good = ~bad
    touches_good = np.zeros_like(bad)
    total = np.zeros_like(out)
    count = np.zeros(bad.shape)
    for ax in range(3):
        for shift in (1, -1):
            src = [slice(None)] * 3
            dst = [slice(None)] * 3
            if shift == 1:
                src[ax], dst[ax] = slice(1, None), slice(None, -1)
            else:
                src[ax], dst[ax] = slice(None, -1), slice(1, None)
            src, dst = tuple(src), tuple(dst)
            touches_good[dst] |= good[src]
            total[dst] += out[src]
            count[dst] += 1
    seam = bad & touches_good
    if seam.any():
        extra = (slice(None),) * 3 + (None,) * (out.ndim - 3)
        smoothed = (total + out) / (count + 1)[extra]
        out[seam] = smoothed[seam]
    return TruncationResult(
        field=u.with_data(out),
        bad_set=bad,
        bad_measure=u.cell_measure * int(np.count_nonzero(bad)),
        lipschitz_constant=parabolic_lipschitz(u, alpha, out),
    )
