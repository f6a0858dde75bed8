"""Correlated Wiener field increments and compensated Poisson jumps.

The Wiener random field W(x, t) has covariance E[W(x,t)W(y,s)] =
min(t,s) q(x,y); sampling reduces to factoring the node covariance matrix
Q_ij = q(x_i, x_j) once and drawing F @ xi * sqrt(dt).  Jumps come from a
finite-activity truncation of the intensity measure nu(dz) on a mark window
[z_min, z_max]: a Poisson number of marks per step, each drawn by inverse
CDF.  The compensator integral against nu is closed-form for z-linear jump
coefficients and Gauss-Legendre quadrature otherwise.

Per-path random streams are derived from (master seed, stream index) through
numpy's SeedSequence spawning, which gives reproducible, statistically
independent generators without coordination between paths.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .elliptic import Grid
from .errors import CovarianceError, JumpMeasureError

__all__ = [
    "RngStream",
    "CovarianceKernel",
    "JumpMeasure",
    "factor_covariance",
    "sample_wiener_increment",
    "sample_jumps",
    "compensator_field",
    "kernel_exp_dot",
    "kernel_exp_dot_radial",
    "kernel_gaussian",
    "kernel_constant",
    "kernel_brownian_min",
]


class RngStream:
    """Reproducible random stream keyed by (master seed, stream index)."""

    def __init__(self, master_seed: int, index: int = 0):
        self.master_seed = int(master_seed)
        self.index = int(index)
        seq = np.random.SeedSequence(entropy=self.master_seed, spawn_key=(self.index,))
        self.generator = np.random.Generator(np.random.PCG64(seq))

    def standard_normal(self, n: int) -> np.ndarray:
        return self.generator.standard_normal(n)

    def poisson(self, lam: float) -> int:
        return int(self.generator.poisson(lam))

    def uniform(self, n: int) -> np.ndarray:
        return self.generator.uniform(size=n)


# --- spatial covariance ------------------------------------------------------

def kernel_exp_dot(b0: float, rho: float) -> Callable:
    """q(x, y) = b0 * exp(-rho * x.y).

    On 1-d grids the dot product is the plain product of the coordinates.
    Note that for rho > 0 this kernel is indefinite on any grid with two
    distinct nodes (the 2x2 minors are negative), so factorization will
    reject it; see `kernel_exp_dot_radial` for the positive-semidefinite
    spherical reduction used on ball domains.
    """

    def q(x, y):
        return b0 * np.exp(-rho * np.asarray(x, dtype=float) * np.asarray(y, dtype=float))

    q.pairwise = lambda pts: b0 * np.exp(-rho * (pts @ pts.T))  # vector-valued points
    q.bound = abs(b0) * max(1.0, np.exp(-rho) if rho < 0 else 1.0)
    return q


def kernel_exp_dot_radial(b0: float, rho: float, radius: float) -> Callable:
    """Spherical average of b0 * exp(-rho x.y) over directions on a 3-d ball.

    Averaging the kernel over both unit spheres gives
    q(r, s) = b0 * sinh(rho r s) / (rho r s), the covariance of the radially
    averaged field.  Its power series has nonnegative coefficients in
    (r s)^(2k), so the sampled matrix is positive semidefinite, and
    q >= b0 >= b0 * exp(-rho R^2) keeps the declared lower bound valid.
    """

    def q(r, s):
        z = np.atleast_1d(
            rho * np.asarray(r, dtype=float) * np.asarray(s, dtype=float)
        ).astype(float)
        out = np.ones_like(z)
        big = np.abs(z) >= 1e-8
        out[big] = np.sinh(z[big]) / z[big]
        out[~big] += z[~big] ** 2 / 6.0
        out *= b0
        return out if out.size > 1 else float(out[0])

    zmax = abs(rho) * radius * radius
    q.bound = abs(b0) * (np.sinh(zmax) / zmax if zmax > 1e-8 else 1.0)
    return q


def kernel_gaussian(b0: float, rho: float) -> Callable:
    """q(x, y) = b0 * exp(-rho |x - y|^2), positive semidefinite on any grid."""

    def q(x, y):
        d = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
        return b0 * np.exp(-rho * d * d)

    def pairwise(pts):
        d2 = np.sum((pts[:, None, :] - pts[None, :, :]) ** 2, axis=-1)
        return b0 * np.exp(-rho * d2)

    q.pairwise = pairwise
    q.bound = abs(b0)
    return q


def kernel_constant(q0: float) -> Callable:
    def q(x, y):
        shape = np.broadcast_shapes(np.shape(x), np.shape(y))
        return float(q0) * np.ones(shape) if shape else float(q0)

    q.pairwise = lambda pts: float(q0) * np.ones((pts.shape[0], pts.shape[0]))
    q.bound = abs(q0)
    return q


def kernel_brownian_min() -> Callable:
    """q(x, y) = min(x, y) on a 1-d coordinate (Brownian motion kernel)."""

    def q(x, y):
        return np.minimum(x, y)

    q.bound = None
    return q


@dataclass
class CovarianceKernel:
    """Node covariance matrix of the Wiener field together with its factor.

    `factor` satisfies factor @ factor.T == Q to within 1e-8 * max|Q|;
    `q0` bounds |q| on the sampled nodes and `trace` is the weighted
    diagonal sum (the discrete trace of the covariance operator).
    """

    Q: np.ndarray
    factor: np.ndarray
    eigenvalues: np.ndarray
    q0: float
    trace: float

    @property
    def n(self) -> int:
        return self.Q.shape[0]


def _pairwise(kernel: Callable, pts: np.ndarray) -> np.ndarray:
    if pts.ndim == 2:
        vectorized = getattr(kernel, "pairwise", None)
        if vectorized is not None:
            return np.asarray(vectorized(pts), dtype=float)
        return np.array([[float(kernel(xi, xj)) for xj in pts] for xi in pts])
    try:
        Q = np.asarray(kernel(pts[:, None], pts[None, :]), dtype=float)
        if Q.shape == (pts.size, pts.size):
            return Q
    except Exception:
        pass
    return np.array([[float(kernel(xi, xj)) for xj in pts] for xi in pts])


def factor_covariance(
    kernel: Callable, grid: Grid, q0: float | None = None
) -> CovarianceKernel:
    """Sample q on the grid nodes and factor the matrix.

    Uses a symmetric eigendecomposition; eigenvalues below
    -1e-10 * lambda_max are rejected as substantially indefinite, tiny
    negatives are clamped to zero before forming F = V sqrt(diag).
    """
    pts = grid.points
    Q = _pairwise(kernel, pts)
    asym = np.abs(Q - Q.T).max()
    if asym > 1e-12 * max(1.0, np.abs(Q).max()):
        raise CovarianceError(f"kernel not symmetric on sampled nodes (max asymmetry {asym:g})")
    Q = (Q + Q.T) / 2.0
    lam, V = np.linalg.eigh(Q)
    lam_max = float(lam.max()) if lam.size else 0.0
    floor = -1e-10 * max(lam_max, 1e-300)
    if lam.min() < floor:
        raise CovarianceError(
            f"covariance matrix indefinite: most negative eigenvalue {lam.min():g} "
            f"(largest {lam_max:g})"
        )
    lam = np.clip(lam, 0.0, None)
    F = V * np.sqrt(lam)
    bound = q0 if q0 is not None else getattr(kernel, "bound", None)
    max_abs = float(np.abs(Q).max())
    if bound is None:
        bound = max_abs
    elif max_abs > bound * (1 + 1e-12):
        raise CovarianceError(f"sampled |q| = {max_abs:g} exceeds declared bound {bound:g}")
    trace = float(grid.weights @ np.diagonal(Q))
    if not np.isfinite(trace):
        raise CovarianceError("weighted trace of the covariance is not finite")
    return CovarianceKernel(Q, F, lam, float(bound), trace)


def sample_wiener_increment(cov: CovarianceKernel, dt: float, rng: RngStream) -> np.ndarray:
    """One increment of the Wiener field over a step of length dt.

    Mean zero with covariance dt * Q; dt = 0 returns the zero field.
    """
    if dt < 0:
        raise ValueError("dt must be nonnegative")
    if dt == 0.0:
        return np.zeros(cov.n)
    xi = rng.standard_normal(cov.n)
    return np.sqrt(dt) * (cov.factor @ xi)


# --- jump measure ------------------------------------------------------------

_GL_NODES_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _gauss_legendre(a: float, b: float, n: int = 256) -> tuple[np.ndarray, np.ndarray]:
    if n not in _GL_NODES_CACHE:
        _GL_NODES_CACHE[n] = np.polynomial.legendre.leggauss(n)
    x, w = _GL_NODES_CACHE[n]
    mid, half = (a + b) / 2.0, (b - a) / 2.0
    return mid + half * x, half * w


@dataclass
class JumpMeasure:
    """Finite-activity truncation of the mark intensity measure on (0, inf).

    `density` is the Lebesgue density of nu restricted to [z_min, z_max];
    `rate` = nu([z_min, z_max]) and m1/m2 are the first two moments of z
    over the window.  Marks are sampled by inverse CDF on a fine table.
    """

    density: Callable[[np.ndarray], np.ndarray]
    z_min: float
    z_max: float
    rate: float
    m1: float
    m2: float
    _cdf_grid: np.ndarray = field(repr=False, default=None)
    _cdf_vals: np.ndarray = field(repr=False, default=None)

    @staticmethod
    def from_density(
        density: Callable,
        z_min: float = 0.0,
        z_max: float | None = None,
        table_size: int = 4096,
    ) -> "JumpMeasure":
        if z_max is None:
            z_max = _auto_window_upper(density, max(z_min, 1e-12))
        if not z_max > z_min:
            raise JumpMeasureError(f"empty mark window [{z_min}, {z_max}]")
        z, w = _gauss_legendre(z_min, z_max)
        dens = np.asarray(density(z), dtype=float)
        if np.any(dens < 0):
            raise JumpMeasureError("density is negative on the mark window")
        rate = float(w @ dens)
        m1 = float(w @ (z * dens))
        m2 = float(w @ (z**2 * dens))
        if not (np.isfinite(rate) and np.isfinite(m2)):
            raise JumpMeasureError("non-finite rate or second moment on the window")
        jm = JumpMeasure(density, float(z_min), float(z_max), rate, m1, m2)
        if rate > 0:
            grid = np.linspace(z_min, z_max, table_size)
            pdf = np.asarray(density(grid), dtype=float)
            cdf = np.concatenate(([0.0], np.cumsum((pdf[1:] + pdf[:-1]) / 2 * np.diff(grid))))
            jm._cdf_grid = grid
            jm._cdf_vals = cdf / cdf[-1]
        return jm

    @staticmethod
    def exponential(
        weight: float = 1.0,
        decay: float = 1.0,
        z_min: float = 0.0,
        z_max: float | None = None,
    ) -> "JumpMeasure":
        """nu(dz) = weight * exp(-decay z) dz truncated to the window."""
        if decay <= 0 or weight < 0:
            raise JumpMeasureError("exponential family needs decay > 0 and weight >= 0")
        return JumpMeasure.from_density(lambda z: weight * np.exp(-decay * z), z_min, z_max)

    def sample_marks(self, u: np.ndarray) -> np.ndarray:
        return np.interp(u, self._cdf_vals, self._cdf_grid)


def _auto_window_upper(density: Callable, z_lo: float, frac: float = 1e-6) -> float:
    """Smallest power-of-two window that captures all but `frac` of m2."""
    hi = max(1.0, 2 * z_lo)
    for _ in range(60):
        z, w = _gauss_legendre(z_lo, hi)
        m2 = float(w @ (z**2 * np.asarray(density(z), dtype=float)))
        z2, w2 = _gauss_legendre(hi, 2 * hi)
        tail = float(w2 @ (z2**2 * np.asarray(density(z2), dtype=float)))
        if m2 > 0 and tail <= 0.5 * frac * m2:
            return 2 * hi
        hi *= 2
    raise JumpMeasureError("could not find a window capturing the second moment")


def sample_jumps(jm: JumpMeasure, dt: float, rng: RngStream) -> np.ndarray:
    """Marks landing in a step of length dt: Poisson(rate*dt) many, iid nu/rate."""
    if dt < 0:
        raise ValueError("dt must be nonnegative")
    lam = jm.rate * dt
    if lam == 0.0:
        return np.empty(0)
    count = rng.poisson(lam)
    if count == 0:
        return np.empty(0)
    return jm.sample_marks(rng.uniform(count))


def compensator_field(
    jm: JumpMeasure,
    coeff,
    u: np.ndarray,
    t: float = 0.0,
    x: np.ndarray | None = None,
    n_quad: int = 256,
) -> np.ndarray:
    """Nodewise integral of the jump coefficient against nu over the window.

    Coefficients that declare a z-linear structure (phi = c0 z u^n) use the
    closed form c0 * m1 * u^n; anything else falls back to Gauss-Legendre
    quadrature in z.  Non-finite integrand values abort with the offending
    (node, z) pair.
    """
    closed = getattr(coeff, "z_moment_profile", None)
    if closed is not None:
        return jm.m1 * closed(u, x, t)
    z, w = _gauss_legendre(jm.z_min, jm.z_max, n_quad)
    dens = np.asarray(jm.density(z), dtype=float)
    out = np.zeros_like(np.asarray(u, dtype=float))
    for zk, wk, dk in zip(z, w, dens):
        vals = np.asarray(coeff.evaluate(u, zk, x, t), dtype=float)
        if not np.all(np.isfinite(vals)):
            node = int(np.flatnonzero(~np.isfinite(vals))[0])
            raise JumpMeasureError(
                f"non-finite jump integrand at node {node}, z = {zk:g}"
            )
        out += wk * dk * vals
    return out
