"""Spatial grids, divergence-form elliptic operators, and principal eigenpairs.

The domain D is one of: an interval (0, L), a d-dimensional box, or a ball in
R^3 reduced to its radial coordinate.  Fields live on interior grid nodes as
plain 1-D numpy arrays ("grid fields"); homogeneous Dirichlet values on the
boundary are implied and never stored.  Each grid carries quadrature weights
(one volume element per node, boundary half-cells absorbed into the adjacent
node) so that sum(weights) equals the measure of D exactly.

The elliptic operator A = sum_ij d_i(a_ij d_j .) is discretized in flux form.
For Cartesian domains the assembled matrix acts directly on node values.  For
the radial ball the operator is assembled for the transformed variable
v(r) = r * u(r), in which the radial part of the Laplacian becomes a plain
second derivative; the `EllipticOperator` keeps the diagonal change of
variables and exposes `apply`/`solve_shifted` in physical node values, so
callers never see the transform.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sps
import scipy.sparse.linalg as spla

from .errors import AssemblyError, EigenSolveError

__all__ = [
    "SpatialDomain",
    "Grid",
    "EllipticOperator",
    "EigenPair",
    "build_grid",
    "assemble_operator",
    "principal_eigenpair",
    "quadrature",
    "discrete_gradient",
    "lp_norm",
    "constant_coefficient",
]

DOMAIN_KINDS = ("interval", "box", "ball3d_radial")


@dataclass(frozen=True)
class SpatialDomain:
    """Bounded domain description: interval (0,L), box, or radial 3-d ball."""

    kind: str
    length: float = 0.0
    sides: tuple[float, ...] = ()
    radius: float = 0.0

    def __post_init__(self):
        if self.kind not in DOMAIN_KINDS:
            raise AssemblyError(f"unknown domain kind {self.kind!r}")
        if self.kind == "interval" and not self.length > 0:
            raise AssemblyError("interval length must be positive")
        if self.kind == "ball3d_radial" and not self.radius > 0:
            raise AssemblyError("ball radius must be positive")
        if self.kind == "box":
            if len(self.sides) < 1:
                raise AssemblyError("box needs at least one side length")
            if any(not s > 0 for s in self.sides):
                raise AssemblyError("box side lengths must be positive")

    @staticmethod
    def interval(length: float) -> "SpatialDomain":
        return SpatialDomain("interval", length=float(length))

    @staticmethod
    def box(sides: Sequence[float]) -> "SpatialDomain":
        return SpatialDomain("box", sides=tuple(float(s) for s in sides))

    @staticmethod
    def ball(radius: float) -> "SpatialDomain":
        return SpatialDomain("ball3d_radial", radius=float(radius))

    @property
    def dim(self) -> int:
        return len(self.sides) if self.kind == "box" else 1

    @property
    def measure(self) -> float:
        if self.kind == "interval":
            return self.length
        if self.kind == "box":
            return float(np.prod(self.sides))
        return 4.0 * np.pi * self.radius**3 / 3.0


@dataclass
class Grid:
    """Interior nodes of a uniform grid with per-node quadrature weights.

    `axes` holds the strictly increasing interior coordinates per axis,
    `points` the flattened node coordinates (shape (n,) for 1-d domains,
    (n, d) for boxes), and `weights` one positive volume element per node
    with sum(weights) == measure of D.
    """

    domain: SpatialDomain
    axes: list[np.ndarray]
    spacing: tuple[float, ...]
    points: np.ndarray
    weights: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.weights.size

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(len(ax) for ax in self.axes)

    @property
    def h(self) -> float:
        return self.spacing[0]

    def radial_coordinate(self) -> np.ndarray:
        """|x| per node (box: Euclidean norm, 1-d: the coordinate itself)."""
        if self.domain.kind == "box":
            return np.sqrt(np.sum(self.points**2, axis=1))
        return self.points


def _axis_cells(length: float, n: int) -> tuple[np.ndarray, float, np.ndarray]:
    """Interior nodes, spacing, and cell lengths on (0, length).

    Nodes sit at i*h, i = 1..n with h = length/(n+1).  Each node owns the
    cell [x - h/2, x + h/2]; the two boundary half-cells are absorbed into
    the first/last node so the cell lengths sum to `length` exactly.
    """
    h = length / (n + 1)
    nodes = h * np.arange(1, n + 1)
    cells = np.full(n, h)
    if n == 1:
        cells[0] = length
    else:
        cells[0] += h / 2
        cells[-1] += h / 2
    return nodes, h, cells


def build_grid(domain: SpatialDomain, n: int) -> Grid:
    """Uniform interior grid with n nodes per axis."""
    if n < 1:
        raise AssemblyError("need at least one interior node")
    if domain.kind == "interval":
        nodes, h, cells = _axis_cells(domain.length, n)
        return Grid(domain, [nodes], (h,), nodes, cells)
    if domain.kind == "ball3d_radial":
        nodes, h, _ = _axis_cells(domain.radius, n)
        # exact shell volumes; cell edges snap to 0 and R at the ends
        edges = np.concatenate(([0.0], nodes[:-1] + h / 2, [domain.radius]))
        weights = 4.0 * np.pi * (edges[1:] ** 3 - edges[:-1] ** 3) / 3.0
        return Grid(domain, [nodes], (h,), nodes, weights)
    axes, spacings, cell_1d = [], [], []
    for side in domain.sides:
        nodes, h, cells = _axis_cells(side, n)
        axes.append(nodes)
        spacings.append(h)
        cell_1d.append(cells)
    mesh = np.meshgrid(*axes, indexing="ij")
    points = np.stack([m.ravel() for m in mesh], axis=1)
    w = cell_1d[0]
    for c in cell_1d[1:]:
        w = np.multiply.outer(w, c)
    return Grid(domain, axes, tuple(spacings), points, w.ravel())


def constant_coefficient(c: float = 1.0) -> Callable[[np.ndarray], float]:
    """Isotropic constant coefficient a(x) = c."""

    def coeff(_x):
        return c

    return coeff


def _coeff_matrix(coeffs: Callable, x, dim: int) -> np.ndarray:
    """Evaluate the coefficient as a (dim, dim) array at one point."""
    val = np.asarray(coeffs(x), dtype=float)
    if val.ndim == 0:
        return np.eye(dim) * float(val)
    if val.shape != (dim, dim):
        raise AssemblyError(
            f"coefficient at x={x} has shape {val.shape}, expected scalar or {(dim, dim)}"
        )
    return val


def _coeff_scalar_on_axis(coeffs: Callable, x) -> float:
    val = np.asarray(coeffs(x), dtype=float)
    if val.ndim == 0:
        return float(val)
    return float(val[0, 0])


@dataclass
class EllipticOperator:
    """Assembled divergence-form operator with Dirichlet rows eliminated.

    `matrix` is the symmetric discrete representation A_h (negative definite);
    for Cartesian grids it acts directly on node values, for the radial ball
    it acts on the transformed variable diag(to_sym) @ u.  `apply` and
    `solve_shifted` work in physical node values either way.
    `node_ellipticity` records the smallest eigenvalue of the coefficient
    matrix sampled at each node (>= ellipticity constant).
    """

    grid: Grid
    matrix: sps.csr_matrix
    to_sym: np.ndarray | None
    ellipticity: float
    node_ellipticity: np.ndarray
    node_coeff_trace: np.ndarray = field(repr=False, default=None)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def _fwd(self, u: np.ndarray) -> np.ndarray:
        return u if self.to_sym is None else self.to_sym * u

    def _bwd(self, v: np.ndarray) -> np.ndarray:
        return v if self.to_sym is None else v / self.to_sym

    def apply(self, u: np.ndarray) -> np.ndarray:
        """A u in physical node values."""
        return self._bwd(self.matrix @ self._fwd(u))

    def shifted_solver(self, alpha: float):
        """Prefactored solver for (I - alpha * A) u = rhs, in node values."""
        n = self.n
        mat = (sps.identity(n, format="csc") - alpha * self.matrix).tocsc()
        lu = spla.splu(mat)

        def solve(rhs: np.ndarray) -> np.ndarray:
            return self._bwd(lu.solve(self._fwd(rhs)))

        return solve


def assemble_operator(
    domain: SpatialDomain, coeffs: Callable, n: int
) -> tuple[Grid, EllipticOperator]:
    """Flux-form second-order finite differences on an n-node interior grid.

    The coefficient function is sampled at every node for the symmetry and
    ellipticity checks and at cell faces for the stencil.  Non-symmetric or
    non-elliptic coefficients are rejected with the offending node.
    """
    if n < 8:
        raise AssemblyError("node count must be at least 8")
    grid = build_grid(domain, n)
    dim = domain.dim

    pts = grid.points if dim > 1 else grid.points[:, None]
    node_min_eig = np.empty(grid.n_nodes)
    node_trace = np.empty(grid.n_nodes)
    for k in range(grid.n_nodes):
        x = pts[k] if dim > 1 else float(pts[k, 0])
        mat = _coeff_matrix(coeffs, x, dim)
        if not np.allclose(mat, mat.T, rtol=0, atol=1e-12 * max(1.0, abs(mat).max())):
            raise AssemblyError(f"coefficient matrix not symmetric at node {k}, x={x}")
        eigs = np.linalg.eigvalsh(mat)
        node_min_eig[k] = eigs[0]
        node_trace[k] = np.trace(mat)
        if eigs[0] <= 0:
            raise AssemblyError(f"coefficient not elliptic at node {k}, x={x}: min eig {eigs[0]:g}")
    ellipticity = float(node_min_eig.min())

    if domain.kind == "interval":
        matrix = _assemble_1d_cartesian(grid, coeffs)
        to_sym = None
    elif domain.kind == "ball3d_radial":
        matrix, to_sym = _assemble_radial(grid, coeffs)
    else:
        matrix = _assemble_box(grid, coeffs)
        to_sym = None

    matrix = ((matrix + matrix.T) * 0.5).tocsr()
    return grid, EllipticOperator(grid, matrix, to_sym, ellipticity, node_min_eig, node_trace)


def _assemble_1d_cartesian(grid: Grid, coeffs: Callable) -> sps.csr_matrix:
    x = grid.axes[0]
    h = grid.h
    n = x.size
    faces = np.concatenate(([x[0] - h / 2], x + h / 2))
    a_face = np.array([_coeff_scalar_on_axis(coeffs, f) for f in faces])
    diag = -(a_face[:-1] + a_face[1:]) / h**2
    off = a_face[1:-1] / h**2
    return sps.diags([off, diag, off], [-1, 0, 1], shape=(n, n), format="csr")


def _assemble_radial(grid: Grid, coeffs: Callable) -> tuple[sps.csr_matrix, np.ndarray]:
    # With v = r*u the operator (1/r^2) d/dr(r^2 a du/dr) becomes
    # (1/r) [ d/dr(a dv/dr) - (a'/r) v ], a Sturm-Liouville form in v.
    r = grid.axes[0]
    h = grid.h
    n = r.size
    faces = np.concatenate(([r[0] - h / 2], r + h / 2))
    a_face = np.array([_coeff_scalar_on_axis(coeffs, f) for f in faces])
    a_plus = np.array([_coeff_scalar_on_axis(coeffs, min(ri + h, grid.domain.radius)) for ri in r])
    a_minus = np.array([_coeff_scalar_on_axis(coeffs, max(ri - h, 0.0)) for ri in r])
    a_prime = (a_plus - a_minus) / (2 * h)
    diag = -(a_face[:-1] + a_face[1:]) / h**2 - a_prime / r
    off = a_face[1:-1] / h**2
    matrix = sps.diags([off, diag, off], [-1, 0, 1], shape=(n, n), format="csr")
    return matrix, r.copy()


def _assemble_box(grid: Grid, coeffs: Callable) -> sps.csr_matrix:
    shape = grid.shape
    dim = len(shape)
    n_total = grid.n_nodes
    idx = np.arange(n_total).reshape(shape)
    rows, cols, vals = [], [], []
    diag = np.zeros(n_total)
    pts = grid.points
    for ax in range(dim):
        h = grid.spacing[ax]
        # face between neighbors i and i+1 along `ax`: coefficient a_kk there
        sl_lo = [slice(None)] * dim
        sl_hi = [slice(None)] * dim
        sl_lo[ax] = slice(0, shape[ax] - 1)
        sl_hi[ax] = slice(1, shape[ax])
        lo = idx[tuple(sl_lo)].ravel()
        hi = idx[tuple(sl_hi)].ravel()
        mid = (pts[lo] + pts[hi]) / 2.0
        a_face = np.array([_coeff_matrix(coeffs, m, dim)[ax, ax] for m in mid]) / h**2
        rows.extend([lo, hi])
        cols.extend([hi, lo])
        vals.extend([a_face, a_face])
        np.add.at(diag, lo, -a_face)
        np.add.at(diag, hi, -a_face)
        # boundary faces contribute only to the diagonal (Dirichlet value 0)
        for side, bound in ((0, "lo"), (shape[ax] - 1, "hi")):
            sl = [slice(None)] * dim
            sl[ax] = side
            nodes = idx[tuple(sl)].ravel()
            xf = pts[nodes].copy()
            xf[:, ax] += (h / 2) if bound == "hi" else (-h / 2)
            a_b = np.array([_coeff_matrix(coeffs, m, dim)[ax, ax] for m in xf]) / h**2
            np.add.at(diag, nodes, -a_b)
    rows.append(np.arange(n_total))
    cols.append(np.arange(n_total))
    vals.append(diag)
    matrix = sps.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n_total, n_total),
    )
    return matrix.tocsr()


@dataclass
class EigenPair:
    """Smallest eigenvalue of -A with its nonnegative, mass-one eigenfunction.

    `residual` is the relative residual of the eigen equation measured both
    through the symmetric matrix and through the physical operator action
    (the larger of the two).
    """

    lambda1: float
    phi: np.ndarray
    residual: float
    iterations: int


def principal_eigenpair(
    op: EllipticOperator,
    grid: Grid,
    tol: float = 1e-10,
    max_iter: int = 10_000,
) -> EigenPair:
    """Inverse power iteration for the smallest eigenvalue of -A_h.

    Seeded with the constant-1 field; stops when the relative residual
    drops below `tol` (or stagnates at the roundoff floor below 1e-8).
    The eigenvector is sign-fixed to be nonnegative and normalized so the
    quadrature rule integrates it to exactly 1.
    """
    T = (-op.matrix).tocsc()
    lu = spla.splu(T)
    psi = op._fwd(np.ones(op.n))
    psi /= np.linalg.norm(psi)
    lam = float(psi @ (T @ psi))
    rel_res = np.inf
    best = np.inf
    stagnant = 0
    iterations = 0
    for iterations in range(1, max_iter + 1):
        y = lu.solve(psi)
        ny = np.linalg.norm(y)
        if not np.isfinite(ny) or ny == 0:
            raise EigenSolveError("inverse iteration produced a degenerate vector")
        psi = y / ny
        Tpsi = T @ psi
        lam = float(psi @ Tpsi)
        rel_res = float(np.linalg.norm(Tpsi - lam * psi)) / max(abs(lam), 1.0)
        if rel_res <= tol:
            break
        if rel_res >= 0.9 * best:
            stagnant += 1
            if stagnant >= 5 and best <= 1e-8:
                break  # roundoff floor of the factorization, still well inside spec
        else:
            stagnant = 0
        best = min(best, rel_res)
    else:
        raise EigenSolveError(
            f"eigen iteration did not converge in {max_iter} steps (last residual {rel_res:.3e})"
        )
    if lam <= 0:
        raise EigenSolveError(f"-A_h is not positive definite: smallest eigenvalue {lam:g}")

    phi = op._bwd(psi)
    if float(np.mean(phi)) < 0:
        phi = -phi
    peak = float(phi.max())
    if peak <= 0 or float(phi.min()) < -1e-10 * peak:
        raise EigenSolveError(
            f"eigenvector not of one sign (min {phi.min():.3e}, max {peak:.3e})"
        )
    phi = np.maximum(phi, 0.0)
    mass = float(grid.weights @ phi)
    phi = phi / mass

    op_res = float(np.linalg.norm(op.apply(phi) + lam * phi)) / (
        max(lam, 1.0) * float(np.linalg.norm(phi))
    )
    return EigenPair(lam, phi, max(rel_res, op_res), iterations)


def quadrature(grid: Grid, v: np.ndarray) -> float:
    """Discrete integral of v over D: sum of weights * values."""
    v = np.asarray(v)
    if v.shape != grid.weights.shape:
        raise ValueError(f"field has shape {v.shape}, grid has {grid.weights.shape}")
    return float(grid.weights @ v)


def discrete_gradient(grid: Grid, v: np.ndarray) -> np.ndarray:
    """Componentwise gradient, shape (dim, n_nodes).

    Centered differences throughout; the nodes next to a Dirichlet boundary
    difference against the homogeneous boundary value, which keeps the
    stencil second-order everywhere.  At the radial origin (no boundary
    condition, just regularity) a second-order one-sided formula is used.
    """
    v = np.asarray(v, dtype=float)
    if v.shape != grid.weights.shape:
        raise ValueError(f"field has shape {v.shape}, grid has {grid.weights.shape}")
    if grid.domain.kind == "box":
        shape = grid.shape
        field3 = v.reshape(shape)
        out = np.empty((len(shape), v.size))
        for ax, h in enumerate(grid.spacing):
            padded = np.pad(field3, [(1, 1) if a == ax else (0, 0) for a in range(len(shape))])
            sl_hi = [slice(None)] * len(shape)
            sl_lo = [slice(None)] * len(shape)
            sl_hi[ax] = slice(2, None)
            sl_lo[ax] = slice(0, -2)
            out[ax] = ((padded[tuple(sl_hi)] - padded[tuple(sl_lo)]) / (2 * h)).ravel()
        return out
    h = grid.h
    n = v.size
    g = np.empty(n)
    if n >= 3:
        g[1:-1] = (v[2:] - v[:-2]) / (2 * h)
    g[-1] = (0.0 - v[-2]) / (2 * h) if n >= 2 else -v[-1] / (2 * h)
    if grid.domain.kind == "interval":
        g[0] = (v[1] - 0.0) / (2 * h) if n >= 2 else v[0] / (2 * h)
    else:
        # radial origin: one-sided, exact for quadratics
        if n >= 3:
            g[0] = (-3 * v[0] + 4 * v[1] - v[2]) / (2 * h)
        elif n == 2:
            g[0] = (v[1] - v[0]) / h
        else:
            g[0] = 0.0
    return g[None, :]


def lp_norm(grid: Grid, v: np.ndarray, p: float) -> float:
    """Weighted L^p norm (sum_i w_i |v_i|^p)^(1/p)."""
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    v = np.asarray(v)
    if v.shape != grid.weights.shape:
        raise ValueError(f"field has shape {v.shape}, grid has {grid.weights.shape}")
    if np.isinf(p):
        return float(np.abs(v).max())
    return float((grid.weights @ np.abs(v) ** p) ** (1.0 / p))
