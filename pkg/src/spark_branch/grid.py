"""Uniform radial grid on [1, 2], stencils, quadrature, and banded solves.

Conventions used throughout the package:

* nodes r_j = 1 + j*delta, j = 0..n-1, delta = 1/(n-1);
* trapezoid weights (sum = 1) matched to every boundary-functional
  quadrature, so discrete integration-by-parts identities hold to O(delta^2);
* interior stencils are centered second order, boundary derivatives are
  one-sided second order (exact on quadratics), no ghost nodes.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg
import scipy.sparse

# A grid function is just its node values.
GridFunction = np.ndarray

MIN_NODES = 33
DEFAULT_N = 257


class RadialGrid:
    """Uniform grid with trapezoid quadrature on the shell [1, 2]."""

    def __init__(self, n: int = DEFAULT_N):
        n = int(n)
        if n < MIN_NODES:
            raise ValueError(f"need at least {MIN_NODES} nodes, got {n}")
        self.n = n
        self.delta = 1.0 / (n - 1)
        self.r = 1.0 + self.delta * np.arange(n)
        self.weights = np.full(n, self.delta)
        self.weights[0] = self.weights[-1] = 0.5 * self.delta
        # r^2-weighted quadrature weights for the volume inner product
        self.r2w = self.weights * self.r ** 2

    def __repr__(self):
        return f"RadialGrid(n={self.n})"


def weighted_inner(u: GridFunction, v: GridFunction, grid: RadialGrid) -> float:
    """Discrete volume pairing <u, v> = int_1^2 r^2 u v dr (trapezoid)."""
    return float(np.dot(grid.r2w, np.asarray(u) * np.asarray(v)))


def integrate(u: GridFunction, grid: RadialGrid) -> float:
    """Plain trapezoid of int_1^2 u dr (no r^2 weight)."""
    return float(np.dot(grid.weights, u))


def sturm_liouville_rows(grid: RadialGrid, q: GridFunction):
    """Tridiagonal coefficients of -u'' - (2/r) u' - q(r) u at interior nodes.

    Returns (sub, diag, sup), each of length n; row j couples
    (u[j-1], u[j], u[j+1]) for j = 1..n-2.  The two boundary rows are left
    zero for the caller to overwrite with its boundary conditions.
    """
    d = grid.delta
    r = grid.r
    q = np.broadcast_to(np.asarray(q, dtype=float), (grid.n,))
    sub = np.zeros(grid.n)
    diag = np.zeros(grid.n)
    sup = np.zeros(grid.n)
    j = slice(1, grid.n - 1)
    sub[j] = -1.0 / d**2 + 1.0 / (r[j] * d)
    diag[j] = 2.0 / d**2 - q[j]
    sup[j] = -1.0 / d**2 - 1.0 / (r[j] * d)
    return sub, diag, sup


def boundary_derivative(u: GridFunction, grid: RadialGrid, end: str) -> float:
    """One-sided second-order derivative at the anode (r=1) or cathode (r=2)."""
    d = grid.delta
    if end == "anode":
        return float((-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * d))
    if end == "cathode":
        return float((3.0 * u[-1] - 4.0 * u[-2] + u[-3]) / (2.0 * d))
    raise ValueError("end must be 'anode' or 'cathode'")


class BandedSolveError(RuntimeError):
    """Banded collocation system could not be solved reliably."""

    def __init__(self, message, condition=np.inf):
        super().__init__(message)
        self.condition = condition


def _solve_banded_checked(ab, rhs, lower, upper, dense_rebuild):
    try:
        x = scipy.linalg.solve_banded((lower, upper), ab, rhs)
    except scipy.linalg.LinAlgError as exc:
        cond = _condition_estimate(dense_rebuild)
        raise BandedSolveError(f"singular collocation system ({exc}); cond~{cond:.3e}",
                              cond) from exc
    if not np.all(np.isfinite(x)):
        cond = _condition_estimate(dense_rebuild)
        raise BandedSolveError(f"non-finite solve (cond~{cond:.3e})", cond)
    return x


def _condition_estimate(dense_rebuild):
    A = dense_rebuild()
    if A.shape[0] > 2049:
        return np.inf
    try:
        return float(np.linalg.cond(A))
    except np.linalg.LinAlgError:
        return np.inf


def solve_sl_dirichlet_robin(grid: RadialGrid, q, f, cathode_slope: float) -> GridFunction:
    """Solve -u'' - (2/r)u' - q u = f with u(1) = 0, u'(2) = cathode_slope.

    The cathode row imposes the one-sided second-order derivative stencil,
    which makes the lower bandwidth 2; solved with banded LU.
    """
    n = grid.n
    d = grid.delta
    sub, diag, sup = sturm_liouville_rows(grid, q)
    rhs = np.broadcast_to(np.asarray(f, dtype=float), (n,)).copy()
    rhs[0] = 0.0
    rhs[-1] = cathode_slope

    # bands for (l, u) = (2, 1): ab[1 + i - j, j] = A[i, j]
    ab = np.zeros((4, n))
    ab[0, 2:] = sup[1:-1]          # A[j, j+1]
    ab[1, 1:-1] = diag[1:-1]       # A[j, j]
    ab[2, :-2] = sub[1:-1]         # A[j, j-1]
    ab[1, 0] = 1.0                 # Dirichlet anode row
    ab[1, -1] = 3.0 / (2.0 * d)    # derivative row at the cathode
    ab[2, -2] = -2.0 / d
    ab[3, -3] = 1.0 / (2.0 * d)

    def dense():
        A = np.zeros((n, n))
        A[0, 0] = 1.0
        for j in range(1, n - 1):
            A[j, j - 1] = sub[j]
            A[j, j] = diag[j]
            A[j, j + 1] = sup[j]
        A[-1, -3:] = np.array([1.0, -4.0, 3.0]) / (2.0 * d)
        return A

    return _solve_banded_checked(ab, rhs, 2, 1, dense)


def solve_sl_dirichlet(grid: RadialGrid, q, f) -> GridFunction:
    """Solve -u'' - (2/r)u' - q u = f with u(1) = u(2) = 0 (tridiagonal)."""
    n = grid.n
    sub, diag, sup = sturm_liouville_rows(grid, q)
    rhs = np.broadcast_to(np.asarray(f, dtype=float), (n,)).copy()
    rhs[0] = rhs[-1] = 0.0

    ab = np.zeros((3, n))
    ab[0, 2:] = sup[1:-1]
    ab[1, 1:-1] = diag[1:-1]
    ab[2, :-2] = sub[1:-1]
    ab[1, 0] = ab[1, -1] = 1.0

    def dense():
        A = np.zeros((n, n))
        A[0, 0] = A[-1, -1] = 1.0
        for j in range(1, n - 1):
            A[j, j - 1] = sub[j]
            A[j, j] = diag[j]
            A[j, j + 1] = sup[j]
        return A

    return _solve_banded_checked(ab, rhs, 1, 1, dense)


def derivative_matrix(grid: RadialGrid) -> scipy.sparse.csr_matrix:
    """Sparse first-derivative stencil on all nodes: centered in the
    interior, one-sided second order at the two ends.  Cached per grid."""
    cached = getattr(grid, "_derivative_csr", None)
    if cached is not None:
        return cached
    n = grid.n
    d = grid.delta
    rows, cols, vals = [], [], []
    rows += [0, 0, 0]
    cols += [0, 1, 2]
    vals += [-3.0 / (2 * d), 4.0 / (2 * d), -1.0 / (2 * d)]
    j = np.arange(1, n - 1)
    rows += list(j) + list(j)
    cols += list(j - 1) + list(j + 1)
    vals += [-1.0 / (2 * d)] * (n - 2) + [1.0 / (2 * d)] * (n - 2)
    rows += [n - 1] * 3
    cols += [n - 3, n - 2, n - 1]
    vals += [1.0 / (2 * d), -4.0 / (2 * d), 3.0 / (2 * d)]
    mat = scipy.sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))
    grid._derivative_csr = mat
    return mat


def laplacian_matrix(grid: RadialGrid) -> scipy.sparse.csr_matrix:
    """Sparse matrix form of radial_laplacian_all_nodes (same stencils).
    Cached per grid."""
    cached = getattr(grid, "_laplacian_csr", None)
    if cached is not None:
        return cached
    n = grid.n
    d2 = grid.delta ** 2
    rows, cols, vals = [], [], []
    rows += [0] * 4
    cols += [0, 1, 2, 3]
    vals += [2.0 / d2, -5.0 / d2, 4.0 / d2, -1.0 / d2]
    j = np.arange(1, n - 1)
    for off, v in ((-1, 1.0 / d2), (0, -2.0 / d2), (1, 1.0 / d2)):
        rows += list(j)
        cols += list(j + off)
        vals += [v] * (n - 2)
    rows += [n - 1] * 4
    cols += [n - 1, n - 2, n - 3, n - 4]
    vals += [2.0 / d2, -5.0 / d2, 4.0 / d2, -1.0 / d2]
    second = scipy.sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))
    over_r = scipy.sparse.diags(2.0 / grid.r)
    mat = (second + over_r @ derivative_matrix(grid)).tocsr()
    grid._laplacian_csr = mat
    return mat


def second_derivative_all_nodes(u: GridFunction, grid: RadialGrid) -> np.ndarray:
    """u'' at all nodes: centered in the interior, 4-point one-sided at the
    ends so the whole array is second order."""
    d2 = grid.delta ** 2
    out = np.empty(grid.n)
    out[1:-1] = (u[2:] - 2 * u[1:-1] + u[:-2]) / d2
    out[0] = (2 * u[0] - 5 * u[1] + 4 * u[2] - u[3]) / d2
    out[-1] = (2 * u[-1] - 5 * u[-2] + 4 * u[-3] - u[-4]) / d2
    return out


def derivative_all_nodes(u: GridFunction, grid: RadialGrid) -> np.ndarray:
    """u' at all nodes: centered interior, one-sided second order at ends."""
    d = grid.delta
    out = np.empty(grid.n)
    out[1:-1] = (u[2:] - u[:-2]) / (2 * d)
    out[0] = (-3 * u[0] + 4 * u[1] - u[2]) / (2 * d)
    out[-1] = (3 * u[-1] - 4 * u[-2] + u[-3]) / (2 * d)
    return out


def radial_laplacian_all_nodes(u: GridFunction, grid: RadialGrid) -> np.ndarray:
    """(1/r^2)(r^2 u')' = u'' + (2/r) u' at all nodes, second order."""
    return second_derivative_all_nodes(u, grid) + (2.0 / grid.r) * derivative_all_nodes(u, grid)
