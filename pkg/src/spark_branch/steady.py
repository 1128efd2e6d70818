"""Discrete steady-state system and its Newton corrector.

The unknowns are the modified densities and the potential deviation: the
ion density rho_i, the scaled electron density R_e = rho_e e^{lambda H/2},
and V with Phi = V + lambda H.  The residual rows are

  F1  ion continuity     (k_i/r^2) d/dr { r^2 rho_i (V' + lambda H') }
                           - k_e h(|V' + lambda H'|) e^{-lambda H/2} R_e
  F2  electron equation  -lap R_e - V' R_e'
                           + { (lambda/2) V' H' - lap V
                               + (lambda^2/4) H'^2 - h(|V'+lambda H'|) } R_e
  F3  Poisson            lap V - rho_i + e^{-lambda H/2} R_e
  F4  cathode emission    R_e'(2) + (lambda/4 + V'(2)) R_e(2)
                           - gamma (k_i/k_e) e^{lambda/2} (V'(2)+lambda/2) rho_i(2)

with rho_i, R_e, V vanishing at the anode and V also at the cathode.  F1
is differenced upwind (backward; the field points from anode to cathode
on admissible states), F2 and F3 use centered stencils, and F4 replaces
the cathode PDE row of R_e.  The Jacobian differentiates these discrete
formulas exactly, so at the trivial state it reproduces the upwind
discretization of the linearized operator.  Unknown vector layout:
rho_i at nodes 1..n-1, R_e at nodes 1..n-1, V at nodes 1..n-2.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse
import scipy.sparse.linalg
from scipy.integrate import cumulative_trapezoid

from .model import (Parameters, harmonic_H, harmonic_dH, townsend_h,
                    townsend_h_prime, g_fn)
from .grid import (RadialGrid, GridFunction, derivative_all_nodes,
                   radial_laplacian_all_nodes, derivative_matrix,
                   laplacian_matrix, boundary_derivative)

NEWTON_TOL = 1e-10
NEWTON_MAX_ITER = 25
ARMIJO_FACTOR = 0.5
ARMIJO_SLOPE = 1e-4
MIN_STEP = 2.0 ** -20
FIELD_FLOOR = 1e-6


@dataclass
class State:
    """A point (lambda, rho_i, R_e, V); arrays are full length-n nodal
    values with the pinned boundary entries stored as zeros."""
    lam: float
    rho_i: GridFunction
    R_e: GridFunction
    V: GridFunction

    def copy(self) -> "State":
        return State(self.lam, self.rho_i.copy(), self.R_e.copy(),
                     self.V.copy())


@dataclass
class Residual:
    F1: np.ndarray          # ion rows, nodes 1..n-1
    F2: np.ndarray          # electron rows, nodes 1..n-2
    F3: np.ndarray          # Poisson rows, nodes 1..n-2
    F4: float               # cathode emission row


@dataclass
class AdmissibilityReport:
    min_field: float
    ok: bool


@dataclass
class DensityReport:
    rho_e: GridFunction
    sup_rho_i: float
    sup_rho_e: float
    positive: bool


@dataclass
class NewtonResult:
    state: State
    iters: int
    residual_norm: float


class AdmissibilityError(ValueError):
    """Raised when a Newton guess has a degenerate or reversed field."""


class NewtonError(RuntimeError):
    """Base for corrector failures; carries the last iterate."""

    def __init__(self, message: str, state: State, residual_norm: float):
        super().__init__(f"{message} (residual norm {residual_norm:.3e})")
        self.state = state
        self.residual_norm = residual_norm


class MaxIterExceeded(NewtonError):
    pass


class LineSearchStall(NewtonError):
    pass


class SingularJacobian(NewtonError):
    pass


def trivial_state(lam: float, grid: RadialGrid) -> State:
    z = np.zeros(grid.n)
    return State(lam, z.copy(), z.copy(), z.copy())


def pack(state: State) -> np.ndarray:
    """Unknown vector [rho_i(1..n-1), R_e(1..n-1), V(1..n-2)]."""
    return np.concatenate([state.rho_i[1:], state.R_e[1:], state.V[1:-1]])


def unpack(lam: float, x: np.ndarray, grid: RadialGrid) -> State:
    n = grid.n
    if x.shape != (3 * n - 4,):
        raise ValueError(f"expected state vector of length {3 * n - 4}")
    rho = np.zeros(n)
    Re = np.zeros(n)
    V = np.zeros(n)
    rho[1:] = x[:n - 1]
    Re[1:] = x[n - 1:2 * n - 2]
    V[1:-1] = x[2 * n - 2:]
    return State(lam, rho, Re, V)


def field(state: State, grid: RadialGrid) -> np.ndarray:
    """d(Phi)/dr = V' + lambda H' at all nodes."""
    return derivative_all_nodes(state.V, grid) + state.lam * harmonic_dH(grid.r)


def residual(state: State, p: Parameters, grid: RadialGrid) -> Residual:
    n = grid.n
    r = grid.r
    d = grid.delta
    lam = state.lam
    dH = harmonic_dH(r)
    H = harmonic_H(r)
    emh = np.exp(-0.5 * lam * H)

    E = field(state, grid)
    hE = townsend_h(np.abs(E), p)
    flux = r ** 2 * state.rho_i * E
    F1 = (p.k_i / r[1:] ** 2) * (flux[1:] - flux[:-1]) / d \
        - p.k_e * hE[1:] * emh[1:] * state.R_e[1:]

    DV = derivative_all_nodes(state.V, grid)
    DRe = derivative_all_nodes(state.R_e, grid)
    lapRe = radial_laplacian_all_nodes(state.R_e, grid)
    lapV = radial_laplacian_all_nodes(state.V, grid)
    c = 0.5 * lam * DV * dH - lapV + 0.25 * lam ** 2 * dH ** 2 - hE
    F2 = (-lapRe - DV * DRe + c * state.R_e)[1:-1]

    F3 = (lapV - state.rho_i + emh * state.R_e)[1:-1]

    bdRe = boundary_derivative(state.R_e, grid, "cathode")
    bdV = boundary_derivative(state.V, grid, "cathode")
    kappa = p.k_i / p.k_e
    F4 = bdRe + (0.25 * lam + bdV) * state.R_e[-1] \
        - p.gamma * kappa * np.exp(0.5 * lam) * (bdV + 0.5 * lam) * state.rho_i[-1]
    return Residual(F1, F2, F3, float(F4))


def residual_vector(state: State, p: Parameters, grid: RadialGrid) -> np.ndarray:
    res = residual(state, p, grid)
    return np.concatenate([res.F1, res.F2, res.F3, [res.F4]])


def norm_Y(res, grid: RadialGrid) -> float:
    """Weighted discrete L2 norm of the residual blocks plus |F4|."""
    if isinstance(res, Residual):
        vec = np.concatenate([res.F1, res.F2, res.F3, [res.F4]])
    else:
        vec = np.asarray(res)
    n = grid.n
    w = grid.r2w
    s = np.dot(w[1:], vec[:n - 1] ** 2)
    s += np.dot(w[1:-1], vec[n - 1:2 * n - 3] ** 2)
    s += np.dot(w[1:-1], vec[2 * n - 3:3 * n - 5] ** 2)
    s += vec[-1] ** 2
    return float(np.sqrt(s))


def _unknown_slices(n):
    ni = n - 1
    return slice(0, ni), slice(ni, 2 * ni), slice(2 * ni, 3 * n - 4)


def jacobian(state: State, p: Parameters, grid: RadialGrid) -> scipy.sparse.csr_matrix:
    """Exact derivative of the discrete residual with respect to the
    unknown vector; sparse (3n-4) x (3n-4)."""
    n = grid.n
    r = grid.r
    d = grid.delta
    lam = state.lam
    dH = harmonic_dH(r)
    H = harmonic_H(r)
    emh = np.exp(-0.5 * lam * H)
    D = derivative_matrix(grid)
    L = laplacian_matrix(grid)

    E = field(state, grid)
    absE = np.abs(E)
    sgnE = np.sign(E)
    hE = townsend_h(absE, p)
    hpE = townsend_h_prime(absE, p)

    rows_i = slice(1, n)        # nodes carrying F1
    rows_int = slice(1, n - 1)  # nodes carrying F2 / F3
    cols_i = slice(1, n)        # rho_i unknown nodes
    cols_e = slice(1, n)        # R_e unknown nodes
    cols_v = slice(1, n - 1)    # V unknown nodes

    def diags(v):
        return scipy.sparse.diags(v, format="csr")

    # F1 rows.  flux = r^2 rho E, F1_j = k_i (flux_j - flux_{j-1})/(r_j^2 d) - ...
    scale = p.k_i / (r[1:] ** 2 * d)
    J1i = (diags(scale) @ (diags((r ** 2 * E)[1:]) @ _eye_rows(n, 1, 0)
                           - diags((r ** 2 * E)[:-1]) @ _eye_rows(n, 1, -1)))[:, cols_i]
    J1e = scipy.sparse.diags(-p.k_e * hE[1:] * emh[1:], offsets=1,
                             shape=(n - 1, n), format="csr")[:, cols_e]
    P = diags(r ** 2 * state.rho_i) @ D
    J1v = (diags(scale) @ (P[1:, :] - P[:-1, :])
           - diags((p.k_e * hpE * sgnE * emh * state.R_e)[1:]) @ D[1:, :])[:, cols_v]

    # F2 rows.
    DV = derivative_all_nodes(state.V, grid)
    DRe = derivative_all_nodes(state.R_e, grid)
    lapV = radial_laplacian_all_nodes(state.V, grid)
    c = 0.5 * lam * DV * dH - lapV + 0.25 * lam ** 2 * dH ** 2 - hE
    J2e = (-L - diags(DV) @ D + diags(c))[rows_int, cols_e]
    dc_dV = 0.5 * lam * diags(dH) @ D - L - diags(hpE * sgnE) @ D
    J2v = (-diags(DRe) @ D + diags(state.R_e) @ dc_dV)[rows_int, cols_v]

    # F3 rows.
    J3i = (-scipy.sparse.identity(n, format="csr"))[rows_int, cols_i]
    J3e = diags(emh)[rows_int, cols_e]
    J3v = L[rows_int, cols_v]

    # F4 row.
    kappa = p.k_i / p.k_e
    bdV = boundary_derivative(state.V, grid, "cathode")
    row4i = np.zeros(n - 1)
    row4i[-1] = -p.gamma * kappa * np.exp(0.5 * lam) * (bdV + 0.5 * lam)
    row4e = np.zeros(n - 1)
    row4e[-3:] = np.array([1.0, -4.0, 3.0]) / (2 * d)
    row4e[-1] += 0.25 * lam + bdV
    emission = state.R_e[-1] - p.gamma * kappa * np.exp(0.5 * lam) * state.rho_i[-1]
    row4v = (emission * D[[n - 1], :].toarray().ravel())[1:n - 1]
    row4 = scipy.sparse.csr_matrix(
        np.concatenate([row4i, row4e, row4v])[None, :])

    top = scipy.sparse.bmat([[J1i, J1e, J1v],
                             [None, J2e, J2v],
                             [J3i, J3e, J3v]], format="csr")
    return scipy.sparse.vstack([top, row4], format="csr")


def _eye_rows(n, start, offset):
    """Rows start..n-1 of the identity shifted by offset columns:
    entry (j - start, j + offset) = 1."""
    j = np.arange(start, n)
    cols = j + offset
    keep = (cols >= 0) & (cols < n)
    return scipy.sparse.csr_matrix(
        (np.ones(keep.sum()), (j[keep] - start, cols[keep])),
        shape=(n - start, n))


def dresidual_dlambda(state: State, p: Parameters, grid: RadialGrid) -> np.ndarray:
    """Partial derivative of the residual vector in lambda, state held
    fixed; used by the extended (arclength) corrector."""
    n = grid.n
    r = grid.r
    d = grid.delta
    lam = state.lam
    dH = harmonic_dH(r)
    H = harmonic_H(r)
    emh = np.exp(-0.5 * lam * H)
    E = field(state, grid)
    absE = np.abs(E)
    sgnE = np.sign(E)
    hE = townsend_h(absE, p)
    hpE = townsend_h_prime(absE, p)
    DV = derivative_all_nodes(state.V, grid)

    flux_lam = r ** 2 * state.rho_i * dH
    dF1 = (p.k_i / r[1:] ** 2) * (flux_lam[1:] - flux_lam[:-1]) / d \
        - p.k_e * (hpE * sgnE * dH - 0.5 * H * hE)[1:] * emh[1:] * state.R_e[1:]
    dc = 0.5 * DV * dH + 0.5 * lam * dH ** 2 - hpE * sgnE * dH
    dF2 = (dc * state.R_e)[1:-1]
    dF3 = (-0.5 * H * emh * state.R_e)[1:-1]
    bdV = boundary_derivative(state.V, grid, "cathode")
    kappa = p.k_i / p.k_e
    dF4 = 0.25 * state.R_e[-1] - p.gamma * kappa * np.exp(0.5 * lam) \
        * ((bdV + 0.5 * lam) * 0.5 + 0.5) * state.rho_i[-1]
    return np.concatenate([dF1, dF2, dF3, [dF4]])


def trivial_linearization(lam: float, p: Parameters, grid: RadialGrid) -> scipy.sparse.csr_matrix:
    """Direct assembly of the linearized operator at the trivial state with
    this module's stencils (upwind ion row); the Jacobian at the trivial
    state must agree with it entry for entry."""
    n = grid.n
    r = grid.r
    d = grid.delta
    dH = harmonic_dH(r)
    H = harmonic_H(r)
    emh = np.exp(-0.5 * lam * H)
    h = townsend_h(lam * dH, p)
    g = g_fn(lam * dH, p)
    D = derivative_matrix(grid)
    L = laplacian_matrix(grid)
    rows_int = slice(1, n - 1)

    # L1: 2 k_i lambda / r^2 backward difference - k_e h emh S_e
    coef = 2.0 * p.k_i * lam / (r[1:] ** 2 * d)
    L1i = (scipy.sparse.diags(coef) @ (_eye_rows(n, 1, 0) - _eye_rows(n, 1, -1)))[:, 1:]
    L1e = scipy.sparse.diags(-p.k_e * h[1:] * emh[1:], offsets=1,
                             shape=(n - 1, n), format="csr")[:, 1:]
    L1v = scipy.sparse.csr_matrix((n - 1, n - 2))

    L2e = (-L - scipy.sparse.diags(g, format="csr"))[rows_int, 1:]
    L2v = scipy.sparse.csr_matrix((n - 2, n - 2))

    L3i = (-scipy.sparse.identity(n, format="csr"))[rows_int, 1:]
    L3e = scipy.sparse.diags(emh, format="csr")[rows_int, 1:]
    L3v = L[rows_int, 1:n - 1]

    row4 = np.zeros(3 * n - 4)
    row4[n - 2] = -p.gamma * (p.k_i / p.k_e) * np.exp(0.5 * lam) * 0.5 * lam
    row4[2 * n - 3 - 2:2 * n - 3 + 1] += np.array([1.0, -4.0, 3.0]) / (2 * d)
    row4[2 * n - 3] += 0.25 * lam
    top = scipy.sparse.bmat([[L1i, L1e, L1v],
                             [None, L2e, L2v],
                             [L3i, L3e, L3v]], format="csr")
    return scipy.sparse.vstack(
        [top, scipy.sparse.csr_matrix(row4[None, :])], format="csr")


def admissibility(state: State, grid: RadialGrid,
                  field_floor: float = FIELD_FLOOR) -> AdmissibilityReport:
    """Signed-field monitor: ok iff min over nodes of V' + lambda H'
    exceeds the floor."""
    m = float(np.min(field(state, grid)))
    return AdmissibilityReport(min_field=m, ok=m > field_floor)


def ion_consistency(state: State, p: Parameters, grid: RadialGrid) -> float:
    """Max-norm gap between the stored rho_i and the quadrature form

        rho_i(r) = (k_e/k_i) (r^2 dPhi)^{-1}
                     int_1^r t^2 h(|dPhi|) e^{-lambda H/2} R_e dt,

    an independent check that the upwind F1 rows were honored; first
    order in the grid spacing at converged states."""
    rep = admissibility(state, grid)
    if not rep.ok:
        raise AdmissibilityError(
            f"field minimum {rep.min_field:.3e} at or below floor")
    r = grid.r
    E = field(state, grid)
    emh = np.exp(-0.5 * state.lam * harmonic_H(r))
    integrand = r ** 2 * townsend_h(np.abs(E), p) * emh * state.R_e
    integral = cumulative_trapezoid(integrand, r, initial=0.0)
    recon = (p.k_e / p.k_i) * integral / (r ** 2 * E)
    return float(np.max(np.abs(state.rho_i[1:] - recon[1:])))


def densities(state: State, grid: RadialGrid) -> DensityReport:
    rho_e = state.R_e * np.exp(-0.5 * state.lam * harmonic_H(grid.r))
    positive = bool(np.all(rho_e[1:] > 0.0) and np.all(state.rho_i[1:] > 0.0))
    return DensityReport(rho_e=rho_e,
                         sup_rho_i=float(np.max(np.abs(state.rho_i))),
                         sup_rho_e=float(np.max(np.abs(rho_e))),
                         positive=positive)


def cathode_flux_gap(state: State, p: Parameters, grid: RadialGrid) -> float:
    """Difference between the pointwise cathode emission row and its
    integrated form (the F4 row with rho_i(2) replaced by the ion
    quadrature); O(delta) at converged states."""
    r = grid.r
    lam = state.lam
    E = field(state, grid)
    emh = np.exp(-0.5 * lam * harmonic_H(r))
    integrand = r ** 2 * townsend_h(np.abs(E), p) * emh * state.R_e
    integral = np.trapezoid(integrand, r)
    bdRe = boundary_derivative(state.R_e, grid, "cathode")
    bdV = boundary_derivative(state.V, grid, "cathode")
    rhs = -(0.25 * lam + bdV) * state.R_e[-1] \
        + 0.25 * p.gamma * np.exp(0.5 * lam) * integral
    return float(abs(bdRe - rhs))


def _solve_sparse(A, b, state, nrm):
    try:
        lu = scipy.sparse.linalg.splu(A.tocsc())
        x = lu.solve(b)
    except RuntimeError as exc:
        raise SingularJacobian(f"factorization failed: {exc}", state, nrm)
    if not np.all(np.isfinite(x)):
        raise SingularJacobian("non-finite Newton direction", state, nrm)
    return x


def newton_solve(guess: State, p: Parameters, grid: RadialGrid,
                 tol: float = NEWTON_TOL, max_iter: int = NEWTON_MAX_ITER,
                 mode: str = "fixed", constraint=None) -> NewtonResult:
    """Damped Newton on the discrete residual.

    mode="fixed" keeps lambda frozen; mode="extended" treats lambda as an
    unknown and closes the system with the caller's scalar constraint, a
    callable state -> (value, d/d(unknowns), d/d(lambda)).  Armijo
    backtracking halves the step until the residual norm decreases;
    failures raise MaxIterExceeded / LineSearchStall / SingularJacobian
    carrying the last iterate.
    """
    if mode not in ("fixed", "extended"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "extended" and constraint is None:
        raise ValueError("extended mode needs a constraint row")
    rep = admissibility(guess, grid)
    if not rep.ok:
        raise AdmissibilityError(
            f"guess field minimum {rep.min_field:.3e} at or below floor")

    state = guess.copy()

    def merit(st):
        rv = residual_vector(st, p, grid)
        if mode == "extended":
            cval = constraint(st)[0]
            return rv, float(np.hypot(norm_Y(rv, grid), cval))
        return rv, norm_Y(rv, grid)

    rv, nrm = merit(state)
    for it in range(max_iter):
        if nrm <= tol:
            return NewtonResult(state, it, nrm)
        J = jacobian(state, p, grid)
        if mode == "fixed":
            step = _solve_sparse(J, -rv, state, nrm)
            delta_lam = 0.0
        else:
            cval, dc_dx, dc_dlam = constraint(state)
            A = scipy.sparse.bmat(
                [[J, dresidual_dlambda(state, p, grid)[:, None]],
                 [scipy.sparse.csr_matrix(np.asarray(dc_dx)[None, :]),
                  np.array([[dc_dlam]])]], format="csc")
            full = _solve_sparse(A, -np.concatenate([rv, [cval]]), state, nrm)
            step, delta_lam = full[:-1], full[-1]

        x = pack(state)
        t = 1.0
        accepted = False
        while t >= MIN_STEP:
            trial = unpack(state.lam + t * delta_lam, x + t * step, grid)
            rv_t, nrm_t = merit(trial)
            if nrm_t <= (1.0 - ARMIJO_SLOPE * t) * nrm:
                state, rv, nrm = trial, rv_t, nrm_t
                accepted = True
                break
            t *= ARMIJO_FACTOR
        if not accepted:
            raise LineSearchStall("no acceptable step", state, nrm)
    if nrm <= tol:
        return NewtonResult(state, max_iter, nrm)
    raise MaxIterExceeded(f"not converged in {max_iter} iterations",
                          state, nrm)
