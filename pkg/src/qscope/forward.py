"""Assembly of the divergence-form operator L_q = div(A grad .) + q and the
Dirichlet solve, plus the admissibility estimate built on the resolvent bound.

Sign convention: the assembled matrix is -L_q restricted to interior nodes,
so the q = 0 case is symmetric positive definite. Diffusion coefficients are
sampled at cell-edge midpoints by arithmetic averaging; the mixed a12 term
uses the standard symmetric corner stencil. The result is exactly symmetric
and O(h^2) consistent for Lipschitz coefficients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .grid import Grid, RegionMask, ScalarField, TensorField, linf_norm
from .sparse import (SolveReport, SparseMatrix, bicgstab_solve, cg_solve,
                     smallest_singular_estimate)


@dataclass(frozen=True)
class Problem:
    grid: Grid
    A: TensorField
    q: ScalarField
    g: ScalarField  # boundary trace; interior values are ignored


@dataclass(frozen=True)
class Admissibility:
    resolvent_norm_estimate: float
    q0: float
    k: float
    threshold: float
    member: bool
    diagnostic: str = ""


def apply_lq(grid: Grid, A: TensorField, q: ScalarField | None, v: np.ndarray) -> np.ndarray:
    """Pointwise L_q v at interior nodes (zero on the boundary ring)."""
    hx, hy = grid.hx, grid.hy
    a11, a12, a22 = A.a11, A.a12, A.a22
    out = np.zeros(grid.shape)

    c = v[1:-1, 1:-1]
    ae = 0.5 * (a11[1:-1, 1:-1] + a11[2:, 1:-1])
    aw = 0.5 * (a11[1:-1, 1:-1] + a11[:-2, 1:-1])
    an = 0.5 * (a22[1:-1, 1:-1] + a22[1:-1, 2:])
    as_ = 0.5 * (a22[1:-1, 1:-1] + a22[1:-1, :-2])
    out[1:-1, 1:-1] = (
        (ae * (v[2:, 1:-1] - c) - aw * (c - v[:-2, 1:-1])) / hx**2
        + (an * (v[1:-1, 2:] - c) - as_ * (c - v[1:-1, :-2])) / hy**2
    )
    # mixed term d/dx(a12 d/dy v) + d/dy(a12 d/dx v), symmetric corner stencil
    if np.any(a12 != 0.0):
        f = 1.0 / (4.0 * hx * hy)
        ke, kw = a12[2:, 1:-1], a12[:-2, 1:-1]
        kn, ks = a12[1:-1, 2:], a12[1:-1, :-2]
        out[1:-1, 1:-1] += f * (
            (ke + kn) * v[2:, 2:] + (kw + ks) * v[:-2, :-2]
            - (ke + ks) * v[2:, :-2] - (kw + kn) * v[:-2, 2:]
        )
    if q is not None:
        out[1:-1, 1:-1] += q.values[1:-1, 1:-1] * c
    return out


def assemble(grid: Grid, A: TensorField, q: ScalarField | None) -> SparseMatrix:
    """Matrix of -L_q acting on interior unknowns (Dirichlet columns are
    eliminated; the companion lift lives in solve_forward)."""
    lam = A.min_eigenvalue()
    if lam <= 0.0:
        raise ValueError(f"ellipticity violated: min eigenvalue {lam} <= 0")

    nx, ny = grid.shape
    hx, hy = grid.hx, grid.hy
    a11, a12, a22 = A.a11, A.a12, A.a22

    inner = (slice(1, -1), slice(1, -1))
    ae = 0.5 * (a11[inner] + a11[2:, 1:-1]) / hx**2
    aw = 0.5 * (a11[inner] + a11[:-2, 1:-1]) / hx**2
    an = 0.5 * (a22[inner] + a22[1:-1, 2:]) / hy**2
    as_ = 0.5 * (a22[inner] + a22[1:-1, :-2]) / hy**2
    diag = ae + aw + an + as_
    if q is not None:
        diag = diag - q.values[inner]

    f = 1.0 / (4.0 * hx * hy)
    ke, kw = a12[2:, 1:-1] * f, a12[:-2, 1:-1] * f
    kn, ks = a12[1:-1, 2:] * f, a12[1:-1, :-2] * f

    mi, mj = nx - 2, ny - 2
    idx = np.arange(mi * mj).reshape(mi, mj)

    rows, cols, vals = [], [], []

    def add(coef, di, dj):
        # neighbor (i+di, j+dj) in interior coordinates; off-grid rows are
        # boundary couplings handled by the lift, not stored here
        si = slice(max(0, -di), mi - max(0, di))
        sj = slice(max(0, -dj), mj - max(0, dj))
        ti = slice(max(0, di), mi - max(0, -di))
        tj = slice(max(0, dj), mj - max(0, -dj))
        rows.append(idx[si, sj].ravel())
        cols.append(idx[ti, tj].ravel())
        vals.append(coef[si, sj].ravel())

    add(diag, 0, 0)
    add(-ae, 1, 0)
    add(-aw, -1, 0)
    add(-an, 0, 1)
    add(-as_, 0, -1)
    if np.any(a12 != 0.0):
        add(-(ke + kn), 1, 1)
        add(-(kw + ks), -1, -1)
        add(ke + ks, 1, -1)
        add(kw + kn, -1, 1)

    m = mi * mj
    coo = sp.coo_array(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(m, m),
    )
    return SparseMatrix.from_csr(coo.tocsr())


def boundary_extension(grid: Grid, g: ScalarField) -> np.ndarray:
    """Field equal to g on the boundary ring and 0 inside."""
    ext = np.zeros(grid.shape)
    b = grid.boundary()
    ext[b] = g.values[b]
    return ext


def dirichlet_lift_rhs(grid: Grid, A: TensorField, q: ScalarField | None,
                       g: ScalarField) -> np.ndarray:
    """Right-hand side vector for -L_q u = 0 with u = g on the boundary."""
    ext = boundary_extension(grid, g)
    return apply_lq(grid, A, q, ext)[1:-1, 1:-1].ravel()


_PRINCIPAL_CACHE: dict = {}


def principal_eigenvalue_floor(grid: Grid, A: TensorField) -> float:
    """Lower bound for the principal Dirichlet eigenvalue of -div(A grad .):
    ellipticity floor times the exact smallest eigenvalue of the discrete
    Dirichlet Laplacian."""
    lam_lap = 8.0 * math.sin(math.pi * grid.hx / 2.0) ** 2 / grid.hx**2
    return A.min_eigenvalue() * lam_lap


def solve_forward(p: Problem, tol: float = 1e-10):
    """Solve the Dirichlet problem L_q u = 0, u = g on the boundary.

    CG when the operator is certified positive definite (q below the
    principal eigenvalue of the diffusion part), BiCGStab otherwise.
    Non-convergence is reported, never silently accepted.
    """
    M = assemble(p.grid, p.A, p.q)
    rhs = dirichlet_lift_rhs(p.grid, p.A, p.q, p.g)
    if float(np.max(p.q.values)) < 0.99 * principal_eigenvalue_floor(p.grid, p.A):
        x, report = cg_solve(M, rhs, tol=tol)
    else:
        x, report = bicgstab_solve(M, rhs, tol=tol)
    u = boundary_extension(p.grid, p.g)
    u[1:-1, 1:-1] = x.reshape(p.grid.nx - 2, p.grid.ny - 2)
    return ScalarField(p.grid, u), report


def residual_field(p: Problem, u: ScalarField) -> ScalarField:
    """Pointwise discrete L_q u (zero on the boundary ring)."""
    return ScalarField(p.grid, apply_lq(p.grid, p.A, p.q, u.values))


def estimate_admissibility(grid: Grid, A: TensorField, q: ScalarField,
                           q_star: ScalarField, q0: float, k: float,
                           eig_tol: float = 1e-4) -> Admissibility:
    """Membership test for the admissible set: ||q - q*||_inf below
    min(k / ||A_{q*}^{-1}||, q0), with the resolvent norm estimated from the
    smallest singular value of the discrete reference operator."""
    if not (0.0 < k < 1.0):
        raise ValueError("k must lie in (0, 1)")
    M = assemble(grid, A, q_star)
    sigma = smallest_singular_estimate(M, tol=eig_tol)
    if sigma <= 0.0:
        return Admissibility(math.inf, q0, k, 0.0, False,
                             "reference operator numerically singular")
    resolvent = 1.0 / sigma
    threshold = min(k * sigma, q0)
    diff = linf_norm(ScalarField(grid, q.values - q_star.values))
    return Admissibility(resolvent, q0, k, threshold, diff <= threshold)


# ---------------------------------------------------------------------------
# Manufactured problem library

def k1_problem(n: int) -> Problem:
    """q = 2, u = cos(x)cos(y): positive solution, no interior critical point."""
    g = Grid(n, n)
    return Problem(g, TensorField.identity(g), ScalarField.constant(g, 2.0),
                   ScalarField.from_function(g, lambda X, Y: np.cos(X) * np.cos(Y)))


def k2_problem(n: int) -> Problem:
    """q = 8, u = cos(2x)cos(2y): nodal lines at x = pi/4 and y = pi/4."""
    g = Grid(n, n)
    return Problem(g, TensorField.identity(g), ScalarField.constant(g, 8.0),
                   ScalarField.from_function(g, lambda X, Y: np.cos(2 * X) * np.cos(2 * Y)))


def varcoef_problem(n: int) -> Problem:
    """Variable diagonal coefficients A = diag(1+0.3x, 1+0.3y), q = 2."""
    g = Grid(n, n)
    A = TensorField.diagonal(g, lambda X, Y: 1.0 + 0.3 * X, lambda X, Y: 1.0 + 0.3 * Y)
    return Problem(g, A, ScalarField.constant(g, 2.0),
                   ScalarField.from_function(g, lambda X, Y: np.cos(X) * np.cos(Y)))


def manufactured_solution(tag: str, grid: Grid) -> ScalarField | None:
    if tag == "k1":
        return ScalarField.from_function(grid, lambda X, Y: np.cos(X) * np.cos(Y))
    if tag == "k2":
        return ScalarField.from_function(grid, lambda X, Y: np.cos(2 * X) * np.cos(2 * Y))
    return None


def make_problem(tag: str, n: int) -> Problem:
    makers = {"k1": k1_problem, "k2": k2_problem, "varcoef": varcoef_problem}
    if tag not in makers:
        raise ValueError(f"unknown problem tag {tag!r}")
    return makers[tag](n)
