"""Compressed-row sparse matrices and the iterative solvers used for the
discretized elliptic operator.

Solvers are deterministic: zero initial guess, Jacobi preconditioning, no
randomized restarts, so repeated runs are bit-identical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp


@dataclass(frozen=True)
class SolveReport:
    iterations: int
    relative_residual: float
    converged: bool
    method: str


class SparseMatrix:
    """Square sparse matrix in compressed-row layout."""

    def __init__(self, n: int, indptr, indices, data):
        indptr = np.asarray(indptr, dtype=np.int64)
        indices = np.asarray(indices, dtype=np.int64)
        data = np.asarray(data, dtype=float)
        if indptr.shape != (n + 1,) or indices.shape != data.shape:
            raise ValueError("inconsistent CSR arrays")
        for row in range(n):
            cols = indices[indptr[row]:indptr[row + 1]]
            if cols.size and (np.any(np.diff(cols) <= 0) or cols[0] < 0 or cols[-1] >= n):
                raise ValueError(f"row {row}: column indices not sorted/in range")
        if np.any(data == 0.0):
            raise ValueError("explicit zeros stored")
        self.n = n
        self.indptr = indptr
        self.indices = indices
        self.data = data
        self._csr = sp.csr_array((data, indices, indptr), shape=(n, n))

    @classmethod
    def from_csr(cls, csr) -> "SparseMatrix":
        csr = sp.csr_array(csr)
        csr.sum_duplicates()
        csr.eliminate_zeros()
        csr.sort_indices()
        return cls(csr.shape[0], csr.indptr, csr.indices, csr.data)

    @classmethod
    def from_dense(cls, a) -> "SparseMatrix":
        return cls.from_csr(sp.csr_array(np.asarray(a, dtype=float)))

    @classmethod
    def identity(cls, n: int) -> "SparseMatrix":
        return cls.from_csr(sp.eye_array(n, format="csr"))

    def to_dense(self) -> np.ndarray:
        return self._csr.toarray()

    def diagonal(self) -> np.ndarray:
        return self._csr.diagonal()

    def transpose(self) -> "SparseMatrix":
        return SparseMatrix.from_csr(self._csr.T)

    def scaled(self, alpha: float) -> "SparseMatrix":
        return SparseMatrix.from_csr(self._csr * alpha)


def spmv(M: SparseMatrix, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (M.n,):
        raise ValueError(f"dimension mismatch: matrix is {M.n}, vector is {x.shape}")
    return M._csr @ x


def _jacobi(M: SparseMatrix) -> np.ndarray:
    d = M.diagonal()
    inv = np.ones_like(d)
    nz = d != 0.0
    inv[nz] = 1.0 / d[nz]
    return inv


def cg_solve(M: SparseMatrix, b, tol: float = 1e-10, maxit: int | None = None):
    """Jacobi-preconditioned conjugate gradients for SPD systems."""
    b = np.asarray(b, dtype=float)
    if b.shape != (M.n,):
        raise ValueError("dimension mismatch")
    nb = float(np.linalg.norm(b))
    if nb == 0.0:
        return np.zeros(M.n), SolveReport(0, 0.0, True, "cg")
    if maxit is None:
        maxit = 10 * M.n

    dinv = _jacobi(M)
    x = np.zeros(M.n)
    r = b.copy()
    z = dinv * r
    p = z.copy()
    rz = float(r @ z)
    for k in range(1, maxit + 1):
        Ap = spmv(M, p)
        pAp = float(p @ Ap)
        if pAp == 0.0:
            break
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        res = float(np.linalg.norm(r)) / nb
        if res <= tol:
            return x, SolveReport(k, res, True, "cg")
        z = dinv * r
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    res = float(np.linalg.norm(b - spmv(M, x))) / nb
    return x, SolveReport(maxit, res, res <= tol, "cg")


def bicgstab_solve(M: SparseMatrix, b, tol: float = 1e-10, maxit: int | None = None):
    """Jacobi-preconditioned BiCGStab; works on indefinite systems.
    Breakdown (rho ~ 0) is reported through the method tag."""
    b = np.asarray(b, dtype=float)
    if b.shape != (M.n,):
        raise ValueError("dimension mismatch")
    nb = float(np.linalg.norm(b))
    if nb == 0.0:
        return np.zeros(M.n), SolveReport(0, 0.0, True, "bicgstab")
    if maxit is None:
        maxit = 10 * M.n

    dinv = _jacobi(M)
    x = np.zeros(M.n)
    r = b.copy()
    r0 = r.copy()
    rho = alpha = omega = 1.0
    v = np.zeros(M.n)
    p = np.zeros(M.n)
    eps = 1e-300
    for k in range(1, maxit + 1):
        rho_new = float(r0 @ r)
        if abs(rho_new) < eps * nb * nb:
            res = float(np.linalg.norm(b - spmv(M, x))) / nb
            return x, SolveReport(k, res, False, "bicgstab(breakdown)")
        beta = (rho_new / rho) * (alpha / omega) if k > 1 else 0.0
        rho = rho_new
        p = r + beta * (p - omega * v)
        phat = dinv * p
        v = spmv(M, phat)
        denom = float(r0 @ v)
        if abs(denom) < eps:
            res = float(np.linalg.norm(b - spmv(M, x))) / nb
            return x, SolveReport(k, res, False, "bicgstab(breakdown)")
        alpha = rho / denom
        s = r - alpha * v
        if float(np.linalg.norm(s)) / nb <= tol:
            x += alpha * phat
            res = float(np.linalg.norm(b - spmv(M, x))) / nb
            return x, SolveReport(k, res, res <= tol, "bicgstab")
        shat = dinv * s
        t = spmv(M, shat)
        tt = float(t @ t)
        if tt == 0.0:
            res = float(np.linalg.norm(b - spmv(M, x))) / nb
            return x, SolveReport(k, res, False, "bicgstab(breakdown)")
        omega = float(t @ s) / tt
        x += alpha * phat + omega * shat
        r = s - omega * t
        res = float(np.linalg.norm(r)) / nb
        if res <= tol:
            res = float(np.linalg.norm(b - spmv(M, x))) / nb
            return x, SolveReport(k, res, res <= tol, "bicgstab")
        if omega == 0.0:
            return x, SolveReport(k, res, False, "bicgstab(breakdown)")
    res = float(np.linalg.norm(b - spmv(M, x))) / nb
    return x, SolveReport(maxit, res, res <= tol, "bicgstab")


def smallest_singular_estimate(M: SparseMatrix, tol: float = 1e-3,
                               maxit: int = 100) -> float:
    """Smallest singular value of M, by inverse power iteration on M^T M.

    Each iteration applies (M^T M)^{-1} through two iterative solves
    (M^T w = x, then M y = w); sigma is read off as the Rayleigh quotient
    ||M x|| of the current unit iterate. Returns ~0 when an inner solve
    detects a singular matrix (rank-deficient M makes M^T w = x
    inconsistent for a generic x, so BiCGStab fails to converge).
    """
    from .rng import SplitMix64

    Mt = M.transpose()
    # generic deterministic start: must not be special to M (a uniform
    # vector can lie inside the range of a rank-deficient matrix)
    rng = SplitMix64(0x5EED)
    x = np.array([rng.next_symmetric() for _ in range(M.n)])
    x /= float(np.linalg.norm(x))
    inner_tol = min(1e-10, tol * 1e-3)
    sigma = 0.0
    for _ in range(maxit):
        w, rep1 = bicgstab_solve(Mt, x, tol=inner_tol)
        y, rep2 = bicgstab_solve(M, w, tol=inner_tol)
        if not (rep1.converged and rep2.converged):
            return 0.0
        ny = float(np.linalg.norm(y))
        if ny == 0.0:
            return 0.0
        x = y / ny
        sigma_new = float(np.linalg.norm(spmv(M, x)))
        if sigma > 0.0 and abs(sigma_new - sigma) <= tol * sigma:
            return sigma_new
        sigma = sigma_new
    return sigma
