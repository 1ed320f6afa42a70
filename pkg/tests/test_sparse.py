"""Sparse matrix invariants, iterative solvers against dense LU, and the
smallest-singular-value estimator."""

import math

import numpy as np
import pytest

from qscope.rng import SplitMix64
from qscope.sparse import (SparseMatrix, SolveReport, bicgstab_solve, cg_solve,
                           smallest_singular_estimate, spmv)


def random_spd(n, seed=0):
    rng = SplitMix64(seed)
    a = np.array([[rng.next_symmetric() for _ in range(n)] for _ in range(n)])
    return a @ a.T + n * np.eye(n)


def test_csr_validation_rejects_unsorted_columns():
    with pytest.raises(ValueError):
        SparseMatrix(2, [0, 2, 3], [1, 0, 1], [1.0, 2.0, 3.0])


def test_csr_validation_rejects_explicit_zeros():
    with pytest.raises(ValueError):
        SparseMatrix(2, [0, 1, 2], [0, 1], [1.0, 0.0])


def test_from_dense_roundtrip():
    a = np.array([[2.0, -1.0, 0.0], [-1.0, 2.0, -1.0], [0.0, -1.0, 2.0]])
    M = SparseMatrix.from_dense(a)
    assert np.array_equal(M.to_dense(), a)
    assert np.array_equal(M.diagonal(), np.diag(a))


def test_identity_and_spmv():
    M = SparseMatrix.identity(4)
    x = np.arange(4.0)
    assert np.array_equal(spmv(M, x), x)
    with pytest.raises(ValueError):
        spmv(M, np.zeros(5))


def test_transpose_and_scaling():
    a = np.array([[1.0, 2.0], [0.0, 3.0]])
    M = SparseMatrix.from_dense(a)
    assert np.array_equal(M.transpose().to_dense(), a.T)
    assert np.array_equal(M.scaled(2.0).to_dense(), 2.0 * a)


def test_cg_matches_dense_lu():
    a = random_spd(60, seed=3)
    b = np.linspace(-1.0, 1.0, 60)
    x, rep = cg_solve(SparseMatrix.from_dense(a), b, tol=1e-12)
    assert rep.converged and rep.method == "cg"
    assert np.max(np.abs(x - np.linalg.solve(a, b))) <= 1e-8


def test_bicgstab_matches_dense_lu_on_nonsymmetric():
    rng = SplitMix64(11)
    n = 50
    a = np.array([[rng.next_symmetric() for _ in range(n)] for _ in range(n)])
    a += n * np.eye(n)
    b = np.ones(n)
    x, rep = bicgstab_solve(SparseMatrix.from_dense(a), b, tol=1e-12)
    assert rep.converged
    assert np.max(np.abs(x - np.linalg.solve(a, b))) <= 1e-8


def test_zero_rhs_gives_zero_solution():
    M = SparseMatrix.from_dense(random_spd(10))
    for solver in (cg_solve, bicgstab_solve):
        x, rep = solver(M, np.zeros(10))
        assert np.all(x == 0.0) and rep.converged and rep.iterations == 0


def test_solvers_are_deterministic():
    a = random_spd(40, seed=5)
    b = np.sin(np.arange(40.0))
    M = SparseMatrix.from_dense(a)
    x1, _ = cg_solve(M, b)
    x2, _ = cg_solve(M, b)
    assert np.array_equal(x1, x2)


def test_smallest_singular_matches_dense_svd():
    a = random_spd(30, seed=9)
    sigma = smallest_singular_estimate(SparseMatrix.from_dense(a), tol=1e-6)
    exact = np.linalg.svd(a, compute_uv=False)[-1]
    assert math.isclose(sigma, exact, rel_tol=1e-3)


def test_smallest_singular_of_singular_matrix_is_zero():
    a = np.ones((4, 4)) + np.eye(4) * 0.0
    # rank-1 matrix: the inner solves break down and the estimator reports 0
    sigma = smallest_singular_estimate(SparseMatrix.from_dense(a))
    assert sigma == 0.0


def test_report_fields():
    rep = SolveReport(3, 1e-12, True, "cg")
    assert rep.iterations == 3 and rep.converged
