import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from robinneck.solvers import FactorizationError, IncompleteCholesky, NonConvergenceError, pcg


def laplace_2d(n):
    T = sp.diags([-1, 2, -1], [-1, 0, 1], shape=(n, n))
    I = sp.identity(n)
    return (sp.kron(T, I) + sp.kron(I, T)).tocsr()


def test_ic0_exact_on_tridiagonal():
    # no fill-in, so IC(0) is the exact Cholesky factor
    A = sp.diags([-1, 2.5, -1], [-1, 0, 1], shape=(30, 30)).tocsr()
    ic = IncompleteCholesky(A)
    b = np.arange(30.0)
    assert ic.shift == 0.0
    assert_allclose(A @ ic.solve(b), b, rtol=1e-12)


def test_ic0_reproduces_pattern_entries():
    A = laplace_2d(8)
    ic = IncompleteCholesky(A)
    L = sp.csr_matrix((ic.L, ic.indices, ic.indptr), shape=A.shape)
    # IC(0): L L^T matches A on the sparsity pattern of A
    R = (L @ L.T).tocsr()
    mask = A.copy()
    mask.data[:] = 1.0
    assert_allclose((R.multiply(mask)).toarray(), A.toarray(), atol=1e-12)


def test_ic0_shift_on_breakdown():
    # indefinite matrix: IC(0) breaks down until the diagonal is shifted
    A = sp.csr_matrix(np.array([[1.0, 2.0], [2.0, 1.0]]))
    ic = IncompleteCholesky(A, max_tries=20)
    assert ic.shift > 0


def test_missing_diagonal():
    A = sp.csr_matrix(np.array([[0.0, 1.0], [1.0, 2.0]]))
    with pytest.raises(FactorizationError):
        IncompleteCholesky(A)


@settings(max_examples=20, deadline=None)
@given(st.integers(3, 20), st.integers(0, 2 ** 31 - 1))
def test_pcg_solves_spd(n, seed):
    rng = np.random.default_rng(seed)
    A = laplace_2d(n) + sp.identity(n * n) * 1e-2
    b = rng.standard_normal(n * n)
    ic = IncompleteCholesky(A)
    x, it, hist = pcg(lambda v: A @ v, b, ic.solve, rtol=1e-10)
    assert np.linalg.norm(A @ x - b) <= 1e-10 * np.linalg.norm(b)
    assert hist[-1] <= 1e-10 * np.linalg.norm(b)


def test_preconditioning_reduces_iterations():
    A = laplace_2d(30)
    b = np.ones(A.shape[0])
    _, it_plain, _ = pcg(lambda v: A @ v, b, None)
    _, it_ic, _ = pcg(lambda v: A @ v, b, IncompleteCholesky(A).solve)
    assert it_ic < 0.6 * it_plain


def test_zero_rhs():
    A = laplace_2d(4)
    x, it, _ = pcg(lambda v: A @ v, np.zeros(16))
    assert it == 0 and not x.any()


def test_non_convergence():
    A = laplace_2d(20)
    with pytest.raises(NonConvergenceError) as info:
        pcg(lambda v: A @ v, np.ones(400), None, maxiter=5)
    assert len(info.value.history) == 6
