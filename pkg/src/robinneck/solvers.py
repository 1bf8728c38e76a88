"""Preconditioned conjugate gradients with a zero-fill incomplete Cholesky
factor.

The factorisation and the triangular solves are compiled with numba; the
operator itself is any callable ``x -> A @ x`` so the Robin system's dense
rank-one terms can stay matrix-free.
"""
from __future__ import annotations

import numba
import numpy as np
import scipy.sparse as sp


class NonConvergenceError(RuntimeError):
    def __init__(self, message, history):
        super().__init__(message)
        self.history = list(history)


class FactorizationError(RuntimeError):
    pass


@numba.njit(cache=True)
def _ic0(indptr, indices, data, n):
    # rows of the lower triangle, column indices sorted, diagonal last
    L = data.copy()
    for i in range(n):
        start, end = indptr[i], indptr[i + 1]
        for p in range(start, end - 1):
            j = indices[p]
            # dot(L[i, :j], L[j, :j]) over the common sparsity pattern
            s = L[p]
            a, b = start, indptr[j]
            bend = indptr[j + 1] - 1
            while a < p and b < bend:
                ca, cb = indices[a], indices[b]
                if ca == cb:
                    s -= L[a] * L[b]
                    a += 1
                    b += 1
                elif ca < cb:
                    a += 1
                else:
                    b += 1
            L[p] = s / L[indptr[j + 1] - 1]
        d = L[end - 1]
        for p in range(start, end - 1):
            d -= L[p] * L[p]
        if d <= 0.0:
            return L, i
        L[end - 1] = np.sqrt(d)
    return L, -1


@numba.njit(cache=True)
def _ic_solve(indptr, indices, L, r):
    n = r.shape[0]
    y = r.copy()
    for i in range(n):
        s = y[i]
        end = indptr[i + 1] - 1
        for p in range(indptr[i], end):
            s -= L[p] * y[indices[p]]
        y[i] = s / L[end]
    for i in range(n - 1, -1, -1):
        end = indptr[i + 1] - 1
        y[i] /= L[end]
        yi = y[i]
        for p in range(indptr[i], end):
            y[indices[p]] -= L[p] * yi
    return y


class IncompleteCholesky:
    """IC(0) factor ``L L^T ~ A`` of a sparse SPD matrix.

    On breakdown the factorisation is retried on ``A + shift * diag(A)``
    with the shift growing geometrically from ``1e-4``.
    """

    def __init__(self, A: sp.spmatrix, max_tries: int = 12):
        A = sp.csr_matrix(A)
        n = A.shape[0]
        low = sp.tril(A, format="csr")
        low.sort_indices()
        if np.any(np.diff(low.indptr) == 0) or np.any(
            low.indices[low.indptr[1:] - 1] != np.arange(n)
        ):
            raise FactorizationError("matrix has a zero or missing diagonal entry")
        diag = low.data[low.indptr[1:] - 1].copy()
        self.shift = 0.0
        shift = 0.0
        for _ in range(max_tries):
            data = low.data.copy()
            data[low.indptr[1:] - 1] = diag * (1.0 + shift)
            L, fail = _ic0(low.indptr, low.indices, data, n)
            if fail < 0:
                break
            shift = 1e-4 if shift == 0.0 else 4.0 * shift
        else:
            raise FactorizationError(f"IC(0) broke down at row {fail} for all shifts")
        self.shift = shift
        self.indptr, self.indices, self.L = low.indptr, low.indices, L

    def solve(self, r: np.ndarray) -> np.ndarray:
        return _ic_solve(self.indptr, self.indices, self.L, np.ascontiguousarray(r, dtype=float))


def pcg(apply_A, b, precond=None, x0=None, rtol=1e-10, maxiter=20000):
    """Preconditioned CG for SPD ``A``; stops when ``|r| <= rtol |b|``.

    Returns ``(x, iterations, history)`` where ``history`` holds the residual
    norms.  Raises :class:`NonConvergenceError` after ``maxiter`` steps.
    """
    b = np.asarray(b, dtype=float)
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)
    bnorm = np.linalg.norm(b)
    r = b - apply_A(x) if x0 is not None else b.copy()
    history = [np.linalg.norm(r)]
    if bnorm == 0.0:
        return np.zeros_like(b), 0, history
    target = rtol * bnorm
    if history[0] <= target:
        return x, 0, history
    z = precond(r) if precond is not None else r.copy()
    p = z.copy()
    rz = r @ z
    for it in range(1, maxiter + 1):
        Ap = apply_A(p)
        alpha = rz / (p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        rn = np.linalg.norm(r)
        history.append(rn)
        if rn <= target:
            # guard against drift of the recursive residual
            r_true = b - apply_A(x)
            rt = np.linalg.norm(r_true)
            if rt <= target:
                history[-1] = rt
                return x, it, history
            r = r_true
        z = precond(r) if precond is not None else r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise NonConvergenceError(
        f"CG did not reach rtol={rtol:g} in {maxiter} iterations "
        f"(last residual {history[-1] / bnorm:.3e} relative)",
        history,
    )
