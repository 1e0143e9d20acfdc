"""Sparse direct solves with factorization and sparsity-pattern reuse.

CHOLMOD (through cvxopt) is preferred: its symbolic analysis is done once
per sparsity pattern and the numeric factorization is refreshed per value
set, which is the dominant cost when thousands of small cell problems share
one mesh. SuperLU from scipy is the fallback when cvxopt is absent.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import SolverBreakdownError

try:
    from cvxopt import cholmod, matrix as _cvx_matrix, spmatrix as _cvx_spmatrix

    HAVE_CHOLMOD = True
except ImportError:  # pragma: no cover - exercised only without cvxopt
    HAVE_CHOLMOD = False


class PatternSolver:
    """Cholesky-type solver for SPD matrices sharing one sparsity pattern.

    Parameters
    ----------
    pattern : scipy CSC matrix
        Canonical (sorted, duplicate-free) matrix whose pattern is reused.
        Its values are used for the initial factorization once `factor`
        or `solve` is called.
    """

    def __init__(self, pattern: sp.csc_matrix, backend: str | None = None):
        pattern = pattern.tocsc()
        pattern.sum_duplicates()
        pattern.sort_indices()
        self.n = pattern.shape[0]
        self._pattern = pattern
        if backend is None:
            backend = "cholmod" if HAVE_CHOLMOD else "superlu"
        if backend == "cholmod" and not HAVE_CHOLMOD:
            raise ValueError("cholmod backend requested but cvxopt is not installed")
        self.backend = backend
        self._factored = False
        if self.n == 0:
            return
        if backend == "cholmod":
            rows = pattern.indices.astype(np.int64)
            cols = np.repeat(np.arange(self.n, dtype=np.int64),
                             np.diff(pattern.indptr))
            self._A = _cvx_spmatrix(pattern.data, rows, cols, (self.n, self.n))
            self._symbolic = cholmod.symbolic(self._A)
            # persistent buffers with zero-copy numpy views, so per-factor
            # and per-solve costs are a memcpy instead of fresh allocations
            self._vm = _cvx_matrix(0.0, (pattern.nnz, 1))
            self._vview = np.asarray(memoryview(self._vm)).reshape(-1)
            self._bm = {}
        else:
            self._lu = None

    def factor(self, data: np.ndarray | None = None) -> None:
        """Numeric factorization with `data` in the pattern's CSC order."""
        if self.n == 0:
            self._factored = True
            return
        if data is None:
            data = self._pattern.data
        if self.backend == "cholmod":
            self._vview[:] = data
            self._A.V = self._vm
            try:
                cholmod.numeric(self._A, self._symbolic)
            except ArithmeticError as exc:
                raise SolverBreakdownError(
                    "matrix is not positive definite on the constrained subspace"
                ) from exc
        else:
            mat = sp.csc_matrix(
                (np.asarray(data, dtype=float), self._pattern.indices,
                 self._pattern.indptr), shape=self._pattern.shape)
            try:
                self._lu = spla.splu(mat, permc_spec="MMD_AT_PLUS_A",
                                     diag_pivot_thresh=0.0,
                                     options={"SymmetricMode": True})
            except RuntimeError as exc:
                raise SolverBreakdownError(str(exc)) from exc
        self._factored = True

    def solve(self, b: np.ndarray) -> np.ndarray:
        """Solve for one right-hand side or a stack of them (n, k)."""
        if not self._factored:
            self.factor()
        b = np.asarray(b, dtype=float)
        if self.n == 0:
            return np.zeros_like(b)
        if self.backend == "cholmod":
            k = b.shape[1] if b.ndim > 1 else 1
            buf = self._bm.get(k)
            if buf is None:
                bm = _cvx_matrix(0.0, (self.n, k))
                buf = (bm, np.asarray(memoryview(bm)))
                self._bm[k] = buf
            bm, view = buf
            view[:] = b.reshape(self.n, k)
            cholmod.solve(self._symbolic, bm)
            return view.copy().reshape(b.shape)
        if b.ndim > 1:
            return np.column_stack([self._lu.solve(b[:, k])
                                    for k in range(b.shape[1])])
        return self._lu.solve(b)


def factorize(matrix: sp.spmatrix) -> PatternSolver:
    """One-shot factorization of an SPD sparse matrix."""
    solver = PatternSolver(matrix.tocsc())
    solver.factor()
    return solver
