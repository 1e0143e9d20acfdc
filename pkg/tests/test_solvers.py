import numpy as np
import pytest
import scipy.sparse as sp

from twoscale.errors import SolverBreakdownError
from twoscale.solvers import HAVE_CHOLMOD, PatternSolver, factorize


def _spd(n, shift=2.5):
    main = np.full(n, shift)
    off = np.full(n - 1, -1.0)
    return sp.diags([off, main, off], [-1, 0, 1], format="csc")


def _rhs(n, k=None):
    rng = np.random.default_rng(7)
    return rng.standard_normal(n if k is None else (n, k))


def test_one_shot_factorize_solves():
    A = _spd(40)
    b = _rhs(40)
    x = factorize(A).solve(b)
    np.testing.assert_allclose(A @ x, b, atol=1e-12)


@pytest.mark.skipif(not HAVE_CHOLMOD, reason="cvxopt not installed")
def test_backends_agree():
    A = _spd(60)
    b = _rhs(60)
    x_ch = PatternSolver(A, backend="cholmod").solve(b)
    x_lu = PatternSolver(A, backend="superlu").solve(b)
    np.testing.assert_allclose(x_ch, x_lu, rtol=1e-12, atol=1e-14)


def test_stacked_rhs_matches_column_solves():
    A = _spd(25)
    B = _rhs(25, 3)
    solver = factorize(A)
    X = solver.solve(B)
    assert X.shape == (25, 3)
    for k in range(3):
        np.testing.assert_allclose(X[:, k], solver.solve(B[:, k]),
                                   rtol=0, atol=1e-14)


def test_pattern_reuse_refreshes_values():
    A = _spd(30)
    b = _rhs(30)
    solver = PatternSolver(A)
    solver.factor()
    x1 = solver.solve(b)
    # same pattern, doubled values: the solution must halve
    solver.factor(2.0 * A.data)
    x2 = solver.solve(b)
    np.testing.assert_allclose(x2, 0.5 * x1, rtol=1e-13)


def test_solve_without_explicit_factor():
    A = _spd(12)
    b = _rhs(12)
    x = PatternSolver(A).solve(b)
    np.testing.assert_allclose(A @ x, b, atol=1e-12)


def test_repeated_solves_are_bitwise_identical():
    A = _spd(50)
    b = _rhs(50)
    x1 = PatternSolver(A).solve(b)
    x2 = PatternSolver(A).solve(b)
    assert np.array_equal(x1, x2)


@pytest.mark.skipif(not HAVE_CHOLMOD, reason="cvxopt not installed")
def test_cholmod_rejects_indefinite_matrix():
    A = _spd(10).tocsc()
    A[5, 5] = -4.0
    solver = PatternSolver(A.tocsc(), backend="cholmod")
    with pytest.raises(SolverBreakdownError):
        solver.factor()


def test_superlu_rejects_singular_matrix():
    A = _spd(10).tocsc()
    solver = PatternSolver(A, backend="superlu")
    with pytest.raises(SolverBreakdownError):
        solver.factor(np.zeros_like(A.data))


def test_zero_dof_system():
    A = sp.csc_matrix((0, 0))
    solver = PatternSolver(A)
    out = solver.solve(np.zeros(0))
    assert out.shape == (0,)


def test_cholmod_request_without_cvxopt_guard():
    if HAVE_CHOLMOD:
        pytest.skip("cvxopt installed; the guard is unreachable")
    with pytest.raises(ValueError):
        PatternSolver(_spd(4), backend="cholmod")
