from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dualcbf.errors import BreakdownError, DimensionMismatchError, InvalidParamError, SingularMatrixError
from dualcbf.krylov import LinearOperator, LUFactor, diagonal_operator, gmres, lu_factor_solve


def random_system(n, seed, shift=4.0):
    rng = np.random.default_rng(seed)
    A = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(n) + shift * np.eye(n)
    b = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return A, b


def test_identity_one_iteration():
    b = np.arange(1.0, 6.0) + 1j
    rep = gmres(np.eye(5), b, 1e-12)
    assert rep.iterations == 1 and rep.converged
    np.testing.assert_allclose(rep.x, b, rtol=1e-14)


def test_diagonal_system_krylov_bound():
    A = np.diag(np.arange(1.0, 11.0))
    rep = gmres(A, np.ones(10), 1e-12)
    assert rep.converged and rep.iterations <= 10
    np.testing.assert_allclose(rep.x, 1 / np.arange(1.0, 11.0), rtol=1e-10)


def test_matches_lu_oracle():
    A, b = random_system(50, 1, shift=0.0)
    A += 3 * np.eye(50)
    tol = 1e-8
    rep = gmres(A, b, tol)
    x_lu = lu_factor_solve(A, b)
    assert rep.converged
    assert np.linalg.norm(rep.x - x_lu) / np.linalg.norm(x_lu) < 10 * tol


def test_history_starts_at_one_and_is_monotone():
    A, b = random_system(80, 2, shift=1.0)
    rep = gmres(A, b, 1e-10)
    h = np.array(rep.history)
    assert h[0] == pytest.approx(1.0)
    assert np.all(np.diff(h) <= 1e-15)
    assert len(h) == rep.iterations + 1


def test_true_residual_consistent():
    A, b = random_system(60, 3, shift=2.0)
    rep = gmres(A, b, 1e-9)
    assert rep.iterations < 60
    true = np.linalg.norm(b - A @ rep.x) / np.linalg.norm(b)
    assert true == pytest.approx(rep.true_residual, rel=1e-6)
    assert rep.final_residual / 10 <= rep.true_residual <= 10 * rep.final_residual


def test_exact_right_preconditioner_one_iteration():
    A, b = random_system(30, 4)
    Ainv = np.linalg.inv(A)
    rep = gmres(A, b, 1e-10, right_precond=LinearOperator(30, lambda x: Ainv @ x))
    assert rep.iterations == 1
    np.testing.assert_allclose(A @ rep.x, b, rtol=1e-10, atol=1e-10)


def test_right_precond_returns_unpreconditioned_solution():
    A, b = random_system(40, 5)
    d = 1.0 / np.diag(A)
    rep = gmres(A, b, 1e-11, right_precond=diagonal_operator(d))
    np.testing.assert_allclose(rep.x, np.linalg.solve(A, b), rtol=1e-9)


def test_zero_rhs():
    rep = gmres(np.eye(4) * 2, np.zeros(4), 1e-6)
    assert rep.iterations == 0 and rep.converged
    assert np.all(rep.x == 0)


def test_max_iter_reports_non_convergence():
    A, b = random_system(100, 6, shift=0.2)
    rep = gmres(A, b, 1e-14, max_iter=5)
    assert not rep.converged
    assert rep.iterations == 5
    assert rep.final_residual > 1e-14


def test_restart_still_converges():
    A, b = random_system(60, 7)
    rep = gmres(A, b, 1e-10, max_iter=400, restart=10)
    assert rep.converged
    np.testing.assert_allclose(rep.x, np.linalg.solve(A, b), rtol=1e-8)


def test_breakdown_on_nilpotent():
    A = np.array([[0.0, 1.0], [0.0, 0.0]])
    with pytest.raises(BreakdownError):
        gmres(A, np.array([1.0, 0.0]), 1e-8)


def test_determinism():
    A, b = random_system(70, 8, shift=0.7)
    r1, r2 = gmres(A, b, 1e-9), gmres(A, b, 1e-9)
    assert r1.history == r2.history
    assert np.array_equal(r1.x, r2.x)


@pytest.mark.parametrize("bad", [np.ones(3), np.ones((4, 1))])
def test_dimension_checks(bad):
    with pytest.raises(DimensionMismatchError):
        gmres(np.eye(4), bad, 1e-6)


def test_tolerance_and_callable_checks():
    with pytest.raises(InvalidParamError):
        gmres(np.eye(3), np.ones(3), 0.0)
    with pytest.raises(InvalidParamError):
        gmres(lambda x: x, np.ones(3), 1e-6)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False))
def test_operator_linearity(seed, alpha):
    A, _ = random_system(12, seed)
    op = LinearOperator(12, lambda x: A @ x)
    rng = np.random.default_rng(seed + 1)
    x, y = rng.standard_normal(12) + 0j, rng.standard_normal(12) + 1j * rng.standard_normal(12)
    lhs = op(x + alpha * y)
    rhs = op(x) + alpha * op(y)
    assert np.linalg.norm(lhs - rhs) <= 1e-10 * max(np.linalg.norm(lhs), 1e-300) + 1e-12


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000), st.integers(5, 40))
def test_history_nonincreasing_property(seed, n):
    A, b = random_system(n, seed, shift=0.3)
    rep = gmres(A, b, 1e-12)
    assert np.all(np.diff(rep.history) <= 1e-14)


# ---------------------------------------------------------------------------
# LU
# ---------------------------------------------------------------------------


def test_lu_identity():
    B = np.random.default_rng(0).standard_normal((6, 3))
    np.testing.assert_array_equal(lu_factor_solve(np.eye(6), B), B)


def test_lu_hilbert_exact_inverse():
    n = 4
    H = [[Fraction(1, i + j + 1) for j in range(n)] for i in range(n)]
    # exact inverse by Gauss-Jordan over the rationals
    aug = [row[:] + [Fraction(int(i == j)) for j in range(n)] for i, row in enumerate(H)]
    for c in range(n):
        p = next(r for r in range(c, n) if aug[r][c] != 0)
        aug[c], aug[p] = aug[p], aug[c]
        piv = aug[c][c]
        aug[c] = [v / piv for v in aug[c]]
        for r in range(n):
            if r != c and aug[r][c] != 0:
                f = aug[r][c]
                aug[r] = [a - f * b for a, b in zip(aug[r], aug[c])]
    exact = np.array([[float(v) for v in row[n:]] for row in aug])
    assert exact[0, 0] == 16 and exact[1, 1] == 1200
    X = lu_factor_solve(np.array([[float(v) for v in r] for r in H]), np.eye(n))
    np.testing.assert_allclose(X, exact, rtol=1e-6)


def test_lu_multi_rhs_residual():
    rng = np.random.default_rng(11)
    A = rng.standard_normal((100, 100)) + 1j * rng.standard_normal((100, 100))
    B = rng.standard_normal((100, 20)) + 1j * rng.standard_normal((100, 20))
    X = lu_factor_solve(A, B)
    assert np.linalg.norm(A @ X - B) / np.linalg.norm(B) < 1e-10


def test_lu_singular_reports_cell():
    A = np.ones((3, 3))
    with pytest.raises(SingularMatrixError) as info:
        LUFactor(A, cell=7)
    assert info.value.cell == 7
    with pytest.raises(SingularMatrixError):
        lu_factor_solve(np.zeros((2, 2)), np.ones(2))


def test_lu_shape_checks():
    with pytest.raises(DimensionMismatchError):
        LUFactor(np.ones((2, 3)))
    with pytest.raises(DimensionMismatchError):
        LUFactor(np.eye(3)).solve(np.ones(4))
