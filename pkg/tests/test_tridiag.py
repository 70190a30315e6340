"""Direct solver checks against dense linear algebra."""

import numpy as np
import pytest

from hlcouette.tridiag import solve_diffusion_batch, solve_tridiagonal


def random_system(rng, n):
    """Strictly diagonally dominant tridiagonal system."""
    lower = rng.uniform(-1.0, 1.0, size=max(n - 1, 0))
    upper = rng.uniform(-1.0, 1.0, size=max(n - 1, 0))
    diag = 2.5 + rng.uniform(0.0, 1.0, size=n)
    rhs = rng.standard_normal(n)
    return lower, diag, upper, rhs


def dense(lower, diag, upper):
    n = diag.shape[0]
    a = np.diag(diag)
    if n > 1:
        a += np.diag(lower, -1) + np.diag(upper, 1)
    return a


@pytest.mark.parametrize("n", [1, 2, 3, 17, 64])
def test_solve_tridiagonal_matches_dense(n):
    rng = np.random.default_rng(1234 + n)
    for _ in range(5):
        lower, diag, upper, rhs = random_system(rng, n)
        x = solve_tridiagonal(lower, diag, upper, rhs)
        x_ref = np.linalg.solve(dense(lower, diag, upper), rhs)
        assert np.allclose(x, x_ref, rtol=1e-12, atol=1e-14)


def diffusion_matrix(lam, n):
    l_mat = dense(np.full(n - 1, -1.0), np.full(n, 2.0), np.full(n - 1, -1.0))
    return np.eye(n) + lam * l_mat


@pytest.mark.parametrize("n", [4, 9, 33])
def test_solve_diffusion_batch_matches_dense(n):
    rng = np.random.default_rng(77 + n)
    lam = rng.uniform(0.0, 50.0, size=6)
    rhs = rng.standard_normal((6, n))
    x = solve_diffusion_batch(lam, rhs)
    for i in range(6):
        x_ref = np.linalg.solve(diffusion_matrix(lam[i], n), rhs[i])
        assert np.allclose(x[i], x_ref, rtol=1e-12, atol=1e-14)


def test_zero_lambda_is_identity():
    rng = np.random.default_rng(5)
    rhs = rng.standard_normal((3, 12))
    x = solve_diffusion_batch(np.zeros(3), rhs)
    assert np.array_equal(x, rhs)


def test_diffusion_preserves_positivity_and_shrinks_mass():
    # (I + lam L)^{-1} is an M-matrix inverse: nonnegative entries, and the
    # Dirichlet closure can only remove mass.
    rng = np.random.default_rng(11)
    rhs = rng.uniform(0.0, 1.0, size=(4, 40))
    lam = np.array([0.1, 1.0, 10.0, 500.0])
    x = solve_diffusion_batch(lam, rhs)
    assert x.min() >= 0.0
    assert np.all(x.sum(axis=1) <= rhs.sum(axis=1) + 1e-12)


def test_diffusion_batch_single_row_matches_general_solver():
    rng = np.random.default_rng(42)
    n = 25
    lam = 3.7
    rhs = rng.standard_normal(n)
    lower = np.full(n - 1, -lam)
    diag = np.full(n, 1.0 + 2.0 * lam)
    x_gen = solve_tridiagonal(lower, diag, lower, rhs)
    x_bat = solve_diffusion_batch(np.array([lam]), rhs[None, :])[0]
    assert np.allclose(x_gen, x_bat, rtol=1e-13, atol=1e-15)
