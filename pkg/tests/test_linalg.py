import numpy as np
import pytest

from fpkgeom.errors import SingularRestriction
from fpkgeom.linalg import numeric_matrix, solve
from fpkgeom.symexpr import ONE, ZERO, Chart, check_zero, evaluate_arrays, random_polynomial, var

CH = Chart.cube(["x", "y"], seed=2)


def test_symbolic_solve_matches_numpy():
    rng = np.random.default_rng(0)
    n = 3
    A = [[random_polynomial(CH.coordinates, 1, rng) + (3.0 if i == j else 0.0) for j in range(n)] for i in range(n)]
    b = [random_polynomial(CH.coordinates, 2, rng) for _ in range(n)]
    x = solve(A, b, CH.midpoint())
    env = CH.sample(20, "lu")
    Av = np.stack(evaluate_arrays([e for r in A for e in r], env)[0], -1).reshape(-1, n, n)
    bv = np.stack(evaluate_arrays(b, env)[0], -1)
    xv = np.stack(evaluate_arrays(x, env)[0], -1)
    assert np.allclose(xv, np.linalg.solve(Av, bv[..., None])[..., 0], atol=1e-10)


def test_zero_leading_entry_needs_pivot():
    A = [[ZERO, ONE], [ONE, var("x")]]
    x = solve(A, [var("y"), ONE], {"x": 0.3, "y": 0.1})
    residual = [A[0][0] * x[0] + A[0][1] * x[1] - var("y"), A[1][0] * x[0] + A[1][1] * x[1] - ONE]
    assert check_zero("pivot", residual, CH).passed


def test_multi_column_inverse():
    A = [[var("x") + 2.0, ONE], [ONE, 2.0 * ONE]]
    ident = [[ONE, ZERO], [ZERO, ONE]]
    inv = solve(A, ident, {"x": 0.0})
    prod = [[sum((A[i][k] * inv[k][j] for k in range(2)), ZERO) - (1.0 if i == j else 0.0) for j in range(2)] for i in range(2)]
    assert check_zero("inverse", [e for r in prod for e in r], CH).passed


def test_singular_raises():
    A = [[var("x"), var("x")], [ONE, ONE]]
    with pytest.raises(SingularRestriction):
        solve(A, [ONE, ONE], {"x": 0.5, "y": 0.0})


def test_numeric_matrix():
    m = numeric_matrix([[var("x"), ONE], [ZERO, var("y")]], {"x": 2.0, "y": 3.0})
    assert np.array_equal(m, [[2.0, 1.0], [0.0, 3.0]])
