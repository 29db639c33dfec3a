from itertools import combinations, permutations

import numpy as np
import pytest

from fpkgeom.errors import DegreeOverflow, DimensionMismatch
from fpkgeom.symexpr import ONE, ZERO, Chart, check_zero, evaluate, parse_expr, random_polynomial, var
from fpkgeom.tensor import (
    EndField,
    KForm,
    MetricField,
    VectorField,
    evaluate_form,
    exterior_derivative,
    form_matrix,
    interior_product,
    lie_bracket,
    lie_derivative,
    wedge,
    wedge_power,
)

CH = Chart.cube(["x", "y", "z", "w"], seed=11)
NAMES = CH.coordinates


def rand_form(rng, degree, poly_degree=2):
    coeffs = {I: random_polynomial(NAMES, poly_degree, rng, density=0.4) for I in combinations(range(CH.dim), degree)}
    return KForm(CH, degree, coeffs)


def rand_field(rng):
    return VectorField(CH, tuple(random_polynomial(NAMES, 2, rng, density=0.4) for _ in NAMES))


def zero(label, form_or_items, tol=1e-9):
    items = form_or_items.exprs() if hasattr(form_or_items, "exprs") else form_or_items
    rep = check_zero(label, items, CH, samples=30, tol=tol)
    assert rep.passed, rep.line()


def sign(p):
    s = 1
    for i in range(len(p)):
        for j in range(i + 1, len(p)):
            if p[i] > p[j]:
                s = -s
    return s


def test_basis_sign_and_components():
    dxdy = KForm.basis(CH, "x", "y")
    assert KForm.basis(CH, "y", "x")[(0, 1)] is (-dxdy)[(0, 1)]
    assert KForm.basis(CH, "x", "x").coeffs == {}
    assert wedge(KForm.basis(CH, "y"), KForm.basis(CH, "x"))[(0, 1)].value == -1.0


def test_evaluate_form_determinant_convention():
    dxdy = KForm.basis(CH, "x", "y")
    X = VectorField.coordinate(CH, "x")
    Y = VectorField.coordinate(CH, "y")
    assert evaluate_form(dxdy, X, Y).value == 1.0
    assert evaluate_form(dxdy, Y, X).value == -1.0


@pytest.mark.parametrize("p,q", [(1, 1), (1, 2), (2, 1), (2, 2), (1, 3)])
def test_wedge_against_shuffle_sum(p, q):
    rng = np.random.default_rng(p * 10 + q)
    a, b = rand_form(rng, p), rand_form(rng, q)
    vecs = [VectorField(CH, tuple(ONE * float(v) for v in rng.normal(size=CH.dim))) for _ in range(p + q)]
    lhs = evaluate_form(wedge(a, b), *vecs)
    terms = []
    for perm in permutations(range(p + q)):
        if list(perm[:p]) != sorted(perm[:p]) or list(perm[p:]) != sorted(perm[p:]):
            continue
        val = evaluate_form(a, *[vecs[i] for i in perm[:p]]) * evaluate_form(b, *[vecs[i] for i in perm[p:]])
        terms.append(val if sign(perm) > 0 else -val)
    rhs = sum(terms[1:], terms[0])
    zero("shuffle", [lhs - rhs])


def test_graded_commutativity():
    rng = np.random.default_rng(1)
    for p, q in [(1, 1), (1, 2), (2, 2)]:
        a, b = rand_form(rng, p), rand_form(rng, q)
        sgn = (-1) ** (p * q)
        zero("graded", wedge(a, b) - wedge(b, a).scale(sgn))


def test_d_squared_zero():
    rng = np.random.default_rng(2)
    for p in range(3):
        a = rand_form(rng, p, poly_degree=3)
        zero("dd", exterior_derivative(exterior_derivative(a)))


def test_leibniz():
    rng = np.random.default_rng(3)
    for p, q in [(0, 1), (1, 1), (1, 2)]:
        a, b = rand_form(rng, p), rand_form(rng, q)
        lhs = exterior_derivative(wedge(a, b))
        rhs = wedge(exterior_derivative(a), b) + wedge(a, exterior_derivative(b)).scale((-1) ** p)
        zero("leibniz", lhs - rhs)


def test_d_of_one_form_invariant_formula():
    rng = np.random.default_rng(4)
    a = rand_form(rng, 1)
    X, Y = rand_field(rng), rand_field(rng)
    lhs = evaluate_form(exterior_derivative(a), X, Y)
    rhs = X(evaluate_form(a, Y)) - Y(evaluate_form(a, X)) - evaluate_form(a, lie_bracket(X, Y))
    zero("d invariant", [lhs - rhs])


def test_lie_derivative_against_tensorial_formula():
    rng = np.random.default_rng(5)
    for p in (1, 2):
        a = rand_form(rng, p)
        X = rand_field(rng)
        Ys = [rand_field(rng) for _ in range(p)]
        lhs = evaluate_form(lie_derivative(X, a), *Ys)
        rhs = X(evaluate_form(a, *Ys))
        for i in range(p):
            moved = list(Ys)
            moved[i] = lie_bracket(X, Ys[i])
            rhs = rhs - evaluate_form(a, *moved)
        zero("cartan", [lhs - rhs])


def test_lie_derivative_of_function_and_top_form():
    rng = np.random.default_rng(6)
    X = rand_field(rng)
    f = random_polynomial(NAMES, 2, rng)
    assert lie_derivative(X, KForm.scalar(CH, f))[()] is X(f)
    vol = rand_form(rng, 4)
    lhs = lie_derivative(X, vol)
    div = sum((X.components[i] * vol[(0, 1, 2, 3)]).diff(n) for i, n in enumerate(NAMES))
    zero("top", [lhs[(0, 1, 2, 3)] - div])


def test_interior_antiderivation():
    rng = np.random.default_rng(7)
    for p, q in [(1, 1), (1, 2), (2, 1)]:
        a, b = rand_form(rng, p), rand_form(rng, q)
        X = rand_field(rng)
        lhs = interior_product(X, wedge(a, b))
        rhs = wedge(interior_product(X, a), b) + wedge(a, interior_product(X, b)).scale((-1) ** p)
        zero("antiderivation", lhs - rhs)


def test_interior_twice_is_zero():
    rng = np.random.default_rng(8)
    X = rand_field(rng)
    a = rand_form(rng, 3)
    zero("ii", interior_product(X, interior_product(X, a)))


def test_bracket_jacobi_and_antisymmetry():
    rng = np.random.default_rng(9)
    X, Y, Z = rand_field(rng), rand_field(rng), rand_field(rng)
    jac = lie_bracket(X, lie_bracket(Y, Z)) + lie_bracket(Y, lie_bracket(Z, X)) + lie_bracket(Z, lie_bracket(X, Y))
    zero("jacobi", jac.exprs())
    zero("anti", (lie_bracket(X, Y) + lie_bracket(Y, X)).exprs())


def test_bracket_example():
    x, y = var("x"), var("y")
    dx, dy = VectorField.coordinate(CH, "x"), VectorField.coordinate(CH, "y")
    br = lie_bracket(dy.scale(x), dx.scale(y))
    expected = dx.scale(x) - dy.scale(y)
    zero("example", (br - expected).exprs())


def test_degree_errors():
    with pytest.raises(DegreeOverflow):
        wedge(KForm.basis(CH, "x", "y", "z"), KForm.basis(CH, "w", "x"))
    with pytest.raises(DegreeOverflow):
        exterior_derivative(KForm.basis(CH, "x", "y", "z", "w"))
    with pytest.raises(ValueError):
        interior_product(VectorField.coordinate(CH, "x"), KForm.scalar(CH, ONE))
    with pytest.raises(DimensionMismatch):
        VectorField(CH, (ONE,))


def test_wedge_power_of_symplectic_form():
    w = KForm.basis(CH, "x", "y") + KForm.basis(CH, "z", "w")
    top = wedge_power(w, 2)
    assert top[(0, 1, 2, 3)].value == 2.0


def test_endfield_composition_matches_numpy():
    rng = np.random.default_rng(10)
    A = EndField(CH, tuple(tuple(random_polynomial(NAMES, 1, rng) for _ in NAMES) for _ in NAMES))
    B = EndField(CH, tuple(tuple(random_polynomial(NAMES, 1, rng) for _ in NAMES) for _ in NAMES))
    env = CH.sample(5, "endo")
    assert np.allclose((A @ B).numeric(env), A.numeric(env) @ B.numeric(env))
    X = rand_field(rng)
    col = A(X)
    pt = {k: float(v[0]) for k, v in env.items()}
    xv = np.array([evaluate(c, pt) for c in X.components])
    av = np.array([[evaluate(e, pt) for e in row] for row in A.matrix])
    assert np.allclose([evaluate(c, pt) for c in col.components], av @ xv)


def test_endfield_pull():
    rng = np.random.default_rng(12)
    A = EndField(CH, tuple(tuple(random_polynomial(NAMES, 1, rng) for _ in NAMES) for _ in NAMES))
    w = rand_form(rng, 1)
    X = rand_field(rng)
    zero("pull", [evaluate_form(A.pull(w), X) - evaluate_form(w, A(X))])


def test_metric_symmetry_enforced():
    m = [[ONE if i == j else ZERO for j in range(4)] for i in range(4)]
    m[0][1] = var("x")
    with pytest.raises(ValueError, match=r"\(x,y\)"):
        MetricField(CH, tuple(map(tuple, m)))


def test_metric_evaluation_and_flat():
    g = MetricField.from_upper(CH, {(0, 0): ONE, (1, 1): ONE, (2, 2): ONE, (3, 3): ONE, (0, 1): parse_expr("x/2")})
    X, Y = VectorField.coordinate(CH, "x"), VectorField.coordinate(CH, "y")
    assert g(X, Y) is parse_expr("x/2")
    assert evaluate_form(g.flat(X), Y) is g(X, Y)
    eig = np.linalg.eigvalsh(g.numeric(CH.sample(10, "metric")))
    assert (eig > 0).all()


def test_form_matrix_antisymmetric():
    rng = np.random.default_rng(13)
    a = rand_form(rng, 2)
    m = form_matrix(a)
    for i in range(4):
        assert m[i][i].is_zero()
        for j in range(4):
            zero("antisym", [m[i][j] + m[j][i]])
