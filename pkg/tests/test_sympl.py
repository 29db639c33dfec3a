import pytest

from fpkgeom import catalog
from fpkgeom.errors import AllAlphaZero, EmptyPositiveCone
from fpkgeom.symexpr import check_zero, evaluate_arrays, parse_expr
from fpkgeom.sympl import (
    build_symplectization,
    phi_power_vanishing,
    positive_box,
    sign_scan,
    top_power_factor,
    verify_determinant,
    verify_expansion,
    verify_top_power,
)
from fpkgeom.tensor import KForm, wedge

SYMPLECTIZABLE = [n for n in sorted(catalog.CATALOG) if any(catalog.get(n).alpha)]


@pytest.fixture(scope="module", params=SYMPLECTIZABLE)
def pair(request):
    s = catalog.get(request.param)
    return s, build_symplectization(s)


def test_expansion_on_catalog(pair):
    s, sp = pair
    assert verify_expansion(sp, s, tol=1e-9).passed


def test_top_power_on_catalog(pair):
    s, sp = pair
    reports = verify_top_power(sp, s)
    assert all(r.passed for r in reports), [r.line() for r in reports if not r.passed]
    assert reports[1].extra["factor"] == top_power_factor(s.n, s.k)


def test_determinant_on_catalog(pair):
    s, sp = pair
    assert all(r.passed for r in verify_determinant(sp))
    assert phi_power_vanishing(s).passed


def test_tau_margin_on_box(pair):
    s, sp = pair
    env = sp.chart.sample(200, "tau-box")
    (tau,), _, _ = evaluate_arrays([sp.tau], env)
    assert tau.min() >= 0.1


def test_k1_explicit_form():
    s = catalog.generalized_heisenberg(1, 1, (1.0,))
    sp = build_symplectization(s)
    t1 = sp.chart.coord("t1")
    assert sp.tau is t1
    eta = s.eta[0].on_chart(sp.chart)
    expected = wedge(eta, KForm.basis(sp.chart, "t1")) + s.fundamental_form.on_chart(sp.chart).scale(t1)
    assert check_zero("k1", (sp.omega - expected).exprs(), sp.chart).passed
    assert check_zero("alpha", (sp.alpha_form - eta.scale(t1)).exprs(), sp.chart).passed


def test_tau_definition_two_alphas():
    sp = build_symplectization(catalog.generalized_heisenberg(1, 2, (1.0, 2.0)))
    assert sp.tau is parse_expr("t1 + 2*t2", sp.chart)


def test_factorial_factor():
    assert top_power_factor(1, 2) == 6
    assert top_power_factor(1, 1) == 2
    assert top_power_factor(2, 2) == 12


def test_errors():
    with pytest.raises(AllAlphaZero):
        build_symplectization(catalog.flat_torus_bundle(2))
    with pytest.raises(EmptyPositiveCone):
        positive_box((0.01,))


def test_mixed_sign_alpha_uses_shifted_box():
    box = positive_box((1.0, -1.0))
    lo = box[0][0] - box[1][1]
    assert lo >= 0.1
    s = catalog.generalized_heisenberg(1, 2, (1.0, -1.0))
    sp = build_symplectization(s)
    assert all(r.passed for r in verify_top_power(sp, s))


def test_perturbed_eta_breaks_expansion():
    s = catalog.generalized_heisenberg(1, 2, (1.0, 2.0))
    sp = build_symplectization(s)
    bump = KForm.basis(s.chart, "y1").scale(parse_expr("0.1*x1", s.chart))
    moved = s.replace(eta=(s.eta[0] + bump, s.eta[1]))
    assert not verify_expansion(sp, moved).passed


def test_sign_scan_locates_degeneracy():
    scan = sign_scan(catalog.generalized_heisenberg(1, 2, (1.0, 2.0)))
    assert scan.tau_min < 0 < scan.tau_max
    assert scan.sign_changes
    assert scan.normalized_constant_sign
    assert abs(scan.normalized_min) == pytest.approx(6.0)
    even = sign_scan(catalog.standard_contact(2))
    assert not even.sign_changes and even.normalized_constant_sign
