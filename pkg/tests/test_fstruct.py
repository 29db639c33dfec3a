import pytest

from fpkgeom import catalog
from fpkgeom.errors import AlphaFitIllPosed, DimensionMismatch, PreconditionNotAlmostS
from fpkgeom.fstruct import (
    FpkStructure,
    check_complex,
    classify,
    fit_alpha,
    fundamental_form_checks,
    numeric_rank,
    stable_complex_structure,
    structure_propositions,
    validate_fpk,
)
from fpkgeom.symexpr import ONE, Chart, var
from fpkgeom.tensor import EndField, KForm, MetricField, VectorField

NAMES = sorted(catalog.CATALOG)


def by_name(reports, fragment):
    hits = [r for r in reports if fragment in r.identity]
    assert len(hits) == 1, [r.identity for r in reports]
    return hits[0]


@pytest.fixture(scope="module", params=NAMES)
def structure(request):
    return catalog.get(request.param)


def test_validate_passes_on_catalog(structure):
    reports = validate_fpk(structure) + fundamental_form_checks(structure)
    bad = [r.line() for r in reports if not r.passed]
    assert not bad, bad


def test_phi_rank_is_2n(structure):
    rank = numeric_rank(structure.phi)
    assert rank.constant and rank.min_rank == 2 * structure.n


def test_stable_complex_structure(structure):
    J = stable_complex_structure(structure)
    assert J.chart.dim == structure.dim + structure.k
    assert check_complex(J).passed


def test_scaled_phi_breaks_f_identity():
    s = catalog.generalized_heisenberg(1, 1, (1.0,))
    bad = s.replace(phi=s.phi.scale(2.0))
    reports = validate_fpk(bad)
    assert not by_name(reports, "f_identity").passed
    assert not by_name(reports, "phi_squared").passed


def test_wrong_metric_breaks_compatibility():
    s = catalog.generalized_heisenberg(1, 1, (1.0,))
    m = [list(r) for r in s.g.matrix]
    m[1][1] = m[1][1] + 0.5
    bad = s.replace(g=MetricField(s.chart, tuple(map(tuple, m))))
    reports = validate_fpk(bad)
    rep = by_name(reports, "metric_compatibility")
    assert not rep.passed and rep.witness is not None
    assert by_name(reports, "f_identity").passed


def test_dimension_mismatch():
    s = catalog.generalized_heisenberg(1, 1, (1.0,))
    with pytest.raises(DimensionMismatch):
        s.replace(n=2)
    with pytest.raises(DimensionMismatch):
        s.replace(alpha=(1.0, 2.0))


@pytest.mark.parametrize("name", [n for n in NAMES])
def test_classification_recovers_alpha(name):
    s = catalog.get(name)
    c = classify(s)
    assert c.almost_K and c.almost_S
    assert c.fitted_alpha == pytest.approx(s.alpha, abs=1e-9)


def test_heisenberg_is_normal():
    c = classify(catalog.generalized_heisenberg(1, 2, (1.0, 2.0)))
    assert c.normal and c.cr_integrable


def test_perturbed_structure_is_not_almost_s():
    s = catalog.perturbed_heisenberg(0.1)
    c = classify(s)
    assert c.almost_K
    assert not c.almost_S
    assert c.fitted_alpha[0] == pytest.approx(0.9, abs=1e-9)
    assert not by_name(c.reports, "declared vs fitted").passed


def test_propositions_on_catalog(structure):
    reports = structure_propositions(structure)
    assert all(r.passed for r in reports), [r.line() for r in reports if not r.passed]


def test_propositions_require_almost_s():
    s = catalog.perturbed_heisenberg(0.1)
    with pytest.raises(PreconditionNotAlmostS):
        structure_propositions(s)
    reports = structure_propositions(s, require_almost_s=False)
    skipped = [r for r in reports if "skipped" in r.note]
    assert skipped


def test_alpha_fit_ill_posed_without_e():
    chart = Chart.cube(["z1", "z2"])
    s = FpkStructure(
        chart,
        EndField.zero(chart),
        tuple(VectorField.coordinate(chart, z) for z in ("z1", "z2")),
        tuple(KForm.basis(chart, z) for z in ("z1", "z2")),
        MetricField.from_upper(chart, {(0, 0): ONE, (1, 1): ONE}),
        (1.0, 0.0),
        0,
        2,
    )
    assert all(r.passed for r in validate_fpk(s))
    with pytest.raises(AlphaFitIllPosed):
        fit_alpha(s)


def test_position_dependent_metric_breaks_compatibility():
    # stretching only d/dx1 makes phi fail to be an isometry of the horizontal metric
    s = catalog.generalized_heisenberg(1, 1, (1.0,))
    x = var("x1")
    m = [list(r) for r in s.g.matrix]
    m[0][0] = m[0][0] + x * x
    bad = s.replace(g=MetricField(s.chart, tuple(map(tuple, m))))
    assert not by_name(validate_fpk(bad), "metric_compatibility").passed
