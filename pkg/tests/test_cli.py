import json
from pathlib import Path

import pytest

from fpkgeom import catalog
from fpkgeom.cli import run
from fpkgeom.document import document_data, dumps, emit_document, load_document, structure_from_data
from fpkgeom.errors import ExprSyntaxError, SchemaError, UnknownCoordinate
from fpkgeom.fstruct import validate_fpk

TEMPLATES = Path(__file__).resolve().parent.parent / "docs" / "templates"
H1212 = TEMPLATES / "heisenberg_1_2_1_2.json"
SC1 = TEMPLATES / "standard_contact_1.json"


def mutated(tmp_path, change, source=H1212):
    data = json.loads(source.read_text())
    change(data)
    path = tmp_path / "doc.json"
    path.write_text(json.dumps(data))
    return path


def test_templates_match_catalog():
    for name in ["heisenberg_1_2_1_2", "standard_contact_1"]:
        assert (TEMPLATES / f"{name}.json").read_text() == emit_document(catalog.get(name))


def test_load_emit_fixed_point(tmp_path):
    for name in catalog.CATALOG:
        first = emit_document(catalog.get(name))
        path = tmp_path / f"{name}.json"
        path.write_text(first)
        assert emit_document(load_document(path)) == first


def test_round_trip_reports_identical(tmp_path):
    s = catalog.get("symplectic_base_r2_1_1")
    path = tmp_path / "s.json"
    emit_document(s, path)
    assert validate_fpk(load_document(path)) == validate_fpk(s)


def test_validate_template_exit_zero(capsys):
    assert run(["validate", str(H1212)]) == 0
    out = capsys.readouterr().out
    assert "checks passed" in out and "FAIL" not in out


def test_bracket_one_z1(capsys):
    assert run(["bracket", str(H1212), "--f", "1", "--g", "z1"]) == 0
    assert "bracket = 1" in capsys.readouterr().out


def test_hamiltonian_prints_components(capsys):
    assert run(["hamiltonian", str(SC1), "--f", "1"]) == 0
    out = capsys.readouterr().out
    assert "z = 1" in out


def test_jacobi_suite_and_symplectize(tmp_path):
    report = tmp_path / "r.json"
    assert run(["jacobi-suite", str(H1212), "--fns", "1,x1,y1,x1*y1", "--json", str(report)]) == 0
    doc = json.loads(report.read_text())
    assert doc["pass"] and doc["command"] == "jacobi-suite"
    assert {"identity", "pass", "residual", "witness"} <= set(doc["reports"][0])
    assert run(["symplectize", str(H1212)]) == 0


def test_json_report_is_byte_identical(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for out in (a, b):
        assert run(["classify", str(H1212), "--seed", "7", "--json", str(out)]) == 0
    assert a.read_bytes() == b.read_bytes()
    c = tmp_path / "c.json"
    run(["classify", str(H1212), "--seed", "8", "--json", str(c)])
    assert c.read_bytes() != a.read_bytes()


def test_failing_identity_exit_one(tmp_path, capsys):
    path = mutated(tmp_path, lambda d: d["g"][1].__setitem__(1, "2"))
    assert run(["validate", str(path)]) == 1
    assert "witness" in capsys.readouterr().out


def test_non_symmetric_metric_exit_two(tmp_path, capsys):
    path = mutated(tmp_path, lambda d: d["g"][0].__setitem__(1, "x1"))
    assert run(["validate", str(path)]) == 2
    err = capsys.readouterr().err
    assert "g[0][1] != g[1][0]" in err


def test_precondition_exit_three(tmp_path):
    path = mutated(tmp_path, lambda d: d.__setitem__("alpha", [0.0, 0.0]))
    assert run(["hamiltonian", str(path), "--f", "x1"]) == 3
    assert run(["symplectize", str(path)]) == 3


def test_bad_inputs_exit_two(tmp_path):
    assert run(["validate", str(tmp_path / "missing.json")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(["validate", str(bad)]) == 2
    assert run(["bracket", str(H1212), "--f", "w", "--g", "x1"]) == 2
    assert run(["hamiltonian", str(H1212), "--f", "x1", "--eta", "1,1"]) == 2


def test_catalog_emit_and_list(tmp_path, capsys):
    assert run(["catalog", "--list"]) == 0
    assert "heisenberg_1_2_1_2" in capsys.readouterr().out
    out = tmp_path / "t.json"
    assert run(["catalog", "--emit", "heisenberg_1_2_1_2", "--out", str(out)]) == 0
    assert out.read_text() == H1212.read_text()
    assert run(["catalog", "--emit", "nope"]) == 2


def test_schema_errors_name_fields():
    data = document_data(catalog.get("heisenberg_1_2_1_2"))
    short = dict(data, alpha=[1.0])
    with pytest.raises(SchemaError) as info:
        structure_from_data(short)
    assert info.value.field == "alpha"
    wrong_type = dict(data, n="one")
    with pytest.raises(SchemaError) as info:
        structure_from_data(wrong_type)
    assert info.value.field == "n"
    extra = dict(data, colour="red")
    with pytest.raises(SchemaError):
        structure_from_data(extra)


def test_expression_errors_carry_field_path():
    data = json.loads(dumps(document_data(catalog.get("heisenberg_1_2_1_2"))))
    data["xi"][1][0] = "q + 1"
    with pytest.raises(UnknownCoordinate) as info:
        structure_from_data(data)
    assert info.value.field == "xi[1][0]"
    data["xi"][1][0] = "1 +"
    with pytest.raises(ExprSyntaxError) as info:
        structure_from_data(data)
    assert "xi[1][0]" in str(info.value)
