"""JSON manifold documents: one file holding a single-chart structure.

``phi[i][j]`` is component ``i`` of ``phi(d_j)``; ``xi[a]`` and ``eta[a]`` are
component vectors; ``g`` must be symmetric entry by entry.  See docs/schema.md.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import jsonschema

from .errors import DimensionMismatch, ExprSyntaxError, SchemaError, UnknownCoordinate
from .fstruct import FpkStructure
from .symexpr import Chart, parse_expr, to_string
from .tensor import EndField, KForm, MetricField, VectorField

DEFAULT_TOLERANCES = {"default": 1e-9, "hamiltonian": 1e-7}

_str = {"type": "string", "minLength": 1}
_matrix = {"type": "array", "items": {"type": "array", "items": _str}}

SCHEMA: dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "ManifoldDocument",
    "type": "object",
    "required": ["n", "k", "coordinates", "phi", "xi", "eta", "g", "alpha", "box", "seed"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "n": {"type": "integer", "minimum": 0},
        "k": {"type": "integer", "minimum": 0},
        "coordinates": {"type": "array", "items": {"type": "string", "pattern": "^[A-Za-z_][A-Za-z0-9_]*$"}},
        "phi": _matrix,
        "xi": _matrix,
        "eta": _matrix,
        "g": _matrix,
        "alpha": {"type": "array", "items": {"type": "number"}},
        "box": {
            "type": "array",
            "items": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
        },
        "seed": {"type": "integer", "minimum": 0},
        "tolerances": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "default": {"type": "number", "exclusiveMinimum": 0},
                "hamiltonian": {"type": "number", "exclusiveMinimum": 0},
            },
        },
    },
}

_VALIDATOR = jsonschema.Draft202012Validator(SCHEMA)


def _path(parts) -> str:
    out = ""
    for p in parts:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else str(p))
    return out or "$"


def _shape(field: str, rows: list, nrows: int, ncols: int) -> None:
    if len(rows) != nrows:
        raise SchemaError(field, f"expected {nrows} rows, got {len(rows)}")
    for i, r in enumerate(rows):
        if len(r) != ncols:
            raise SchemaError(f"{field}[{i}]", f"expected {ncols} entries, got {len(r)}")


def _parse(field: str, text: str, chart: Chart):
    try:
        return parse_expr(text, chart)
    except (ExprSyntaxError, UnknownCoordinate) as exc:
        exc.field = field
        exc.args = (f"{field}: {exc}",)
        raise


def validate_data(data: Any) -> None:
    """Schema and shape checks; raises :class:`SchemaError` with a field path."""
    errors = sorted(_VALIDATOR.iter_errors(data), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        e = errors[0]
        raise SchemaError(_path(e.absolute_path), e.message)
    n, k = data["n"], data["k"]
    m = 2 * n + k
    if m == 0:
        raise SchemaError("n", "2n + k must be positive")
    if len(data["coordinates"]) != m:
        raise SchemaError("coordinates", f"expected 2n + k = {m} names, got {len(data['coordinates'])}")
    _shape("phi", data["phi"], m, m)
    _shape("g", data["g"], m, m)
    _shape("xi", data["xi"], k, m)
    _shape("eta", data["eta"], k, m)
    if len(data["alpha"]) != k:
        raise SchemaError("alpha", f"expected k = {k} constants, got {len(data['alpha'])}")
    if len(data["box"]) != m:
        raise SchemaError("box", f"expected {m} intervals, got {len(data['box'])}")


def structure_from_data(data: Any) -> FpkStructure:
    validate_data(data)
    n, k = data["n"], data["k"]
    try:
        chart = Chart(tuple(data["coordinates"]), tuple(map(tuple, data["box"])), data["seed"])
    except ValueError as exc:
        raise SchemaError("coordinates/box", str(exc)) from None
    P = lambda field, text: _parse(field, text, chart)
    phi = tuple(tuple(P(f"phi[{i}][{j}]", t) for j, t in enumerate(row)) for i, row in enumerate(data["phi"]))
    g = [[P(f"g[{i}][{j}]", t) for j, t in enumerate(row)] for i, row in enumerate(data["g"])]
    asym = [f"g[{i}][{j}] != g[{j}][{i}]" for i in range(len(g)) for j in range(i + 1, len(g)) if g[i][j] is not g[j][i]]
    if asym:
        raise SchemaError("g", "metric not symmetric: " + ", ".join(asym))
    xi = [VectorField(chart, tuple(P(f"xi[{a}][{j}]", t) for j, t in enumerate(row))) for a, row in enumerate(data["xi"])]
    eta = [KForm.one_form(chart, [P(f"eta[{a}][{j}]", t) for j, t in enumerate(row)]) for a, row in enumerate(data["eta"])]
    try:
        return FpkStructure(
            chart, EndField(chart, phi), xi, eta, MetricField(chart, tuple(map(tuple, g))),
            tuple(data["alpha"]), n, k, data.get("name", ""),
        )
    except DimensionMismatch as exc:
        raise SchemaError("$", str(exc)) from None


def tolerances(data: Any) -> dict[str, float]:
    return {**DEFAULT_TOLERANCES, **data.get("tolerances", {})}


def read_data(path: str | Path) -> Any:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise SchemaError("$", f"cannot read {path}: {exc.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError("$", f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None


def load_document(path: str | Path) -> FpkStructure:
    return structure_from_data(read_data(path))


def document_data(s: FpkStructure, tolerances: dict[str, float] | None = None) -> dict[str, Any]:
    S = to_string
    data = {
        "name": s.name,
        "n": s.n,
        "k": s.k,
        "coordinates": list(s.chart.coordinates),
        "phi": [[S(e) for e in row] for row in s.phi.matrix],
        "xi": [[S(e) for e in x.components] for x in s.xi],
        "eta": [[S(e) for e in a.components()] for a in s.eta],
        "g": [[S(e) for e in row] for row in s.g.matrix],
        "alpha": list(s.alpha),
        "box": [list(b) for b in s.chart.box],
        "seed": s.chart.seed,
        "tolerances": dict(tolerances or DEFAULT_TOLERANCES),
    }
    return data


def dumps(data: Any) -> str:
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


def emit_document(s: FpkStructure, path: str | Path | None = None) -> str:
    text = dumps(document_data(s))
    if path is not None:
        Path(path).write_text(text)
    return text
