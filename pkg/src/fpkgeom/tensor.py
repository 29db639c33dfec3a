"""Chart-local tensor calculus with :class:`~fpkgeom.symexpr.Expr` components.

Conventions.  A k-form is stored on strictly increasing index tuples and
evaluated with the determinant convention, ``(dx^i ^ dx^j)(X, Y) =
X^i Y^j - X^j Y^i``; with it the exterior derivative satisfies the invariant
formula ``da(X, Y) = X.a(Y) - Y.a(X) - a([X, Y])`` with no factorial factors.
An :class:`EndField` matrix holds the image of the j-th coordinate field in
column j.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations, permutations
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DegreeOverflow, DimensionMismatch
from .symexpr import ONE, ZERO, Chart, Expr, as_expr, differentiate, evaluate_arrays, total, to_string


def _same_chart(*objs):
    chart = objs[0].chart
    for o in objs[1:]:
        if o.chart != chart:
            raise DimensionMismatch("operands live on different charts")
    return chart


def _perm_sign(seq: Sequence[int]) -> int:
    sign = 1
    seq = list(seq)
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                sign = -sign
    return sign


# ---------------------------------------------------------------- vector fields


@dataclass(frozen=True, eq=False)
class VectorField:
    chart: Chart
    components: tuple[Expr, ...]

    def __post_init__(self):
        comps = tuple(as_expr(c) for c in self.components)
        object.__setattr__(self, "components", comps)
        if len(comps) != self.chart.dim:
            raise DimensionMismatch(f"vector field has {len(comps)} components on a {self.chart.dim}-dim chart")

    @classmethod
    def zero(cls, chart: Chart) -> "VectorField":
        return cls(chart, (ZERO,) * chart.dim)

    @classmethod
    def coordinate(cls, chart: Chart, name_or_index) -> "VectorField":
        i = name_or_index if isinstance(name_or_index, int) else chart.index(name_or_index)
        return cls(chart, tuple(ONE if j == i else ZERO for j in range(chart.dim)))

    @classmethod
    def frame(cls, chart: Chart) -> list["VectorField"]:
        return [cls.coordinate(chart, i) for i in range(chart.dim)]

    def __add__(self, other: "VectorField") -> "VectorField":
        _same_chart(self, other)
        return VectorField(self.chart, tuple(a + b for a, b in zip(self.components, other.components)))

    def __sub__(self, other: "VectorField") -> "VectorField":
        _same_chart(self, other)
        return VectorField(self.chart, tuple(a - b for a, b in zip(self.components, other.components)))

    def __neg__(self) -> "VectorField":
        return VectorField(self.chart, tuple(-a for a in self.components))

    def scale(self, f) -> "VectorField":
        f = as_expr(f)
        return VectorField(self.chart, tuple(f * a for a in self.components))

    def __call__(self, f) -> Expr:
        """Directional derivative ``X.f``."""
        f = as_expr(f)
        return total(
            c * differentiate(f, name)
            for c, name in zip(self.components, self.chart.coordinates)
            if not c.is_zero()
        )

    def exprs(self) -> list[tuple[str, Expr]]:
        return [(f"[{c}]", e) for c, e in zip(self.chart.coordinates, self.components)]

    def __str__(self):
        return " + ".join(f"({to_string(e)})*d/d{c}" for c, e in zip(self.chart.coordinates, self.components) if not e.is_zero()) or "0"


def lie_bracket(X: VectorField, Y: VectorField) -> VectorField:
    """``[X, Y]^i = X.Y^i - Y.X^i``."""
    chart = _same_chart(X, Y)
    return VectorField(chart, tuple(X(yi) - Y(xi) for xi, yi in zip(X.components, Y.components)))


def combination(chart: Chart, coeffs: Iterable, fields: Iterable[VectorField]) -> VectorField:
    acc = VectorField.zero(chart)
    for c, v in zip(coeffs, fields):
        acc = acc + v.scale(c)
    return acc


# ---------------------------------------------------------------- forms


class KForm:
    """Alternating covariant k-tensor with sparse increasing-index storage."""

    __slots__ = ("chart", "degree", "coeffs")

    def __init__(self, chart: Chart, degree: int, coeffs: Mapping[tuple[int, ...], object] | None = None):
        if not 0 <= degree <= chart.dim:
            raise DegreeOverflow(f"degree {degree} on a {chart.dim}-dim chart")
        clean: dict[tuple[int, ...], Expr] = {}
        for key, val in (coeffs or {}).items():
            key = tuple(key)
            if len(key) != degree or any(a >= b for a, b in zip(key, key[1:])):
                raise ValueError(f"index tuple {key} is not strictly increasing of length {degree}")
            if key and not (0 <= key[0] and key[-1] < chart.dim):
                raise ValueError(f"index tuple {key} out of range")
            e = as_expr(val)
            if not e.is_zero():
                clean[key] = e
        self.chart = chart
        self.degree = degree
        self.coeffs = MappingProxyType(dict(sorted(clean.items())))

    @classmethod
    def zero(cls, chart: Chart, degree: int) -> "KForm":
        return cls(chart, degree)

    @classmethod
    def scalar(cls, chart: Chart, f) -> "KForm":
        return cls(chart, 0, {(): f})

    @classmethod
    def basis(cls, chart: Chart, *names) -> "KForm":
        """``dx^{a1} ^ ... ^ dx^{ak}`` for coordinates given by name or index."""
        idx = [n if isinstance(n, int) else chart.index(n) for n in names]
        if len(set(idx)) != len(idx):
            return cls(chart, len(idx))
        order = sorted(range(len(idx)), key=lambda i: idx[i])
        return cls(chart, len(idx), {tuple(sorted(idx)): float(_perm_sign(order))})

    @classmethod
    def one_form(cls, chart: Chart, components: Sequence) -> "KForm":
        if len(components) != chart.dim:
            raise DimensionMismatch("one-form needs one component per coordinate")
        return cls(chart, 1, {(i,): c for i, c in enumerate(components)})

    def __getitem__(self, key) -> Expr:
        return self.coeffs.get(tuple(key), ZERO)

    def components(self) -> list[Expr]:
        """Dense component list of a 1-form."""
        if self.degree != 1:
            raise ValueError("components() is defined for 1-forms")
        return [self[(i,)] for i in range(self.chart.dim)]

    def _combine(self, other: "KForm", sign: float) -> "KForm":
        _same_chart(self, other)
        if self.degree != other.degree:
            raise ValueError("cannot add forms of different degree")
        out = dict(self.coeffs)
        for k, v in other.coeffs.items():
            out[k] = out.get(k, ZERO) + v if sign > 0 else out.get(k, ZERO) - v
        return KForm(self.chart, self.degree, out)

    def __add__(self, other: "KForm") -> "KForm":
        return self._combine(other, 1.0)

    def __sub__(self, other: "KForm") -> "KForm":
        return self._combine(other, -1.0)

    def __neg__(self) -> "KForm":
        return KForm(self.chart, self.degree, {k: -v for k, v in self.coeffs.items()})

    def scale(self, f) -> "KForm":
        f = as_expr(f)
        return KForm(self.chart, self.degree, {k: f * v for k, v in self.coeffs.items()})

    def on_chart(self, chart: Chart) -> "KForm":
        """Pull back along the projection from an extension of this chart."""
        if chart.coordinates[: self.chart.dim] != self.chart.coordinates:
            raise DimensionMismatch("target chart does not extend the form's chart")
        return KForm(chart, self.degree, dict(self.coeffs))

    def exprs(self) -> list[tuple[str, Expr]]:
        names = self.chart.coordinates
        return [("d" + "^d".join(names[i] for i in k) if k else "f", v) for k, v in self.coeffs.items()]

    def __str__(self):
        if not self.coeffs:
            return "0"
        names = self.chart.coordinates
        parts = []
        for k, v in self.coeffs.items():
            basis = "^".join("d" + names[i] for i in k)
            parts.append(f"({to_string(v)})" + (f" {basis}" if basis else ""))
        return " + ".join(parts)

    def __repr__(self):
        return f"KForm(degree={self.degree}, {self})"


def wedge(a: KForm, b: KForm) -> KForm:
    chart = _same_chart(a, b)
    deg = a.degree + b.degree
    if deg > chart.dim:
        raise DegreeOverflow(f"wedge of degrees {a.degree} and {b.degree} exceeds dimension {chart.dim}")
    out: dict[tuple[int, ...], Expr] = {}
    for I, fa in a.coeffs.items():
        for J, fb in b.coeffs.items():
            if set(I) & set(J):
                continue
            inversions = sum(1 for i in I for j in J if i > j)
            key = tuple(sorted(I + J))
            term = fa * fb
            out[key] = out.get(key, ZERO) + (term if inversions % 2 == 0 else -term)
    return KForm(chart, deg, out)


def wedge_all(forms: Sequence[KForm]) -> KForm:
    acc = forms[0]
    for f in forms[1:]:
        acc = wedge(acc, f)
    return acc


def wedge_power(a: KForm, m: int) -> KForm:
    if m == 0:
        return KForm.scalar(a.chart, ONE)
    return wedge_all([a] * m)


def exterior_derivative(a: KForm) -> KForm:
    """``d(f dx_I) = df ^ dx_I`` summed over the stored coefficients."""
    chart = a.chart
    if a.degree >= chart.dim:
        raise DegreeOverflow("exterior derivative of a top-degree form")
    out: dict[tuple[int, ...], Expr] = {}
    for I, f in a.coeffs.items():
        for j, name in enumerate(chart.coordinates):
            if j in I:
                continue
            df = differentiate(f, name)
            if df.is_zero():
                continue
            pos = sum(1 for i in I if i < j)
            key = tuple(sorted(I + (j,)))
            out[key] = out.get(key, ZERO) + (df if pos % 2 == 0 else -df)
    return KForm(chart, a.degree + 1, out)


d = exterior_derivative


def interior_product(X: VectorField, a: KForm) -> KForm:
    chart = _same_chart(X, a)
    if a.degree == 0:
        raise ValueError("interior product needs a form of degree >= 1")
    out: dict[tuple[int, ...], Expr] = {}
    for I, f in a.coeffs.items():
        for p, i in enumerate(I):
            xi = X.components[i]
            if xi.is_zero():
                continue
            key = I[:p] + I[p + 1 :]
            term = xi * f
            out[key] = out.get(key, ZERO) + (term if p % 2 == 0 else -term)
    return KForm(chart, a.degree - 1, out)


def evaluate_form(a: KForm, *vectors: VectorField) -> Expr:
    """``a(X_1, ..., X_k)`` as a scalar expression."""
    if len(vectors) != a.degree:
        raise ValueError(f"{a.degree}-form evaluated on {len(vectors)} vectors")
    if a.degree == 0:
        return a[()]
    _same_chart(a, *vectors)
    terms = []
    perms = [(p, _perm_sign(p)) for p in permutations(range(a.degree))]
    for I, f in a.coeffs.items():
        det = []
        for p, sign in perms:
            prod = ONE
            for slot, q in enumerate(p):
                prod = prod * vectors[slot].components[I[q]]
                if prod.is_zero():
                    break
            if not prod.is_zero():
                det.append(prod if sign > 0 else -prod)
        terms.append(f * total(det))
    return total(terms)


def lie_derivative(X: VectorField, a: KForm) -> KForm:
    """Cartan's formula ``L_X = d i_X + i_X d``; on functions ``X.f``."""
    _same_chart(X, a)
    if a.degree == 0:
        return KForm.scalar(a.chart, X(a[()]))
    first = exterior_derivative(interior_product(X, a))
    if a.degree == a.chart.dim:
        return first
    return first + interior_product(X, exterior_derivative(a))


def form_matrix(a: KForm) -> list[list[Expr]]:
    """Full antisymmetric component matrix ``a(d_i, d_j)`` of a 2-form."""
    if a.degree != 2:
        raise ValueError("form_matrix expects a 2-form")
    n = a.chart.dim
    m = [[ZERO] * n for _ in range(n)]
    for (i, j), f in a.coeffs.items():
        m[i][j] = f
        m[j][i] = -f
    return m


# ---------------------------------------------------------------- endomorphisms and metrics


@dataclass(frozen=True, eq=False)
class EndField:
    chart: Chart
    matrix: tuple[tuple[Expr, ...], ...]

    def __post_init__(self):
        mat = tuple(tuple(as_expr(e) for e in row) for row in self.matrix)
        object.__setattr__(self, "matrix", mat)
        n = self.chart.dim
        if len(mat) != n or any(len(r) != n for r in mat):
            raise DimensionMismatch(f"endomorphism must be {n}x{n}")

    @classmethod
    def identity(cls, chart: Chart) -> "EndField":
        n = chart.dim
        return cls(chart, tuple(tuple(ONE if i == j else ZERO for j in range(n)) for i in range(n)))

    @classmethod
    def zero(cls, chart: Chart) -> "EndField":
        n = chart.dim
        return cls(chart, tuple((ZERO,) * n for _ in range(n)))

    @classmethod
    def from_columns(cls, chart: Chart, columns: Sequence[VectorField]) -> "EndField":
        n = chart.dim
        return cls(chart, tuple(tuple(columns[j].components[i] for j in range(n)) for i in range(n)))

    @classmethod
    def outer(cls, v: VectorField, w: KForm) -> "EndField":
        """``v (x) w``, the endomorphism ``Y -> w(Y) v``."""
        chart = _same_chart(v, w)
        wc = w.components()
        return cls(chart, tuple(tuple(vi * wj for wj in wc) for vi in v.components))

    def column(self, j: int) -> VectorField:
        return VectorField(self.chart, tuple(row[j] for row in self.matrix))

    def __call__(self, X: VectorField) -> VectorField:
        _same_chart(self, X)
        return VectorField(
            self.chart,
            tuple(total(a * x for a, x in zip(row, X.components) if not a.is_zero()) for row in self.matrix),
        )

    def __matmul__(self, other: "EndField") -> "EndField":
        _same_chart(self, other)
        n = self.chart.dim
        cols = [other.column(j) for j in range(n)]
        return EndField.from_columns(self.chart, [self(c) for c in cols])

    def __add__(self, other: "EndField") -> "EndField":
        _same_chart(self, other)
        return EndField(self.chart, tuple(tuple(a + b for a, b in zip(r, s)) for r, s in zip(self.matrix, other.matrix)))

    def __sub__(self, other: "EndField") -> "EndField":
        _same_chart(self, other)
        return EndField(self.chart, tuple(tuple(a - b for a, b in zip(r, s)) for r, s in zip(self.matrix, other.matrix)))

    def __neg__(self) -> "EndField":
        return EndField(self.chart, tuple(tuple(-a for a in r) for r in self.matrix))

    def scale(self, f) -> "EndField":
        f = as_expr(f)
        return EndField(self.chart, tuple(tuple(f * a for a in r) for r in self.matrix))

    def pull(self, w: KForm) -> KForm:
        """The 1-form ``w o self``."""
        wc = w.components()
        n = self.chart.dim
        return KForm.one_form(self.chart, [total(wc[i] * self.matrix[i][j] for i in range(n)) for j in range(n)])

    def exprs(self) -> list[tuple[str, Expr]]:
        names = self.chart.coordinates
        return [(f"[{names[i]},{names[j]}]", e) for i, row in enumerate(self.matrix) for j, e in enumerate(row)]

    def numeric(self, env: Mapping[str, np.ndarray]) -> np.ndarray:
        """Evaluate on a batch of points; returns shape ``(npts, n, n)``."""
        n = self.chart.dim
        vals, _, _ = evaluate_arrays([e for row in self.matrix for e in row], env)
        return np.stack(vals, axis=-1).reshape(-1, n, n)


@dataclass(frozen=True, eq=False)
class MetricField:
    chart: Chart
    matrix: tuple[tuple[Expr, ...], ...]

    def __post_init__(self):
        mat = tuple(tuple(as_expr(e) for e in row) for row in self.matrix)
        object.__setattr__(self, "matrix", mat)
        n = self.chart.dim
        if len(mat) != n or any(len(r) != n for r in mat):
            raise DimensionMismatch(f"metric must be {n}x{n}")
        bad = [(i, j) for i in range(n) for j in range(i + 1, n) if mat[i][j] is not mat[j][i]]
        if bad:
            names = self.chart.coordinates
            pairs = ", ".join(f"({names[i]},{names[j]})" for i, j in bad)
            raise ValueError(f"metric is not symmetric in entries {pairs}")

    @classmethod
    def from_upper(cls, chart: Chart, entries: Mapping[tuple[int, int], object]) -> "MetricField":
        n = chart.dim
        mat = [[ZERO] * n for _ in range(n)]
        for (i, j), v in entries.items():
            v = as_expr(v)
            mat[i][j] = v
            mat[j][i] = v
        return cls(chart, tuple(tuple(r) for r in mat))

    def __call__(self, X: VectorField, Y: VectorField) -> Expr:
        _same_chart(self, X, Y)
        terms = []
        for xi, row in zip(X.components, self.matrix):
            if xi.is_zero():
                continue
            inner = total(gij * yj for gij, yj in zip(row, Y.components) if not gij.is_zero())
            terms.append(xi * inner)
        return total(terms)

    def flat(self, X: VectorField) -> KForm:
        """The 1-form ``g(X, .)``."""
        n = self.chart.dim
        return KForm.one_form(self.chart, [total(X.components[i] * self.matrix[i][j] for i in range(n)) for j in range(n)])

    def numeric(self, env: Mapping[str, np.ndarray]) -> np.ndarray:
        n = self.chart.dim
        vals, _, _ = evaluate_arrays([e for row in self.matrix for e in row], env)
        return np.stack(vals, axis=-1).reshape(-1, n, n)


def nijenhuis_pair(phi: EndField, X: VectorField, Y: VectorField) -> VectorField:
    """``phi^2[X,Y] + [phiX, phiY] - phi[phiX, Y] - phi[X, phiY]``."""
    _same_chart(phi, X, Y)
    pX, pY = phi(X), phi(Y)
    return phi(phi(lie_bracket(X, Y))) + lie_bracket(pX, pY) - phi(lie_bracket(pX, Y)) - phi(lie_bracket(X, pY))


def index_pairs(n: int) -> list[tuple[int, int]]:
    return list(combinations(range(n), 2))
