"""Metric f.pk-structures: construction, axiom checks and classification.

Sign convention: the fundamental 2-form is ``Phi(X, Y) = g(phi X, Y)`` (phi in
the first slot) and the almost-S condition reads ``d eta^i = -alpha^i Phi``.
Several references put phi in the second slot, which flips the sign of Phi;
input data must follow the convention used here.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations
from typing import Sequence

import numpy as np

from .errors import AlphaFitIllPosed, DimensionMismatch, PreconditionNotAlmostS
from .report import CheckReport
from .symexpr import ONE, ZERO, Chart, Expr, check_zero, evaluate_arrays, random_polynomial, sampled_check, total
from .tensor import (
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
    nijenhuis_pair,
)

DEFAULT_TOL = 1e-9
DEFAULT_SAMPLES = 100
RANDOM_FIELDS = 10
RANK_RATIO = 1e-8
POSITIVITY_FLOOR = 1e-10


@dataclass(frozen=True, eq=False)
class FpkStructure:
    """The tuple (phi, xi_i, eta^j, g) with declared constants alpha^i."""

    chart: Chart
    phi: EndField
    xi: tuple[VectorField, ...]
    eta: tuple[KForm, ...]
    g: MetricField
    alpha: tuple[float, ...]
    n: int
    k: int
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "xi", tuple(self.xi))
        object.__setattr__(self, "eta", tuple(self.eta))
        object.__setattr__(self, "alpha", tuple(float(a) for a in self.alpha))
        if self.n < 0 or self.k < 0:
            raise DimensionMismatch("ranks n and k must be non-negative")
        if self.chart.dim != 2 * self.n + self.k:
            raise DimensionMismatch(f"chart dimension {self.chart.dim} != 2n + k = {2 * self.n + self.k}")
        if len(self.xi) != self.k or len(self.eta) != self.k or len(self.alpha) != self.k:
            raise DimensionMismatch(f"expected k = {self.k} vector fields, 1-forms and constants")
        for obj in (self.phi, self.g, *self.xi, *self.eta):
            if obj.chart != self.chart:
                raise DimensionMismatch("all fields must live on the structure's chart")
        if any(e.degree != 1 for e in self.eta):
            raise DimensionMismatch("eta^j must be 1-forms")

    @property
    def dim(self) -> int:
        return self.chart.dim

    def rechart(self, chart: Chart) -> "FpkStructure":
        """Same data on a chart with identical coordinates but another box or seed."""
        if chart.coordinates != self.chart.coordinates:
            raise DimensionMismatch("rechart needs identical coordinates")
        return FpkStructure(
            chart,
            EndField(chart, self.phi.matrix),
            tuple(VectorField(chart, x.components) for x in self.xi),
            tuple(KForm(chart, 1, e.coeffs) for e in self.eta),
            MetricField(chart, self.g.matrix),
            self.alpha,
            self.n,
            self.k,
            self.name,
        )

    def replace(self, **changes) -> "FpkStructure":
        data = dict(
            chart=self.chart, phi=self.phi, xi=self.xi, eta=self.eta, g=self.g,
            alpha=self.alpha, n=self.n, k=self.k, name=self.name,
        )
        data.update(changes)
        return FpkStructure(**data)

    @cached_property
    def phi2(self) -> EndField:
        return self.phi @ self.phi

    @cached_property
    def l(self) -> EndField:
        return -self.phi2

    @cached_property
    def m(self) -> EndField:
        return self.phi2 + EndField.identity(self.chart)

    @cached_property
    def frame(self) -> list[VectorField]:
        return VectorField.frame(self.chart)

    @cached_property
    def fundamental_form(self) -> KForm:
        return fundamental_form(self)

    @cached_property
    def d_eta(self) -> tuple[KForm, ...]:
        return tuple(exterior_derivative(e) for e in self.eta)

    def eta_of(self, j: int, X: VectorField) -> Expr:
        return evaluate_form(self.eta[j], X)


def random_fields(chart: Chart, count: int, label: str, degree: int = 2) -> list[VectorField]:
    """Seeded vector fields with sparse random polynomial coefficients."""
    rng = chart.rng("fields:" + label)
    return [
        VectorField(chart, tuple(random_polynomial(chart.coordinates, degree, rng, density=0.35) for _ in chart.coordinates))
        for _ in range(count)
    ]


def e_frame(s: FpkStructure) -> list[VectorField]:
    """Spanning family ``l(d_a)`` of E = Im phi (redundant when k > 0)."""
    return [s.l.column(a) for a in range(s.dim)]


def _tag(s: FpkStructure, text: str) -> str:
    return f"{s.name}:{text}" if s.name else text


# ---------------------------------------------------------------- axioms


def fundamental_form(s: FpkStructure) -> KForm:
    """``Phi(X, Y) = g(phi X, Y)``; components ``(phi^T g)_{ab}``."""
    n = s.dim
    coeffs = {}
    for a, b in combinations(range(n), 2):
        coeffs[(a, b)] = total(s.phi.matrix[c][a] * s.g.matrix[c][b] for c in range(n))
    return KForm(s.chart, 2, coeffs)


def _full_phi_matrix(s: FpkStructure) -> list[list[Expr]]:
    n = s.dim
    return [[total(s.phi.matrix[c][a] * s.g.matrix[c][b] for c in range(n)) for b in range(n)] for a in range(n)]


def _rank_check(identity: str, mat: Sequence[Sequence[Expr]], chart: Chart, expected: int, samples: int) -> CheckReport:
    flat = [e for row in mat for e in row]
    size = len(mat)

    def residual_fn(env):
        vals, bad, _ = evaluate_arrays(flat, env)
        arr = np.stack(vals, axis=-1).reshape(-1, size, size)
        sv = np.linalg.svd(arr, compute_uv=False)
        top = sv[:, :1] if size else np.zeros((arr.shape[0], 1))
        ranks = (sv > RANK_RATIO * np.maximum(top, 1e-300)).sum(axis=1) if size else np.zeros(arr.shape[0])
        return np.abs(ranks - expected).astype(float), bad

    return sampled_check(identity, residual_fn, chart, samples, 0.0, note=f"expected rank {expected}")


def validate_fpk(s: FpkStructure, samples: int = DEFAULT_SAMPLES, tol: float = DEFAULT_TOL) -> list[CheckReport]:
    """One report per axiom of a metric f.pk-structure."""
    chart, phi, n = s.chart, s.phi, s.dim
    ident = EndField.identity(chart)
    reports = []

    def zero(name, items):
        reports.append(check_zero(_tag(s, name), items, chart, samples, tol))

    zero("f_identity phi^3+phi=0", ((s.phi2 @ phi) + phi).exprs())

    if s.k == 0:
        for name in ("frame_duality eta^i(xi_j)=delta", "kernel phi(xi_i)=0", "cokernel eta^j.phi=0"):
            reports.append(CheckReport.vacuous(_tag(s, name), tol, "k = 0"))
    else:
        zero(
            "frame_duality eta^i(xi_j)=delta",
            [(f"eta{i + 1}(xi{j + 1})", s.eta_of(i, s.xi[j]) - (ONE if i == j else ZERO)) for i in range(s.k) for j in range(s.k)],
        )
        zero("kernel phi(xi_i)=0", [(f"xi{i + 1}{c}", e) for i in range(s.k) for c, e in phi(s.xi[i]).exprs()])
        zero("cokernel eta^j.phi=0", [(f"eta{j + 1}{c}", e) for j in range(s.k) for c, e in phi.pull(s.eta[j]).exprs()])

    projection = ident
    for i in range(s.k):
        projection = projection - EndField.outer(s.xi[i], s.eta[i])
    zero("phi_squared phi^2=-Id+sum eta^i(x)xi_i", (s.phi2 + projection).exprs())

    l, m = s.l, s.m
    zero(
        "projectors l+m=Id, l^2=l, m^2=m, lm=0",
        [("l+m-Id" + c, e) for c, e in (l + m - ident).exprs()]
        + [("l^2-l" + c, e) for c, e in ((l @ l) - l).exprs()]
        + [("m^2-m" + c, e) for c, e in ((m @ m) - m).exprs()]
        + [("lm" + c, e) for c, e in (l @ m).exprs()],
    )

    reports.append(CheckReport(_tag(s, "metric_symmetry"), True, 0.0, None, 0, tol, note="exact: g_ij and g_ji are one expression"))
    reports.append(_positivity_check(s, samples))

    frame = s.frame
    rnd = random_fields(chart, RANDOM_FIELDS, "compat")
    pairs = [(f"(d{a},d{b})", frame[a], frame[b]) for a in range(n) for b in range(a, n)]
    pairs += [(f"(R{i},R{i + 1})", rnd[i], rnd[(i + 1) % len(rnd)]) for i in range(len(rnd))]

    def compat(X, Y):
        return s.g(X, Y) - s.g(phi(X), phi(Y)) - total(s.eta_of(i, X) * s.eta_of(i, Y) for i in range(s.k))

    zero("metric_compatibility g=g(phi.,phi.)+sum eta^i eta^i", [(lbl, compat(X, Y)) for lbl, X, Y in pairs])

    orth = [(f"(d{a},d{b})", s.g(l(frame[a]), m(frame[b]))) for a in range(n) for b in range(n)]
    orth += [(f"(R{i},R{i + 1})", s.g(l(rnd[i]), m(rnd[(i + 1) % len(rnd)]))) for i in range(len(rnd))]
    zero("orthogonality g(lX,mY)=0", orth)

    reports.append(_rank_check(_tag(s, "constant_rank rank(phi)=2n"), phi.matrix, chart, 2 * s.n, samples))
    return reports


def _positivity_check(s: FpkStructure, samples: int) -> CheckReport:
    def residual_fn(env):
        arr = s.g.numeric(env)
        lam = np.linalg.eigvalsh(arr)[:, 0]
        _, bad, _ = evaluate_arrays([e for row in s.g.matrix for e in row], env)
        return np.maximum(0.0, POSITIVITY_FLOOR - lam), bad

    return sampled_check(_tag(s, "metric_positive_definite"), residual_fn, s.chart, samples, 0.0,
                         note=f"shortfall of min eigenvalue below {POSITIVITY_FLOOR:g}")


def fundamental_form_checks(s: FpkStructure, samples: int = DEFAULT_SAMPLES, tol: float = DEFAULT_TOL) -> list[CheckReport]:
    chart = s.chart
    full = _full_phi_matrix(s)
    n = s.dim
    reports = [
        check_zero(
            _tag(s, "fundamental_form_antisymmetry"),
            [(f"({a},{b})", full[a][b] + full[b][a]) for a in range(n) for b in range(a, n)],
            chart, samples, tol,
        )
    ]
    reports.extend(xi_in_kernel(s, samples, tol))
    reports.append(_rank_check(_tag(s, "fundamental_form_rank rank(Phi)=2n"), form_matrix(s.fundamental_form), chart, 2 * s.n, samples))
    return reports


def xi_in_kernel(s: FpkStructure, samples: int = DEFAULT_SAMPLES, tol: float = DEFAULT_TOL) -> list[CheckReport]:
    name = _tag(s, "xi_in_kernel i(xi_i)Phi=0")
    if s.k == 0:
        return [CheckReport.vacuous(name, tol, "k = 0")]
    Phi = s.fundamental_form
    items = [(f"xi{i + 1}{c}", e) for i in range(s.k) for c, e in interior_product(s.xi[i], Phi).exprs()]
    return [check_zero(name, items, s.chart, samples, tol)]


# ---------------------------------------------------------------- normality and classification


def normality_tensor(s: FpkStructure, X: VectorField, Y: VectorField) -> VectorField:
    """``N(X, Y) = [phi, phi](X, Y) + sum_i d eta^i(X, Y) xi_i``."""
    out = nijenhuis_pair(s.phi, X, Y)
    for i in range(s.k):
        out = out + s.xi[i].scale(evaluate_form(s.d_eta[i], X, Y))
    return out


@dataclass(frozen=True)
class Classification:
    almost_K: bool
    almost_S: bool
    fitted_alpha: tuple[float, ...]
    normal: bool
    cr_integrable: bool
    reports: list[CheckReport] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "almost_K": self.almost_K,
            "almost_S": self.almost_S,
            "fitted_alpha": list(self.fitted_alpha),
            "normal": self.normal,
            "cr_integrable": self.cr_integrable,
        }


def fit_alpha(s: FpkStructure, samples: int = DEFAULT_SAMPLES) -> tuple[float, ...]:
    """Least-squares ``alpha^i`` in ``d eta^i = -alpha^i Phi`` over sampled E-frame pairs."""
    if s.k == 0:
        return ()
    E = e_frame(s)
    Phi = s.fundamental_form
    pairs = list(combinations(range(len(E)), 2))
    phi_vals = [evaluate_form(Phi, E[a], E[b]) for a, b in pairs]
    deta_vals = [[evaluate_form(s.d_eta[i], E[a], E[b]) for a, b in pairs] for i in range(s.k)]
    env = s.chart.sample(samples, "alpha_fit")
    flat = phi_vals + [e for row in deta_vals for e in row]
    vals, bad, _ = evaluate_arrays(flat, env)
    ok = ~bad
    P = np.stack(vals[: len(pairs)])[:, ok] if pairs else np.zeros((0, 0))
    denom = float((P * P).sum())
    if denom < 1e-24:
        raise AlphaFitIllPosed("Phi vanishes on every sampled E-frame pair")
    out = []
    for i in range(s.k):
        D = np.stack(vals[len(pairs) * (i + 1): len(pairs) * (i + 2)])[:, ok]
        out.append(-float((D * P).sum()) / denom + 0.0)
    return tuple(out)


def classify(s: FpkStructure, samples: int = DEFAULT_SAMPLES, tol: float = DEFAULT_TOL) -> Classification:
    chart = s.chart
    Phi = s.fundamental_form
    reports = []
    if Phi.degree < s.dim:
        rep_k = check_zero(_tag(s, "almost_K dPhi=0"), exterior_derivative(Phi).exprs(), chart, samples, tol)
    else:
        rep_k = CheckReport.vacuous(_tag(s, "almost_K dPhi=0"), tol, "Phi is top-degree")
    reports.append(rep_k)
    reports.append(involutivity_check(s, samples, tol))

    fitted = fit_alpha(s, samples)
    alpha_ok = True
    for i in range(s.k):
        rep = check_zero(
            _tag(s, f"almost_S d eta^{i + 1} = -alpha^{i + 1} Phi"),
            (s.d_eta[i] + Phi.scale(fitted[i])).exprs(),
            chart, samples, tol,
        )
        gap = abs(fitted[i] - s.alpha[i])
        agree = CheckReport(
            _tag(s, f"alpha^{i + 1} declared vs fitted"), gap <= tol, gap, None, samples, tol,
            note=f"declared {s.alpha[i]:.12g}, fitted {fitted[i]:.12g}",
        )
        reports += [rep, agree]
        alpha_ok = alpha_ok and rep.passed and agree.passed

    frame = s.frame
    full_items = []
    for a, b in combinations(range(s.dim), 2):
        full_items += [(f"N(d{a},d{b}){c}", e) for c, e in normality_tensor(s, frame[a], frame[b]).exprs()]
    rep_n = check_zero(_tag(s, "normal N=0"), full_items, chart, samples, tol)
    E = e_frame(s)
    e_items = []
    for a, b in combinations(range(len(E)), 2):
        e_items += [(f"N(E{a},E{b}){c}", e) for c, e in normality_tensor(s, E[a], E[b]).exprs()]
    rep_cr = check_zero(_tag(s, "cr_integrable N|ExE=0"), e_items, chart, samples, tol)
    reports += [rep_n, rep_cr]

    return Classification(
        almost_K=rep_k.passed,
        almost_S=rep_k.passed and alpha_ok,
        fitted_alpha=fitted,
        normal=rep_n.passed,
        cr_integrable=rep_cr.passed,
        reports=reports,
    )


def involutivity_check(s: FpkStructure, samples: int = DEFAULT_SAMPLES, tol: float = DEFAULT_TOL) -> CheckReport:
    """``i([xi_i, xi_j]) Phi = 0``, i.e. T = ker phi is closed under brackets."""
    name = _tag(s, "involutivity i([xi_i,xi_j])Phi=0")
    if s.k < 2:
        return CheckReport.vacuous(name, tol, "k < 2")
    Phi = s.fundamental_form
    items = []
    for i, j in combinations(range(s.k), 2):
        br = lie_bracket(s.xi[i], s.xi[j])
        items += [(f"[xi{i + 1},xi{j + 1}]{c}", e) for c, e in interior_product(br, Phi).exprs()]
    return check_zero(name, items, s.chart, samples, tol)


def _tangent_sections(s: FpkStructure, count: int) -> list[tuple[str, VectorField]]:
    out = [(f"xi{i + 1}", x) for i, x in enumerate(s.xi)]
    rng = s.chart.rng("T-sections")
    for r in range(count):
        coeffs = [random_polynomial(s.chart.coordinates, 1, rng) for _ in range(s.k)]
        v = VectorField.zero(s.chart)
        for c, x in zip(coeffs, s.xi):
            v = v + x.scale(c)
        out.append((f"T{r}", v))
    return out


def structure_propositions(
    s: FpkStructure,
    samples: int = DEFAULT_SAMPLES,
    tol: float = DEFAULT_TOL,
    classification: Classification | None = None,
    require_almost_s: bool = True,
) -> list[CheckReport]:
    """Kernel of Phi, the involutivity identity, and the two almost-S identities.

    The commuting-frame and invariance checks need an almost-S structure; if
    the structure is not almost-S they raise :class:`PreconditionNotAlmostS`
    or, with ``require_almost_s=False``, are reported as skipped.
    """
    chart = s.chart
    Phi = s.fundamental_form
    reports = xi_in_kernel(s, samples, tol)

    name2 = _tag(s, "involutivity_identity dPhi(X,Y,Z)=-Phi([X,Y],Z)")
    if s.k == 0 or s.dim < 3:
        reports.append(CheckReport.vacuous(name2, tol, "no 3-form or no kernel"))
    else:
        dPhi = exterior_derivative(Phi)
        T = _tangent_sections(s, 3)
        Zs = [(f"d{a}", v) for a, v in enumerate(s.frame)] + [
            (f"R{i}", v) for i, v in enumerate(random_fields(chart, 3, "prop2"))
        ]
        items = []
        for (nx, X), (ny, Y) in combinations(T, 2):
            br = lie_bracket(X, Y)
            for nz, Z in Zs:
                items.append((f"({nx},{ny},{nz})", evaluate_form(dPhi, X, Y, Z) + evaluate_form(Phi, br, Z)))
        reports.append(check_zero(name2, items, chart, samples, tol))

    if classification is None:
        classification = classify(s, samples, tol)
    gated = [
        _tag(s, "commuting_frame [xi_i,xi_j]=0"),
        _tag(s, "invariance L(xi_i)eta^j=0"),
        _tag(s, "invariance L(xi_i)Phi=0"),
    ]
    if not classification.almost_S:
        if require_almost_s:
            raise PreconditionNotAlmostS(f"{s.name or 'structure'} is not almost-S; commuting-frame checks need it")
        return reports + [
            CheckReport(g, True, 0.0, None, 0, tol, note="skipped: structure is not almost-S") for g in gated
        ]
    if s.k == 0:
        return reports + [CheckReport.vacuous(g, tol, "k = 0") for g in gated]

    items = []
    for i, j in combinations(range(s.k), 2):
        items += [(f"[xi{i + 1},xi{j + 1}]{c}", e) for c, e in lie_bracket(s.xi[i], s.xi[j]).exprs()]
    reports.append(check_zero(gated[0], items, chart, samples, tol) if items else CheckReport.vacuous(gated[0], tol, "k = 1"))
    items = []
    for i in range(s.k):
        for j in range(s.k):
            items += [(f"L(xi{i + 1})eta{j + 1}{c}", e) for c, e in lie_derivative(s.xi[i], s.eta[j]).exprs()]
    reports.append(check_zero(gated[1], items, chart, samples, tol))
    items = []
    for i in range(s.k):
        items += [(f"L(xi{i + 1})Phi{c}", e) for c, e in lie_derivative(s.xi[i], Phi).exprs()]
    reports.append(check_zero(gated[2], items, chart, samples, tol))
    return reports


# ---------------------------------------------------------------- rank and stable complex structure


@dataclass(frozen=True)
class RankReport:
    min_rank: int
    max_rank: int

    @property
    def constant(self) -> bool:
        return self.min_rank == self.max_rank


def numeric_rank(e: EndField, samples: int = DEFAULT_SAMPLES, threshold: float = RANK_RATIO) -> RankReport:
    """Rank of ``e`` at sampled points, counting singular values above
    ``threshold`` times the largest one."""
    env = e.chart.sample(samples, "numeric_rank")
    arr = e.numeric(env)
    sv = np.linalg.svd(arr, compute_uv=False)
    top = sv[:, :1]
    ranks = np.where(top[:, 0] > 0, (sv > threshold * np.where(top > 0, top, 1.0)).sum(axis=1), 0)
    return RankReport(int(ranks.min()), int(ranks.max()))


def fibre_names(chart: Chart, k: int, prefix: str = "t") -> list[str]:
    while any(f"{prefix}{i + 1}" in chart.coordinates for i in range(k)):
        prefix = "_" + prefix
    return [f"{prefix}{i + 1}" for i in range(k)]


def stable_complex_structure(s: FpkStructure, box: Sequence[tuple[float, float]] | None = None) -> EndField:
    """J on M x R^k: ``J = phi`` on E, ``J xi_i = tau_i`` and ``J tau_i = -xi_i``.

    In coordinates ``J(v, w) = (phi v - sum_i w_i xi_i, eta(v))`` with ``tau_i``
    the fibre coordinate fields.
    """
    names = fibre_names(s.chart, s.k)
    ext = s.chart.extend(names, box or [(-1.0, 1.0)] * s.k)
    n, k = s.dim, s.k
    rows = []
    for i in range(n):
        row = list(s.phi.matrix[i]) + [-s.xi[j].components[i] for j in range(k)]
        rows.append(row)
    for j in range(k):
        row = s.eta[j].components() + [ZERO] * k
        rows.append(row)
    return EndField(ext, tuple(tuple(r) for r in rows))


def check_complex(J: EndField, samples: int = DEFAULT_SAMPLES, tol: float = DEFAULT_TOL, identity: str = "J^2=-Id") -> CheckReport:
    return check_zero(identity, ((J @ J) + EndField.identity(J.chart)).exprs(), J.chart, samples, tol)
