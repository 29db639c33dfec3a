"""Concrete single-chart structures used as templates and as the regression corpus."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .errors import PreconditionViolated, SingularRestriction
from .fstruct import FpkStructure, fibre_names
from .linalg import solve
from .report import CheckReport
from .symexpr import ONE, ZERO, Chart, check_zero, evaluate_arrays, sampled_check, total, var
from .tensor import EndField, KForm, MetricField, VectorField, evaluate_form, exterior_derivative, form_matrix


def _heisenberg(n: int, k: int, alphas: Sequence[float], z_names: Sequence[str], seed: int, half_width: float, name: str) -> FpkStructure:
    if n < 1 or k < 1:
        raise ValueError("need n >= 1 and k >= 1")
    alphas = tuple(float(a) for a in alphas)
    if len(alphas) != k:
        raise ValueError(f"expected {k} constants, got {len(alphas)}")
    names = [f"x{j + 1}" for j in range(n)] + [f"y{j + 1}" for j in range(n)] + list(z_names)
    chart = Chart.cube(names, -half_width, half_width, seed)
    dim = 2 * n + k
    ys = [var(f"y{j + 1}") for j in range(n)]

    # eta^i = dz_i + alpha^i sum_j y_j dx_j, so d eta^i = -alpha^i sum_j dx_j ^ dy_j
    eta_comps = []
    for i in range(k):
        comps = [ZERO] * dim
        for j in range(n):
            comps[j] = alphas[i] * ys[j]
        comps[2 * n + i] = ONE
        eta_comps.append(comps)
    eta = tuple(KForm.one_form(chart, c) for c in eta_comps)
    xi = tuple(VectorField.coordinate(chart, 2 * n + i) for i in range(k))

    # phi maps the horizontal lift of d/dx_j to d/dy_j and d/dy_j to minus that lift
    phi = [[ZERO] * dim for _ in range(dim)]
    for j in range(n):
        phi[n + j][j] = ONE
        phi[j][n + j] = -ONE
        for i in range(k):
            phi[2 * n + i][n + j] = alphas[i] * ys[j]
    phi_f = EndField(chart, tuple(tuple(r) for r in phi))

    upper = {}
    for a in range(dim):
        for b in range(a, dim):
            base = ONE if (a == b and a < 2 * n) else ZERO
            upper[(a, b)] = base + total(eta_comps[i][a] * eta_comps[i][b] for i in range(k))
    g = MetricField.from_upper(chart, upper)
    return FpkStructure(chart, phi_f, xi, eta, g, alphas, n, k, name)


def generalized_heisenberg(n: int, k: int, alphas: Sequence[float], seed: int = 0, half_width: float = 1.0) -> FpkStructure:
    """Corank-k Heisenberg-type almost-S structure on R^{2n+k}.

    Coordinates ``x1..xn, y1..yn, z1..zk``; ``eta^i = dz_i + alpha^i sum y_j dx_j``,
    ``xi_i = d/dz_i`` and ``g = sum (dx_j^2 + dy_j^2) + sum eta^i (x) eta^i``.
    """
    tag = "heisenberg_" + "_".join([str(n), str(k)] + [f"{a:g}" for a in alphas])
    return _heisenberg(n, k, alphas, [f"z{i + 1}" for i in range(k)], seed, half_width, tag)


def standard_contact(n: int, seed: int = 0, half_width: float = 1.0) -> FpkStructure:
    """Standard contact metric structure on R^{2n+1}, ``eta = dz + sum y_j dx_j``."""
    return _heisenberg(n, 1, (1.0,), ["z"], seed, half_width, f"standard_contact_{n}")


def bundle_chart(base: Chart, k: int, box: Sequence[tuple[float, float]] | None = None, prefix: str = "z") -> Chart:
    """Base chart extended by k fibre coordinates (``z1..zk`` unless taken)."""
    return base.extend(fibre_names(base, k, prefix), box or [(-1.0, 1.0)] * k)


def _fail(relation: str, rep: CheckReport):
    if not rep.passed:
        raise PreconditionViolated(relation, rep.max_residual)


def from_symplectic_base(
    base_dim_2n: int,
    omega: KForm,
    J: EndField,
    G: MetricField,
    k: int,
    alphas: Sequence[float],
    connection: Sequence[KForm],
    samples: int = 100,
    tol: float = 1e-9,
    name: str = "",
) -> FpkStructure:
    """Almost-S structure on a trivialised torus bundle over a symplectic chart.

    ``omega``, ``J`` and ``G`` live on the base chart and must satisfy
    ``J^2 = -Id`` and ``G(X, Y) = omega(X, JY)``; the connection 1-forms live
    on :func:`bundle_chart` of the base and satisfy
    ``d eta^i = -alpha^i omega``.  The result has ``phi`` equal to the
    horizontal lift of J, vertical ``xi_i`` dual to the connection and
    ``g = G + sum eta^i (x) eta^i``, so that its fundamental form is the
    pull-back of ``omega``.
    """
    base = omega.chart
    if base.dim != base_dim_2n or base_dim_2n % 2:
        raise PreconditionViolated("base dimension is 2n", abs(base.dim - base_dim_2n))
    if J.chart != base or G.chart != base:
        raise PreconditionViolated("omega, J, G share the base chart", 1.0)
    if len(connection) != k or len(alphas) != k:
        raise PreconditionViolated("k connection forms and constants", abs(len(connection) - k))
    n2 = base_dim_2n
    total_chart = connection[0].chart if k else base
    if total_chart.coordinates[:n2] != base.coordinates or total_chart.dim != n2 + k:
        raise PreconditionViolated("connection lives on the base chart extended by k fibre coordinates", 1.0)

    if omega.degree != 2:
        raise PreconditionViolated("omega is a 2-form", 1.0)
    if n2 > 2:
        _fail("d omega = 0", check_zero("base:d omega=0", exterior_derivative(omega).exprs(), base, samples, tol))
    _fail("J^2 = -Id", check_zero("base:J^2=-Id", ((J @ J) + EndField.identity(base)).exprs(), base, samples, tol))
    frame = VectorField.frame(base)
    items = [(f"({a},{b})", G(frame[a], frame[b]) - evaluate_form(omega, frame[a], J(frame[b])))
             for a in range(n2) for b in range(n2)]
    _fail("G(X,Y) = omega(X,JY)", check_zero("base:compatibility", items, base, samples, tol))
    _fail("omega nondegenerate", _nondegenerate(omega, samples))
    _fail("G positive definite", _positive(G, samples))
    pulled = omega.on_chart(total_chart)
    for i, eta in enumerate(connection):
        _fail(
            f"d eta^{i + 1} = -alpha^{i + 1} omega",
            check_zero(f"base:connection{i + 1}", (exterior_derivative(eta) + pulled.scale(float(alphas[i]))).exprs(),
                       total_chart, samples, tol),
        )

    dim = n2 + k
    A = [[eta[(b,)] for b in range(n2)] for eta in connection]
    C = [[eta[(n2 + l,)] for l in range(k)] for eta in connection]
    point = total_chart.midpoint()
    try:
        ident_cols = [[ONE if i == j else ZERO for j in range(k)] for i in range(k)]
        Cinv = solve(C, ident_cols, point) if k else []
        K = solve(C, A, point) if k else []
    except SingularRestriction as exc:
        raise PreconditionViolated("vertical part of the connection is invertible", 0.0) from exc

    xi = tuple(VectorField(total_chart, tuple([ZERO] * n2 + [Cinv[l][j] for l in range(k)])) for j in range(k))

    phi = [[ZERO] * dim for _ in range(dim)]
    for b in range(n2):
        v = [J.matrix[a][b] for a in range(n2)]
        for a in range(n2):
            phi[a][b] = v[a]
        for l in range(k):
            phi[n2 + l][b] = -total(K[l][a] * v[a] for a in range(n2))
    phi_f = EndField(total_chart, tuple(tuple(r) for r in phi))

    comps = [eta.components() for eta in connection]
    upper = {}
    for a in range(dim):
        for b in range(a, dim):
            base_part = G.matrix[a][b] if (a < n2 and b < n2) else ZERO
            upper[(a, b)] = base_part + total(comps[i][a] * comps[i][b] for i in range(k))
    g = MetricField.from_upper(total_chart, upper)
    eta = tuple(KForm(total_chart, 1, e.coeffs) for e in connection)
    return FpkStructure(total_chart, phi_f, xi, eta, g, tuple(alphas), n2 // 2, k, name)


def _nondegenerate(omega: KForm, samples: int) -> CheckReport:
    mat = form_matrix(omega)
    flat = [e for row in mat for e in row]
    n = omega.chart.dim

    def residual_fn(env):
        vals, bad, _ = evaluate_arrays(flat, env)
        arr = np.stack(vals, axis=-1).reshape(-1, n, n)
        return np.maximum(0.0, 1e-10 - np.abs(np.linalg.det(arr))), bad

    return sampled_check("base:omega nondegenerate", residual_fn, omega.chart, samples, 0.0)


def _positive(G: MetricField, samples: int) -> CheckReport:
    def residual_fn(env):
        lam = np.linalg.eigvalsh(G.numeric(env))[:, 0]
        return np.maximum(0.0, 1e-10 - lam), np.zeros(lam.shape, dtype=bool)

    return sampled_check("base:G positive", residual_fn, G.chart, samples, 0.0)


def _plane_base(seed: int = 0) -> tuple[Chart, KForm, EndField, MetricField]:
    base = Chart.cube(["x", "y"], seed=seed)
    omega = KForm.basis(base, "x", "y")
    J = EndField(base, ((ZERO, -ONE), (ONE, ZERO)))  # J d/dx = d/dy, J d/dy = -d/dx
    G = MetricField(base, ((ONE, ZERO), (ZERO, ONE)))
    return base, omega, J, G


def symplectic_base_example(k: int = 2, alphas: Sequence[float] = (1.0, 1.0), seed: int = 0) -> FpkStructure:
    """Torus bundle over (R^2, dx^dy) with ``eta^i = dz_i + alpha^i (y dx - x dy)/2``."""
    base, omega, J, G = _plane_base(seed)
    total_chart = bundle_chart(base, k)
    x, y = var("x"), var("y")
    conn = []
    for i in range(k):
        comps = [alphas[i] * y / 2.0, -alphas[i] * x / 2.0] + [ONE if l == i else ZERO for l in range(k)]
        conn.append(KForm.one_form(total_chart, comps))
    tag = "symplectic_base_r2_" + "_".join(f"{a:g}" for a in alphas)
    return from_symplectic_base(2, omega, J, G, k, alphas, conn, name=tag)


def flat_torus_bundle(k: int = 2, seed: int = 0) -> FpkStructure:
    """Flat connection ``eta^i = dz_i`` over (R^2, dx^dy): an almost-S structure with all alpha zero."""
    return symplectic_base_example(k, (0.0,) * k, seed).replace(name=f"flat_torus_bundle_r2_k{k}")


CATALOG: dict[str, Callable[[], FpkStructure]] = {
    "standard_contact_1": lambda: standard_contact(1),
    "standard_contact_2": lambda: standard_contact(2),
    "heisenberg_1_1_1": lambda: generalized_heisenberg(1, 1, (1.0,)),
    "heisenberg_1_2_1_2": lambda: generalized_heisenberg(1, 2, (1.0, 2.0)),
    "heisenberg_2_2_0_1": lambda: generalized_heisenberg(2, 2, (0.0, 1.0)),
    "symplectic_base_r2_1_1": lambda: symplectic_base_example(2, (1.0, 1.0)),
    "flat_torus_bundle_r2_k2": lambda: flat_torus_bundle(2),
}


def get(name: str) -> FpkStructure:
    """Look up a catalog entry.

    Besides the fixed names in :data:`CATALOG`, accepts
    ``standard_contact:<n>`` and ``generalized_heisenberg:<n>,<k>,<a1>,...``.
    """
    if name in CATALOG:
        return CATALOG[name]()
    head, _, args = name.partition(":")
    try:
        if head == "standard_contact" and args:
            return standard_contact(int(args))
        if head == "generalized_heisenberg" and args:
            parts = args.split(",")
            n, k = int(parts[0]), int(parts[1])
            return generalized_heisenberg(n, k, [float(a) for a in parts[2:]])
    except (ValueError, IndexError) as exc:
        raise KeyError(f"bad catalog arguments in {name!r}: {exc}") from None
    raise KeyError(f"unknown catalog entry {name!r}; known: {', '.join(sorted(CATALOG))}")


def perturbed_heisenberg(eps: float = 0.1) -> FpkStructure:
    """``generalized_heisenberg(1, 1, (1,))`` with ``eta^1`` replaced by ``eta^1 + eps x1 dy1``.

    ``d eta^1`` stays proportional to Phi but with factor ``-(1 - eps)``, so the
    declared alpha no longer matches: the structure is not almost-S as declared.
    """
    s = generalized_heisenberg(1, 1, (1.0,))
    bump = KForm.basis(s.chart, "y1").scale(var("x1") * eps)
    return s.replace(eta=(s.eta[0] + bump,), name=f"heisenberg_1_1_1_perturbed_{eps:g}")
