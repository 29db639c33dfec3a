"""Hamiltonian vector fields and the Jacobi bracket of an almost-S structure.

Given constants ``c_j`` with ``sum c_j alpha^j = 1`` put ``eta = sum c_j eta^j``
and ``xi = sum alpha^j xi_j``.  The Hamiltonian field of ``f`` is defined by

    eta^j(X_f) = alpha^j f,        i(X_f) Phi = df - (xi.f) eta,

and the bracket is ``{f, g} = X_f.g - (xi.f) g``.

The second equation only constrains the E-component of ``X_f`` (``i(X)Phi``
kills T).  It is solvable exactly when ``df - (xi.f) eta`` annihilates every
``xi_j``, which is automatic for k = 1 but for k >= 2 restricts ``f`` (e.g. to
functions invariant along T, or to ``f`` with ``xi_j.f = c_j (xi.f)``).  The
solver returns the unique field satisfying the first equation and the
E-restriction of the second; the residual report exposes any T-part mismatch.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations, product
from typing import Sequence

import numpy as np
import scipy.linalg

from .errors import AllAlphaZero, SingularRestriction
from .fstruct import FpkStructure, e_frame
from .linalg import numeric_matrix, solve
from .report import CheckReport
from .symexpr import ONE, ZERO, Expr, as_expr, check_zero, evaluate_arrays, sampled_check, total, var
from .tensor import KForm, VectorField, evaluate_form, form_matrix, interior_product, lie_bracket, lie_derivative

HAM_TOL = 1e-7
CHOICE_TOL = 1e-12


@dataclass(frozen=True)
class EtaChoice:
    """Constant coefficients of ``eta = sum c_j eta^j``."""

    c: tuple[float, ...]

    def __post_init__(self):
        for v in self.c:
            if isinstance(v, Expr) or not isinstance(v, (int, float, np.integer, np.floating)):
                raise TypeError("non-constant eta coefficients are not supported")
        object.__setattr__(self, "c", tuple(float(v) for v in self.c))

    @classmethod
    def default(cls, alpha: Sequence[float]) -> "EtaChoice":
        """Minimal-norm choice ``c = alpha / |alpha|^2``."""
        norm2 = float(sum(a * a for a in alpha))
        if norm2 == 0.0:
            raise AllAlphaZero("all alpha^j vanish; no Reeb-type section exists")
        return cls(tuple(a / norm2 for a in alpha))

    def check(self, alpha: Sequence[float]) -> None:
        if len(self.c) != len(alpha):
            raise ValueError(f"eta choice has {len(self.c)} coefficients, structure has k = {len(alpha)}")
        pairing = sum(c * a for c, a in zip(self.c, alpha))
        if abs(pairing - 1.0) > CHOICE_TOL:
            raise ValueError(f"eta(xi) = {pairing!r} != 1")


def _require_alpha(s: FpkStructure) -> None:
    if not any(a != 0.0 for a in s.alpha):
        raise AllAlphaZero(f"{s.name or 'structure'}: all alpha^j are zero")


def reeb_field(s: FpkStructure) -> VectorField:
    """``xi = sum alpha^j xi_j``, the Hamiltonian field of the constant 1."""
    _require_alpha(s)
    out = VectorField.zero(s.chart)
    for a, x in zip(s.alpha, s.xi):
        if a != 0.0:
            out = out + x.scale(a)
    return out


def eta_section(s: FpkStructure, choice: EtaChoice) -> KForm:
    out = KForm.zero(s.chart, 1)
    for c, e in zip(choice.c, s.eta):
        if c != 0.0:
            out = out + e.scale(c)
    return out


@dataclass(frozen=True, eq=False)
class HamiltonianField:
    f: Expr
    X: VectorField
    system: "HamiltonianSystem" = field(repr=False)

    def residuals(self, samples: int = 100, tol: float = HAM_TOL) -> list[CheckReport]:
        return self.system.residual_reports(self.f, samples, tol)


class HamiltonianSystem:
    """Solver for Hamiltonian fields of one structure and one eta choice.

    The restriction of Phi to a frame of E is inverted once (symbolic Gaussian
    elimination, pivots chosen at the box midpoint); each ``X_f`` is then a
    matrix-vector product.  ``a_coeffs`` replaces ``alpha`` in the first
    defining equation and exists to demonstrate that any other choice breaks
    the bracket identities.
    """

    def __init__(self, s: FpkStructure, choice: EtaChoice | None = None, a_coeffs: Sequence[float] | None = None):
        _require_alpha(s)
        self.s = s
        self.choice = choice or EtaChoice.default(s.alpha)
        self.choice.check(s.alpha)
        self.coeffs = tuple(float(a) for a in (a_coeffs if a_coeffs is not None else s.alpha))
        if len(self.coeffs) != s.k:
            raise ValueError("a_coeffs needs k entries")
        self.xi = reeb_field(s)
        self.eta = eta_section(s, self.choice)
        self.Phi = s.fundamental_form
        self._eta_c = self.eta.components()
        self._frame, self._inverse = self._restricted_inverse()
        self._cache: dict[Expr, VectorField] = {}

    def _restricted_inverse(self):
        s = self.s
        rank = 2 * s.n
        if rank == 0:
            return [], []
        point = s.chart.midpoint()
        E = e_frame(s)
        L = numeric_matrix(s.l.matrix, point)
        _, R, piv = scipy.linalg.qr(L, pivoting=True)
        if abs(R[rank - 1, rank - 1]) <= 1e-10 * max(1.0, abs(R[0, 0])):
            raise SingularRestriction("E = Im phi has rank < 2n at the pivot point")
        frame = [E[j] for j in sorted(piv[:rank])]
        M = [[evaluate_form(self.Phi, a, b) for b in frame] for a in frame]
        Mt = [[M[j][i] for j in range(rank)] for i in range(rank)]
        ident = [[ONE if i == j else ZERO for j in range(rank)] for i in range(rank)]
        try:
            inverse = solve(Mt, ident, point)
        except SingularRestriction as exc:
            raise SingularRestriction(f"restriction of Phi to E is singular at the pivot point: {exc}") from None
        return frame, inverse

    def theta(self, f: Expr) -> list[Expr]:
        """Components of ``df - (xi.f) eta``."""
        f = as_expr(f)
        xf = self.xi(f)
        return [f.diff(c) - xf * e for c, e in zip(self.s.chart.coordinates, self._eta_c)]

    def field(self, f) -> VectorField:
        f = as_expr(f)
        hit = self._cache.get(f)
        if hit is not None:
            return hit
        s = self.s
        th = self.theta(f)
        rhs = [total(t * c for t, c in zip(th, e.components) if not c.is_zero()) for e in self._frame]
        X = VectorField.zero(s.chart)
        for row, e in zip(self._inverse, self._frame):
            coef = total(w * r for w, r in zip(row, rhs))
            if not coef.is_zero():
                X = X + e.scale(coef)
        for a, x in zip(self.coeffs, s.xi):
            if a != 0.0:
                X = X + x.scale(a * f)
        self._cache[f] = X
        return X

    def hamiltonian(self, f) -> HamiltonianField:
        f = as_expr(f)
        return HamiltonianField(f, self.field(f), self)

    def bracket(self, f, g) -> Expr:
        f, g = as_expr(f), as_expr(g)
        return self.field(f)(g) - self.xi(f) * g

    def residual_reports(self, f, samples: int = 100, tol: float = HAM_TOL, prefix: str = "") -> list[CheckReport]:
        f = as_expr(f)
        s = self.s
        X = self.field(f)
        first = [(f"eta{j + 1}", s.eta_of(j, X) - self.coeffs[j] * f) for j in range(s.k)]
        iX = interior_product(X, self.Phi).components()
        second = [(f"[{c}]", a - b) for c, a, b in zip(s.chart.coordinates, iX, self.theta(f))]
        return [
            check_zero(f"{prefix}hamiltonian_first eta^j(X_f)=a^j f", first, s.chart, samples, tol),
            check_zero(f"{prefix}hamiltonian_second i(X_f)Phi=df-(xi.f)eta", second, s.chart, samples, tol),
        ]


def hamiltonian_field(s: FpkStructure, c: EtaChoice | None, f, a_coeffs: Sequence[float] | None = None) -> HamiltonianField:
    return HamiltonianSystem(s, c, a_coeffs).hamiltonian(f)


def jacobi_bracket(s: FpkStructure, c: EtaChoice | None, f, g) -> Expr:
    """``{f, g} = X_f.g - (xi.f) g``."""
    return HamiltonianSystem(s, c).bracket(f, g)


def bracket_consistency(system: HamiltonianSystem, pairs, samples: int = 100, tol: float = HAM_TOL) -> list[CheckReport]:
    """Agreement of the bracket with ``i([X_f, X_g]) eta`` and with
    ``X_f.g - X_g.f + Phi(X_f, X_g)``."""
    s = system.s
    a, b = [], []
    for f, g in pairs:
        br = system.bracket(f, g)
        Xf, Xg = system.field(f), system.field(g)
        lbl = f"{{{f},{g}}}"
        a.append((lbl, br - evaluate_form(system.eta, lie_bracket(Xf, Xg))))
        b.append((lbl, br - (Xf(g) - Xg(f) + evaluate_form(system.Phi, Xf, Xg))))
    return [
        check_zero("bracket {f,g}=i([X_f,X_g])eta", a, s.chart, samples, tol),
        check_zero("bracket {f,g}=X_f.g-X_g.f+Phi(X_f,X_g)", b, s.chart, samples, tol),
    ]


def numeric_hamiltonian(s: FpkStructure, c: EtaChoice | None, f, env: dict[str, np.ndarray]) -> np.ndarray:
    """Pointwise oracle for ``X_f``: an LU solve of the square system
    ``(Phi + sum eta^j (x) eta^j)(X, .) = df - (xi.f) eta + sum alpha^j f eta^j``
    at each point of ``env``.  Returns shape ``(npts, dim)``."""
    _require_alpha(s)
    choice = c or EtaChoice.default(s.alpha)
    f = as_expr(f)
    m = s.dim
    Phi = form_matrix(s.fundamental_form)
    eta_c = [e.components() for e in s.eta]
    grads = [f.diff(x) for x in s.chart.coordinates]
    xi_f = [x(f) for x in s.xi]
    flat = [e for row in Phi for e in row] + [e for row in eta_c for e in row] + grads + xi_f + [f]
    vals, _, _ = evaluate_arrays(flat, env)
    vals = np.stack(vals, axis=-1)
    npts = vals.shape[0]
    P = vals[:, : m * m].reshape(npts, m, m)
    off = m * m
    H = vals[:, off: off + s.k * m].reshape(npts, s.k, m)
    off += s.k * m
    df = vals[:, off: off + m]
    off += m
    xif = vals[:, off: off + s.k]
    fv = vals[:, -1]
    alpha = np.array(s.alpha)
    cvec = np.array(choice.c)
    xi_dot_f = xif @ alpha
    eta_vec = np.einsum("j,pjm->pm", cvec, H)
    B = P + np.einsum("pja,pjb->pab", H, H)
    rhs = df - xi_dot_f[:, None] * eta_vec + np.einsum("j,pjm->pm", alpha, H) * fv[:, None]
    return np.linalg.solve(np.transpose(B, (0, 2, 1)), rhs[..., None])[..., 0]


# ---------------------------------------------------------------- property suite


def _vf_items(label: str, V: VectorField) -> list[tuple[str, Expr]]:
    return [(label + c, e) for c, e in V.exprs()]


def _form_items(label: str, a: KForm) -> list[tuple[str, Expr]]:
    return [(label + c, e) for c, e in a.exprs()]


def verify_jacobi_suite(
    s: FpkStructure,
    c: EtaChoice | None,
    fs: Sequence,
    samples: int = 100,
    tol: float = HAM_TOL,
    a_coeffs: Sequence[float] | None = None,
) -> list[CheckReport]:
    """Lie-algebra and symmetry identities of the bracket over all pairs and
    triples drawn from ``fs``."""
    if not fs:
        raise ValueError("fs must be non-empty")
    sysm = HamiltonianSystem(s, c, a_coeffs)
    chart = s.chart
    fs = [as_expr(f) for f in fs]
    br = sysm.bracket
    reports: list[CheckReport] = []

    eq_items = []
    for f in fs:
        X = sysm.field(f)
        eq_items += [(f"{f}:eta{j + 1}", s.eta_of(j, X) - sysm.coeffs[j] * f) for j in range(s.k)]
        iX = interior_product(X, sysm.Phi).components()
        eq_items += [(f"{f}:[{x}]", a - b) for x, a, b in zip(chart.coordinates, iX, sysm.theta(f))]
    reports.append(check_zero("hamiltonian_equations", eq_items, chart, samples, tol))

    pairs = list(combinations(fs, 2))
    reports += bracket_consistency(sysm, pairs, samples, tol)

    anti = [(f"{{{f},{g}}}", br(f, g) + br(g, f)) for f, g in combinations_with_self(fs)]
    reports.append(check_zero("antisymmetry {f,g}+{g,f}=0", anti, chart, samples, tol))

    jac = []
    for f, g, h in combinations(fs, 3):
        jac.append((f"({f},{g},{h})", br(f, br(g, h)) + br(g, br(h, f)) + br(h, br(f, g))))
    reports.append(check_zero("jacobi_identity", jac, chart, samples, tol)
                   if jac else CheckReport.vacuous("jacobi_identity", tol, "fewer than 3 functions"))

    comm = []
    for i, f in product(range(s.k), fs):
        xi_i = s.xi[i]
        comm += _vf_items(f"(xi{i + 1},{f})", lie_bracket(xi_i, sysm.field(f)) - sysm.field(xi_i(f)))
    reports.append(check_zero("xi_commutation [xi_i,X_f]=X_{xi_i.f}", comm, chart, samples, tol))

    deriv = []
    for i, (f, g) in product(range(s.k), product(fs, fs)):
        xi_i = s.xi[i]
        deriv.append((f"(xi{i + 1},{f},{g})", xi_i(br(f, g)) - br(xi_i(f), g) - br(f, xi_i(g))))
    reports.append(check_zero("xi_derivation xi_i.{f,g}={xi_i.f,g}+{f,xi_i.g}", deriv, chart, samples, tol))

    hp = []
    for f, g in pairs:
        hp += _vf_items(f"({f},{g})", sysm.field(br(f, g)) - lie_bracket(sysm.field(f), sysm.field(g)))
    reports.append(check_zero("homomorphism X_{f,g}=[X_f,X_g]", hp, chart, samples, tol)
                   if hp else CheckReport.vacuous("homomorphism X_{f,g}=[X_f,X_g]", tol, "single function"))

    inv, conf = [], []
    for f in fs:
        X = sysm.field(f)
        xf = sysm.xi(f)
        for j in range(s.k):
            inv += _form_items(f"({f},eta{j + 1})", lie_derivative(X, s.eta[j]) - sysm.eta.scale(s.alpha[j] * xf))
        conf += _form_items(f"({f})", lie_derivative(X, sysm.eta) - sysm.eta.scale(xf))
    reports.append(check_zero("invariance L(X_f)eta^j=alpha^j(xi.f)eta", inv, chart, samples, tol))
    reports.append(check_zero("conformal L(X_f)eta=(xi.f)eta", conf, chart, samples, tol))

    reports.append(support_check(sysm, fs, samples, tol))
    return reports


def combinations_with_self(fs):
    for i in range(len(fs)):
        for j in range(i, len(fs)):
            yield fs[i], fs[j]


SUPPORT_SYMBOL = "_level"


def support_check(sysm: HamiltonianSystem, fs: Sequence[Expr], samples: int = 100, tol: float = HAM_TOL) -> CheckReport:
    """At a sample p, ``G = (g - g(p))^2`` has ``G(p) = 0`` and ``dG(p) = 0``;
    both ``{f, G}(p)`` and ``{G, f}(p)`` must vanish."""
    s = sysm.s
    w = var(SUPPORT_SYMBOL)
    exprs, levels = [], []
    for gi, g in enumerate(fs):
        G = (g - w) ** 2
        for f in fs:
            exprs += [sysm.bracket(f, G), sysm.bracket(G, f)]
            levels += [gi, gi]
    levels = np.array(levels)

    def residual_fn(env):
        gvals, bad0, _ = evaluate_arrays(list(fs), env)
        res = np.zeros(np.shape(next(iter(env.values()))))
        bad = bad0.copy()
        for gi, gv in enumerate(gvals):
            sub = [e for e, lv in zip(exprs, levels) if lv == gi]
            vals, b, _ = evaluate_arrays(sub, {**env, SUPPORT_SYMBOL: gv})
            bad |= b
            res = np.maximum(res, np.abs(np.stack(vals)).max(axis=0))
        return res, bad

    return sampled_check("support {f,G}(p)={G,f}(p)=0 at G(p)=dG(p)=0", residual_fn, s.chart, samples, tol)
