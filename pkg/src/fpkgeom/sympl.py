"""Symplectization ``M x R^k`` of an almost-S structure.

With fibre coordinates ``t_j`` put ``alpha = sum t_j eta^j``, ``omega = -d alpha``
and ``tau = sum alpha^j t_j``.  On ``tau > 0`` the form ``omega`` is symplectic:

    omega = sum eta^j ^ dt_j + tau Phi,
    omega^(n+k) = (n+k)!/n! eta^1 ^ dt_1 ^ ... ^ eta^k ^ dt_k ^ (tau Phi)^n.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from math import factorial

import numpy as np

from .errors import EmptyPositiveCone
from .fstruct import POSITIVITY_FLOOR, FpkStructure, fibre_names
from .hamjac import _require_alpha
from .report import CheckReport
from .symexpr import Chart, Expr, check_zero, evaluate_arrays, sampled_check, total
from .tensor import KForm, exterior_derivative, form_matrix, wedge, wedge_all, wedge_power

TAU_MARGIN = 0.1
BOX_OFFSETS = range(-2, 3)
EXPANSION_TOL = 1e-9
TOP_POWER_TOL = 1e-8
CLOSED_TOL = 1e-12
SCALING_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class Symplectization:
    chart: Chart
    t_names: tuple[str, ...]
    alpha_form: KForm
    omega: KForm
    tau: Expr
    n: int
    k: int

    @property
    def dt(self) -> list[KForm]:
        return [KForm.basis(self.chart, t) for t in self.t_names]


def positive_box(alpha, margin: float = TAU_MARGIN) -> list[tuple[float, float]]:
    """First unit box ``prod [a_j, a_j + 1]`` (by ``sum |a_j|``, then
    lexicographically) on which ``tau >= margin``."""
    k = len(alpha)
    cands = sorted(product(BOX_OFFSETS, repeat=k), key=lambda a: (sum(map(abs, a)), a))
    for a in cands:
        low = sum(al * (aj if al > 0 else aj + 1) for al, aj in zip(alpha, a))
        if low >= margin:
            return [(float(aj), float(aj + 1)) for aj in a]
    raise EmptyPositiveCone(f"no unit t-box with tau >= {margin} for alpha = {tuple(alpha)}")


def build_symplectization(s: FpkStructure, box: list[tuple[float, float]] | None = None) -> Symplectization:
    _require_alpha(s)
    names = tuple(fibre_names(s.chart, s.k))
    chart = s.chart.extend(names, box or positive_box(s.alpha))
    t = [chart.coord(x) for x in names]
    alpha_form = KForm.zero(chart, 1)
    for tj, e in zip(t, s.eta):
        alpha_form = alpha_form + e.on_chart(chart).scale(tj)
    omega = -exterior_derivative(alpha_form)
    tau = total(a * tj for a, tj in zip(s.alpha, t) if a != 0.0)
    return Symplectization(chart, names, alpha_form, omega, tau, s.n, s.k)


def expansion_form(sp: Symplectization, s: FpkStructure) -> KForm:
    """``sum eta^j ^ dt_j + tau Phi`` built from the structure data."""
    out = s.fundamental_form.on_chart(sp.chart).scale(sp.tau)
    for e, dt in zip(s.eta, sp.dt):
        out = out + wedge(e.on_chart(sp.chart), dt)
    return out


def verify_expansion(sp: Symplectization, s: FpkStructure, samples: int = 100, tol: float = EXPANSION_TOL) -> CheckReport:
    diff = sp.omega - expansion_form(sp, s)
    return check_zero("expansion omega=sum eta^j^dt_j+tau Phi", diff.exprs(), sp.chart, samples, tol)


def _top(a: KForm) -> Expr:
    return a[tuple(range(a.chart.dim))]


def top_power_factor(n: int, k: int) -> int:
    return factorial(n + k) // factorial(n)


def top_power_base(sp: Symplectization, s: FpkStructure) -> KForm:
    """``eta^1 ^ dt_1 ^ ... ^ eta^k ^ dt_k ^ (tau Phi)^n`` without the factor."""
    tphi = s.fundamental_form.on_chart(sp.chart).scale(sp.tau)
    pieces: list[KForm] = []
    for e, dt in zip(s.eta, sp.dt):
        pieces += [e.on_chart(sp.chart), dt]
    pieces += [tphi] * s.n
    return wedge_all(pieces)


def verify_top_power(
    sp: Symplectization, s: FpkStructure, samples: int = 100, tol: float = TOP_POWER_TOL
) -> list[CheckReport]:
    """Top-power identity, its combinatorial factor, nondegeneracy and closedness."""
    factor = top_power_factor(s.n, s.k)
    lhs = _top(wedge_power(sp.omega, s.n + s.k))
    base = _top(top_power_base(sp, s))
    chart = sp.chart
    reports = [
        check_zero(f"top_power omega^(n+k)=(n+k)!/n! eta^dt..(tau Phi)^n [factor {factor}]",
                   [("top", lhs - factor * base)], chart, samples, tol),
    ]

    def ratio_fn(env):
        (lv, bv), bad, _ = evaluate_arrays([lhs, base], env)
        small = np.abs(bv) < POSITIVITY_FLOOR
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(small, factor, lv / np.where(small, 1.0, bv))
        return np.abs(ratio - factor) / factor, bad | small

    rep = sampled_check("top_power factor (n+k)!/n!", ratio_fn, chart, samples, tol)
    reports.append(CheckReport(rep.identity, rep.passed, rep.max_residual, rep.witness, rep.samples, tol,
                               rep.note, {"factor": factor, "n": s.n, "k": s.k}))

    def nonvanishing_fn(env):
        (lv,), bad, _ = evaluate_arrays([lhs], env)
        return np.maximum(0.0, POSITIVITY_FLOOR - np.abs(lv)), bad

    reports.append(sampled_check("top_power nonvanishing on tau>=0.1", nonvanishing_fn, chart, samples, 0.0))
    reports.append(check_zero("d omega=0", exterior_derivative(sp.omega).exprs(), chart, samples, CLOSED_TOL))
    return reports


def omega_determinant(sp: Symplectization, env: dict[str, np.ndarray]) -> np.ndarray:
    mat = form_matrix(sp.omega)
    m = sp.chart.dim
    vals, _, _ = evaluate_arrays([e for row in mat for e in row], env)
    arr = np.stack([np.broadcast_to(v, np.shape(next(iter(env.values())))) for v in vals], axis=-1)
    return np.linalg.det(arr.reshape(-1, m, m))


def verify_determinant(sp: Symplectization, samples: int = 100, scale: float = 1.5, tol: float = SCALING_TOL) -> list[CheckReport]:
    """``|det omega| > 1e-10`` on the box, and ``det`` scales as ``tau^(2n)``
    when ``t`` is rescaled along a ray."""
    expo = 2 * sp.n

    def floor_fn(env):
        return np.maximum(0.0, POSITIVITY_FLOOR - np.abs(omega_determinant(sp, env))), np.zeros(len(next(iter(env.values()))), bool)

    def scaling_fn(env):
        d1 = omega_determinant(sp, env)
        moved = {k: (v * scale if k in sp.t_names else v) for k, v in env.items()}
        d2 = omega_determinant(sp, moved)
        bad = np.abs(d1) < POSITIVITY_FLOOR
        with np.errstate(divide="ignore", invalid="ignore"):
            rel = np.abs(d2 / np.where(bad, 1.0, d1) / scale**expo - 1.0)
        return np.where(bad, 0.0, rel), bad

    return [
        sampled_check("det(omega) > 1e-10", floor_fn, sp.chart, samples, 0.0),
        sampled_check(f"det(omega) scales as tau^{expo}", scaling_fn, sp.chart, samples, tol),
    ]


def phi_power_vanishing(s: FpkStructure, samples: int = 100, tol: float = CLOSED_TOL) -> CheckReport:
    """``Phi^(n+1) = 0`` whenever that degree fits in the chart."""
    m = s.n + 1
    ident = f"Phi^{m}=0"
    if 2 * m > s.dim:
        return CheckReport.vacuous(ident, tol, f"degree {2 * m} exceeds dimension {s.dim}")
    return check_zero(ident, wedge_power(s.fundamental_form, m).exprs(), s.chart, samples, tol)


@dataclass(frozen=True)
class SignScan:
    """Top coefficient of ``omega^(n+k)`` sampled on a t-box straddling ``tau = 0``."""

    tau_min: float
    tau_max: float
    coefficient_min: float
    coefficient_max: float
    normalized_min: float
    normalized_max: float

    @property
    def sign_changes(self) -> bool:
        return self.coefficient_min < 0.0 < self.coefficient_max

    @property
    def normalized_constant_sign(self) -> bool:
        """``coefficient / tau^n`` keeps one sign, so ``tau = 0`` is the whole degeneracy locus."""
        return self.normalized_min > 0.0 or self.normalized_max < 0.0


def sign_scan(s: FpkStructure, samples: int = 200, half_width: float = 1.0) -> SignScan:
    sp = build_symplectization(s, box=[(-half_width, half_width)] * s.k)
    lhs = _top(wedge_power(sp.omega, s.n + s.k))
    env = sp.chart.sample(samples, "sign_scan")
    (coef, tau), _, _ = evaluate_arrays([lhs, sp.tau], env)
    coef = np.broadcast_to(coef, (samples,))
    tau = np.broadcast_to(tau, (samples,))
    keep = np.abs(tau) > 1e-6
    norm = coef[keep] / tau[keep] ** s.n
    return SignScan(float(tau.min()), float(tau.max()), float(coef.min()), float(coef.max()),
                    float(norm.min()), float(norm.max()))
