"""Scalar-field expressions over named chart coordinates.

Expressions are immutable, hash-consed trees: structurally identical
subtrees are the same Python object, so a derived quantity is stored as a
DAG and differentiation/evaluation are memoised per node.  The only rewriting
performed at construction time is constant folding together with the
additive and multiplicative identity elements; equality of two expressions is
decided numerically by :func:`check_zero`.
"""

from __future__ import annotations

import math
import re
import threading
import weakref
import zlib
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    DivisionNearZero,
    ExprSyntaxError,
    SamplingExhausted,
    UnknownCoordinate,
)
from .report import CheckReport

DIVISION_GUARD = 1e-12


class Expr:
    __slots__ = ("op", "args", "value", "_dcache", "__weakref__")

    def __init__(self, op, args, value):
        self.op = op
        self.args = args
        self.value = value
        self._dcache = {}

    # identity-based equality/hash: interning makes that structural
    def __add__(self, other):
        return add(self, as_expr(other))

    def __radd__(self, other):
        return add(as_expr(other), self)

    def __sub__(self, other):
        return sub(self, as_expr(other))

    def __rsub__(self, other):
        return sub(as_expr(other), self)

    def __mul__(self, other):
        return mul(self, as_expr(other))

    def __rmul__(self, other):
        return mul(as_expr(other), self)

    def __truediv__(self, other):
        return div(self, as_expr(other))

    def __rtruediv__(self, other):
        return div(as_expr(other), self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, n):
        return power(self, n)

    def __str__(self):
        return to_string(self)

    def __repr__(self):
        return f"Expr({to_string(self)!r})"

    @property
    def is_const(self) -> bool:
        return self.op == "const"

    def is_zero(self) -> bool:
        return self.op == "const" and self.value == 0.0

    def diff(self, coord: str) -> "Expr":
        return differentiate(self, coord)


_table: "weakref.WeakValueDictionary[tuple, Expr]" = weakref.WeakValueDictionary()
_lock = threading.Lock()


def _intern(op: str, args: tuple, value) -> Expr:
    key = (op, value, tuple(id(a) for a in args))
    with _lock:
        node = _table.get(key)
        if node is None:
            node = Expr(op, args, value)
            _table[key] = node
    return node


def const(v: float) -> Expr:
    v = float(v)
    if not math.isfinite(v):
        raise ValueError(f"non-finite constant {v}")
    if v == 0.0:
        v = 0.0  # merge -0.0
    return _intern("const", (), v)


def var(name: str) -> Expr:
    return _intern("var", (), name)


ZERO = const(0.0)
ONE = const(1.0)


def as_expr(x) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, (int, float, np.integer, np.floating)) and not isinstance(x, bool):
        return const(x)
    raise TypeError(f"cannot convert {type(x).__name__} to Expr")


def add(a: Expr, b: Expr) -> Expr:
    if a.op == "const" and b.op == "const":
        return const(a.value + b.value)
    if a.is_zero():
        return b
    if b.is_zero():
        return a
    return _intern("add", (a, b), None)


def sub(a: Expr, b: Expr) -> Expr:
    if a.op == "const" and b.op == "const":
        return const(a.value - b.value)
    if b.is_zero():
        return a
    if a.is_zero():
        return neg(b)
    return _intern("sub", (a, b), None)


def mul(a: Expr, b: Expr) -> Expr:
    if a.op == "const" and b.op == "const":
        return const(a.value * b.value)
    if a.is_zero() or b.is_zero():
        return ZERO
    if a.op == "const" and a.value == 1.0:
        return b
    if b.op == "const" and b.value == 1.0:
        return a
    if a.op == "const" and a.value == -1.0:
        return neg(b)
    if b.op == "const" and b.value == -1.0:
        return neg(a)
    return _intern("mul", (a, b), None)


def div(a: Expr, b: Expr) -> Expr:
    if b.op == "const":
        if abs(b.value) < DIVISION_GUARD:
            raise DivisionNearZero(f"{to_string(a)} / {to_string(b)}")
        if a.op == "const":
            return const(a.value / b.value)
        if b.value == 1.0:
            return a
    if a.is_zero():
        return ZERO
    return _intern("div", (a, b), None)


def neg(a: Expr) -> Expr:
    if a.op == "const":
        return const(-a.value)
    if a.op == "neg":
        return a.args[0]
    return _intern("neg", (a,), None)


def power(a: Expr, n: int) -> Expr:
    if isinstance(n, float) and n.is_integer():
        n = int(n)
    if not isinstance(n, (int, np.integer)) or n < 0:
        raise ValueError(f"exponent must be a non-negative integer, got {n!r}")
    n = int(n)
    if n == 0:
        return ONE
    if n == 1:
        return a
    if a.op == "const":
        return const(a.value**n)
    return _intern("pow", (a,), n)


def _unary(name: str, fn: Callable[[float], float]):
    def build(a) -> Expr:
        a = as_expr(a)
        if a.op == "const":
            return const(fn(a.value))
        return _intern(name, (a,), None)

    build.__name__ = name
    return build


sin = _unary("sin", math.sin)
cos = _unary("cos", math.cos)
exp = _unary("exp", math.exp)


def total(terms: Iterable) -> Expr:
    """Sum of an iterable of expressions (empty sum is zero)."""
    acc = ZERO
    for t in terms:
        acc = add(acc, as_expr(t))
    return acc


def _postorder(roots: Sequence[Expr]) -> list[Expr]:
    seen: set[int] = set()
    order: list[Expr] = []
    stack = [(r, False) for r in reversed(roots)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for child in reversed(node.args):
            if id(child) not in seen:
                stack.append((child, False))
    return order


def node_count(e: Expr) -> int:
    return len(_postorder([e]))


def free_coords(e: Expr) -> set[str]:
    return {n.value for n in _postorder([e]) if n.op == "var"}


# ---------------------------------------------------------------- differentiation


def differentiate(e: Expr, coord: str) -> Expr:
    """Exact partial derivative of ``e`` with respect to ``coord``."""
    hit = e._dcache.get(coord)
    if hit is not None:
        return hit
    for node in _postorder([e]):
        if coord in node._dcache:
            continue
        op = node.op
        if op == "const":
            d = ZERO
        elif op == "var":
            d = ONE if node.value == coord else ZERO
        else:
            a = node.args[0]
            da = a._dcache[coord]
            if op == "neg":
                d = neg(da)
            elif op == "sin":
                d = mul(cos(a), da)
            elif op == "cos":
                d = neg(mul(sin(a), da))
            elif op == "exp":
                d = mul(node, da)
            elif op == "pow":
                n = node.value
                d = mul(mul(const(n), power(a, n - 1)), da)
            else:
                b = node.args[1]
                db = b._dcache[coord]
                if op == "add":
                    d = add(da, db)
                elif op == "sub":
                    d = sub(da, db)
                elif op == "mul":
                    d = add(mul(da, b), mul(a, db))
                else:  # div
                    if db.is_zero():
                        d = div(da, b)
                    else:
                        d = div(sub(mul(da, b), mul(a, db)), power(b, 2))
        node._dcache[coord] = d
    return e._dcache[coord]


def gradient(e: Expr, coords: Sequence[str]) -> list[Expr]:
    return [differentiate(e, c) for c in coords]


# ---------------------------------------------------------------- evaluation


def evaluate_arrays(
    exprs: Sequence[Expr], env: Mapping[str, np.ndarray], guard: float = DIVISION_GUARD
):
    """Vectorised evaluation of several expressions on a batch of points.

    ``env`` maps coordinate names to equally shaped arrays.  Returns
    ``(values, bad, culprit)`` where ``bad`` flags points at which some
    divisor fell below ``guard`` and ``culprit`` is the first guarded
    division node encountered (or ``None``).
    """
    shape = np.shape(next(iter(env.values()))) if env else ()
    bad = np.zeros(shape, dtype=bool)
    culprit = None
    vals: dict[int, object] = {}
    with np.errstate(all="ignore"):
        for node in _postorder(list(exprs)):
            op = node.op
            if op == "const":
                v = node.value
            elif op == "var":
                try:
                    v = env[node.value]
                except KeyError:
                    raise UnknownCoordinate(node.value) from None
            elif op == "pow":
                v = vals[id(node.args[0])] ** node.value
            elif op == "neg":
                v = -vals[id(node.args[0])]
            elif op == "sin":
                v = np.sin(vals[id(node.args[0])])
            elif op == "cos":
                v = np.cos(vals[id(node.args[0])])
            elif op == "exp":
                v = np.exp(vals[id(node.args[0])])
            else:
                a = vals[id(node.args[0])]
                b = vals[id(node.args[1])]
                if op == "add":
                    v = a + b
                elif op == "sub":
                    v = a - b
                elif op == "mul":
                    v = a * b
                else:
                    small = np.abs(b) < guard
                    if np.any(small):
                        bad = bad | small
                        if culprit is None:
                            culprit = node
                    v = a / np.where(small, 1.0, b)
            vals[id(node)] = v
    out = [np.broadcast_to(np.asarray(vals[id(e)], dtype=float), shape) for e in exprs]
    return out, bad, culprit


def evaluate(e: Expr, point: Mapping[str, float]) -> float:
    """Evaluate ``e`` at a single point (a mapping from coordinate name to value)."""
    env = {k: np.asarray(float(v)) for k, v in point.items()}
    (val,), bad, culprit = evaluate_arrays([e], env)
    if bool(bad):
        raise DivisionNearZero(to_string(culprit))
    return float(val)


def lambdify(exprs: Sequence[Expr], names: Sequence[str]):
    """Return ``f(*arrays) -> ndarray`` stacking the values of ``exprs``."""
    exprs = list(exprs)
    names = list(names)

    def f(*arrays):
        env = dict(zip(names, (np.asarray(a, dtype=float) for a in arrays)))
        vals, _, _ = evaluate_arrays(exprs, env)
        return np.stack(vals) if vals else np.zeros((0,) + np.shape(arrays[0]))

    return f


# ---------------------------------------------------------------- printing

_PREC = {"add": 1, "sub": 1, "mul": 2, "div": 2, "neg": 1.5, "pow": 4}


def _format_const(v: float) -> str:
    if v.is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def to_string(e: Expr) -> str:
    """Render in the input grammar; ``parse_expr(to_string(e))`` is ``e``."""
    text: dict[int, tuple[str, float]] = {}

    def wrap(child: Expr, need: float) -> str:
        s, p = text[id(child)]
        return s if p >= need else f"({s})"

    for node in _postorder([e]):
        op = node.op
        if op == "const":
            s = _format_const(node.value)
            item = (s, 1.5 if node.value < 0 else 5)
        elif op == "var":
            item = (node.value, 5)
        elif op in ("sin", "cos", "exp"):
            item = (f"{op}({text[id(node.args[0])][0]})", 5)
        elif op == "neg":
            item = ("-" + wrap(node.args[0], 4), 1.5)
        elif op == "pow":
            item = (f"{wrap(node.args[0], 5)}^{node.value}", 4)
        else:
            a, b = node.args
            sym = {"add": " + ", "sub": " - ", "mul": "*", "div": "/"}[op]
            p = _PREC[op]
            left = wrap(a, p if op in ("add", "sub") else 2)
            right = wrap(b, 1.5 if op == "add" else (2 if op == "sub" else 4))
            item = (left + sym + right, p)
        text[id(node)] = item
    return text[id(e)][0]


# ---------------------------------------------------------------- parsing

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<id>[A-Za-z_][A-Za-z0-9_]*)|(?P<op>[-+*/^()]))"
)
_FUNCS = {"sin": sin, "cos": cos, "exp": exp}


def _tokenize(text: str):
    pos = 0
    tokens = []
    while True:
        while pos < len(text) and text[pos].isspace():
            pos += 1
        if pos >= len(text):
            break
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ExprSyntaxError(pos, f"unexpected character {text[pos]!r}", text)
        start = m.start(m.lastgroup)
        tokens.append((m.lastgroup, m.group(m.lastgroup), start))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, allowed: frozenset[str] | None):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0
        self.allowed = allowed

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, val, pos = self.take()
        if val != value or kind == "end":
            got = "end of input" if kind == "end" else repr(val)
            raise ExprSyntaxError(pos, f"expected {value!r}, got {got}", self.text)

    def parse(self) -> Expr:
        e = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ExprSyntaxError(pos, f"unexpected {val!r}", self.text)
        return e

    def expr(self) -> Expr:
        e = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.term()
            e = add(e, rhs) if op == "+" else sub(e, rhs)
        return e

    def term(self) -> Expr:
        e = self.factor()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            kind, op, pos = self.take()
            rhs = self.factor()
            if op == "*":
                e = mul(e, rhs)
            else:
                try:
                    e = div(e, rhs)
                except DivisionNearZero:
                    raise ExprSyntaxError(pos, "division by constant zero", self.text) from None
        return e

    def factor(self) -> Expr:
        kind, val, pos = self.peek()
        if kind == "op" and val == "-":
            self.take()
            return neg(self.factor())
        base = self.base()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            kind, val, pos = self.take()
            if kind != "num" or not re.fullmatch(r"\d+", val):
                raise ExprSyntaxError(pos, "exponent must be a non-negative integer literal", self.text)
            base = power(base, int(val))
        return base

    def base(self) -> Expr:
        kind, val, pos = self.take()
        if kind == "num":
            return const(float(val))
        if kind == "id":
            if val in _FUNCS:
                self.expect("(")
                inner = self.expr()
                self.expect(")")
                return _FUNCS[val](inner)
            if self.allowed is not None and val not in self.allowed:
                raise UnknownCoordinate(val, pos)
            return var(val)
        if kind == "op" and val == "(":
            inner = self.expr()
            self.expect(")")
            return inner
        got = "end of input" if kind == "end" else repr(val)
        raise ExprSyntaxError(pos, f"unexpected {got}", self.text)


def parse_expr(text: str, chart: "Chart | Sequence[str] | None" = None) -> Expr:
    """Parse ``text`` in the expression grammar.

    Identifiers must be coordinates of ``chart`` (a :class:`Chart` or a list
    of names); with ``chart=None`` any identifier is accepted.
    """
    if chart is None:
        allowed = None
    elif isinstance(chart, Chart):
        allowed = frozenset(chart.coordinates)
    else:
        allowed = frozenset(chart)
    return _Parser(text, allowed).parse()


# ---------------------------------------------------------------- charts and sampling


@dataclass(frozen=True)
class Chart:
    """A coordinate patch with a sampling box and a seed."""

    coordinates: tuple[str, ...]
    box: tuple[tuple[float, float], ...]
    seed: int = 0

    def __post_init__(self):
        coords = tuple(self.coordinates)
        box = tuple((float(lo), float(hi)) for lo, hi in self.box)
        object.__setattr__(self, "coordinates", coords)
        object.__setattr__(self, "box", box)
        if not coords:
            raise ValueError("chart needs at least one coordinate")
        if len(set(coords)) != len(coords):
            raise ValueError(f"duplicate coordinate names in {coords}")
        for name in coords:
            if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", name) or name in _FUNCS:
                raise ValueError(f"invalid coordinate name {name!r}")
        if len(box) != len(coords):
            raise ValueError("box must give one interval per coordinate")
        for name, (lo, hi) in zip(coords, box):
            if not hi > lo:
                raise ValueError(f"empty sampling interval for {name}: [{lo}, {hi}]")

    @classmethod
    def cube(cls, names: Sequence[str], lo: float = -1.0, hi: float = 1.0, seed: int = 0) -> "Chart":
        return cls(tuple(names), tuple((lo, hi) for _ in names), seed)

    @property
    def dim(self) -> int:
        return len(self.coordinates)

    def index(self, name: str) -> int:
        try:
            return self.coordinates.index(name)
        except ValueError:
            raise UnknownCoordinate(name) from None

    def coord(self, name: str) -> Expr:
        self.index(name)
        return var(name)

    def coords(self) -> list[Expr]:
        return [var(c) for c in self.coordinates]

    def extend(self, names: Sequence[str], box: Sequence[tuple[float, float]]) -> "Chart":
        return Chart(self.coordinates + tuple(names), self.box + tuple(box), self.seed)

    def with_seed(self, seed: int) -> "Chart":
        return Chart(self.coordinates, self.box, seed)

    def with_box(self, box) -> "Chart":
        return Chart(self.coordinates, box, self.seed)

    def midpoint(self) -> dict[str, float]:
        return {c: 0.5 * (lo + hi) for c, (lo, hi) in zip(self.coordinates, self.box)}

    def rng(self, label: str) -> np.random.Generator:
        """Generator derived from the chart seed and a call-site label."""
        return np.random.default_rng([self.seed % 2**63, zlib.crc32(label.encode())])

    def draw(self, rng: np.random.Generator, count: int) -> dict[str, np.ndarray]:
        lo = np.array([b[0] for b in self.box])
        hi = np.array([b[1] for b in self.box])
        pts = lo + (hi - lo) * rng.random((count, self.dim))
        return {c: pts[:, i] for i, c in enumerate(self.coordinates)}

    def sample(self, count: int, label: str) -> dict[str, np.ndarray]:
        return self.draw(self.rng(label), count)


MAX_DRAW_ROUNDS = 10
EXHAUSTION_FRACTION = 0.8


def sampled_check(
    identity: str,
    residual_fn: Callable[[dict[str, np.ndarray]], tuple[np.ndarray, np.ndarray]],
    chart: Chart,
    samples: int,
    tol: float,
    label: str | None = None,
    note: str = "",
) -> CheckReport:
    """Run ``residual_fn`` on seeded uniform draws from the chart box.

    ``residual_fn(env)`` returns ``(residual, bad)`` arrays; points flagged
    ``bad`` (division guard hits) are redrawn.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = chart.rng(label or identity)
    kept_res: list[np.ndarray] = []
    kept_pts: list[dict[str, np.ndarray]] = []
    have = drawn = rejected = 0
    for _ in range(MAX_DRAW_ROUNDS):
        need = samples - have
        if need <= 0:
            break
        env = chart.draw(rng, need)
        res, bad = residual_fn(env)
        res = np.broadcast_to(res, (need,))
        bad = np.broadcast_to(bad, (need,))
        drawn += need
        rejected += int(bad.sum())
        ok = ~bad
        kept_res.append(res[ok])
        kept_pts.append({k: v[ok] for k, v in env.items()})
        have += int(ok.sum())
    if drawn and rejected / drawn > EXHAUSTION_FRACTION:
        raise SamplingExhausted(
            f"{identity}: {rejected} of {drawn} draws hit the division guard"
        )
    res = np.concatenate(kept_res) if kept_res else np.zeros(0)
    if res.size == 0:
        raise SamplingExhausted(f"{identity}: no admissible sample points")
    res = np.where(np.isfinite(res), res, np.inf)
    worst = int(np.argmax(res))
    witness_src = {k: np.concatenate([p[k] for p in kept_pts]) for k in chart.coordinates}
    witness = {k: float(v[worst]) for k, v in witness_src.items()}
    max_res = float(res[worst])
    if have < samples:
        note = (note + "; " if note else "") + f"only {have} admissible points after redraws"
    return CheckReport(identity, max_res <= tol, max_res, witness, int(res.size), tol, note)


def check_zero(
    identity: str,
    items: Iterable,
    chart: Chart,
    samples: int = 100,
    tol: float = 1e-9,
    label: str | None = None,
) -> CheckReport:
    """Report whether every expression in ``items`` vanishes on sampled points.

    ``items`` holds expressions or ``(name, expr)`` pairs; the residual is
    the largest absolute value over all expressions, and for failing checks
    the note names the worst offender.
    """
    names: list[str] = []
    exprs: list[Expr] = []
    for i, item in enumerate(items):
        if isinstance(item, tuple):
            names.append(str(item[0]))
            exprs.append(as_expr(item[1]))
        else:
            names.append(f"#{i}")
            exprs.append(as_expr(item))
    note = ""
    if not exprs:
        # every term cancelled symbolically; still sample so the report is uniform
        names, exprs, note = ["0"], [ZERO], "exact: all terms cancelled symbolically"

    def residual_fn(env):
        vals, bad, _ = evaluate_arrays(exprs, env)
        stacked = np.abs(np.stack(vals))
        stacked = np.where(np.isfinite(stacked), stacked, np.inf)
        return stacked.max(axis=0), bad

    rep = sampled_check(identity, residual_fn, chart, samples, tol, label, note)
    if not rep.passed and rep.witness:
        env = {k: np.asarray([v]) for k, v in rep.witness.items()}
        vals, _, _ = evaluate_arrays(exprs, env)
        mags = np.nan_to_num(np.abs(np.concatenate(vals)), nan=np.inf)
        note = f"worst: {names[int(np.argmax(mags))]}" + (f"; {rep.note}" if rep.note else "")
        rep = CheckReport(rep.identity, False, rep.max_residual, rep.witness, rep.samples, tol, note)
    return rep


def expr_zero(e: Expr, chart: Chart, samples: int = 100, tol: float = 1e-9, identity: str | None = None) -> CheckReport:
    return check_zero(identity or f"zero[{to_string(e)[:60]}]", [e], chart, samples, tol)


# ---------------------------------------------------------------- random expressions


def monomials(names: Sequence[str], degree: int) -> list[tuple[int, ...]]:
    """Exponent vectors of all monomials of total degree <= ``degree``."""
    out: list[tuple[int, ...]] = [()]
    for _ in names:
        out = [m + (p,) for m in out for p in range(degree + 1) if sum(m) + p <= degree]
    return sorted(out, key=lambda m: (sum(m), m))


def random_polynomial(
    names: Sequence[str], degree: int, rng: np.random.Generator, density: float = 1.0
) -> Expr:
    """Polynomial with standard-normal coefficients on a random subset of monomials."""
    terms = []
    for mono in monomials(names, degree):
        if density < 1.0 and rng.random() > density:
            continue
        term = const(round(float(rng.normal()), 6))
        for name, p in zip(names, mono):
            term = mul(term, power(var(name), p))
        terms.append(term)
    return total(terms)
