"""Gaussian elimination over expression-valued matrices."""

from __future__ import annotations

from typing import Mapping, Sequence

import numpy as np

from .errors import SingularRestriction
from .symexpr import ZERO, Expr, as_expr, evaluate_arrays


def numeric_matrix(A: Sequence[Sequence[Expr]], point: Mapping[str, float]) -> np.ndarray:
    flat = [as_expr(e) for row in A for e in row]
    env = {k: np.asarray(float(v)) for k, v in point.items()}
    vals, bad, _ = evaluate_arrays(flat, env)
    if bool(bad):
        raise SingularRestriction("division guard hit while evaluating the matrix at the pivot point")
    return np.array([float(v) for v in vals]).reshape(len(A), -1)


def solve(
    A: Sequence[Sequence[Expr]],
    b: Sequence[Expr] | Sequence[Sequence[Expr]],
    point: Mapping[str, float],
    rel_tol: float = 1e-10,
) -> list:
    """Solve ``A x = b`` symbolically.

    Row pivots are chosen by the magnitude of the candidate entries evaluated
    at ``point``; the elimination itself runs on the expression trees.  ``b``
    may be a vector or a list of right-hand-side columns given row-wise
    (``b[i][c]``).  Raises :class:`SingularRestriction` when the best pivot is
    numerically zero relative to the matrix scale.
    """
    n = len(A)
    if any(len(r) != n for r in A):
        raise ValueError("matrix must be square")
    multi = n > 0 and isinstance(b[0], (list, tuple))
    rhs = [list(map(as_expr, bi)) if multi else [as_expr(bi)] for bi in b]
    M = [list(map(as_expr, A[i])) + rhs[i] for i in range(n)]
    N = numeric_matrix(A, point) if n else np.zeros((0, 0))
    scale = max(1.0, float(np.abs(N).max())) if n else 1.0
    width = len(M[0]) if n else 0

    for col in range(n):
        piv = col + int(np.argmax(np.abs(N[col:, col])))
        if abs(N[piv, col]) <= rel_tol * scale:
            raise SingularRestriction(f"no usable pivot in column {col} (|pivot| = {abs(N[piv, col]):.3e})")
        if piv != col:
            M[col], M[piv] = M[piv], M[col]
            N[[col, piv]] = N[[piv, col]]
        p = M[col][col]
        for r in range(col + 1, n):
            if M[r][col].is_zero():
                continue
            f = M[r][col] / p
            M[r] = [ZERO] * (col + 1) + [M[r][j] - f * M[col][j] for j in range(col + 1, width)]
            N[r, col:] -= (N[r, col] / N[col, col]) * N[col, col:]

    cols = width - n
    x = [[ZERO] * cols for _ in range(n)]
    for i in reversed(range(n)):
        for c in range(cols):
            acc = M[i][n + c]
            for j in range(i + 1, n):
                if not M[i][j].is_zero():
                    acc = acc - M[i][j] * x[j][c]
            x[i][c] = acc / M[i][i]
    return x if multi else [row[0] for row in x]
