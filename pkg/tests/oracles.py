"""Exact reference computations used as independent oracles.

They work in rational arithmetic, so they share no code path with the
SVD-based routines under test.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np


def _to_fractions(a) -> list[list[Fraction]]:
    return [[Fraction(v).limit_denominator(10**12) for v in row] for row in np.asarray(a)]


def _pivot_columns(m: list[list[Fraction]]) -> list[int]:
    """Reduce ``m`` in place to row echelon form; return the pivot columns."""
    rows, cols = len(m), len(m[0])
    pivots, r = [], 0
    for c in range(cols):
        p = next((i for i in range(r, rows) if m[i][c] != 0), None)
        if p is None:
            continue
        m[r], m[p] = m[p], m[r]
        for i in range(r + 1, rows):
            if m[i][c] != 0:
                f = m[i][c] / m[r][c]
                m[i] = [a - f * b for a, b in zip(m[i], m[r])]
        pivots.append(c)
        r += 1
        if r == rows:
            break
    return pivots


def rank_by_row_reduction(a) -> int:
    return len(_pivot_columns(_to_fractions(a)))


def _inverse(m: list[list[Fraction]]) -> list[list[Fraction]]:
    n = len(m)
    aug = [row[:] + [Fraction(int(i == j)) for j in range(n)] for i, row in enumerate(m)]
    for c in range(n):
        p = next(i for i in range(c, n) if aug[i][c] != 0)
        aug[c], aug[p] = aug[p], aug[c]
        piv = aug[c][c]
        aug[c] = [v / piv for v in aug[c]]
        for i in range(n):
            if i != c and aug[i][c] != 0:
                f = aug[i][c]
                aug[i] = [a - f * b for a, b in zip(aug[i], aug[c])]
    return [row[n:] for row in aug]


def elimination_ginverse(a) -> np.ndarray:
    """Generalized inverse of a symmetric matrix by the classical recipe.

    Pick a maximal set of independent columns ``I`` by elimination, invert
    the nonsingular block ``A[I, I]`` and pad with zeros. The result
    satisfies ``A G A = A`` but is not the Moore-Penrose inverse.
    """
    fa = _to_fractions(a)
    idx = _pivot_columns([row[:] for row in fa])
    block = [[fa[i][j] for j in idx] for i in idx]
    inv = _inverse(block)
    g = np.zeros(np.asarray(a).shape)
    for r, i in enumerate(idx):
        for c, j in enumerate(idx):
            g[i, j] = float(inv[r][c])
    return g


def scalar_ssh(c_row, beta_hat, xtx_pinv) -> np.ndarray:
    """``SSH(t) = (c' beta(t))^2 / (c' (X'X)^+ c)`` for a single contrast."""
    c_row = np.asarray(c_row, dtype=float)
    denom = float(c_row @ xtx_pinv @ c_row)
    return np.array([(c_row @ beta_hat[:, j]) ** 2 / denom for j in range(beta_hat.shape[1])])
