"""Exact rational linear algebra used by the compilers and the exact engine."""

from __future__ import annotations

from fractions import Fraction
from typing import Hashable, Mapping, Sequence

import mpmath

from sympy.solvers.diophantine.diophantine import sum_of_four_squares

from .quantum import Matrix, StructuralError


class NotPositiveSemidefinite(ValueError):
    pass


def ldl(mat: Matrix) -> tuple[list[list[Fraction]], list[Fraction]]:
    """Exact ``L D L^T`` factorization of a symmetric positive semidefinite matrix.

    Zero pivots are allowed as long as the rest of their column vanishes;
    anything else means the matrix is not PSD.
    """
    n = len(mat)
    a = [[Fraction(x) for x in row] for row in mat]
    for i in range(n):
        for j in range(n):
            if a[i][j] != a[j][i]:
                raise StructuralError("matrix is not symmetric")
    lower = [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]
    diag = [Fraction(0)] * n
    for j in range(n):
        dj = a[j][j] - sum((lower[j][k] ** 2 * diag[k] for k in range(j)), Fraction(0))
        if dj < 0:
            raise NotPositiveSemidefinite(f"negative pivot {dj} at {j}")
        diag[j] = dj
        for i in range(j + 1, n):
            s = a[i][j] - sum((lower[i][k] * lower[j][k] * diag[k] for k in range(j)), Fraction(0))
            if dj == 0:
                if s != 0:
                    raise NotPositiveSemidefinite(f"zero pivot with non-zero column at {j}")
                lower[i][j] = Fraction(0)
            else:
                lower[i][j] = s / dj
    return lower, diag


def four_squares(q: Fraction) -> tuple[Fraction, Fraction, Fraction, Fraction]:
    """Write a non-negative rational as a sum of four rational squares."""
    q = Fraction(q)
    if q < 0:
        raise ValueError("negative rational")
    if q == 0:
        return (Fraction(0),) * 4
    den = q.denominator
    parts = sum_of_four_squares(q.numerator * den)
    return tuple(Fraction(int(p), den) for p in parts)


def psd_completion(residual: Matrix) -> list[Matrix]:
    """Rational matrices ``A_1..A_4`` with ``sum A_j^T A_j == residual``.

    Row ``k`` of ``A_j`` is ``r_jk * l_k^T`` where ``residual = L D L^T``
    and ``D_k = sum_j r_jk^2``. Matrices that come out all-zero are dropped.
    """
    n = len(residual)
    lower, diag = ldl(residual)
    roots = [four_squares(dk) for dk in diag]
    out = []
    for j in range(4):
        rows = []
        for k in range(n):
            r = roots[k][j]
            # row k uses column k of L, i.e. l_k^T
            rows.append(tuple(r * lower[c][k] for c in range(n)))
        if any(x for row in rows for x in row):
            out.append(tuple(rows))
    return out


def lift(a, b):
    """Fractions do not subtract or divide by mpf values; promote them first."""
    if isinstance(a, Fraction) and isinstance(b, mpmath.mpf):
        return mpmath.mpf(a.numerator) / a.denominator
    return a


def sub(a, b):
    return lift(a, b) - b


def div(a, b):
    return lift(a, b) / b


def solve_left_sparse(
    nodes: Sequence[Hashable],
    transitions: Mapping[Hashable, Mapping[Hashable, object]],
    inflow: Mapping[Hashable, object],
) -> dict:
    """Solve ``x (I - Q) = b`` for a transient block ``Q`` of a Markov chain.

    ``transitions[u][v]`` is the probability of ``u -> v`` restricted to
    ``nodes``; ``inflow`` is ``b``. The solution ``x`` is the expected
    number of visits to each node. Works over any field of Python numbers
    (Fractions stay exact). Elimination follows the order of ``nodes``,
    which keeps fill-in small for chain-like blocks.
    """
    index = {u: i for i, u in enumerate(nodes)}
    n = len(nodes)
    # equations: for each column v: x_v - sum_u x_u Q[u][v] = b_v
    # stored as rows[v] = {u: coeff}
    rows: list[dict[int, object]] = [dict() for _ in range(n)]
    rhs: list[object] = [inflow.get(u, Fraction(0)) for u in nodes]
    for v in range(n):
        rows[v][v] = Fraction(1)
    for u, outs in transitions.items():
        iu = index[u]
        for v, p in outs.items():
            iv = index.get(v)
            if iv is None:
                continue
            rows[iv][iu] = sub(rows[iv].get(iu, Fraction(0)), p)
    # forward elimination, pivot on the diagonal (I - Q is an M-matrix)
    col_rows: list[set[int]] = [set() for _ in range(n)]
    for r, row in enumerate(rows):
        for c in row:
            col_rows[c].add(r)
    for k in range(n):
        pivot = rows[k].get(k, 0)
        if pivot == 0:
            raise ZeroDivisionError("singular transient block (closed recurrent class?)")
        for r in sorted(col_rows[k]):
            if r <= k:
                continue
            factor = rows[r].get(k, 0)
            if factor == 0:
                continue
            factor = div(factor, pivot)
            for c, val in rows[k].items():
                new = sub(rows[r].get(c, 0), factor * val)
                if new == 0:
                    rows[r].pop(c, None)
                else:
                    if c not in rows[r]:
                        col_rows[c].add(r)
                    rows[r][c] = new
            rows[r].pop(k, None)
            rhs[r] = sub(rhs[r], factor * rhs[k])
    x: list[object] = [0] * n
    for k in range(n - 1, -1, -1):
        acc = rhs[k]
        for c, val in rows[k].items():
            if c != k:
                acc = sub(acc, val * x[c])
        x[k] = div(acc, rows[k][k])
    return {u: x[i] for i, u in enumerate(nodes)}
