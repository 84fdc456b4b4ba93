"""Dense two-phase simplex over the rationals (Bland's rule).

Small and slow on purpose: it is only used on desk-sized windows, where exact
arithmetic matters more than speed.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence


class LPInfeasible(Exception):
    pass


class LPUnbounded(Exception):
    pass


@dataclass
class ExactLPResult:
    x: list[Fraction]
    value: Fraction
    y: list[Fraction]  # duals of the equality rows: value == b . y


def solve_standard_form(c: Sequence, A: Sequence[Sequence], b: Sequence) -> ExactLPResult:
    """minimize c.x subject to A x = b, x >= 0, exactly."""
    m, n = len(A), len(c)
    c = [Fraction(v) for v in c]
    flip = [1 if Fraction(bi) >= 0 else -1 for bi in b]
    rows = [[Fraction(v) * f for v in row] + [Fraction(int(i == r)) for r in range(m)] + [Fraction(bi) * f] for i, (row, bi, f) in enumerate(zip(A, b, flip))]
    width = n + m
    basis = [n + i for i in range(m)]

    def pivot(r: int, col: int, obj: list[Fraction]) -> None:
        p = rows[r][col]
        prow = rows[r]
        nz = [j for j, v in enumerate(prow) if v]
        if p != 1:
            for j in nz:
                prow[j] /= p
        # boundary-matrix tableaus stay sparse: touch only the pivot row's support
        for target in [rows[i] for i in range(m) if i != r] + [obj]:
            f = target[col]
            if f:
                for j in nz:
                    target[j] -= f * prow[j]
        basis[r] = col

    def run(obj: list[Fraction], allowed: int) -> None:
        while True:
            col = next((j for j in range(allowed) if obj[j] < 0), None)
            if col is None:
                return
            best = None
            for i in range(m):
                a = rows[i][col]
                if a > 0:
                    ratio = rows[i][-1] / a
                    if best is None or ratio < best[0] or (ratio == best[0] and basis[i] < basis[best[1]]):
                        best = (ratio, i)
            if best is None:
                raise LPUnbounded()
            pivot(best[1], col, obj)

    # phase 1: minimise the sum of artificials (reduced-cost row)
    obj1 = [Fraction(0)] * (width + 1)
    for i in range(m):
        for j in range(n):
            obj1[j] -= rows[i][j]
        obj1[-1] -= rows[i][-1]
    run(obj1, n)
    if obj1[-1] != 0:
        raise LPInfeasible()
    # drive remaining artificials out where possible; rows left behind are redundant
    for i in range(m):
        if basis[i] >= n:
            col = next((j for j in range(n) if rows[i][j] != 0), None)
            if col is not None:
                pivot(i, col, obj1)
    # phase 2
    obj2 = [Fraction(0)] * (width + 1)
    for j in range(n):
        obj2[j] = c[j]
    for i in range(m):
        cb = c[basis[i]] if basis[i] < n else Fraction(0)
        if cb:
            obj2 = [a - cb * bb for a, bb in zip(obj2, rows[i])]
    run(obj2, n)
    x = [Fraction(0)] * n
    for i in range(m):
        if basis[i] < n:
            x[basis[i]] = rows[i][-1]
    value = sum((ci * xi for ci, xi in zip(c, x)), Fraction(0))
    # reduced cost of artificial i is 0 - y_i (in flipped rows)
    y = [-obj2[n + i] * flip[i] for i in range(m)]
    return ExactLPResult(x, value, y)
