"""Exact rational simplex for ``max c.x  s.t.  A x <= b, x >= 0`` with ``b >= 0``.

The origin is feasible because ``b >= 0``, so the slack basis starts the
tableau and no phase one is needed. Bland's rule prevents cycling.
"""
from __future__ import annotations

from fractions import Fraction
from typing import Sequence

__all__ = ["UnboundedLP", "solve_max"]


class UnboundedLP(ArithmeticError):
    pass


def solve_max(c: Sequence[Fraction], A: Sequence[Sequence[Fraction]], b: Sequence[Fraction],
              max_pivots: int = 100_000) -> tuple[list[Fraction], Fraction]:
    """Return an optimal basic solution ``x`` and the objective value."""
    nv, nc = len(c), len(A)
    if len(b) != nc or any(len(row) != nv for row in A):
        raise ValueError("inconsistent LP dimensions")
    if any(bi < 0 for bi in b):
        raise ValueError("right-hand side must be nonnegative")
    width = nv + nc
    # rows: [coefficients over structural + slack vars | rhs]
    T = []
    for r, row in enumerate(A):
        T.append([Fraction(v) for v in row] + [Fraction(int(k == r)) for k in range(nc)] + [Fraction(b[r])])
    # reduced costs, stored as c_j - z_j; objective value kept negated in the last slot
    z = [Fraction(v) for v in c] + [Fraction(0)] * nc + [Fraction(0)]
    basis = [nv + r for r in range(nc)]

    for _ in range(max_pivots):
        enter = next((j for j in range(width) if z[j] > 0), None)
        if enter is None:
            break
        leave, best = None, None
        for r in range(nc):
            a = T[r][enter]
            if a > 0:
                ratio = T[r][-1] / a
                if best is None or ratio < best or (ratio == best and basis[r] < basis[leave]):
                    leave, best = r, ratio
        if leave is None:
            raise UnboundedLP("objective is unbounded")
        prow = T[leave]
        piv = prow[enter]
        if piv != 1:
            prow[:] = [v / piv for v in prow]
        for r in range(nc):
            if r != leave:
                f = T[r][enter]
                if f:
                    row = T[r]
                    T[r] = [v - f * pv for v, pv in zip(row, prow)]
        f = z[enter]
        z = [v - f * pv for v, pv in zip(z, prow)]
        basis[leave] = enter
    else:
        raise RuntimeError("simplex pivot limit reached")

    x = [Fraction(0)] * nv
    for r, var in enumerate(basis):
        if var < nv:
            x[var] = T[r][-1]
    return x, -z[-1]
