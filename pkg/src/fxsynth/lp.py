"""Exact rational linear programming: bounded dual simplex.

Problem form::

    minimize  c . x
    subject to  row_lo[r] <= a_r . x <= row_hi[r]
                lb[j] <= x_j <= ub[j]

with ``c >= 0`` and every ``lb`` finite, so the slack basis is dual feasible and
no phase one is needed.  Row activities are extra variables ``y_r = a_r . x``;
the tableau stores each basic variable as a combination of the nonbasic ones.
Pivoting uses Bland's smallest-index rule on both choices, which rules out cycling.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

INF = None  # marks a missing bound


@dataclass
class LPResult:
    status: str  # "optimal" or "infeasible"
    x: list[Fraction] | None = None
    objective: Fraction | None = None
    pivots: int = 0


class LPIterationLimit(RuntimeError):
    pass


def _below(v, lo) -> bool:
    return lo is not None and v < lo


def _above(v, hi) -> bool:
    return hi is not None and v > hi


def solve_lp(
    cost: Sequence[int | Fraction],
    rows: Sequence[dict[int, int | Fraction]],
    row_lo: Sequence,
    row_hi: Sequence,
    lb: Sequence,
    ub: Sequence,
    max_pivots: int = 200_000,
) -> LPResult:
    n, m = len(cost), len(rows)
    for j in range(n):
        if cost[j] < 0:
            raise ValueError("costs must be nonnegative")
        if lb[j] is None:
            raise ValueError("every variable needs a finite lower bound")
        if ub[j] is not None and ub[j] < lb[j]:
            return LPResult("infeasible")
    for r in range(m):
        if row_lo[r] is not None and row_hi[r] is not None and row_lo[r] > row_hi[r]:
            return LPResult("infeasible")

    lo = [Fraction(v) if v is not None else None for v in list(lb) + list(row_lo)]
    hi = [Fraction(v) if v is not None else None for v in list(ub) + list(row_hi)]
    # basic variable -> {nonbasic variable: coefficient}
    tab: dict[int, dict[int, Fraction]] = {
        n + r: {j: Fraction(c) for j, c in rows[r].items() if c} for r in range(m)
    }
    red = {j: Fraction(cost[j]) for j in range(n)}  # reduced costs of nonbasics
    val = {j: lo[j] for j in range(n)}  # nonbasic values, each at a bound
    pivots = 0

    while True:
        leave, beta = None, None
        for b in sorted(tab):
            s = sum((c * val[j] for j, c in tab[b].items()), Fraction(0))
            if _below(s, lo[b]) or _above(s, hi[b]):
                leave, beta = b, s
                break
        if leave is None:
            break
        if pivots >= max_pivots:
            raise LPIterationLimit(f"no optimum after {pivots} pivots")
        up = _below(beta, lo[leave])  # the leaving variable must increase
        row = tab[leave]
        enter, best = None, None
        for j in sorted(row):
            a = row[j]
            if lo[j] is not None and hi[j] is not None and lo[j] == hi[j]:
                continue
            at_lo = val[j] == lo[j]
            # direction x_j can move: + from its lower bound, - from its upper bound
            moves_up = (a > 0) if at_lo else (a < 0)
            if moves_up != up:
                continue
            ratio = abs(red.get(j, Fraction(0))) / abs(a)
            if best is None or ratio < best:
                enter, best = j, ratio
        if enter is None:
            return LPResult("infeasible", pivots=pivots)

        target = lo[leave] if up else hi[leave]
        a_q = row[enter]
        # x_enter = (leave - sum_{j != enter} a_j x_j) / a_q
        expr = {j: -c / a_q for j, c in row.items() if j != enter}
        expr[leave] = 1 / a_q
        del tab[leave]
        for b, r in tab.items():
            c = r.pop(enter, None)
            if c is None:
                continue
            for j, e in expr.items():
                v = r.get(j, 0) + c * e
                if v:
                    r[j] = v
                else:
                    r.pop(j, None)
        tab[enter] = expr
        d_q = red.pop(enter, Fraction(0))
        if d_q:
            for j, e in expr.items():
                v = red.get(j, 0) + d_q * e
                if v:
                    red[j] = v
                else:
                    red.pop(j, None)
        del val[enter]
        val[leave] = target
        pivots += 1

    x = [Fraction(0)] * n
    for j in range(n):
        if j in val:
            x[j] = val[j]
        else:
            x[j] = sum((c * val[t] for t, c in tab[j].items()), Fraction(0))
    obj = sum((Fraction(cost[j]) * x[j] for j in range(n)), Fraction(0))
    return LPResult("optimal", x, obj, pivots)
