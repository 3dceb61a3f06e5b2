"""Exact integer linear programming for small flow problems.

Two-phase primal simplex over exact rationals (Bland's rule, so no cycling)
with branch-and-bound on fractional variables.  Problem sizes here are tens
of variables, where exact Fraction arithmetic is fast and removes every
tolerance question from the bound calculation.

Conventions: variables are x_0..x_{n-1} >= 0; constraints are given as
(coeffs, rhs) pairs where coeffs maps variable index -> coefficient.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

from .errors import Infeasible, Unbounded

Row = tuple[Mapping[int, Fraction], Fraction]


@dataclass(frozen=True)
class LpResult:
    value: Fraction
    x: list[Fraction]


def _pivot(rows: list[list[Fraction]], z: list[Fraction], basis: list[int], r: int, c: int) -> None:
    piv = rows[r][c]
    rows[r] = [v / piv for v in rows[r]]
    for i, row in enumerate(rows):
        if i != r and row[c] != 0:
            f = row[c]
            rows[i] = [a - f * b for a, b in zip(row, rows[r])]
    if z[c] != 0:
        f = z[c]
        for j in range(len(z)):
            z[j] -= f * rows[r][j]
    basis[r] = c


def _run_simplex(rows: list[list[Fraction]], z: list[Fraction], basis: list[int], ncols: int) -> None:
    """Maximize with objective row z (z[j] = c_B A_j - c_j); raises Unbounded."""
    while True:
        enter = -1
        for j in range(ncols):  # Bland: smallest eligible index
            if z[j] < 0:
                enter = j
                break
        if enter < 0:
            return
        leave = -1
        best: Fraction | None = None
        for i, row in enumerate(rows):
            if row[enter] > 0:
                ratio = row[-1] / row[enter]
                if best is None or ratio < best or (ratio == best and basis[i] < basis[leave]):
                    best = ratio
                    leave = i
        if leave < 0:
            raise Unbounded("objective can grow without bound")
        _pivot(rows, z, basis, leave, enter)


def lp_solve(
    n: int,
    objective: Mapping[int, Fraction],
    eqs: Sequence[Row],
    les: Sequence[Row],
    maximize: bool = True,
) -> LpResult:
    """Exact LP optimum over x >= 0 subject to eqs (=) and les (<=)."""
    sign = Fraction(1) if maximize else Fraction(-1)

    nslack = len(les)
    rows: list[list[Fraction]] = []
    needs_artificial: list[bool] = []

    for k, (coeffs, rhs) in enumerate(list(eqs) + list(les)):
        row = [Fraction(0)] * (n + nslack)
        for j, a in coeffs.items():
            row[j] = Fraction(a)
        is_le = k >= len(eqs)
        if is_le:
            row[n + (k - len(eqs))] = Fraction(1)
        row.append(Fraction(rhs))
        if row[-1] < 0:
            row = [-v for v in row]
            needs_artificial.append(True)  # slack became -1, unusable as basis
        else:
            needs_artificial.append(not is_le)
        rows.append(row)

    base_cols = n + nslack
    art_cols: list[int] = []
    basis: list[int] = []
    for i, row in enumerate(rows):
        if needs_artificial[i]:
            col = base_cols + len(art_cols)
            art_cols.append(col)
            basis.append(col)
        else:
            basis.append(n + (i - len(eqs)))
    ncols = base_cols + len(art_cols)
    for i, row in enumerate(rows):
        rhs = row.pop()
        row.extend(Fraction(0) for _ in range(ncols - len(row)))
        if basis[i] >= base_cols:
            row[basis[i]] = Fraction(1)
        row.append(rhs)

    # phase 1: drive artificials to zero (maximize -sum of artificials)
    if art_cols:
        z1 = [Fraction(0)] * (ncols + 1)
        for i, b in enumerate(basis):
            if b >= base_cols:
                for j in range(ncols + 1):
                    z1[j] -= rows[i][j]
        for c in art_cols:
            z1[c] += 1  # - c_j with c_j = -1
        _run_simplex(rows, z1, basis, ncols)
        if z1[-1] != 0:
            raise Infeasible("no feasible point satisfies the constraints")
        # pivot leftover artificials out of the basis, dropping redundant rows
        keep: list[int] = []
        for i in range(len(rows)):
            if basis[i] >= base_cols:
                for j in range(base_cols):
                    if rows[i][j] != 0:
                        _pivot(rows, z1, basis, i, j)
                        break
            if basis[i] < base_cols:
                keep.append(i)
        rows = [rows[i] for i in keep]
        basis = [basis[i] for i in keep]
        # drop artificial columns
        for i in range(len(rows)):
            rows[i] = rows[i][:base_cols] + [rows[i][-1]]
        ncols = base_cols

    # phase 2: real objective
    z = [Fraction(0)] * (ncols + 1)
    costs = [Fraction(0)] * ncols
    for j, c in objective.items():
        costs[j] = sign * Fraction(c)
    for j in range(ncols):
        z[j] = -costs[j]
    for i, b in enumerate(basis):
        if costs[b] != 0:
            for j in range(ncols + 1):
                z[j] += costs[b] * rows[i][j]
    _run_simplex(rows, z, basis, ncols)

    x = [Fraction(0)] * n
    for i, b in enumerate(basis):
        if b < n:
            x[b] = rows[i][-1]
    return LpResult(sign * z[-1], x)


def ilp_solve(
    n: int,
    objective: Mapping[int, Fraction],
    eqs: Sequence[Row],
    les: Sequence[Row],
    maximize: bool = True,
) -> LpResult:
    """Exact integer optimum via branch-and-bound on the LP relaxation.

    Deterministic: branches on the smallest-index fractional variable,
    explores the floor branch first, keeps the first-found best incumbent.
    """
    sign = 1 if maximize else -1
    best: LpResult | None = None
    stack: list[list[Row]] = [[]]

    while stack:
        extra = stack.pop()
        try:
            res = lp_solve(n, objective, eqs, list(les) + extra, maximize)
        except Infeasible:
            continue
        if best is not None and sign * res.value <= sign * best.value:
            continue  # bound cannot strictly improve on the incumbent
        frac_var = next((j for j in range(n) if res.x[j].denominator != 1), -1)
        if frac_var < 0:
            best = res
            continue
        v = res.x[frac_var]
        floor_v = v.numerator // v.denominator
        ceil_branch: Row = ({frac_var: Fraction(-1)}, Fraction(-(floor_v + 1)))
        floor_branch: Row = ({frac_var: Fraction(1)}, Fraction(floor_v))
        stack.append([*extra, ceil_branch])
        stack.append([*extra, floor_branch])

    if best is None:
        raise Infeasible("no integral point satisfies the constraints")
    return best
