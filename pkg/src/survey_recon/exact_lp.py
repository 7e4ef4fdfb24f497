"""Dense two-phase simplex over the rationals with Bland's pivot rule.

Small problems only: minimise ``c.x`` subject to ``A x = b``, ``x >= 0``.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Sequence

from .core import as_rational


class LpStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass(frozen=True)
class LpProblem:
    objective: tuple[Fraction, ...]
    a_eq: tuple[tuple[Fraction, ...], ...]
    b_eq: tuple[Fraction, ...]

    def __post_init__(self):
        c = tuple(as_rational(v) for v in self.objective)
        a = tuple(tuple(as_rational(v) for v in row) for row in self.a_eq)
        b = tuple(as_rational(v) for v in self.b_eq)
        if len(a) != len(b):
            raise ValueError("A and b disagree on the number of constraints")
        if any(len(row) != len(c) for row in a):
            raise ValueError("constraint row length differs from variable count")
        object.__setattr__(self, "objective", c)
        object.__setattr__(self, "a_eq", a)
        object.__setattr__(self, "b_eq", b)

    @property
    def n_vars(self) -> int:
        return len(self.objective)


@dataclass(frozen=True)
class LpSolution:
    status: LpStatus
    values: tuple[Fraction, ...] = ()
    objective_value: Fraction | None = None
    duals: tuple[Fraction, ...] = ()
    basis: tuple[int, ...] = ()

    @property
    def optimal(self) -> bool:
        return self.status is LpStatus.OPTIMAL


class _Tableau:
    def __init__(self, a, b, n):
        m = len(b)
        self.m, self.n = m, n
        self.sign = [1 if bi >= 0 else -1 for bi in b]
        self.rows = []
        for i in range(m):
            s = self.sign[i]
            row = [s * v for v in a[i]] + [Fraction(int(k == i)) for k in range(m)]
            row.append(s * b[i])
            self.rows.append(row)
        self.basis = [n + i for i in range(m)]
        self.cost = None

    def set_cost(self, c_full):
        # reduced costs r_j = c_j - c_B . col_j, last entry = -objective
        width = self.n + self.m + 1
        r = list(c_full) + [Fraction(0)]
        for i, bv in enumerate(self.basis):
            cb = c_full[bv]
            if cb:
                row = self.rows[i]
                for j in range(width):
                    if row[j]:
                        r[j] -= cb * row[j]
        self.cost = r

    def pivot(self, i, j):
        row = self.rows[i]
        piv = row[j]
        if piv != 1:
            self.rows[i] = row = [v / piv if v else v for v in row]
        nz = [k for k, v in enumerate(row) if v]
        for k, other in enumerate(self.rows):
            if k != i:
                f = other[j]
                if f:
                    for t in nz:
                        other[t] -= f * row[t]
        f = self.cost[j]
        if f:
            for t in nz:
                self.cost[t] -= f * row[t]
        self.basis[i] = j

    def run(self, allowed):
        """Bland's rule; returns False on unboundedness."""
        while True:
            enter = next((j for j in allowed if self.cost[j] < 0), None)
            if enter is None:
                return True
            best = None
            for i, row in enumerate(self.rows):
                a = row[enter]
                if a > 0:
                    ratio = row[-1] / a
                    key = (ratio, self.basis[i])
                    if best is None or key < best[0]:
                        best = (key, i)
            if best is None:
                return False
            self.pivot(best[1], enter)


def solve(problem: LpProblem) -> LpSolution:
    n = problem.n_vars
    m = len(problem.b_eq)
    if m == 0:
        if any(c < 0 for c in problem.objective):
            return LpSolution(LpStatus.UNBOUNDED)
        return LpSolution(LpStatus.OPTIMAL, (Fraction(0),) * n, Fraction(0), (), ())
    t = _Tableau(problem.a_eq, problem.b_eq, n)

    # phase 1: minimise the sum of artificials
    t.set_cost([Fraction(0)] * n + [Fraction(1)] * m)
    t.run(range(n + m))
    if t.cost[-1] != 0:
        return LpSolution(LpStatus.INFEASIBLE)
    # drive zero-level artificials out where a structural pivot exists
    for i in range(m):
        if t.basis[i] >= n:
            j = next((j for j in range(n) if t.rows[i][j] != 0), None)
            if j is not None:
                t.pivot(i, j)

    # phase 2; artificials may stay basic at zero on redundant rows but never enter
    t.set_cost(list(problem.objective) + [Fraction(0)] * m)
    if not t.run(range(n)):
        return LpSolution(LpStatus.UNBOUNDED)

    values = [Fraction(0)] * n
    for i, bv in enumerate(t.basis):
        if bv < n:
            values[bv] = t.rows[i][-1]
    duals = tuple(-t.cost[n + i] * t.sign[i] for i in range(m))
    obj = sum((c * v for c, v in zip(problem.objective, values) if v), Fraction(0))
    return LpSolution(
        LpStatus.OPTIMAL,
        tuple(values),
        obj,
        duals,
        tuple(sorted(bv for bv in t.basis if bv < n)),
    )


def reduced_costs(problem: LpProblem, duals: Sequence[Fraction]) -> list[Fraction]:
    cols = zip(*problem.a_eq) if problem.a_eq else [()] * problem.n_vars
    return [c - sum(y * a for y, a in zip(duals, col)) for c, col in zip(problem.objective, cols)]
