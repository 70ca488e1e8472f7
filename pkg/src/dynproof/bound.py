"""The certificate LP shared by the dynamic environment and the hierarchy.

Given an objective ``f`` and nonnegative polynomials ``p_1..p_k`` (all
reduced in the same quotient ring), find the smallest ``gamma`` with

    gamma - f = sum_i lambda_i p_i,   lambda >= 0,

by matching coefficients monomial by monomial.  Rows are created lazily as
new monomials appear, so the program grows together with the memory.
"""

from __future__ import annotations

from fractions import Fraction

from .lp import OPTIMAL, DEFAULT_PIVOT_BUDGET, ExactSimplex, LinearProgram, LPSolution
from .poly import ONE, Polynomial


class BoundProgram:
    def __init__(self, objective: Polynomial, polys=(), pivot_budget: int = DEFAULT_PIVOT_BUDGET):
        self.objective = objective
        self.rows: dict = {}
        self.polys: list = []
        lp = LinearProgram()
        self.solver = ExactSimplex(lp, pivot_budget)
        self._row(ONE)
        for m, _ in objective.terms:
            self._row(m)
        # gamma is variable 0, free
        self.solver.add_column({self.rows[ONE]: 1}, cost=1, free=True)
        for p in polys:
            self.add(p)
        self._solution: LPSolution | None = None

    def _row(self, m) -> int:
        r = self.rows.get(m)
        if r is None:
            r = self.solver.add_row(self.objective.coeff(m))
            self.rows[m] = r
        return r

    def add(self, p: Polynomial) -> int:
        """Append a column for ``p``; returns its index among the polynomials."""
        col = {}
        for m, c in p.terms:
            col[self._row(m)] = -c
        self.solver.add_column(col)
        self.polys.append(p)
        self._solution = None
        return len(self.polys) - 1

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    @property
    def n_columns(self) -> int:
        return len(self.polys)

    def solve(self) -> LPSolution:
        if self._solution is None:
            self._solution = self.solver.solve()
        return self._solution

    def bound(self) -> Fraction:
        sol = self.solve()
        if sol.status != OPTIMAL:
            raise RuntimeError(f"bound LP ended with status {sol.status}")
        return sol.value

    def multipliers(self) -> list:
        """Optimal nonnegative weight of every polynomial column."""
        return self.solve().primal[1:]
