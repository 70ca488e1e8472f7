"""Exact rational linear programming.

A revised primal simplex over ``gmpy2.mpq`` with an explicit basis inverse.
Bland's rule is used for both the entering and the leaving variable, so the
method terminates even on the heavily degenerate programs that certificate
search produces.

Problems are stated as::

    minimize    c . y
    subject to  A y = b
                y_j >= 0   (or free)

Columns are sparse ``{row: coefficient}`` maps.  The solver object keeps its
basis between calls, so a problem can grow by columns and rows and be
re-solved from the previous optimal basis (see :meth:`ExactSimplex.add_column`).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

from gmpy2 import mpq

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

DEFAULT_PIVOT_BUDGET = 10**6

_ZERO = mpq(0)
_ONE = mpq(1)


class PivotBudgetExceeded(RuntimeError):
    pass


def _q(x) -> mpq:
    if isinstance(x, Fraction):
        return mpq(x.numerator, x.denominator)
    return mpq(x)


def _frac(x: mpq) -> Fraction:
    return Fraction(int(x.numerator), int(x.denominator))


@dataclass
class LinearProgram:
    objective: list = field(default_factory=list)
    columns: list = field(default_factory=list)
    rhs: list = field(default_factory=list)
    free: list = field(default_factory=list)
    names: list | None = None

    def __post_init__(self):
        if not (len(self.objective) == len(self.columns) == len(self.free)):
            raise ValueError("objective, columns and free flags must have equal length")
        for col in self.columns:
            for r in col:
                if not 0 <= r < len(self.rhs):
                    raise ValueError(f"column entry in row {r} outside 0..{len(self.rhs) - 1}")

    @property
    def n_rows(self) -> int:
        return len(self.rhs)

    @property
    def n_vars(self) -> int:
        return len(self.columns)

    def add_variable(self, column: Mapping, cost=0, free: bool = False) -> int:
        for r in column:
            if not 0 <= r < len(self.rhs):
                raise ValueError(f"column entry in row {r} outside 0..{len(self.rhs) - 1}")
        self.objective.append(Fraction(cost))
        self.columns.append({r: Fraction(v) for r, v in column.items() if v})
        self.free.append(free)
        return len(self.columns) - 1

    def add_row(self, rhs=0) -> int:
        self.rhs.append(Fraction(rhs))
        return len(self.rhs) - 1

    def copy(self) -> "LinearProgram":
        return LinearProgram(
            list(self.objective), [dict(c) for c in self.columns], list(self.rhs),
            list(self.free), list(self.names) if self.names else None,
        )

    def residual(self, primal) -> list:
        res = [-b for b in self.rhs]
        for j, col in enumerate(self.columns):
            if primal[j]:
                for r, v in col.items():
                    res[r] += v * primal[j]
        return res

    def to_cplex_lp(self) -> str:
        """CPLEX-LP text.  Non-integral rationals are written as decimals."""

        def num(v: Fraction) -> str:
            return str(v.numerator) if v.denominator == 1 else repr(float(v))

        names = self.names or [f"y{j}" for j in range(self.n_vars)]
        lines = ["\\ exact LP exported for cross-checking", "Minimize"]
        obj = " ".join(f"{'+' if c >= 0 else '-'} {num(abs(c))} {names[j]}"
                       for j, c in enumerate(self.objective) if c)
        lines.append(f" obj: {obj or '0 ' + names[0]}")
        lines.append("Subject To")
        rows: list = [[] for _ in range(self.n_rows)]
        for j, col in enumerate(self.columns):
            for r, v in col.items():
                rows[r].append(f"{'+' if v >= 0 else '-'} {num(abs(v))} {names[j]}")
        for r, terms in enumerate(rows):
            lhs = " ".join(terms) if terms else f"0 {names[0]}"
            lines.append(f" r{r}: {lhs} = {num(self.rhs[r])}")
        lines.append("Bounds")
        for j, fr in enumerate(self.free):
            lines.append(f" {names[j]} free" if fr else f" {names[j]} >= 0")
        lines.append("End")
        return "\n".join(lines) + "\n"


@dataclass
class LPSolution:
    status: str
    value: Fraction | None = None
    primal: list = field(default_factory=list)
    dual: list = field(default_factory=list)
    pivots: int = 0


class ExactSimplex:
    """Stateful exact simplex solver for one growing :class:`LinearProgram`.

    Internal variables: one per nonnegative original variable, two (plus and
    minus part) per free variable, and one artificial per row.  Artificials
    that are still basic after phase 1 stay at level zero; the ratio test
    treats them as blocking, which keeps them at zero for good.
    """

    def __init__(self, lp: LinearProgram, pivot_budget: int = DEFAULT_PIVOT_BUDGET):
        self.lp = lp
        self.pivot_budget = pivot_budget
        self.pivots = 0
        self._cols: list = []      # internal column: dict row -> mpq
        self._cost: list = []
        self._owner: list = []     # (original var, sign) or (-1 - row, art sign)
        self._var_slots: list = []  # original var -> list of internal indices
        self.m = 0
        self._b: list = []
        self._basis: list = []     # internal index per row
        self._binv: list = []      # dense rows of mpq
        self._xb: list = []
        self._art: list = []       # row -> internal index of its artificial
        self._is_art: list = []
        self._status: str | None = None
        for r in range(lp.n_rows):
            self._new_row(_q(lp.rhs[r]))
        for j in range(lp.n_vars):
            self._new_var(j)

    # -- growth ------------------------------------------------------------
    def _new_internal(self, col: dict, cost: mpq, owner, art: bool) -> int:
        self._cols.append(col)
        self._cost.append(cost)
        self._owner.append(owner)
        self._is_art.append(art)
        return len(self._cols) - 1

    def _new_var(self, j: int) -> None:
        col = {r: _q(v) for r, v in self.lp.columns[j].items() if v}
        c = _q(self.lp.objective[j])
        slots = [self._new_internal(col, c, (j, 1), False)]
        if self.lp.free[j]:
            slots.append(self._new_internal({r: -v for r, v in col.items()}, -c, (j, -1), False))
        self._var_slots.append(slots)

    def _new_row(self, b: mpq) -> None:
        r = self.m
        # entries of the current basic columns in the new row
        rb = [self._cols[k].get(r, _ZERO) for k in self._basis]
        resid = b - sum((rb[i] * self._xb[i] for i in range(self.m) if rb[i]), _ZERO)
        s = _ONE if resid >= 0 else -_ONE
        a = self._new_internal({r: s}, _ZERO, (-1 - r, int(s)), True)
        newrow = [_ZERO] * self.m
        for i in range(self.m):
            if rb[i]:
                bi = self._binv[i]
                f = -s * rb[i]
                for j in range(self.m):
                    if bi[j]:
                        newrow[j] += f * bi[j]
        for row in self._binv:
            row.append(_ZERO)
        newrow.append(s)
        self._binv.append(newrow)
        self._basis.append(a)
        self._xb.append(s * resid)
        self._art.append(a)
        self._b.append(b)
        self.m += 1
        self._status = None

    def add_row(self, rhs=0) -> int:
        r = self.lp.add_row(rhs)
        self._new_row(_q(self.lp.rhs[r]))
        return r

    def add_column(self, column: Mapping, cost=0, free: bool = False) -> int:
        j = self.lp.add_variable(column, cost, free)
        self._new_var(j)
        self._status = None
        return j

    # -- simplex core --------------------------------------------------------
    def _duals(self, cost: list) -> list:
        m = self.m
        y = [_ZERO] * m
        for i in range(m):
            cb = cost[self._basis[i]]
            if cb:
                bi = self._binv[i]
                for j in range(m):
                    if bi[j]:
                        y[j] += cb * bi[j]
        return y

    def _iterate(self, cost: list, phase: int) -> str:
        m = self.m
        in_basis = set(self._basis)
        while True:
            y = self._duals(cost)
            enter = -1
            for k, col in enumerate(self._cols):
                if k in in_basis or self._is_art[k]:
                    continue
                d = cost[k]
                for r, v in col.items():
                    if y[r]:
                        d -= y[r] * v
                if d < 0:
                    enter = k
                    break
            if enter < 0:
                return OPTIMAL
            col = self._cols[enter]
            u = [_ZERO] * m
            for i in range(m):
                bi = self._binv[i]
                acc = _ZERO
                for r, v in col.items():
                    if bi[r]:
                        acc += bi[r] * v
                u[i] = acc
            leave = -1
            best = None
            for i in range(m):
                ui = u[i]
                if not ui:
                    continue
                if phase == 2 and self._is_art[self._basis[i]]:
                    ratio = _ZERO  # artificial pinned at zero blocks any motion
                elif ui > 0:
                    ratio = self._xb[i] / ui
                else:
                    continue
                if (best is None or ratio < best
                        or (ratio == best and self._basis[i] < self._basis[leave])):
                    best, leave = ratio, i
            if leave < 0:
                return UNBOUNDED
            in_basis.discard(self._basis[leave])
            in_basis.add(enter)
            self._pivot(leave, enter, u)

    def _pivot(self, p: int, enter: int, u: list) -> None:
        self.pivots += 1
        if self.pivots > self.pivot_budget:
            raise PivotBudgetExceeded(f"pivot budget {self.pivot_budget} exceeded")
        m = self.m
        piv = u[p]
        rowp = self._binv[p]
        inv = 1 / piv
        rowp = [v * inv if v else _ZERO for v in rowp]
        self._binv[p] = rowp
        theta = self._xb[p] * inv
        nz = [j for j in range(m) if rowp[j]]
        for i in range(m):
            ui = u[i]
            if i == p or not ui:
                continue
            bi = self._binv[i]
            for j in nz:
                bi[j] -= ui * rowp[j]
            self._xb[i] -= ui * theta
        self._xb[p] = theta
        self._basis[p] = enter

    def solve(self) -> LPSolution:
        if self._status is None:
            self._status = self._run()
        return self._solution()

    def _run(self) -> str:
        if any(self._xb[i] > 0 and self._is_art[self._basis[i]] for i in range(self.m)):
            phase1 = [_ONE if a else _ZERO for a in self._is_art]
            self._iterate(phase1, 1)
            if any(self._xb[i] > 0 and self._is_art[self._basis[i]] for i in range(self.m)):
                return INFEASIBLE
        return self._iterate(self._cost, 2)

    def _solution(self) -> LPSolution:
        if self._status != OPTIMAL:
            return LPSolution(self._status, pivots=self.pivots)
        x = [_ZERO] * len(self._cols)
        for i, k in enumerate(self._basis):
            x[k] = self._xb[i]
        primal = []
        for slots in self._var_slots:
            v = x[slots[0]]
            if len(slots) == 2:
                v -= x[slots[1]]
            primal.append(_frac(v))
        value = sum((self._cost[k] * x[k] for k in range(len(x)) if x[k]), _ZERO)
        dual = [_frac(v) for v in self._duals(self._cost)]
        return LPSolution(OPTIMAL, _frac(value), primal, dual, self.pivots)

    def extend_and_resolve(self, column: Mapping, cost=0, free: bool = False) -> LPSolution:
        self.add_column(column, cost, free)
        return self.solve()


def solve(lp: LinearProgram, pivot_budget: int = DEFAULT_PIVOT_BUDGET) -> LPSolution:
    return ExactSimplex(lp.copy(), pivot_budget).solve()


def extend_and_resolve(solver: ExactSimplex, new_column: Mapping, cost=0,
                       free: bool = False) -> LPSolution:
    """Append a column to a live solver and re-solve from its last basis."""
    return solver.extend_and_resolve(new_column, cost, free)


__all__ = [
    "ExactSimplex", "LinearProgram", "LPSolution", "PivotBudgetExceeded",
    "OPTIMAL", "INFEASIBLE", "UNBOUNDED", "solve", "extend_and_resolve",
]
