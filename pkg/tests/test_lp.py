from fractions import Fraction

import numpy as np
import pytest
from scipy.optimize import linprog

from dynproof.bound import BoundProgram
from dynproof.graphs import complete, cycle, random_gnp
from dynproof.lp import (INFEASIBLE, OPTIMAL, UNBOUNDED, ExactSimplex, LinearProgram,
                         PivotBudgetExceeded, extend_and_resolve, solve)
from dynproof.poly import Polynomial


def random_lp(rng, m, k, feasible=True, free_frac=0.0):
    lp = LinearProgram()
    for _ in range(m):
        lp.add_row(0)
    A = rng.integers(-3, 4, (m, k))
    y0 = rng.integers(0, 3, k)
    b = A @ y0 if feasible else rng.integers(-5, 6, m)
    for r in range(m):
        lp.rhs[r] = Fraction(int(b[r]))
    c = rng.integers(-2, 5, k)
    for j in range(k):
        lp.add_variable({r: int(A[r, j]) for r in range(m) if A[r, j]}, int(c[j]),
                        free=bool(rng.random() < free_frac))
    return lp, A, b, c


def scipy_solve(lp):
    m, k = lp.n_rows, lp.n_vars
    A = np.zeros((m, k))
    for j, col in enumerate(lp.columns):
        for r, v in col.items():
            A[r, j] = float(v)
    bounds = [(None, None) if f else (0, None) for f in lp.free]
    return linprog([float(c) for c in lp.objective], A_eq=A if m else None,
                   b_eq=[float(b) for b in lp.rhs] if m else None, bounds=bounds, method="highs")


def test_free_variable_equality():
    lp = LinearProgram()
    lp.add_row(3)
    lp.add_variable({0: 1}, 1, free=True)
    sol = solve(lp)
    assert sol.status == OPTIMAL and sol.value == 3


def test_infeasible_pair():
    lp = LinearProgram()
    lp.add_row(1)
    lp.add_row(2)
    lp.add_variable({0: 1, 1: 1}, 0)
    assert solve(lp).status == INFEASIBLE


def test_unbounded():
    lp = LinearProgram()
    lp.add_row(0)
    lp.add_variable({0: 1}, -1)
    lp.add_variable({0: -1}, 0)
    assert solve(lp).status == UNBOUNDED


@pytest.mark.parametrize("seed", range(60))
def test_matches_float_oracle(seed):
    rng = np.random.default_rng(seed)
    lp, *_ = random_lp(rng, int(rng.integers(1, 7)), int(rng.integers(1, 10)),
                       feasible=seed % 4 != 0, free_frac=0.2)
    sol = solve(lp)
    ref = scipy_solve(lp)
    expected = {0: OPTIMAL, 2: INFEASIBLE, 3: UNBOUNDED}[ref.status]
    assert sol.status == expected
    if sol.status == OPTIMAL:
        assert abs(float(sol.value) - ref.fun) < 1e-7
        assert all(v == 0 for v in lp.residual(sol.primal))
        assert all(v >= 0 for v, f in zip(sol.primal, lp.free) if not f)


def _dual_lp(lp):
    """min -b.u  s.t.  A_j.u + s_j = c_j (s_j >= 0 unless y_j free), u free."""
    d = LinearProgram()
    for j in range(lp.n_vars):
        d.add_row(lp.objective[j])
    for r in range(lp.n_rows):
        col = {j: v for j, c in enumerate(lp.columns) for rr, v in c.items() if rr == r}
        d.add_variable(col, -lp.rhs[r], free=True)
    for j in range(lp.n_vars):
        if not lp.free[j]:
            d.add_variable({j: 1}, 0)
    return d


@pytest.mark.parametrize("seed", range(25))
def test_strong_duality(seed):
    rng = np.random.default_rng(1000 + seed)
    lp, *_ = random_lp(rng, int(rng.integers(1, 8)), int(rng.integers(2, 10)))
    for j in range(lp.n_vars):  # nonnegative costs keep the primal bounded
        lp.objective[j] = abs(lp.objective[j])
    primal = solve(lp)
    dual = solve(_dual_lp(lp))
    assert primal.status == OPTIMAL and dual.status == OPTIMAL
    assert primal.value == -dual.value


@pytest.mark.parametrize("seed", range(50))
def test_warm_start_equals_scratch(seed):
    rng = np.random.default_rng(2000 + seed)
    lp, *_ = random_lp(rng, 5, 4, free_frac=0.2)
    solver = ExactSimplex(lp.copy())
    solver.solve()
    ref = lp.copy()
    for _ in range(5):
        col = {r: int(v) for r, v in enumerate(rng.integers(-2, 3, 5)) if v}
        cost = int(rng.integers(-2, 4))
        got = extend_and_resolve(solver, col, cost)
        ref.add_variable(col, cost)
        want = solve(ref)
        assert got.status == want.status
        if want.status == OPTIMAL:
            assert got.value == want.value


def test_zero_column_keeps_value():
    lp = LinearProgram()
    lp.add_row(2)
    lp.add_variable({0: 1}, 1)
    solver = ExactSimplex(lp)
    before = solver.solve().value
    assert solver.extend_and_resolve({}, 0).value == before


def test_adding_columns_never_increases_optimum():
    rng = np.random.default_rng(7)
    lp, *_ = random_lp(rng, 4, 6)
    for j in range(lp.n_vars):
        lp.objective[j] = abs(lp.objective[j])
    solver = ExactSimplex(lp)
    last = solver.solve().value
    for _ in range(10):
        col = {r: int(v) for r, v in enumerate(rng.integers(-2, 3, 4)) if v}
        sol = solver.extend_and_resolve(col, int(rng.integers(0, 3)))
        assert sol.value <= last
        last = sol.value


def test_pivot_budget():
    rng = np.random.default_rng(3)
    lp, *_ = random_lp(rng, 6, 12)
    with pytest.raises(PivotBudgetExceeded):
        ExactSimplex(lp, pivot_budget=1).solve()


def test_cplex_dump_mentions_rows():
    lp = LinearProgram()
    lp.add_row(Fraction(1, 2))
    lp.add_variable({0: 2}, 1)
    text = lp.to_cplex_lp()
    assert "Minimize" in text and "r0:" in text and "End" in text


# -- the bound LP -------------------------------------------------------------

def _axioms(n):
    out = []
    for i in range(n):
        out += [Polynomial.var(i), Polynomial.one_minus(i)]
    return out


@pytest.mark.parametrize("g", [complete(1), complete(2), cycle(7), random_gnp(9, 0.5, 0)])
def test_axiom_only_bound_is_n(g):
    prog = BoundProgram(Polynomial.sum_of_vars(g.n), _axioms(g.n))
    # matching x_i forces b_i - a_i = 1 for weights a_i on x_i and b_i on 1 - x_i,
    # so the unique optimum is a = 0, b = 1 with gamma = n
    assert prog.bound() == g.n
    lam = prog.multipliers()
    assert lam[1::2] == [1] * g.n and all(v == 0 for v in lam[0::2])


def test_k2_extension_drops_bound():
    prog = BoundProgram(Polynomial.sum_of_vars(2), _axioms(2))
    assert prog.bound() == 2
    prog.add(Polynomial({(): 1, (0,): -1, (1,): -1}))
    assert prog.bound() == 1
