from fractions import Fraction
from itertools import combinations

from hypothesis import given
from hypothesis import strategies as st

from survey_recon.exact_lp import LpProblem, LpStatus, reduced_costs, solve

F = Fraction


def _solve_square(cols, b):
    """Unique solution of ``[cols] x = b`` by exact elimination, or None."""
    m, k = len(b), len(cols)
    aug = [[cols[j][i] for j in range(k)] + [b[i]] for i in range(m)]
    row = 0
    pivots = []
    for c in range(k):
        p = next((r for r in range(row, m) if aug[r][c] != 0), None)
        if p is None:
            return None
        aug[row], aug[p] = aug[p], aug[row]
        piv = aug[row][c]
        aug[row] = [v / piv for v in aug[row]]
        for r in range(m):
            if r != row and aug[r][c]:
                f = aug[r][c]
                aug[r] = [a - f * bb for a, bb in zip(aug[r], aug[row])]
        pivots.append(c)
        row += 1
    if any(aug[r][-1] != 0 for r in range(row, m)):
        return None
    return [aug[i][-1] for i in range(k)]


def vertex_oracle(c, a, b):
    """Minimum over all basic feasible solutions; None when infeasible."""
    n, m = len(c), len(b)
    best = None
    for size in range(0, min(n, m) + 1):
        for cols in combinations(range(n), size):
            if size == 0:
                if all(x == 0 for x in b):
                    best = F(0) if best is None else min(best, F(0))
                continue
            x = _solve_square([[a[i][j] for i in range(m)] for j in cols], b)
            if x is None or any(v < 0 for v in x):
                continue
            val = sum(c[j] * v for j, v in zip(cols, x))
            best = val if best is None or val < best else best
    return best


small_int = st.integers(-4, 4)


@st.composite
def bounded_problems(draw):
    """Random LPs with a simplex row so the optimum is finite when feasible."""
    n = draw(st.integers(2, 5))
    m = draw(st.integers(0, 2))
    c = [F(draw(small_int)) for _ in range(n)]
    a = [[F(1)] * n] + [[F(draw(small_int)) for _ in range(n)] for _ in range(m)]
    b = [F(1)] + [F(draw(small_int), draw(st.integers(1, 3))) for _ in range(m)]
    return c, a, b


def test_minimise_first_coordinate():
    sol = solve(LpProblem((1, 0), ((1, 1),), (1,)))
    assert sol.optimal and sol.values == (0, 1) and sol.objective_value == 0


def test_infeasible():
    assert solve(LpProblem((0, 0), ((1, 1), (1, -1)), (1, 3))).status is LpStatus.INFEASIBLE


def test_unbounded():
    assert solve(LpProblem((-1, 0), ((1, -1),), (0,))).status is LpStatus.UNBOUNDED


def test_decomposition_instance():
    sol = solve(LpProblem((F(3, 4), F(1, 4), F(1, 4)), ((1, 0, F(1, 2)), (0, 1, F(1, 2))), (F(1, 4), F(3, 4))))
    assert sol.values == (0, F(1, 2), F(1, 2))
    assert sol.objective_value == F(1, 4)


def test_redundant_rows():
    sol = solve(LpProblem((1, 2), ((1, 1), (2, 2)), (1, 2)))
    assert sol.optimal and sol.values == (1, 0)


def test_negative_rhs_rows_are_flipped():
    sol = solve(LpProblem((1, 1), ((-1, -1),), (-2,)))
    assert sol.optimal and sol.objective_value == 2


@given(bounded_problems())
def test_matches_vertex_enumeration(prob):
    c, a, b = prob
    sol = solve(LpProblem(c, a, b))
    expected = vertex_oracle(c, a, b)
    if expected is None:
        assert sol.status is LpStatus.INFEASIBLE
    else:
        assert sol.optimal and sol.objective_value == expected


@given(bounded_problems())
def test_solutions_satisfy_constraints_exactly(prob):
    c, a, b = prob
    sol = solve(LpProblem(c, a, b))
    if sol.optimal:
        assert all(v >= 0 for v in sol.values)
        for row, rhs in zip(a, b):
            assert sum(x * v for x, v in zip(row, sol.values)) == rhs
        # optimality certificate: nonnegative reduced costs
        assert all(r >= 0 for r in reduced_costs(LpProblem(c, a, b), sol.duals))


@given(bounded_problems(), st.randoms(use_true_random=False))
def test_objective_invariant_under_column_order(prob, rnd):
    c, a, b = prob
    perm = list(range(len(c)))
    rnd.shuffle(perm)
    first = solve(LpProblem(c, a, b))
    second = solve(LpProblem([c[j] for j in perm], [[row[j] for j in perm] for row in a], b))
    assert first.status is second.status
    if first.optimal:
        assert first.objective_value == second.objective_value


def test_degenerate_problem_terminates():
    # cycling-prone degenerate shape; optimum -1/20 agrees with vertex_oracle
    c = (F(-3, 4), 150, F(-1, 50), 6, 0, 0, 0)
    a = (
        (F(1, 4), -60, F(-1, 25), 9, 1, 0, 0),
        (F(1, 2), -90, F(-1, 50), 3, 0, 1, 0),
        (0, 0, 1, 0, 0, 0, 1),
    )
    sol = solve(LpProblem(c, a, (0, 0, 1)))
    assert sol.optimal and sol.objective_value == F(-1, 20)
