import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given
from hypothesis import strategies as st

from oracles import enumerate_bfs
from trussforge.lp import LPOptions, LPProblem, LPStatus, ScipyHighsBackend, SimplexBackend, primal_residual, solve_lp


def random_bounded_lp(rng, n=None, m=None):
    n = n or int(rng.integers(2, 9))
    m = m or int(rng.integers(1, min(n, 6) + 1))
    A = rng.normal(size=(m, n))
    lo = rng.uniform(-2, 0, n)
    hi = lo + rng.uniform(0.5, 3, n)
    x0 = rng.uniform(lo, hi)
    b = A @ x0 if rng.random() < 0.85 else A @ x0 + rng.normal(size=m) * 10
    c = rng.normal(size=n)
    return c, A, b, lo, hi


def test_tiny_lp_by_hand():
    # min -x - y  s.t. x + y + s = 4, x <= 3, y <= 3
    p = LPProblem.build([-1, -1, 0], [[1, 1, 1]], [4], [0, 0, 0], [3, 3, np.inf])
    sol = solve_lp(p)
    assert sol.status is LPStatus.OPTIMAL
    assert sol.objective_value == pytest.approx(-4.0, abs=1e-12)
    assert primal_residual(p, sol.x) < 1e-9


def test_infeasible():
    p = LPProblem.build([1, 1], [[1, 1]], [5], [0, 0], [1, 1])
    assert solve_lp(p).status is LPStatus.INFEASIBLE


def test_unbounded():
    p = LPProblem.build([-1, 0], [[1, -1]], [0])
    assert solve_lp(p).status is LPStatus.UNBOUNDED


def test_free_variable():
    # min x  s.t. x - y = -3, y in [0, 1], x free
    p = LPProblem.build([1, 0], [[1, -1]], [-3], [-np.inf, 0], [np.inf, 1])
    sol = solve_lp(p)
    assert sol.objective_value == pytest.approx(-3.0)


def test_fixed_columns_stay_fixed():
    p = LPProblem.build([-1, -1], [[1, 1]], [1], [0, 0.25], [1, 0.25])
    sol = solve_lp(p)
    assert sol.x[1] == 0.25
    assert sol.objective_value == pytest.approx(-1.0)


def test_bad_shapes_rejected():
    with pytest.raises(ValueError):
        LPProblem.build([1, 2], [[1, 2, 3]], [1])
    with pytest.raises(ValueError):
        LPProblem.build([1], [[1]], [1], [2], [1])


def test_triplet_input_matches_dense():
    c = [1.0, 2.0, 0.0]
    dense = LPProblem.build(c, [[1, 1, 1]], [2])
    trip = LPProblem.build(c, ([0, 0, 0], [0, 1, 2], [1.0, 1.0, 1.0]), [2])
    assert (dense.A != trip.A).nnz == 0


def test_degenerate_transportation():
    # 3x3 assignment polytope: highly degenerate, integral optimum
    rng = np.random.default_rng(4)
    C = rng.integers(1, 9, size=(3, 3)).astype(float)
    rows = []
    for i in range(3):
        r = np.zeros(9)
        r[3 * i : 3 * i + 3] = 1
        rows.append(r)
    for j in range(3):
        r = np.zeros(9)
        r[j::3] = 1
        rows.append(r)
    p = LPProblem.build(C.ravel(), np.array(rows[:-1]), np.ones(5), 0, 1)
    best, _ = enumerate_bfs(C.ravel(), np.array(rows[:-1]), np.ones(5), np.zeros(9), np.ones(9))
    assert solve_lp(p).objective_value == pytest.approx(best, abs=1e-9)


@pytest.mark.parametrize("seed", range(25))
def test_matches_enumeration(seed):
    rng = np.random.default_rng(1000 + seed)
    c, A, b, lo, hi = random_bounded_lp(rng)
    best, _ = enumerate_bfs(c, A, b, lo, hi)
    sol = solve_lp(LPProblem.build(c, A, b, lo, hi))
    if best is None:
        assert sol.status is LPStatus.INFEASIBLE
    else:
        assert sol.status is LPStatus.OPTIMAL
        assert sol.objective_value == pytest.approx(best, abs=1e-8)


@given(st.integers(0, 2**31 - 1))
def test_optimum_is_feasible_and_no_worse_than_start(seed):
    rng = np.random.default_rng(seed)
    n, m = 7, 3
    A = rng.normal(size=(m, n))
    lo, hi = np.zeros(n), np.full(n, 2.0)
    x0 = rng.uniform(0, 2, n)
    c = rng.normal(size=n)
    p = LPProblem.build(c, A, A @ x0, lo, hi)
    sol = solve_lp(p)
    assert sol.status is LPStatus.OPTIMAL
    assert primal_residual(p, sol.x) < 1e-8
    assert sol.objective_value <= c @ x0 + 1e-8


@given(st.integers(0, 2**31 - 1))
def test_warm_start_changes_nothing_but_speed(seed):
    rng = np.random.default_rng(seed)
    c, A, b, lo, hi = random_bounded_lp(rng, n=8, m=4)
    p = LPProblem.build(c, A, b, lo, hi)
    cold = solve_lp(p)
    hint = rng.permutation(8 + 4)[:4]
    warm = solve_lp(p, basis=hint)
    assert warm.status is cold.status
    if cold.optimal:
        assert warm.objective_value == pytest.approx(cold.objective_value, abs=1e-8)


def test_reuse_of_own_basis_is_cheap():
    rng = np.random.default_rng(7)
    m, n = 30, 80
    A = sp.random(m, n, density=0.2, random_state=7, format="csc") + sp.hstack([sp.identity(m), sp.csc_matrix((m, n - m))])
    x0 = rng.uniform(0, 1, n)
    p = LPProblem.build(rng.uniform(0, 1, n), A, A @ x0, 0, 1)
    first = solve_lp(p)
    again = solve_lp(p, basis=first.basis)
    assert again.objective_value == pytest.approx(first.objective_value, abs=1e-9)
    assert again.iterations < first.iterations


def test_iteration_limit_reported():
    rng = np.random.default_rng(3)
    c, A, b, lo, hi = random_bounded_lp(rng, n=8, m=5)
    b = A @ rng.uniform(lo, hi)
    sol = SimplexBackend().solve(LPProblem.build(c, A, b, lo, hi), LPOptions(max_iters=1))
    assert sol.status in (LPStatus.ITERATION_LIMIT, LPStatus.OPTIMAL)


def test_highs_backend_agrees():
    pytest.importorskip("scipy.optimize")
    rng = np.random.default_rng(11)
    for _ in range(10):
        c, A, b, lo, hi = random_bounded_lp(rng)
        p = LPProblem.build(c, A, b, lo, hi)
        ours, ref = solve_lp(p), solve_lp(p, backend=ScipyHighsBackend())
        assert ours.status is ref.status
        if ref.optimal:
            assert ours.objective_value == pytest.approx(ref.objective_value, abs=1e-8)
