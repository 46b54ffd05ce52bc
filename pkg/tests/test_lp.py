import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import linprog

from indnet.lp import (AT_LOWER, BASIC, Basis, LpProblem, LpSession, dual_objective, farkas_gap,
                       presolve, solve_lp)


def random_lp(rng, m_max=30, n_max=30, infeasible_bias=0.0):
    m, n = int(rng.integers(1, m_max + 1)), int(rng.integers(1, n_max + 1))
    A = sp.random(m, n, density=float(rng.uniform(0.2, 0.7)), random_state=int(rng.integers(2**31)),
                  format="csr")
    A.data = rng.integers(-4, 6, A.data.size).astype(float)
    senses = rng.choice(list("LGE"), m, p=[0.6, 0.3, 0.1])
    rhs = rng.integers(-3, 12, m).astype(float) - infeasible_bias
    c = rng.integers(-6, 7, n).astype(float)
    lb = np.zeros(n)
    ub = rng.integers(1, 6, n).astype(float)
    return LpProblem(A, senses, rhs, c, lb, ub, maximize=bool(rng.integers(2)))


def highs(p: LpProblem):
    A = p.A.toarray()
    le = np.vstack([A[p.senses == "L"], -A[p.senses == "G"]])
    b_le = np.concatenate([p.rhs[p.senses == "L"], -p.rhs[p.senses == "G"]])
    eq = p.senses == "E"
    c = -p.c if p.maximize else p.c
    res = linprog(c, A_ub=le if le.size else None, b_ub=b_le if le.size else None,
                  A_eq=A[eq] if eq.any() else None, b_eq=p.rhs[eq] if eq.any() else None,
                  bounds=list(zip(p.lb, p.ub)), method="highs")
    return res


def test_single_bound_example():
    p = LpProblem.from_dense([[1.0]], "L", [1.0], [1.0], [0.0], [2.0], maximize=True)
    out = solve_lp(p)
    assert out.status == "optimal" and out.x[0] == pytest.approx(1.0)


def test_two_dimensional_example():
    # vertices (0,0), (0.4,0), (0.4,0.6), (0,1): x+y peaks at 1
    p = LpProblem.from_dense([[1, 1], [1, 0]], "LL", [1, 0.4], [1, 1], maximize=True)
    out = solve_lp(p)
    assert out.objective == pytest.approx(1.0)


def test_contradictory_bounds_farkas():
    p = LpProblem.from_dense([[1.0], [1.0]], "GL", [1.0, 0.0], [0.0], [0.0], [np.inf])
    out = solve_lp(p)
    assert out.status == "infeasible"
    assert farkas_gap(p, out.farkas) > 0
    assert out.farkas[0] == pytest.approx(out.farkas[1])


def test_unbounded():
    p = LpProblem.from_dense([[1.0, -1.0]], "L", [1.0], [1.0, 0.0], [0, 0], [np.inf, np.inf],
                             maximize=True)
    assert solve_lp(p).status == "unbounded"


def test_iteration_limit_is_reported_not_wrong():
    rng = np.random.default_rng(4)
    p = random_lp(rng, 25, 25)
    out = solve_lp(p, max_iter=1)
    assert out.status in ("iteration_limit", "optimal", "infeasible")


def test_agrees_with_highs_and_duality():
    rng = np.random.default_rng(11)
    for _ in range(150):
        p = random_lp(rng)
        out = solve_lp(p)
        ref = highs(p)
        if ref.status == 2:
            assert out.status == "infeasible"
            assert farkas_gap(p, out.farkas) > 0
            continue
        assert ref.status == 0
        assert out.status == "optimal"
        assert out.objective == pytest.approx(p.objective(ref.x), abs=1e-6 * (1 + abs(out.objective)))
        assert p.max_violation(out.x) <= 1e-7 * 10
        dual = dual_objective(p, out.duals, out.reduced_costs)
        assert dual == pytest.approx(out.objective, abs=1e-6 * (1 + abs(out.objective)))


def test_warm_start_takes_no_pivots():
    rng = np.random.default_rng(5)
    p = random_lp(rng, 20, 20)
    while solve_lp(p).status != "optimal":
        p = random_lp(rng, 20, 20)
    first = solve_lp(p)
    again = solve_lp(p, hint=first.basis)
    assert again.objective == pytest.approx(first.objective)
    assert again.iterations <= 1


def test_bad_hint_falls_back():
    p = LpProblem.from_dense([[1, 1], [1, -1]], "LL", [4, 1], [1, 2], maximize=True)
    junk = Basis(np.array([BASIC, BASIC], np.int8), np.array([BASIC, BASIC], np.int8))
    assert solve_lp(p, hint=junk).objective == pytest.approx(solve_lp(p).objective)


def test_presolve_drops_fixed_and_redundant():
    p = LpProblem.from_dense([[1, 1, 0], [1, 0, 0], [0, 0, 1]], "LLL", [5, 10, 1], [1, 1, 1],
                             lb=[0, 2, 0], ub=[1, 2, 1], maximize=True)
    red = presolve(p)
    assert 1 not in red.cols  # fixed column
    assert red.problem.m == 0  # every row implied by the bounds
    assert solve_lp(p).objective == pytest.approx(4.0)


def test_presolve_infeasible_row_has_ray():
    p = LpProblem.from_dense([[1, 1]], "G", [3], [1, 1], ub=[1, 1])
    out = solve_lp(p)
    assert out.status == "infeasible" and farkas_gap(p, out.farkas) > 0


def test_session_matches_fresh_solves_under_bounds_and_rows():
    rng = np.random.default_rng(2)
    for _ in range(40):
        p = random_lp(rng, 15, 15)
        sess = LpSession(p)
        lb, ub = p.lb.copy(), p.ub.copy()
        sess.solve(lb, ub)
        for step in range(5):
            j = int(rng.integers(p.n))
            ub = ub.copy()
            ub[j] = np.floor(ub[j] / 2)
            if step % 2:
                rows = sp.csr_matrix(rng.integers(-2, 3, (1, p.n)).astype(float))
                sess.add_rows(rows, np.array(["L"]), np.array([float(rng.integers(0, 6))]))
            out = sess.solve(lb, ub, sess.last_basis)
            q = sess.problem
            ref = solve_lp(LpProblem(q.A, q.senses, q.rhs, q.c, lb, ub, q.maximize))
            assert out.status == ref.status
            if ref.optimal:
                assert out.objective == pytest.approx(ref.objective, abs=1e-6)


@given(st.integers(0, 2**32 - 1))
def test_property_optimal_is_feasible_and_dual_tight(seed):
    rng = np.random.default_rng(seed)
    p = random_lp(rng, 12, 12)
    out = solve_lp(p)
    if out.status == "optimal":
        assert p.max_violation(out.x) <= 1e-6
        assert dual_objective(p, out.duals, out.reduced_costs) == pytest.approx(
            out.objective, abs=1e-6 * (1 + abs(out.objective)))
        # complementary slackness on rows
        act = p.A @ out.x
        slack = np.abs(act - p.rhs)
        assert np.all(np.minimum(slack, np.abs(out.duals)) <= 1e-6 * (1 + np.abs(p.rhs)))
    elif out.status == "infeasible":
        assert farkas_gap(p, out.farkas) > 0


@given(st.integers(0, 2**32 - 1))
def test_property_deterministic(seed):
    rng = np.random.default_rng(seed)
    p = random_lp(rng, 10, 10)
    a, b = solve_lp(p), solve_lp(p)
    assert a.status == b.status and a.iterations == b.iterations
    if a.optimal:
        assert np.array_equal(a.x, b.x)


@given(st.integers(0, 2**32 - 1))
def test_property_infeasible_exits_certified(seed):
    rng = np.random.default_rng(seed)
    p = random_lp(rng, 10, 10, infeasible_bias=-6.0)
    out = solve_lp(p)
    if out.status == "infeasible":
        assert farkas_gap(p, out.farkas) > 0
        assert np.all(out.farkas[p.senses != "E"] >= -1e-12)


def test_basis_statuses_are_valid():
    p = LpProblem.from_dense([[1, 2], [3, 1]], "LL", [4, 6], [1, 1], maximize=True)
    out = solve_lp(p)
    assert out.basis.basic_count() == p.m
    assert set(np.unique(out.basis.col_status)) <= {BASIC, AT_LOWER, 2, 3}
