import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog

from strata_bounds.lp import LPError, StandardLP, feasible, solve, solve_general

STATUS = {0: "optimal", 2: "infeasible", 3: "unbounded"}


@st.composite
def small_lps(draw):
    m = draw(st.integers(1, 6))
    n = draw(st.integers(1, 9))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    M = rng.integers(-3, 4, size=(m, n)).astype(float)
    if m > 1 and draw(st.booleans()):
        M[-1] = M[0] + M[1 % (m - 1)]  # redundant row
    if draw(st.booleans()):
        b = M @ rng.integers(0, 3, size=n).astype(float)
    else:
        b = rng.integers(-3, 4, size=m).astype(float)
    c = rng.integers(-3, 4, size=n).astype(float)
    return c, M, b


def _check_against_highs(c, M, b, sense="min"):
    sgn = 1.0 if sense == "min" else -1.0
    ref = linprog(sgn * c, A_eq=M, b_eq=b, bounds=(0, None), method="highs")
    r = solve(StandardLP(c, M, b, sense))
    assert r.status == STATUS[ref.status]
    if r.optimal:
        assert r.value == pytest.approx(sgn * ref.fun, abs=1e-7 * (1 + abs(ref.fun)))
        assert np.all(r.x >= -1e-12)
        assert np.abs(M @ r.x - b).max() <= 1e-9
        # strong duality and dual feasibility in the original sense
        assert b @ r.dual == pytest.approx(r.value, abs=1e-8 * (1 + abs(r.value)))
        reduced = sgn * (c - M.T @ r.dual)
        assert np.all(reduced >= -1e-8)
    elif r.status == "infeasible":
        y = r.certificate
        assert np.all(y @ M <= 1e-9) and y @ b > 1e-9
    return r


@settings(max_examples=300)
@given(small_lps())
def test_matches_highs_min(lp):
    _check_against_highs(*lp)


@settings(max_examples=150)
@given(small_lps())
def test_matches_highs_max(lp):
    _check_against_highs(*lp, sense="max")


@settings(max_examples=150)
@given(small_lps())
def test_warm_start_reproduces_value(lp):
    c, M, b = lp
    r = solve(StandardLP(c, M, b))
    if r.optimal:
        r2 = solve(StandardLP(c, M, b), basis=r.basis)
        assert r2.value == pytest.approx(r.value, abs=1e-9)
        assert r2.iterations == 0


def test_warm_start_after_rhs_change():
    rng = np.random.default_rng(1)
    M = np.hstack([rng.uniform(0, 1, (4, 8)), np.eye(4)])
    c = rng.uniform(-1, 1, 12)
    r = solve(StandardLP(c, M, np.ones(4)))
    b2 = np.ones(4) * 1.3
    warm = solve(StandardLP(c, M, b2), basis=r.basis)
    cold = solve(StandardLP(c, M, b2))
    assert warm.value == pytest.approx(cold.value, abs=1e-10)


def test_degenerate_cycling_example_terminates():
    # Beale's example, which cycles under the largest-coefficient rule
    c = np.array([-0.75, 150, -0.02, 6, 0, 0, 0])
    M = np.array([[0.25, -60, -0.04, 9, 1, 0, 0],
                  [0.5, -90, -0.02, 3, 0, 1, 0],
                  [0, 0, 1, 0, 0, 0, 1]], dtype=float)
    r = solve(StandardLP(c, M, np.array([0, 0, 1.0])))
    assert r.optimal
    assert r.value == pytest.approx(-0.05)


def test_unbounded_and_empty():
    r = solve(StandardLP([-1.0, 0.0], [[1.0, -1.0]], [0.0]))
    assert r.status == "unbounded" and r.value == -np.inf
    r = feasible([[1.0, 1.0]], [-1.0])
    assert r.status == "infeasible"
    assert r.certificate @ np.array([-1.0]) > 0


def test_solve_general_inequality_form():
    c = np.array([1.0, -2.0])
    A_ub = np.array([[1.0, 1.0], [-1.0, 2.0]])
    b_ub = np.array([4.0, 2.0])
    res, x = solve_general(c, A_ub, b_ub, free=[True, False])
    ref = linprog(c, A_ub=A_ub, b_ub=b_ub, bounds=[(None, None), (0, None)], method="highs")
    assert res.value == pytest.approx(ref.fun)
    assert np.allclose(x, ref.x)


def test_rejects_bad_input():
    with pytest.raises(LPError):
        StandardLP([1.0], [[1.0, 2.0]], [1.0])
    with pytest.raises(LPError):
        StandardLP([np.nan], [[1.0]], [1.0])
    with pytest.raises(LPError):
        StandardLP([1.0], [[1.0]], [1.0], sense="up")


def test_deterministic():
    rng = np.random.default_rng(4)
    M = rng.integers(-2, 3, (5, 10)).astype(float)
    b = M @ np.ones(10)
    c = rng.integers(-2, 3, 10).astype(float)
    a, b2 = solve(StandardLP(c, M, b)), solve(StandardLP(c, M, b))
    assert a.basis == b2.basis and np.array_equal(a.x, b2.x)


def test_all_rows_redundant():
    r = solve(StandardLP([1.0, 2.0], [[0.0, 0.0]], [0.0]))
    assert r.optimal and r.value == 0.0
    r = solve(StandardLP([-3.0, -2.0], [[0.0, 0.0]], [0.0]))
    assert r.status == "unbounded"
    r = solve(StandardLP([1.0, 2.0], [[0.0, 0.0]], [1.0]))
    assert r.status == "infeasible"
