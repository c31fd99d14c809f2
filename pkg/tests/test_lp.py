"""Simplex solver: brute-force vertex oracle on random instances, weak
duality, infeasibility certificates, and pivoting edge cases."""

import itertools

import numpy as np
import pytest

from feederflow.lp import (
    LpError,
    LpOptions,
    LpProblem,
    farkas_gap,
    problem_from_model,
    solve_lp,
    solve_problem,
)
from feederflow.mathir import EQ, GE, LE, LinExpr, MathModel, QuadExpr

INF = float("inf")


def equality_problem(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> LpProblem:
    m, n = a.shape
    rows, cols = np.nonzero(a)
    return LpProblem(
        var_names=[f"x{j}" for j in range(n)],
        cost=c.astype(float),
        lower=np.zeros(n),
        upper=np.full(n, INF),
        row_names=[f"r{i}" for i in range(m)],
        senses=[EQ] * m,
        rhs=b.astype(float),
        a_rows=rows.astype(int),
        a_cols=cols.astype(int),
        a_vals=a[rows, cols].astype(float),
    )


def vertex_enumeration_optimum(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> float:
    """Minimum of c.x over basic feasible solutions of a x = b, x >= 0.

    Every bounded LP in this form attains its optimum at such a point, so
    scanning all column bases is an exact, if exponential, oracle.
    """
    m, n = a.shape
    bases = list(itertools.combinations(range(n), m))
    mats = np.stack([a[:, list(bs)] for bs in bases])
    best = INF
    dets = np.abs(np.linalg.det(mats))
    solvable = dets > 1e-10
    ns = int(solvable.sum())
    sols = np.full((len(bases), m), np.nan)
    rhs = np.broadcast_to(b.reshape(1, m, 1), (ns, m, 1))
    sols[solvable] = np.linalg.solve(mats[solvable], rhs)[:, :, 0]
    for k, bs in enumerate(bases):
        if not solvable[k]:
            continue
        xb = sols[k]
        if np.min(xb) < -1e-9:
            continue
        best = min(best, float(c[list(bs)] @ xb))
    return best


def random_instance(seed: int):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(8, 12))
    x0 = rng.uniform(0.1, 1.0, size=12)  # feasible by construction
    b = a @ x0
    c = rng.uniform(0.1, 2.0, size=12)  # positive cost keeps the LP bounded
    return a, b, c


@pytest.mark.parametrize("batch", range(10))
def test_matches_vertex_enumeration_on_seeded_instances(batch):
    # 200 instances split into 10 parametrized batches
    for k in range(20):
        seed = 1000 + batch * 20 + k
        a, b, c = random_instance(seed)
        res = solve_problem(equality_problem(a, b, c))
        assert res.status == "optimal", f"seed {seed}: {res.status}"
        want = vertex_enumeration_optimum(a, b, c)
        assert res.objective == pytest.approx(want, abs=1e-7), f"seed {seed}"
        assert res.objective - res.dual_objective <= 1e-6, f"seed {seed}: duality gap"
        x = np.array([res.assignment[f"x{j}"] for j in range(12)])
        assert np.min(x) >= -1e-8
        assert float(np.max(np.abs(a @ x - b))) <= 1e-7


def test_minimal_lower_bound_example():
    m = MathModel()
    m.add_var("x")
    m.add_linear("floor", LinExpr.term("x").add(LinExpr.constant(-1.0)), GE)
    obj = QuadExpr()
    obj.add_lin_term("x", 1.0)
    m.set_objective(obj)
    res = solve_lp(m)
    assert res.status == "optimal"
    assert res.assignment["x"] == pytest.approx(1.0, abs=1e-12)
    assert res.objective == pytest.approx(1.0, abs=1e-12)


def test_tie_broken_by_variable_order():
    m = MathModel()
    m.add_var("x", lb=0.0)
    m.add_var("y", lb=0.0)
    m.add_linear("cap", LinExpr({"x": 1.0, "y": 1.0}, -1.0), LE)
    obj = QuadExpr()
    obj.add_lin_term("x", -1.0)
    obj.add_lin_term("y", -1.0)
    m.set_objective(obj)
    res = solve_lp(m)
    assert res.status == "optimal"
    assert res.objective == pytest.approx(-1.0, abs=1e-12)
    # both vertices are optimal; the first-listed variable enters first
    assert res.assignment["x"] == pytest.approx(1.0, abs=1e-12)
    assert res.assignment["y"] == pytest.approx(0.0, abs=1e-12)


def test_infeasible_interval_yields_farkas_certificate():
    m = MathModel()
    m.add_var("x")
    m.add_linear("hi", LinExpr.term("x").add(LinExpr.constant(-1.0)), LE)
    m.add_linear("lo", LinExpr.term("x").add(LinExpr.constant(-2.0)), GE)
    res = solve_lp(m)
    assert res.status == "infeasible"
    assert res.farkas is not None
    prob = problem_from_model(m)
    y = np.array([res.farkas[name] for name in prob.row_names])
    assert farkas_gap(prob, y) > 0.1
    assert res.farkas_gap > 0.1


def test_unbounded_detected():
    m = MathModel()
    m.add_var("x", lb=0.0)
    obj = QuadExpr()
    obj.add_lin_term("x", -1.0)
    m.set_objective(obj)
    res = solve_lp(m)
    assert res.status == "unbounded"


def test_upper_bounds_participate_in_ratio_test():
    # maximize x + 2y inside a box intersected with x + y <= 1.5
    m = MathModel()
    m.add_var("x", lb=0.0, ub=1.0)
    m.add_var("y", lb=0.0, ub=1.0)
    m.add_linear("cap", LinExpr({"x": 1.0, "y": 1.0}, -1.5), LE)
    obj = QuadExpr()
    obj.add_lin_term("x", -1.0)
    obj.add_lin_term("y", -2.0)
    m.set_objective(obj)
    res = solve_lp(m)
    assert res.status == "optimal"
    assert res.assignment["y"] == pytest.approx(1.0, abs=1e-12)
    assert res.assignment["x"] == pytest.approx(0.5, abs=1e-12)
    assert res.objective == pytest.approx(-2.5, abs=1e-12)


def test_free_variable_equality():
    m = MathModel()
    m.add_var("x")  # free
    m.add_var("y", lb=0.0)
    m.add_linear("link", LinExpr({"x": 1.0, "y": -1.0}, 3.0), EQ)
    obj = QuadExpr()
    obj.add_lin_term("x", 1.0)
    obj.add_lin_term("y", 1.0)
    m.set_objective(obj)
    res = solve_lp(m)
    assert res.status == "optimal"
    assert res.assignment["y"] == pytest.approx(0.0, abs=1e-12)
    assert res.assignment["x"] == pytest.approx(-3.0, abs=1e-12)


def test_beale_cycling_instance_terminates_optimal():
    # classic degenerate instance that cycles under naive Dantzig pricing
    a = np.array(
        [
            [0.25, -8.0, -1.0, 9.0, 1.0, 0.0, 0.0],
            [0.5, -12.0, -0.5, 3.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
        ]
    )
    b = np.array([0.0, 0.0, 1.0])
    c = np.array([-0.75, 150.0, -0.02, 6.0, 0.0, 0.0, 0.0])
    res = solve_problem(equality_problem(a, b, c))
    assert res.status == "optimal"
    assert res.objective == pytest.approx(vertex_enumeration_optimum(a, b, c), abs=1e-9)
    assert res.objective == pytest.approx(-0.77, abs=1e-9)


def test_objective_constant_carried_through():
    m = MathModel()
    m.add_var("x", lb=2.0, ub=5.0)
    obj = QuadExpr()
    obj.add_lin_term("x", 1.0)
    obj.const = 7.0
    m.set_objective(obj)
    res = solve_lp(m)
    assert res.objective == pytest.approx(9.0, abs=1e-12)
    assert res.dual_objective == pytest.approx(9.0, abs=1e-9)


def test_fixed_variables_via_equal_bounds():
    m = MathModel()
    m.add_var("x", lb=1.5, ub=1.5)
    m.add_var("y", lb=0.0)
    m.add_linear("sum", LinExpr({"x": 1.0, "y": 1.0}, -2.0), EQ)
    obj = QuadExpr()
    obj.add_lin_term("y", 1.0)
    m.set_objective(obj)
    res = solve_lp(m)
    assert res.status == "optimal"
    assert res.assignment["x"] == pytest.approx(1.5)
    assert res.assignment["y"] == pytest.approx(0.5)


def test_nonlinear_model_rejected():
    m = MathModel()
    m.add_var("x")
    q = QuadExpr()
    q.add_quad_term("x", "x", 1.0)
    m.add_quadratic("sq", q, LE)
    with pytest.raises(LpError, match="linear"):
        solve_lp(m)
    m2 = MathModel()
    m2.add_var("x", lb=0.0)
    obj = QuadExpr()
    obj.add_quad_term("x", "x", 1.0)
    m2.set_objective(obj)
    with pytest.raises(LpError, match="linear"):
        solve_lp(m2)


def test_repeat_solve_is_deterministic():
    a, b, c = random_instance(77)
    r1 = solve_problem(equality_problem(a, b, c))
    r2 = solve_problem(equality_problem(a, b, c))
    assert r1.assignment == r2.assignment
    assert r1.objective == r2.objective
    assert r1.iterations == r2.iterations


def test_iteration_limit_reported():
    a, b, c = random_instance(5)
    res = solve_problem(equality_problem(a, b, c), LpOptions(max_iterations=1))
    assert res.status == "iteration_limit"


def test_scaling_does_not_change_the_optimum():
    rng = np.random.default_rng(9)
    a, b, c = random_instance(9)
    # badly conditioned rescale of rows and columns
    rs = 10.0 ** rng.integers(-4, 5, size=8).astype(float)
    cs = 10.0 ** rng.integers(-4, 5, size=12).astype(float)
    a2 = a * rs[:, None]
    b2 = b * rs
    res_scaled = solve_problem(equality_problem(a2 * cs[None, :], b2, c * cs))
    res_plain = solve_problem(equality_problem(a, b, c))
    assert res_scaled.status == res_plain.status == "optimal"
    # x2 = x / cs maps between the two problems, objectives coincide
    assert res_scaled.objective == pytest.approx(res_plain.objective, rel=1e-7)
