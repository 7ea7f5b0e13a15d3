"""Exact rational simplex: optimality, infeasibility certificates,
unbounded rays, and agreement with a brute-force vertex oracle."""

import random
from fractions import Fraction

from hypothesis import given, settings, strategies as st

from cisynth.lp import (LinearProgram, solve_lp, verify_farkas,
                        check_feasible_point,
                        OPTIMAL, INFEASIBLE, UNBOUNDED)
from tests.oracle_lp import brute_force_lp, feasible_point


def _lp(nvars, rows, rels, rhs, objective, sense="min"):
    names = [f"x{i}" for i in range(nvars)]
    lp = LinearProgram(list(names))
    for row, rel, b in zip(rows, rels, rhs):
        lp.add({names[i]: row[i] for i in range(nvars)}, rel, b)
    lp.set_objective({names[i]: objective[i] for i in range(nvars)}, sense)
    return lp


def test_optimal_2d_known_value():
    # min x + y s.t. x >= 1, y >= 2, x + y <= 10 -> value 3 at (1, 2)
    lp = _lp(2, [[1, 0], [0, 1], [1, 1]], [">=", ">=", "<="],
             [1, 2, 10], [1, 1])
    out = solve_lp(lp)
    assert out.status == OPTIMAL
    assert out.objective_value == 3
    assert out.assignment == {"x0": Fraction(1), "x1": Fraction(2)}


def test_optimal_fractional_vertex():
    # max 3x + 2y s.t. 2x + y <= 3, x + 3y <= 4, x,y >= 0
    # vertex at intersection: x = 1, y = 1, value 5
    lp = _lp(2, [[2, 1], [1, 3], [1, 0], [0, 1]],
             ["<=", "<=", ">=", ">="], [3, 4, 0, 0], [3, 2], "max")
    out = solve_lp(lp)
    assert out.status == OPTIMAL and out.objective_value == 5
    assert check_feasible_point(lp, out.assignment)


def test_equality_constraints():
    lp = _lp(2, [[1, 1], [1, -1]], ["=", "="], [4, 2], [1, 0])
    out = solve_lp(lp)
    assert out.status == OPTIMAL
    assert out.assignment == {"x0": Fraction(3), "x1": Fraction(1)}


def test_infeasible_farkas():
    lp = _lp(1, [[1], [1]], [">=", "<="], [2, 1], [1])
    out = solve_lp(lp)
    assert out.status == INFEASIBLE
    assert out.farkas is not None
    assert verify_farkas(lp, out.farkas)


def test_unbounded_ray():
    # min -x with only x >= 0: ray along +x
    lp = _lp(1, [[1]], [">="], [0], [-1])
    out = solve_lp(lp)
    assert out.status == UNBOUNDED
    assert out.ray is not None
    d = out.ray["x0"]
    assert d > 0  # cost -x decreases along the ray and stays feasible


def test_free_variables_negative_solution():
    lp = _lp(1, [[1]], ["<="], [-5], [1])
    out = solve_lp(lp)
    assert out.status == OPTIMAL or out.status == UNBOUNDED
    # min x with x <= -5 is unbounded below
    assert out.status == UNBOUNDED


def test_verify_farkas_rejects_wrong_multipliers():
    lp = _lp(1, [[1], [1]], [">=", "<="], [2, 1], [1])
    assert not verify_farkas(lp, [Fraction(0), Fraction(0)])
    assert not verify_farkas(lp, [Fraction(-1), Fraction(1)])


def _random_instance(rng, nvars=3, extra_rows=4):
    """Box-bounded random instance; returns (rows, rels, rhs, obj)."""
    rows, rels, rhs = [], [], []
    for i in range(nvars):
        e = [Fraction(0)] * nvars
        e[i] = Fraction(1)
        rows.append(list(e)); rels.append(">="); rhs.append(Fraction(-10))
        rows.append(list(e)); rels.append("<="); rhs.append(Fraction(10))
    for _ in range(extra_rows):
        row = [Fraction(rng.randint(-5, 5)) for _ in range(nvars)]
        if all(c == 0 for c in row):
            row[rng.randrange(nvars)] = Fraction(1)
        rows.append(row)
        rels.append(rng.choice(["<=", ">="]))
        rhs.append(Fraction(rng.randint(-20, 20), rng.randint(1, 4)))
    obj = [Fraction(rng.randint(-5, 5)) for _ in range(nvars)]
    return rows, rels, rhs, obj


def test_oracle_agreement_random():
    rng = random.Random(12345)
    seen_optimal = seen_infeasible = 0
    for _ in range(60):
        rows, rels, rhs, obj = _random_instance(rng)
        lp = _lp(3, rows, rels, rhs, obj)
        out = solve_lp(lp)
        status, value = brute_force_lp(3, rows, rels, rhs, obj)
        if status == "optimal":
            seen_optimal += 1
            assert out.status == OPTIMAL
            assert out.objective_value == value
            assert check_feasible_point(lp, out.assignment)
        else:
            seen_infeasible += 1
            assert out.status == INFEASIBLE
            assert verify_farkas(lp, out.farkas)
    assert seen_optimal >= 10 and seen_infeasible >= 5


@given(st.integers(0, 10 ** 6))
@settings(max_examples=30, deadline=None)
def test_optimal_solutions_are_feasible_and_tight(seed):
    rng = random.Random(seed)
    rows, rels, rhs, obj = _random_instance(rng, extra_rows=3)
    lp = _lp(3, rows, rels, rhs, obj)
    out = solve_lp(lp)
    if out.status == OPTIMAL:
        assert check_feasible_point(lp, out.assignment)
        x = [out.assignment[f"x{i}"] for i in range(3)]
        assert feasible_point(x, rows, rels, rhs)
    elif out.status == INFEASIBLE:
        assert verify_farkas(lp, out.farkas)


def test_determinism():
    rng = random.Random(7)
    rows, rels, rhs, obj = _random_instance(rng)
    outs = [solve_lp(_lp(3, rows, rels, rhs, obj)) for _ in range(2)]
    assert outs[0] == outs[1]
