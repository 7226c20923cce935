import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import linear_sum_assignment

from pitchtrack.matching import FORBIDDEN, CostMatrix, gated_costs, solve_assignment

from oracles import brute_assignment


def test_spec_examples():
    a = solve_assignment([[1, 2], [2, 4]])
    assert a.pairs == ((0, 1), (1, 0)) and a.total == 4
    b = solve_assignment([[0, 9], [9, 0]])
    assert b.pairs == ((0, 0), (1, 1)) and b.total == 0
    c = solve_assignment([[5, 2, 7]])
    assert c.pairs == ((0, 1),)


def test_empty():
    assert solve_assignment(CostMatrix(np.zeros((0, 3)))).pairs == ()
    assert solve_assignment(CostMatrix(np.zeros((2, 0)))).pairs == ()
    assert solve_assignment([]).pairs == ()


def test_forbidden_prefers_cardinality():
    # the cheap pair (0,0) would block row 1 entirely
    a = solve_assignment([[0, 100], [1, FORBIDDEN]])
    assert a.pairs == ((0, 1), (1, 0)) and a.total == 101


def test_all_forbidden():
    cm = CostMatrix.from_rows([[FORBIDDEN, FORBIDDEN], [FORBIDDEN, FORBIDDEN]])
    assert solve_assignment(cm).pairs == ()


def test_tie_break_lexicographic():
    assert solve_assignment(np.ones((3, 3))).pairs == ((0, 0), (1, 1), (2, 2))
    assert solve_assignment([[1, 1, 1]]).pairs == ((0, 0),)
    assert solve_assignment([[1], [1]]).pairs == ((0, 0),)


def test_cost_matrix_rejects_nonfinite_allowed():
    with pytest.raises(ValueError):
        CostMatrix([[np.inf]])
    assert CostMatrix.from_rows([[1.0, FORBIDDEN]])[0, 1] is FORBIDDEN


def test_gated_costs_examples():
    raw = CostMatrix([[1.0, 2.0], [3.0, 4.0]])
    same = gated_costs(raw, [np.ones((2, 2), bool)])
    assert same.tolist() == raw.tolist()
    d_spatial = np.array([[10.0, 90.0], [90.0, 10.0]])
    out = gated_costs(raw, [d_spatial < 80.0, lambda i, j: not (i == 0 and j == 0)])
    assert out[0, 1] is FORBIDDEN and out[0, 0] is FORBIDDEN and out[1, 1] == 4.0
    assert solve_assignment(gated_costs(raw, [np.zeros((2, 2), bool)])).pairs == ()


matrices = st.integers(1, 7).flatmap(
    lambda n: st.integers(1, 7).flatmap(
        lambda m: st.lists(
            st.lists(st.one_of(st.integers(0, 9), st.just(None)), min_size=m, max_size=m), min_size=n, max_size=n
        )
    )
)


def _split(rows):
    cost = [[0 if v is None else v for v in r] for r in rows]
    allowed = [[v is not None for v in r] for r in rows]
    return cost, allowed


@given(matrices)
def test_matches_brute_force_with_tie_break(rows):
    cost, allowed = _split(rows)
    got = solve_assignment(CostMatrix(cost, allowed))
    pairs, total = brute_assignment(cost, allowed)
    assert list(got.pairs) == pairs
    assert got.total == total


@given(matrices, st.integers(0, 6), st.integers(-5, 5))
def test_row_shift_invariance(rows, r, shift):
    cost, allowed = _split(rows)
    r %= len(cost)
    if not all(allowed[r]) or len(cost) > len(cost[0]):
        return  # only then is the row covered by every maximum matching
    base = solve_assignment(CostMatrix(cost, allowed))
    shifted = [row[:] for row in cost]
    shifted[r] = [v + shift + 10 for v in shifted[r]]
    moved = solve_assignment(CostMatrix(shifted, allowed))
    assert moved.pairs == base.pairs


@given(matrices)
def test_maximal_cardinality(rows):
    cost, allowed = _split(rows)
    got = solve_assignment(CostMatrix(cost, allowed))
    used_r = {r for r, _ in got.pairs}
    used_c = {c for _, c in got.pairs}
    for i, row in enumerate(allowed):
        for j, ok in enumerate(row):
            if ok:
                assert i in used_r or j in used_c
    assert all(allowed[r][c] for r, c in got.pairs)


def test_agrees_with_scipy_on_dense_float_matrices():
    rng = np.random.default_rng(7)
    for _ in range(200):
        n, m = rng.integers(1, 12, size=2)
        cost = rng.random((n, m)) * 100
        rows, cols = linear_sum_assignment(cost)
        got = solve_assignment(CostMatrix(cost))
        assert got.total == pytest.approx(cost[rows, cols].sum(), rel=1e-12)
