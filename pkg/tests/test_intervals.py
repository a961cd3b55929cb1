import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import GRID, cells, grid_sets
from osegments.errors import RangeError
from osegments.intervals import IntervalSet, boolean, interior, measure, prefix, union_all

C = IntervalSet.closed
O = IntervalSet.open


def test_union_with_empty():
    assert C(0, 1) | IntervalSet.empty() == C(0, 1)


def test_subtract_middle():
    out = C(0, 1) - O(0.25, 0.75)
    assert out == IntervalSet.from_pairs([(0, 0.25), (0.75, 1)])


def test_intersect_overlap():
    assert C(0, 0.5) & C(0.25, 1) == C(0.25, 0.5)


def test_subtract_keeps_run_ending_at_last_breakpoint():
    out = IntervalSet([0.1], [0.9], [True], [False]) - IntervalSet([0.1], [0.5], [True], [False])
    assert out.measure() == pytest.approx(0.4)
    assert out.contains_point(0.9) and not out.contains_point(0.5)


@pytest.mark.parametrize(
    "E, expected",
    [(IntervalSet.empty(), 0.0), (IntervalSet.from_pairs([(0, 0.3), (0.5, 0.9)]), 0.7), (IntervalSet.point(0.2), 0.0)],
)
def test_measure_examples(E, expected):
    assert measure(E) == pytest.approx(expected, abs=1e-15)


def test_prefix_examples():
    two = IntervalSet.from_pairs([(0, 0.25), (0.5, 0.75)])
    assert prefix(C(0, 1), 0.25) == C(0, 0.25)
    assert prefix(two, 0.5) == two
    assert prefix(two, 0.375) == IntervalSet.from_pairs([(0, 0.25), (0.5, 0.625)])


def test_prefix_tie_takes_completed_part_only():
    two = IntervalSet.from_pairs([(0, 0.25), (0.5, 0.75)])
    assert prefix(two, 0.25) == C(0, 0.25)


def test_prefix_out_of_range():
    with pytest.raises(RangeError):
        prefix(C(0, 1), 1.5)
    with pytest.raises(RangeError):
        prefix(C(0, 1), -0.1)


def test_interior_examples():
    assert interior(C(0, 1)) == O(0, 1)
    assert interior(IntervalSet.empty()) == IntervalSet.empty()
    assert interior(C(0, 0.5) | IntervalSet.point(0.7)) == O(0, 0.5)


def test_touching_closed_parts_merge():
    assert (C(0, 0.5) | C(0.5, 1)) == C(0, 1)
    assert len(IntervalSet.from_pairs([(0, 0.5), (0.5 + 1e-15, 1)])) == 1


def test_text_and_json_forms():
    E = IntervalSet([0.0, 0.5], [0.25, 1.0], [False, True], [True, True])
    assert str(E) == "[0.0,0.25) ∪ (0.5,1.0)"
    assert IntervalSet.from_json(json.loads(json.dumps(E.to_json()))) == E
    assert E.to_json()[0] == {"lo": 0.0, "hi": 0.25, "lo_open": False, "hi_open": True}


def test_union_all():
    sets = [C(k / 10, k / 10 + 0.05) for k in range(10)]
    assert union_all(sets).measure() == pytest.approx(0.5)


# -- properties against the grid-cell oracle ------------------------------------

OPS = {
    "union": np.logical_or,
    "intersect": np.logical_and,
    "subtract": lambda a, b: a & ~b,
    "symdiff": np.logical_xor,
}


@given(grid_sets(), grid_sets(), st.sampled_from(sorted(OPS)))
def test_boolean_matches_cell_oracle(A, B, op):
    out = boolean(A, B, op)
    expect = OPS[op](cells(A), cells(B))
    assert np.array_equal(cells(out), expect)
    assert out.measure() == pytest.approx(expect.sum() / GRID, abs=1e-12)


@given(grid_sets(), grid_sets())
def test_inclusion_exclusion(A, B):
    lhs = (A | B).measure() + (A & B).measure()
    assert lhs == pytest.approx(A.measure() + B.measure(), abs=1e-12)


@given(grid_sets(), grid_sets())
def test_three_way_partition_of_union(A, B):
    parts = (A - B).measure() + (A & B).measure() + (B - A).measure()
    assert parts == pytest.approx((A | B).measure(), abs=1e-12)


@given(grid_sets(), grid_sets())
def test_symdiff_is_union_minus_intersection(A, B):
    assert np.array_equal(cells(A ^ B), cells((A | B) - (A & B)))


@given(grid_sets(), st.floats(0, 1), st.floats(0, 1))
def test_prefix_is_monotone_and_exact(A, x, y):
    m = A.measure()
    lo, hi = sorted((x * m, y * m))
    P, Q = prefix(A, lo), prefix(A, hi)
    assert P.issubset(A) and Q.issubset(A)
    assert P.issubset(Q)
    assert P.measure() == pytest.approx(lo, abs=1e-12)
    assert Q.measure() == pytest.approx(hi, abs=1e-12)


@given(grid_sets())
def test_interior_is_open_and_measure_preserving(A):
    I = interior(A)
    assert I.is_open or not len(I)
    assert I.measure() == pytest.approx(A.measure(), abs=1e-15)


@given(grid_sets())
def test_normal_form_invariants(A):
    assert np.all(A.hi >= A.lo)
    assert np.all(A.lo[1:] > A.hi[:-1])
