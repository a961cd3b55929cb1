import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_open_set
from osegments.counterexample import (
    RefutationCertificate,
    dense_interval,
    f_pq,
    fpq_family,
    index_interval,
    refute_half_set,
    validate_certificate,
)
from osegments.density import integrate_over, normalize
from osegments.errors import CapacityError, DomainError, PreconditionError, RangeError
from osegments.intervals import IntervalSet
from osegments.segment import common_segment

C = IntervalSet.closed
O = IntervalSet.open
UNIT = C(0, 1)


def test_index_intervals():
    assert index_interval(1, 2) == (0.25, 0.75)
    assert index_interval(2, 5) == (0.3, 0.5)
    for bad in [(0, 2), (2, 2), (3, 2)]:
        with pytest.raises(RangeError):
            index_interval(*bad)
    with pytest.raises(RangeError):
        index_interval(1.0, 2)


def test_fpq_has_unit_mass():
    for p, q in fpq_family(9):
        f = f_pq(p, q)
        assert integrate_over(f, UNIT) == pytest.approx(1.0, abs=1e-14)
        assert integrate_over(f, C(*index_interval(p, q))) == pytest.approx(1.0, abs=1e-14)


def test_family_listing():
    assert fpq_family(3) == [(1, 2), (1, 3), (2, 3)]
    assert len(fpq_family(10)) == 45


def test_middle_interval_chain():
    cert = refute_half_set(O(0.1, 0.9), q_max=16)
    assert cert.kind == "chain" and cert.q == 8
    assert cert.bound_lhs < cert.bound_rhs
    assert validate_certificate(cert, O(0.1, 0.9))


def test_left_half_with_small_cap_scans():
    E = O(0, 0.5)
    cert = refute_half_set(E, q_max=8)
    assert cert.q <= 8 and cert.kind == "scan"
    assert validate_certificate(cert, E)
    # E ∩ I(1, 3) = [1/6, 1/2] has measure 1/3, not 1/6
    v = {(d["p"], d["q"]): d["measured"] for d in cert.violations}
    assert v[(1, 3)] == pytest.approx(1 / 3)


def test_left_half_with_room_uses_the_bound_chain():
    E = O(0, 0.5)
    cert = refute_half_set(E, q_max=64)
    assert cert.kind == "chain" and cert.q == 13
    assert validate_certificate(cert, E)


def test_cap_too_small():
    with pytest.raises(CapacityError) as info:
        refute_half_set(O(0.25, 0.5), q_max=2)
    assert info.value.required > 2


def test_null_set_is_trivial():
    cert = refute_half_set(IntervalSet.point(0.3))
    assert cert.trivial and cert.q == 2
    assert validate_certificate(cert, IntervalSet.point(0.3))
    cert = refute_half_set(IntervalSet.empty())
    assert cert.trivial


def test_outside_unit_interval():
    with pytest.raises(DomainError):
        refute_half_set(O(0.5, 1.5))


def test_periodic_cells():
    E = O(0.1, 0.2) | O(1.2, 1.9)
    cert = refute_half_set(E, q_max=64, periodic=True)
    assert cert.meta["cell"] == 0
    assert validate_certificate(cert, E)
    E = O(1.2, 1.9)
    cert = refute_half_set(E, q_max=64, periodic=True)
    assert cert.meta["cell"] == 1 and cert.to_json()["cell"] == 1
    assert validate_certificate(cert, E)


def test_json_fields():
    cert = refute_half_set(O(0.1, 0.9), q_max=16)
    data = json.loads(json.dumps(cert.to_json()))
    assert set(data) == {"interval", "q", "violations", "bound", "kind"}
    assert set(data["bound"]) == {"lhs", "rhs"}
    assert set(data["violations"][0]) == {"p", "q", "measured", "expected"}


def test_tampered_certificates_fail_validation():
    E = O(0.1, 0.9)
    cert = refute_half_set(E, q_max=16)
    for change in (
        {"q": 9},
        {"interval": (0.0, 1.0)},
        {"bound_lhs": cert.bound_lhs + 0.1},
        {"violations": []},
        {"violations": [dict(cert.violations[0], measured=0.5)]},
    ):
        bad = RefutationCertificate(**{**cert.__dict__, **change})
        assert not validate_certificate(bad, E)


def test_dense_interval_modes():
    E = O(0.1, 0.3) | O(0.31, 0.5) | O(0.8, 0.85)
    a, b = dense_interval(E, 0.8)
    assert (a, b) == (0.1, 0.5)
    a, b = dense_interval(E, 0.8, mode="fuzzed", seed=3)
    assert (E & O(a, b)).measure() >= 0.8 * (b - a)
    with pytest.raises(PreconditionError):
        dense_interval(IntervalSet.empty(), 0.8)
    with pytest.raises(RangeError):
        dense_interval(E, 1.0)


@settings(max_examples=60)
@given(st.integers(0, 2**31 - 1), st.sampled_from(["exact", "fuzzed"]))
def test_random_sets_are_refuted(seed, mode):
    E = random_open_set(np.random.default_rng(seed))
    cert = refute_half_set(E, q_max=1024, mode=mode, seed=seed)
    assert validate_certificate(cert, E)


@pytest.mark.parametrize("members", [[(1, 2)], [(1, 3), (2, 3)], [(1, 4), (2, 5), (3, 8)]])
def test_half_sets_of_finite_subfamilies_are_refuted(members):
    # a finite subfamily does have common half sets; the full family rules each one out
    S = normalize([f_pq(p, q) for p, q in members])
    seg = common_segment(S, UNIT, 4)
    E = seg.table[8]
    for p, q in members:
        assert (E & C(*index_interval(p, q))).measure() == pytest.approx(1 / (2 * q), abs=1e-8)
    cert = refute_half_set(E, q_max=1 << 16)
    assert validate_certificate(cert, E)
    assert not cert.trivial
    assert all((v["p"], v["q"]) not in members for v in cert.violations)


def test_fpq_examples():
    f = f_pq(1, 4)
    assert np.allclose(f.breaks, [0, 0.125, 0.375, 1.0])
    assert f(np.array([0.25]))[0] == 4.0 and f(np.array([0.5]))[0] == 0.0
    assert f_pq(1, 2)(np.array([0.5]))[0] == 2.0
    with pytest.raises(RangeError):
        f_pq(3, 2)


def test_dense_interval_examples():
    assert dense_interval(O(0.2, 0.4), 0.9) == (0.2, 0.4)
    assert dense_interval(O(0, 0.1) | O(0.5, 0.6), 0.99) == (0, 0.1)


@settings(max_examples=40)
@given(st.integers(0, 2**31 - 1))
def test_fuzzed_dense_interval_property(seed):
    rng = np.random.default_rng(seed)
    E = random_open_set(rng)
    E = IntervalSet.from_pairs([(0.3 * a / E.measure(), 0.3 * b / E.measure()) for a, b in zip(E.lo, E.hi)], open=True)
    a, b = dense_interval(E, 0.75, mode="fuzzed", seed=seed)
    assert (E & O(a, b)).measure() >= 0.75 * (b - a) - 1e-12
