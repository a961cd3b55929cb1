import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from conftest import grid_sets
from osegments.counterexample import f_pq
from osegments.density import (
    Density,
    DensityFamily,
    difference,
    integrate_over,
    normalize,
    riemann_oracle,
    ui_delta,
)
from osegments.errors import DomainError, ParseError, RangeError
from osegments.intervals import IntervalSet

C = IntervalSet.closed
UNIT = C(0, 1)


@st.composite
def piecewise_densities(draw, max_pieces: int = 6):
    n = draw(st.integers(1, max_pieces))
    inner = draw(st.lists(st.integers(1, 63), min_size=n - 1, max_size=n - 1, unique=True))
    breaks = [0.0] + sorted(k / 64 for k in inner) + [1.0]
    coeff = st.floats(-3, 3, allow_nan=False)
    coeffs = [draw(st.lists(coeff, min_size=1, max_size=4)) for _ in range(n)]
    coeffs = [c + [0.0] * (4 - len(c)) for c in coeffs]
    return Density(np.array(breaks), np.array(coeffs))


def quad_oracle(f: Density, E: IntervalSet) -> float:
    pts = list(f.breaks)
    return sum(quad(f, a, b, points=[p for p in pts if a < p < b], limit=200)[0] for a, b in zip(E.lo, E.hi))


def test_integrate_examples():
    assert integrate_over(Density.constant(), C(0.2, 0.5)) == pytest.approx(0.3, abs=1e-15)
    assert integrate_over(Density.polynomial([0, 2]), C(0, 0.5)) == pytest.approx(0.25, abs=1e-15)
    assert integrate_over(f_pq(1, 2), UNIT) == pytest.approx(1.0, abs=1e-15)


def test_two_t_agrees_with_midpoint_oracle():
    f = Density.polynomial([0, 2])
    assert riemann_oracle(f, C(0, 0.5), 10_000) == pytest.approx(0.25, abs=1e-8)


@pytest.mark.parametrize(
    "f, n, tol",
    [(Density.constant(), 10, 1e-15), (Density.polynomial([0, 2]), 10**6, 1e-6), (f_pq(1, 2), 10**6, 1e-5)],
)
def test_riemann_oracle_examples(f, n, tol):
    assert riemann_oracle(f, UNIT, n) == pytest.approx(1.0, abs=tol)


def test_integrate_outside_domain():
    with pytest.raises(DomainError):
        integrate_over(Density.constant(), C(0.5, 1.5))


def test_tail_closed_form():
    f = Density.piecewise_constant([0.0, 1.0], [2.0], math.inf, -1.0)
    # past t = 1 the density is 1 - 1/t^2
    assert integrate_over(f, C(2, 4)) == pytest.approx(2 - (1 / 2 - 1 / 4), abs=1e-14)
    assert integrate_over(f, C(0.5, 2)) == pytest.approx(1.0 + 1 - 0.5, abs=1e-14)
    assert f.excess_integral() == pytest.approx(0.0, abs=1e-14)
    assert f.antiderivative(np.array([3.0]))[0] == pytest.approx(2 + 2 - (1 - 1 / 3), abs=1e-14)


def test_normalize_examples():
    out = normalize([Density.constant(2.0)])
    assert len(out) == 2 and out[0].is_constant_one() and out[1].is_constant_one()
    out = normalize([Density.polynomial([-1, 2])])
    assert out[0].is_constant_one()
    assert np.allclose(out[1].coeffs[0], [0, 2, 0, 0])
    out = normalize([Density.constant()])
    assert len(out) == 1 and out[0].is_constant_one()


@given(st.lists(piecewise_densities(), min_size=1, max_size=3))
def test_normalize_totals(members):
    out = normalize(members)
    assert out[0].is_constant_one()
    for f in out:
        assert integrate_over(f, UNIT) == pytest.approx(1.0, abs=1e-12)


def test_ui_delta_examples():
    assert ui_delta([Density.constant()], 0.1) == pytest.approx(0.025)
    assert ui_delta([Density.polynomial([0, 2])], 0.2) == pytest.approx(0.025)
    A = C(0.3, 0.32)
    assert integrate_over(Density.constant(), A) < 0.1
    with pytest.raises(RangeError):
        ui_delta([Density.constant()], 0.0)


def test_ui_delta_contract_with_a_spike():
    # height 50 on a strip of width 0.01 next to a signed cubic
    spike = Density(
        np.array([0.0, 0.4, 0.41, 1.0]), np.array([[0, 0, 0, 0], [50.0, 0, 0, 0], [1.0, -6.0, 0, 4.0]])
    )
    S = [Density.constant(), spike]
    eps = 0.3
    delta = ui_delta(S, eps)
    rng = np.random.default_rng(5)
    for _ in range(100):
        k = int(rng.integers(1, 4))
        centers = rng.uniform(0.38, 0.43, k) if rng.uniform() < 0.5 else rng.uniform(0, 1, k)
        width = delta / k * rng.uniform(0.5, 0.999)
        A = IntervalSet.from_pairs([(max(c - width / 2, 0), min(c + width / 2, 1)) for c in centers])
        assert A.measure() < delta
        for f in (Density.constant(), spike):
            mass = sum(quad(lambda x: abs(f(x)), a, b, points=[0.4, 0.41], limit=100)[0] for a, b in zip(A.lo, A.hi))
            assert mass < eps


@given(piecewise_densities(), grid_sets())
def test_integral_matches_quadrature(f, E):
    assert integrate_over(f, E) == pytest.approx(quad_oracle(f, E), abs=1e-9)


@given(piecewise_densities(), grid_sets())
def test_integral_matches_midpoint_rule(f, E):
    assert abs(integrate_over(f, E) - riemann_oracle(f, E, 10**6)) <= 1e-4


@given(piecewise_densities(), grid_sets(), grid_sets())
def test_additivity(f, A, B):
    B = B - A
    assert integrate_over(f, A) + integrate_over(f, B) == pytest.approx(integrate_over(f, A | B), abs=1e-10)


@given(piecewise_densities(), piecewise_densities(), grid_sets())
def test_difference_integrates_to_difference(f, g, E):
    h = difference(f, g)
    assert integrate_over(h, E) == pytest.approx(integrate_over(f, E) - integrate_over(g, E), abs=1e-10)


@given(piecewise_densities())
def test_json_round_trip(f):
    g = Density.from_json(json.loads(json.dumps(f.to_json())))
    assert np.allclose(g.breaks, f.breaks) and np.allclose(g.coeffs, f.coeffs)


def test_json_field_names():
    data = {"domain": [0, "inf"], "pieces": [{"from": 0, "to": 1, "coeffs": [2]}], "tail": {"c": -1}}
    f = Density.from_json(data)
    assert f.has_tail and f.tail == -1
    assert f.to_json() == {"domain": [0.0, "inf"], "pieces": [{"from": 0.0, "to": 1.0, "coeffs": [2.0]}], "tail": {"c": -1.0}}


@pytest.mark.parametrize(
    "bad",
    [
        {"domain": [0, 1], "pieces": [{"from": 0, "to": 1, "coeffs": [0, 0, 0, 0, 1]}]},
        {"domain": [0, 1], "pieces": [{"from": 0, "to": 0.4, "coeffs": [1]}, {"from": 0.5, "to": 1, "coeffs": [1]}]},
        {"domain": [0, 1], "pieces": [{"from": 0, "to": 0.5, "coeffs": [1]}]},
        {"domain": [0, 1]},
        {"domain": [0, 1], "pieces": [{"from": 0, "to": 1, "coeffs": [1]}], "tail": {"c": 1}},
    ],
)
def test_parse_errors(bad):
    with pytest.raises(ParseError):
        Density.from_json(bad)


def test_family_from_json_and_shared_domain():
    fam = DensityFamily.from_json([Density.constant().to_json(), Density.polynomial([0, 2]).to_json()])
    assert len(fam) == 2
    with pytest.raises(DomainError):
        DensityFamily([Density.constant(), Density.constant(1.0, math.inf)])


def test_sup_abs():
    # 1 - 6t + 4t^3 bottoms out at t = 1/sqrt(2)
    assert Density.polynomial([1, -6, 0, 4]).sup_abs() == pytest.approx(abs(1 - 6 / math.sqrt(2) + 4 / 2**1.5))
    f = Density.polynomial([0.5, -3, 1, 2])
    xs = np.linspace(0, 1, 100001)
    assert f.sup_abs() >= np.max(np.abs(f(xs))) - 1e-12
