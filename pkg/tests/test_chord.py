import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import brentq

from osegments.chord import universal_chord
from osegments.density import Density
from osegments.errors import ResolutionError


def cdf_of(f: Density):
    total = f.total()
    return lambda x: f.antiderivative(np.asarray(x, float)) / total


def test_identity_gives_smallest_c():
    sol = universal_chord(lambda t: t)
    assert sol.c == 0.0 and sol.d == 0.5


def test_square():
    sol = universal_chord(lambda t: t * t)
    # (c + 1/2)^2 - c^2 = 1/2  =>  c = 1/4
    assert sol.c == pytest.approx(0.25, abs=1e-9)
    assert sol.d - sol.c == 0.5


def test_sine_against_brent():
    F = lambda t: np.sin(np.pi * np.asarray(t) / 2)
    G = lambda c: float(F(c + 0.5) - F(c) - 0.5)
    ref = brentq(G, 0.0, 0.5, xtol=1e-15)
    sol = universal_chord(F, tol=1e-10)
    assert abs(G(sol.c)) <= 1e-10
    assert sol.c == pytest.approx(ref, abs=1e-8)


def test_scalar_only_callable():
    sol = universal_chord(lambda t: math.sin(math.pi * t / 2))
    assert abs(math.sin(math.pi * sol.d / 2) - math.sin(math.pi * sol.c / 2) - 0.5) <= 1e-9


def test_step_function_is_a_resolution_error():
    with pytest.raises(ResolutionError):
        universal_chord(lambda t: np.where(np.asarray(t) < 0.3, 0.0, 1.0))


def test_wrong_endpoint_is_a_resolution_error():
    with pytest.raises(ResolutionError):
        universal_chord(lambda t: 0.0 * np.asarray(t))


@st.composite
def monotone_cdfs(draw):
    n = draw(st.integers(1, 4))
    inner = sorted(draw(st.lists(st.floats(0.01, 0.99), min_size=n - 1, max_size=n - 1, unique=True)))
    breaks = np.array([0.0] + inner + [1.0])
    # nonnegative cubic pieces: squares of linear terms plus a constant floor
    coeffs = []
    for _ in range(n):
        a, b = draw(st.floats(-2, 2)), draw(st.floats(-2, 2))
        floor = draw(st.floats(0.01, 3))
        coeffs.append([a * a + floor, 2 * a * b, b * b, 0.0])
    return cdf_of(Density(breaks, np.array(coeffs)))


@given(monotone_cdfs())
def test_chord_identity(F):
    sol = universal_chord(F)
    assert sol.d - sol.c == 0.5
    assert 0.0 <= sol.c <= 0.5
    assert abs(float(F(sol.d)) - float(F(sol.c)) - 0.5) <= 1e-9
