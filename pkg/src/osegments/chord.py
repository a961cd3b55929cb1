"""Universal chord of length one half for continuous ``F`` with ``F(0)=0, F(1)=1``."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from .errors import ResolutionError

DEFAULT_SCAN = 1024
_SNAP = 2.0**53


@dataclass(frozen=True)
class ChordSolution:
    c: float
    d: float

    @property
    def length(self) -> float:
        return self.d - self.c


def _snap(c: float) -> float:
    # multiples of 2**-53 in [0, 1/2] make c + 1/2 and (c + 1/2) - c exact
    return float(np.round(c * _SNAP) / _SNAP)


def _vectorized(F: Callable) -> Callable[[np.ndarray], np.ndarray]:
    probe = np.array([0.0, 0.5])
    try:
        out = np.asarray(F(probe), float)
        if out.shape == probe.shape:
            return lambda x: np.asarray(F(x), float)
    except Exception:
        pass
    return np.vectorize(lambda x: float(F(x)), otypes=[float])


def universal_chord(F: Callable, tol: float = 1e-9, samples: int = DEFAULT_SCAN) -> ChordSolution:
    """Find ``c`` in ``[0, 1/2]`` with ``|F(c + 1/2) - F(c) - 1/2| <= tol``.

    ``G(c) = F(c + 1/2) - F(c) - 1/2`` satisfies ``G(0) = -G(1/2)``, so a grid
    of ``samples`` points on ``[0, 1/2]`` always shows a zero or a sign
    change when ``F`` is continuous. The root in the first such grid cell is
    polished with Brent's method.
    """
    Fv = _vectorized(F)

    def G(c):
        # both ends in one call: F is usually a vectorized antiderivative
        c = np.atleast_1d(np.asarray(c, float))
        v = Fv(np.concatenate([c + 0.5, c]))
        return v[: c.size] - v[c.size :] - 0.5

    grid = np.linspace(0.0, 0.5, samples)
    g = G(grid)
    if not np.all(np.isfinite(g)):
        raise ResolutionError("F is not finite on [0, 1]")
    hits = np.nonzero(np.abs(g) <= tol)[0]
    flips = np.nonzero(np.signbit(g[:-1]) != np.signbit(g[1:]))[0]
    first_hit = hits[0] if hits.size else samples
    first_flip = flips[0] if flips.size else samples
    if first_hit <= first_flip and first_hit < samples:
        c = _snap(grid[first_hit])
        return ChordSolution(c, c + 0.5)
    if first_flip >= samples:
        raise ResolutionError(
            f"no sign change of F(c+1/2)-F(c)-1/2 at resolution {samples}; F is discontinuous or F(1) != 1"
        )
    a, b = float(grid[first_flip]), float(grid[first_flip + 1])
    c = brentq(lambda x: float(G(np.array([x]))[0]), a, b, xtol=1e-16, rtol=4 * np.finfo(float).eps, maxiter=200)
    c = _snap(c)
    if abs(float(G(np.array([c]))[0])) > tol:
        raise ResolutionError(f"bisection stalled above tolerance {tol}; F may be discontinuous")
    return ChordSolution(c, c + 0.5)
