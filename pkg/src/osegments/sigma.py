"""Common segments on ``[0, inf)`` with Lebesgue measure.

Densities here are of the form ``1 + (integrable excess)`` with zero total
excess. Given a common segment ``v`` for all but the last density, the
excess function ``F(t) = mu_last(v(t)) - t`` decides how to exhaust the line
by sets ``Y_k`` on which every density agrees with length. Either ``F``
keeps returning to zero (``Y_k = v(t_k)`` at its zeros) or it has a last
zero ``T``, after which level-matched times ``s_k`` (falling to ``T``) and
``t_k`` (rising to infinity) give ``Y_k = v(T) ∪ (v(t_k) \\ v(s_k))``.
Finite segments on the increments ``Y_{k+1} \\ Y_k`` are then glued end to end.
"""
from __future__ import annotations

import json
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import repeat
from typing import Callable, Optional

import numpy as np

from .density import DensityFamily, integrate_over
from .errors import DomainError, HorizonError, PreconditionError, RangeError, ResolutionError, ValidationError
from .intervals import IntervalSet
from .segment import DEFAULT_TOL, DyadicSegment, LazySegment, common_segment, evaluate

SCAN_STEP = 1.0 / 256
# scans along a glued path evaluate one set per point, so their grid is capped
MAX_PATH_SCAN = 1 << 13
DEFAULT_HORIZON = 1024.0
ZERO_TOL = 1e-10
EXCESS_TOL = 1e-9
CHECK_TOL = 1e-6

Path = Callable[[float], IntervalSet]


def lebesgue_path(t: float) -> IntervalSet:
    """The segment ``[0, t)`` of Lebesgue measure on the half line."""
    return _half_open(t)


def _half_open(t: float) -> IntervalSet:
    if t <= 0:
        return IntervalSet.empty()
    return IntervalSet(np.array([0.0]), np.array([float(t)]), np.array([False]), np.array([True]))


@dataclass
class Exhaustion:
    """Increasing sets ``Y`` with ``mu_f(Y_k) = length(Y_k)`` for every member."""

    Y: list[IntervalSet]
    case: str
    times: list[float]
    T: Optional[float] = None
    s: list[float] = field(default_factory=list)
    W: Optional[IntervalSet] = None
    mirrored: bool = False
    residuals: Optional[np.ndarray] = None

    @property
    def worst_residual(self) -> float:
        return float(np.max(np.abs(self.residuals))) if self.residuals is not None and self.residuals.size else 0.0


class _Excess:
    """``F(t) = mu_f(v(t)) - measure(v(t))`` for the last member ``f``."""

    def __init__(self, f, v: Optional[Path]):
        self.f = f
        self.v = v

    def __call__(self, t):
        t = np.asarray(t, float)
        if self.v is None:
            return self.f.antiderivative(t) - t
        flat = [self._one(x) for x in t.ravel()]
        return np.array(flat).reshape(t.shape)

    def _one(self, t: float) -> float:
        E = self.v(float(t))
        return integrate_over(self.f, E) - E.measure()

    def path(self, t: float) -> IntervalSet:
        return lebesgue_path(t) if self.v is None else self.v(t)


def _check_family(S: DensityFamily):
    if not math.isinf(S.domain_hi):
        raise DomainError("sigma-finite segments need densities on [0, inf)")
    if not S[0].is_constant_one():
        raise ValidationError("the family must start with the constant density 1")
    for i, f in enumerate(S):
        ex = f.excess_integral()
        if abs(ex) > EXCESS_TOL:
            raise PreconditionError(f"member {i} has integral of (f - 1) equal to {ex:.3g}, not 0")


def _bisect_level(F, a: float, b: float, level: float, iters: int = 200) -> float:
    """Point in ``[a, b]`` where ``F - level`` changes sign (``F(a) >= level > F(b)`` or reverse)."""
    fa = float(F(np.array([a]))[0]) - level
    for _ in range(iters):
        m = 0.5 * (a + b)
        fm = float(F(np.array([m]))[0]) - level
        if fm == 0.0 or b - a < 1e-13:
            return m
        if (fm > 0) == (fa > 0):
            a, fa = m, fm
        else:
            b = m
    return 0.5 * (a + b)


def _zeros(F, grid: np.ndarray, vals: np.ndarray) -> np.ndarray:
    near = np.abs(vals) <= ZERO_TOL
    out = list(grid[near])
    flips = np.nonzero((np.sign(vals[:-1]) * np.sign(vals[1:]) < 0) & ~near[:-1] & ~near[1:])[0]
    for i in flips:
        out.append(_bisect_level(F, grid[i], grid[i + 1], 0.0))
    return np.unique(np.array(out, float))


def exhaust(
    S,
    v: Optional[Path] = None,
    horizon: float = DEFAULT_HORIZON,
    k_max: Optional[int] = 8,
    spacing: float = 1.0,
    step: float = SCAN_STEP,
) -> Exhaustion:
    """Exhaust ``[0, horizon]`` by sets calibrated for every member of ``S``.

    ``v`` is a common segment (as a function of ``t >= 0``) for all members
    but the last; ``None`` means the Lebesgue segment ``[0, t)``, which is
    the right choice for two-member families. In the recurring-zero case
    ``t_k`` is the largest zero of ``F`` at or below ``k * spacing``.
    ``k_max=None`` produces as many sets as fit below the horizon, with
    zero-time bounds ``spacing * 2**(k-1)`` in the recurring case.
    """
    S = S if isinstance(S, DensityFamily) else DensityFamily(list(S))
    _check_family(S)
    if k_max is not None and k_max < 1:
        raise RangeError("k_max must be at least 1")
    F = _Excess(S[-1], v if len(S) > 1 else None)
    if v is not None and len(S) > 1:
        step = max(step, horizon / MAX_PATH_SCAN)
    grid = np.arange(0.0, horizon + step / 2, step)
    vals = np.zeros_like(grid) if len(S) == 1 else F(grid)
    if not np.all(np.isfinite(vals)):
        raise ResolutionError("excess function is not finite on the scan grid")
    zeros = _zeros(F, grid, vals)
    recurring = zeros.size and zeros[-1] >= 0.75 * grid[-1]
    if recurring:
        times: list[float] = []
        k = 1
        while k_max is None or len(times) < k_max:
            # filling the horizon uses doubling bounds to keep the block count logarithmic
            bound = k * spacing if k_max is not None else spacing * 2.0 ** (k - 1)
            if bound > grid[-1] + 1e-12:
                if k_max is None and times:
                    break
                raise HorizonError(f"only {len(times)} of {k_max} zero times fit below horizon {horizon}")
            j = int(np.searchsorted(zeros, bound + 1e-12, side="right")) - 1
            if j >= 0 and zeros[j] > (times[-1] if times else 0.0):
                times.append(float(zeros[j]))
            k += 1
        Y = [F.path(t) for t in times]
        ex = Exhaustion(Y, "i", times)
    else:
        ex = _last_zero_case(F, grid, vals, zeros, horizon, k_max)
    ex.residuals = np.array([[integrate_over(f, Yk) - Yk.measure() for f in S] for Yk in ex.Y])
    if ex.worst_residual > CHECK_TOL:
        raise ResolutionError(f"exhaustion sets miss calibration by {ex.worst_residual:.3g}")
    return ex


def _last_zero_case(F: _Excess, grid, vals, zeros, horizon, k_max) -> Exhaustion:
    T = float(zeros[-1]) if zeros.size else 0.0
    after = grid > T
    if not np.any(after):
        raise HorizonError("no scan points past the last zero")
    sign = np.sign(vals[after][0])
    if sign == 0:
        raise ResolutionError("excess function vanishes right after its last zero")
    mirrored = sign < 0

    def H(t):
        return -F(t) if mirrored else F(t)

    hv = -vals if mirrored else vals
    idx = np.nonzero(after)[0]
    if np.any(hv[idx] <= 0):
        raise ResolutionError("excess function changes sign after its last detected zero")
    peak_i = int(idx[np.argmax(hv[idx])])
    t_peak = float(grid[peak_i])
    s_prev = T + (t_peak - T) / 2
    level_prev = math.inf
    t_prev, i_prev = t_peak, peak_i
    s_list: list[float] = []
    t_list: list[float] = []
    while k_max is None or len(t_list) < k_max:
        s = s_prev if not s_list else T + (s_prev - T) / 2
        level = float(H(np.array([s]))[0])
        halvings = 0
        while level >= level_prev:
            s = T + (s - T) / 2
            level = float(H(np.array([s]))[0])
            halvings += 1
            if halvings > 200:
                raise ResolutionError("excess function does not decay toward its last zero")
        if level <= 0:
            raise ResolutionError("level set collapsed onto the last zero at float resolution")
        # first grid point past the previous crossing where H has dropped to the level
        later = np.nonzero(hv[i_prev + 1 :] <= level)[0]
        if later.size:
            j = i_prev + 1 + int(later[0])
            a, b = float(grid[j - 1]), float(grid[j])
        else:
            a, b = float(grid[-1]), float(grid[-1])
            while float(H(np.array([b]))[0]) > level:
                a, b = b, 2 * b
                if b > horizon:
                    if k_max is None and t_list:
                        break
                    raise HorizonError(f"level {level:.3g} is not reached before horizon {horizon}")
            if b > horizon:
                break
            j = len(grid) - 1
        t = _bisect_level(H, max(a, t_prev), b, level)
        s_list.append(s)
        t_list.append(t)
        s_prev, level_prev, t_prev, i_prev = s, level, t, j
    W = F.path(T)
    Y = [W | (F.path(t) - F.path(s)) for s, t in zip(s_list, t_list)]
    return Exhaustion(Y, "ii", t_list, T=T, s=s_list, W=W, mirrored=bool(mirrored))


@dataclass
class SigmaSegment:
    """Glued segment: ``u(t) = X_i ∪ u_i((t - m_i) / (m_{i+1} - m_i))`` on ``[m_i, m_{i+1}]``."""

    blocks: list[IntervalSet]
    masses: np.ndarray
    per_block: list[Optional[DyadicSegment]]
    densities: DensityFamily
    increments: list[IntervalSet] = field(default_factory=list)
    _lazy: dict = field(default_factory=dict, repr=False)

    @property
    def horizon(self) -> float:
        return float(self.masses[-1])

    def to_jsonl(self, fp=None) -> str:
        lines = []
        for i, seg in enumerate(self.per_block):
            if seg is None:
                continue
            m0, m1 = self.masses[i], self.masses[i + 1]
            start = 0 if i == 0 else 1
            for m in range(start, seg.size + 1):
                t = float(m0 + (m1 - m0) * m / seg.size)
                E = self.blocks[i] | seg.table[m]
                mu = [integrate_over(f, E) for f in self.densities]
                lines.append(json.dumps({"t": t, "set": E.to_json(), "mu": mu}, sort_keys=True))
        text = "\n".join(lines) + "\n"
        if fp is not None:
            fp.write(text)
        return text


def glue(ex: Exhaustion, S, depth: int, tol: float = DEFAULT_TOL, jobs: int = 1) -> SigmaSegment:
    """Finite common segments on each increment of the exhaustion, glued in order.

    The increments are independent, so ``jobs > 1`` builds them in a process pool.
    """
    S = S if isinstance(S, DensityFamily) else DensityFamily(list(S))
    X = [IntervalSet.empty()]
    for Yk in ex.Y:
        X.append(X[-1] | Yk)
    blocks = [X[0]]
    work = []
    for i in range(len(X) - 1):
        D = X[i + 1] - X[i]
        if D.measure() <= 0:
            warnings.warn(f"exhaustion increment {i} has zero measure; skipped", RuntimeWarning, stacklevel=2)
            continue
        work.append(D)
        blocks.append(X[i + 1])
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            per_block = list(pool.map(common_segment, repeat(S), work, repeat(depth), repeat(tol)))
    else:
        per_block = [common_segment(S, D, depth, tol) for D in work]
    masses = np.array([b.measure() for b in blocks])
    return SigmaSegment(blocks, masses, per_block, S, work)


def evaluate_sigma(ss: SigmaSegment, t: float) -> IntervalSet:
    if t < 0:
        raise RangeError(f"parameter {t} is negative")
    if t > ss.horizon * (1 + 1e-12):
        raise HorizonError(f"parameter {t} beyond the covered horizon {ss.horizon}")
    if t >= ss.horizon:
        return ss.blocks[-1]
    i = int(np.searchsorted(ss.masses, t, side="right")) - 1
    m0, m1 = ss.masses[i], ss.masses[i + 1]
    seg = ss.per_block[i]
    u = (t - m0) / (m1 - m0)
    # grid parameters rebuilt from the block masses can land a rounding error below their index
    near = round(u * seg.size)
    if abs(u * seg.size - near) <= 1e-9:
        u = near / seg.size
    return ss.blocks[i] | evaluate(seg, min(u, 1.0))


def sigma_path(ss: SigmaSegment, tol: float = DEFAULT_TOL) -> Path:
    """The glued segment at every real parameter, not just grid points.

    Each increment is refined lazily to whatever depth ``t`` needs, so the
    path is continuous in ``t`` and calibrated for all members in between
    grid points. Later stages scan their excess function along it.
    """

    def at(t: float) -> IntervalSet:
        if t < 0:
            raise RangeError(f"parameter {t} is negative")
        if t > ss.horizon * (1 + 1e-12):
            raise HorizonError(f"parameter {t} beyond the covered horizon {ss.horizon}")
        if t >= ss.horizon:
            return ss.blocks[-1]
        i = int(np.searchsorted(ss.masses, t, side="right")) - 1
        if i not in ss._lazy:
            ss._lazy[i] = LazySegment(ss.densities, ss.increments[i], tol)
        m0, m1 = ss.masses[i], ss.masses[i + 1]
        return ss.blocks[i] | ss._lazy[i].at(min(1.0, (t - m0) / (m1 - m0)))

    return at


def sigma_common_segment(
    S, depth: int, horizon: float = DEFAULT_HORIZON, k_max: int = 8, tol: float = DEFAULT_TOL, jobs: int = 1
) -> SigmaSegment:
    """Build the glued segment member by member, each stage feeding the next as ``v``."""
    S = S if isinstance(S, DensityFamily) else DensityFamily(list(S))
    _check_family(S)
    v: Optional[Path] = None
    ss = None
    for n in range(1, len(S) + 1):
        sub = S[:n]
        # earlier stages must cover the horizon so later stages can scan along them
        kn = k_max if n == len(S) else None
        if n == 1:
            ex = exhaust(sub, None, horizon, kn)
        else:
            scan = horizon if v is None else min(horizon, ss.horizon)
            ex = exhaust(sub, v, scan, kn)
        ss = glue(ex, sub, depth, tol, jobs)
        if n >= 2:
            v = sigma_path(ss, tol)
    return ss
