"""Increasing families of open sets calibrated for one or two densities.

Everything runs against a :class:`SpaceAdapter`, which supplies the two
primitive operations the constructions need: carving a subset of given
measure out of a set, and covering a set by an open set of small excess.
:class:`IntervalSpace` implements them on an open interval, either exactly
or with seeded random fuzz; :class:`BlockSpace` is a space whose open sets
are unions of whole blocks, where no increasing open family can hit every
measure.
"""
from __future__ import annotations

import csv
import io
import json
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .density import Density, DensityFamily, difference, integrate_over, pack_family, ui_delta
from .errors import OracleContractError, PreconditionError, RangeError, ResolutionError, ValidationError
from .intervals import IntervalSet, prefix
from .segment import LazySegment

GROW_TOL = 1e-10
CONTRACT_SLACK = 1e-12
SCAN = 1024
ROOT_TOL = 1e-9


# -- spaces -------------------------------------------------------------------


class SpaceAdapter(ABC):
    """Oracle view of a nonatomic topological measure space."""

    universe: IntervalSet
    exact: bool

    def measure(self, A: IntervalSet) -> float:
        return A.measure()

    @abstractmethod
    def extract_subset(self, D: IntervalSet, m: float) -> IntervalSet:
        """A subset of ``D`` of measure exactly ``m``."""

    @abstractmethod
    def approx_open(self, A: IntervalSet, eps: float, within: Optional[IntervalSet] = None) -> IntervalSet:
        """Open ``O`` (inside ``within`` if given) with ``mu(A \\ O) = 0`` and ``mu(O \\ A) < eps``."""


class IntervalSpace(SpaceAdapter):
    """Lebesgue measure on an open interval (``(0, 1)`` by default).

    ``mode="exact"`` extracts left-to-right prefixes and covers a set by its
    interior. ``mode="fuzzed"`` extracts a window starting at a random arc
    position and covers by dilating every part by random amounts that sum to
    less than the allowed excess. The randomness of call number ``i`` comes
    from ``default_rng([seed, i])``, so a fixed call sequence is reproducible.
    """

    def __init__(self, universe: Optional[IntervalSet] = None, mode: str = "exact", seed: int = 0):
        if mode not in ("exact", "fuzzed"):
            raise ValidationError(f"unknown adapter mode {mode!r}")
        self.universe = IntervalSet.open(0.0, 1.0) if universe is None else universe
        if not self.universe.is_open:
            raise ValidationError("the universe of an interval space must be open")
        self.mode = mode
        self.exact = mode == "exact"
        self.seed = int(seed)
        self.calls = 0

    def _rng(self) -> np.random.Generator:
        rng = np.random.default_rng([self.seed, self.calls])
        self.calls += 1
        return rng

    def extract_subset(self, D: IntervalSet, m: float) -> IntervalSet:
        total = D.measure()
        if m < 0 or m > total * (1 + 1e-12) + 1e-15:
            raise RangeError(f"cannot extract mass {m} from a set of measure {total}")
        m = min(m, total)
        if self.exact or m == 0 or m == total:
            return prefix(D, m)
        s0 = float(self._rng().uniform(0.0, total))
        end = s0 + m
        piece = prefix(D, min(end, total)) - prefix(D, s0)
        if end > total:
            piece = piece | prefix(D, end - total)
        return piece

    def approx_open(self, A: IntervalSet, eps: float, within: Optional[IntervalSet] = None) -> IntervalSet:
        if not eps > 0:
            raise RangeError("approximation slack must be positive")
        box = self.universe if within is None else within
        if self.exact or not len(A):
            return A.interior() & box
        rng = self._rng()
        widths = rng.uniform(0.0, 1.0, 2 * len(A))
        budget = eps * float(rng.uniform(0.05, 0.95))
        widths *= budget / widths.sum()
        lo = A.lo - widths[0::2]
        hi = A.hi + widths[1::2]
        return IntervalSet.from_pairs(list(zip(lo, hi)), open=True) & box


def _checked_open(sp: SpaceAdapter, A: IntervalSet, eps: float, within: Optional[IntervalSet]) -> IntervalSet:
    U = sp.approx_open(A, eps, within)
    if not U.is_open and len(U):
        raise OracleContractError("approx_open returned a set that is not open")
    if (A - U).measure() > CONTRACT_SLACK:
        raise OracleContractError("approx_open dropped part of the approximated set")
    if (U - A).measure() >= eps:
        raise OracleContractError("approx_open exceeded its excess budget")
    return U


def _checked_extract(sp: SpaceAdapter, D: IntervalSet, m: float) -> IntervalSet:
    E = sp.extract_subset(D, m)
    if not E.issubset(D) or abs(E.measure() - m) > CONTRACT_SLACK:
        raise OracleContractError("extract_subset returned a set outside D or of the wrong measure")
    return E


# -- growing opens ------------------------------------------------------------


@dataclass
class Growth:
    open: IntervalSet
    trajectory: list[float]

    @property
    def iterations(self) -> int:
        return len(self.trajectory) - 1


def sandwich(a: float, start: float, n: int) -> tuple[float, float]:
    """Bounds ``a + (3/4)**n (start - a) <= mu(O_n) <= a + (1/4)**n (start - a)``."""
    return a + 0.75**n * (start - a), a + 0.25**n * (start - a)


def grow_open_to_measure(
    sp: SpaceAdapter,
    A: IntervalSet,
    a: float,
    n_max: int = 200,
    tol: float = GROW_TOL,
    within: Optional[IntervalSet] = None,
    check: bool = True,
) -> Growth:
    """Open ``O`` with ``A ⊆ O ⊆ within`` and ``mu(O) = a`` up to ``tol``.

    Each round carves half the remaining gap out of the complement and adds
    an open cover of it whose excess is below a quarter of the gap, so the gap
    shrinks by a factor in ``[1/4, 3/4]``. With an exact adapter the whole gap
    is carved at once. ``check`` asserts the sandwich bounds after every
    round for fuzzed adapters.
    """
    box = sp.universe if within is None else within
    start = sp.measure(A)
    if not (start - tol <= a <= sp.measure(box) + tol):
        raise RangeError(f"target {a} outside [{start}, {sp.measure(box)}]")
    O = A
    traj = [start]
    for n in range(n_max):
        gap = a - traj[-1]
        if gap <= tol:
            break
        room = box - O
        take = min(gap if sp.exact else gap / 2, room.measure())
        piece = _checked_extract(sp, room, take)
        U = _checked_open(sp, piece, gap / 4, box)
        O = O | U
        traj.append(sp.measure(O))
        if check and not sp.exact:
            lo, hi = sandwich(a, start, n + 1)
            if not (lo - CONTRACT_SLACK <= traj[-1] <= hi + CONTRACT_SLACK):
                raise OracleContractError(f"round {n + 1}: measure {traj[-1]} outside [{lo}, {hi}]")
    else:
        if a - traj[-1] > tol:
            raise ResolutionError(f"growth stalled {a - traj[-1]:.3g} short of the target")
    if traj[-1] > a + tol:
        raise ResolutionError(f"growth overshot the target by {traj[-1] - a:.3g}")
    return Growth(O, traj)


# -- O-segments ---------------------------------------------------------------


@dataclass
class OSegment:
    """Nested open sets ``table[j]`` at increasing parameters ``params[j]``.

    Between parameters the value is the envelope: the last set whose parameter
    does not exceed ``t``. ``lower`` is the excluded left end of a partial
    segment (``None`` when the segment starts at ``params[0]``).
    """

    params: np.ndarray
    table: list[IntervalSet]
    lower: Optional[float] = None
    meta: dict = field(default_factory=dict)

    def evaluate(self, t: float) -> IntervalSet:
        if t < self.params[0] - 1e-15 or t > self.params[-1] + 1e-12:
            raise RangeError(f"parameter {t} outside [{self.params[0]}, {self.params[-1]}]")
        j = max(0, int(np.searchsorted(self.params, t, side="right")) - 1)
        return self.table[j]

    def all_open(self) -> bool:
        return all(s.is_open or not len(s) for s in self.table)

    def nesting_violations(self) -> list[int]:
        return [j for j in range(len(self.table) - 1) if not self.table[j].issubset(self.table[j + 1])]

    def measures(self, densities: Sequence[Density]) -> np.ndarray:
        return np.array([[integrate_over(f, s) for f in densities] for s in self.table])

    def to_jsonl(self, densities: Sequence[Density], fp=None) -> str:
        mu = self.measures(densities)
        lines = [
            json.dumps({"t": float(t), "set": s.to_json(), "mu": [float(x) for x in row]}, sort_keys=True)
            for t, s, row in zip(self.params, self.table, mu)
        ]
        text = "\n".join(lines) + "\n"
        if fp is not None:
            fp.write(text)
        return text


def _dyadic_fill(sp: SpaceAdapter, bottom: IntervalSet, top: IntervalSet, depth: int, tol: float) -> list[IntervalSet]:
    """Opens between ``bottom`` and ``top`` at equally spaced measures, refined level by level."""
    m0, m1 = sp.measure(bottom), sp.measure(top)
    level = [bottom, top]
    for n in range(1, depth + 1):
        nxt = []
        for k in range(len(level) - 1):
            target = m0 + (2 * k + 1) / 2**n * (m1 - m0)
            mid = grow_open_to_measure(sp, level[k], target, tol=tol, within=level[k + 1]).open
            nxt += [level[k], mid]
        nxt.append(level[-1])
        level = nxt
    return level


def o_segment(sp: SpaceAdapter, A: IntervalSet, depth: int, tol: float = GROW_TOL) -> OSegment:
    """Open family through the open set ``A``: ``mu(u(t)) = t`` on both sides of ``mu(A)``.

    Above ``mu(A)`` the sets grow from ``A`` to the universe; below, the same
    construction runs inside ``A`` starting from the empty set.
    """
    if len(A) and not A.is_open:
        raise ValidationError("the anchor of an O-segment must be open")
    total = sp.measure(sp.universe)
    if abs(total - 1.0) > 1e-12:
        raise PreconditionError("the universe must have measure 1")
    if not A.issubset(sp.universe):
        raise ValidationError("the anchor must lie inside the universe")
    mA = sp.measure(A)
    upper = _dyadic_fill(sp, A, sp.universe, depth, tol)
    n = 1 << depth
    params = [mA + m / n * (1 - mA) for m in range(n + 1)]
    table = list(upper)
    if mA > 0:
        lower = _dyadic_fill(sp, IntervalSet.empty(), A, depth, tol)
        params = [m / n * mA for m in range(n)] + params
        table = lower[:-1] + table
    return OSegment(np.array(params), table, meta={"anchor": mA})


def o_segment_through(
    sp: SpaceAdapter, A: IntervalSet, depth: int, levels: int = 30, tol: float = GROW_TOL
) -> OSegment:
    """Partial open family on ``(mu(A), 1]`` with ``mu(A \\ u(t)) = 0`` throughout.

    Shrinking open covers ``U_1 = X ⊇ U_2 ⊇ ...`` of ``A`` with excess below
    ``2**-i`` are linked by dyadic fills from ``U_{i+1}`` up to ``U_i``.
    """
    mA = sp.measure(A)
    covers = [sp.universe]
    for i in range(2, levels + 2):
        U = _checked_open(sp, A, 2.0**-i, covers[-1])
        if sp.measure(U) >= sp.measure(covers[-1]):
            U = covers[-1]
        covers.append(U)
        if sp.measure(U) - mA <= 2.0**-levels:
            break
    params: list[float] = []
    table: list[IntervalSet] = []
    for top, bottom in reversed(list(zip(covers[:-1], covers[1:]))):
        m0, m1 = sp.measure(bottom), sp.measure(top)
        if m1 - m0 <= 0:
            continue
        fill = _dyadic_fill(sp, bottom, top, depth, tol)
        n = len(fill) - 1
        start = 0 if not table else 1
        for m in range(start, n + 1):
            params.append(m0 + m / n * (m1 - m0))
            table.append(fill[m])
    if not table:
        params, table = [sp.measure(sp.universe)], [sp.universe]
    return OSegment(np.array(params), table, lower=mA, meta={"covers": [sp.measure(c) for c in covers]})


# -- paths calibrated for a density ------------------------------------------


class OPath:
    """Continuous increasing open family ``v(t)`` with ``mu_g(v(t)) = t``.

    Built from nested opens ``levels[0] ⊋ levels[1] ⊋ ...``: for ``t``
    between the ``g``-masses of two consecutive levels, ``v(t)`` is the
    smaller level plus the interior of the leftmost part of their difference
    carrying the missing ``g``-mass. Needs ``mu_g`` monotone along those
    prefixes (``g >= 0``).
    """

    def __init__(self, levels: list[IntervalSet], f: Density, g: Density):
        self.f = f
        self.g = g
        self.lebesgue = g.is_constant_one()
        self._pk = pack_family([f, g])
        base, gm = [], []
        for s in levels[::-1]:  # increasing
            m = integrate_over(g, s)
            if gm and m <= gm[-1]:
                if m < gm[-1] - 1e-12:
                    raise ResolutionError("g-masses of the covering levels are not increasing (is g negative somewhere?)")
                continue  # difference carries no g-mass at double precision
            base.append(s)
            gm.append(m)
        self.sets = base
        gm = np.array(gm)
        self.gmass = gm
        self.lows = gm[:-1].copy()
        self.base_f = np.array([integrate_over(f, s) for s in base[:-1]])
        incs = [base[j + 1] - base[j] for j in range(len(base) - 1)]
        self.incs = incs
        counts = np.array([len(s) for s in incs])
        self.off = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
        self.ilo = np.concatenate([s.lo for s in incs]) if incs else np.empty(0)
        self.ihi = np.concatenate([s.hi for s in incs]) if incs else np.empty(0)

    @property
    def t_min(self) -> float:
        return float(self.gmass[0])

    @property
    def t_max(self) -> float:
        return float(self.gmass[-1])

    def f_mass(self, ts) -> np.ndarray:
        ts = np.ascontiguousarray(np.atleast_1d(np.asarray(ts, float)))
        if len(self.lows) == 0:
            return np.full(ts.shape, integrate_over(self.f, self.sets[0]))
        return kernels.path_masses(
            ts, self.lows, self.base_f, self.off, self.ilo, self.ihi, 0, 1, self.lebesgue, *self._pk
        )

    def __call__(self, t: float) -> IntervalSet:
        if len(self.lows) == 0 or t <= self.lows[0]:
            return self.sets[0]
        j = int(np.searchsorted(self.lows, t, side="right")) - 1
        lo, hi = self.ilo[self.off[j] : self.off[j + 1]], self.ihi[self.off[j] : self.off[j + 1]]
        x = kernels.arc_mass_position(1, lo, hi, t - self.lows[j], self.lebesgue, *self._pk)
        cut = kernels.arc_cut(lo, hi, 0.0, x)
        return self.sets[j] | IntervalSet.from_arrays(*cut, open=True)


def path_through(sp: SpaceAdapter, A: IntervalSet, within: IntervalSet, f: Density, g: Density, max_levels: int = 40) -> OPath:
    """:class:`OPath` from ``A`` (up to a null set) to ``within`` along shrinking open covers."""
    levels = [within]
    slack = (within - A).measure()
    for i in range(1, max_levels + 1):
        if slack <= 0:
            break
        U = _checked_open(sp, A, slack * 4.0**-i, levels[-1])
        if (U - A).measure() >= (levels[-1] - A).measure():
            continue
        levels.append(U)
        if (U - A).measure() <= 1e-13:
            break
    return OPath(levels, f, g)


# -- the bridge step ----------------------------------------------------------


@dataclass
class Bridge:
    U: IntervalSet
    t: float
    branch: str
    witnesses: dict = field(default_factory=dict)


def _first_root(h, a: float, b: float, ga: float, tol: float) -> float:
    """Bisect a sign change of ``h`` on ``[a, b]`` where ``h(a)`` has sign of ``ga``."""
    for _ in range(200):
        m = 0.5 * (a + b)
        hm = h(m)
        if abs(hm) <= tol * 1e-3 or b - a < 1e-15:
            return m
        if (hm > 0) == (ga > 0):
            a = m
        else:
            b = m
    return 0.5 * (a + b)


def step1_bridge(
    sp: SpaceAdapter,
    f: Density,
    g: Density,
    v: OPath,
    B: IntervalSet,
    a: float,
    eps: float,
    within: Optional[IntervalSet] = None,
    tol: float = ROOT_TOL,
) -> Bridge:
    """Open ``U ⊇ B`` (a.e.) with ``mu_f(U) = mu_g(U)`` and ``a < mu_g(U) < a + eps``.

    ``v`` must be an open path for ``mu_g`` on ``(a, t_max]`` passing a set on
    which ``mu_f = mu_g = a``. With ``F(t) = mu_f(v(t)) - t``: a zero of
    ``F`` inside the window is used directly. Otherwise, with ``t0`` the first
    zero past the window, ``t3 = a + eps/2**j`` and ``t2`` the last point
    before ``t0`` where ``F`` sits at half of ``F(t3)``, ``j`` grows until
    ``(t3 - a) + (t0 - t2) < eps/2``. An open cover ``W`` of
    ``C = v(t0) \\ v(t2)`` then flips the sign of
    ``G(t) = mu_{f-g}(v(t) ∪ W)`` on ``(a, t3]``, and ``U = v(t*) ∪ W``
    at a root ``t*``.
    """
    box = sp.universe if within is None else within
    t_max = v.t_max
    if not (a >= v.t_min - 1e-12 and a + eps <= t_max + 1e-12 and eps > 0):
        raise RangeError(f"window ({a}, {a + eps}) does not fit the path range [{v.t_min}, {t_max}]")

    def F(t):
        t = np.asarray(t, float)
        return v.f_mass(t) - t

    def finish(t: float, W: Optional[IntervalSet], branch: str, wit: dict) -> Bridge:
        U = (v(t) if W is None else v(t) | W) & box
        if len(B) and B.is_open:
            U = U | B
        mg = integrate_over(g, U)
        mf = integrate_over(f, U)
        if abs(mf - mg) > tol * 10 or not (a < mg < a + eps) or (B - U).measure() > CONTRACT_SLACK:
            raise ResolutionError(
                f"bridge postconditions failed: mu_f - mu_g = {mf - mg:.3g}, mu_g = {mg} vs window ({a}, {a + eps})"
            )
        return Bridge(U, t, branch, wit)

    grid = a + eps * np.arange(1, SCAN + 1) / (SCAN + 1)
    vals = F(grid)
    hit = np.nonzero(np.abs(vals) <= tol)[0]
    flip = np.nonzero(np.signbit(vals[:-1]) != np.signbit(vals[1:]))[0]
    first_hit = hit[0] if hit.size else SCAN
    first_flip = flip[0] if flip.size else SCAN
    if first_hit < SCAN and first_hit <= first_flip:
        return finish(float(grid[first_hit]), None, "zero", {})
    if first_flip < SCAN:
        t = _first_root(lambda x: float(F(x)[0]), float(grid[first_flip]), float(grid[first_flip + 1]), float(vals[first_flip]), tol)
        return finish(t, None, "zero", {})

    sign = -1.0 if vals[0] < 0 else 1.0  # negate so the working excess is negative

    def Fn(t):
        return -sign * F(t) if sign > 0 else F(t)

    # t0: first zero at or after the window
    grid2 = np.linspace(a + eps, t_max, SCAN)
    v2 = Fn(grid2)
    at = np.nonzero(v2 >= -tol)[0]
    # F(t_max) vanishes by construction, up to the calibration of the enclosing set
    i0 = int(at[0]) if at.size else SCAN - 1
    if i0 == 0 or v2[i0] <= tol:
        t0 = float(grid2[i0])
    else:
        t0 = _first_root(lambda x: float(Fn(x)[0]), float(grid2[i0 - 1]), float(grid2[i0]), float(v2[i0 - 1]), tol)
    t_min_pt = float(grid2[np.argmin(v2[: i0 + 1])]) if i0 > 0 else a + eps
    t2 = t3 = None
    for j in range(1, 60):
        t3c = a + eps / 2**j
        f3 = float(Fn(t3c)[0])
        if f3 >= 0:
            raise ResolutionError("the working excess is not negative inside the window")
        level = f3 / 2
        g3 = np.linspace(t3c, t0, SCAN)
        v3 = Fn(g3)
        below = np.nonzero(v3 <= level)[0]
        if not below.size:
            continue
        k = int(below[-1])
        if k == SCAN - 1:
            t2c = float(g3[k])
        else:
            t2c = _first_root(lambda x: float(Fn(x)[0]) - level, float(g3[k]), float(g3[k + 1]), float(v3[k]) - level, tol)
        if t3c < t2c and (t3c - a) + (t0 - t2c) < eps / 2:
            t2, t3 = t2c, t3c
            break
    if t2 is None:
        raise ResolutionError("could not fit the level-matching budget inside eps/2")
    C = v(t0) - v(t2)
    mass_c = -float(Fn(t2)[0])
    slack = eps / 2 - ((t3 - a) + (t0 - t2))
    fg = difference(f, g)
    delta = min(eps / 2, ui_delta([fg], mass_c / 2), ui_delta([g], slack))
    W = _checked_open(sp, C, delta, box)

    def G(t: float) -> float:
        val = integrate_over(fg, v(t) | W)
        return -sign * val if sign > 0 else val

    grid4 = a + (t3 - a) * np.arange(1, SCAN + 1) / SCAN
    g4 = np.array([G(t) for t in grid4])
    if not (g4[0] > 0 > g4[-1]):
        raise ResolutionError(f"G does not change sign on (a, t3]: G = {g4[0]:.3g} .. {g4[-1]:.3g}")
    iflip = int(np.nonzero(g4 <= 0)[0][0])
    if abs(g4[iflip]) <= tol:
        t_star = float(grid4[iflip])
    else:
        t_star = _first_root(G, float(grid4[iflip - 1]), float(grid4[iflip]), float(g4[iflip - 1]), tol)
    wit = {"t0": t0, "t1": t_min_pt, "t2": t2, "t3": t3, "delta": delta, "mass_C": mass_c, "mirrored": sign > 0}
    return finish(t_star, W, "cover", wit)


def _calibrated_superset(f: Density, g: Density, B: IntervalSet, X: IntervalSet, a: float, tol: float) -> IntervalSet:
    """``A`` with ``B ⊆ A ⊆ X`` and ``mu_f(A) = mu_g(A) = a`` via a common segment of ``X \\ B``."""
    D = X - B
    rB, rX = integrate_over(g, B), integrate_over(g, X)
    if rX - rB <= 0:
        raise ResolutionError("no g-mass between the anchor and its enclosing set")
    members = [Density.constant(1.0)] + [h for h in (f, g) if not h.is_constant_one()]
    lazy = LazySegment(DensityFamily(members), D, tol=tol * 1e-2)
    return B | lazy.at(min(max((a - rB) / (rX - rB), 0.0), 1.0))


def bridge_within(
    sp: SpaceAdapter, f: Density, g: Density, B: IntervalSet, X: IntervalSet, a: float, eps: float, tol: float = ROOT_TOL
) -> Bridge:
    """Run the bridge step inside the open set ``X`` starting from ``B ⊆ X``."""
    A = _calibrated_superset(f, g, B, X, a, tol)
    v = path_through(sp, A, X, f, g)
    return step1_bridge(sp, f, g, v, B, a, eps, within=X, tol=tol)


# -- common O-segment ----------------------------------------------------------


@dataclass
class DyadicOpenTable:
    """``entries[n][m]`` for ``1 <= m <= 2**n`` (index 0 holds the anchor ``D``)."""

    entries: list[list[IntervalSet]]
    r: list[np.ndarray]
    anchor_value: float

    @property
    def depth(self) -> int:
        return len(self.entries) - 1

    def finest(self) -> tuple[np.ndarray, list[IntervalSet]]:
        return self.r[-1][1:], self.entries[-1][1:]

    def mesh(self, n: int) -> float:
        return float(np.max(np.diff(self.r[n])))


@dataclass
class CommonOSegment:
    """``w = u ∘ beta^{-1}``: entries re-indexed by their measured ``mu_f``."""

    params: np.ndarray
    table: list[IntervalSet]
    r: np.ndarray
    anchor: IntervalSet
    open_table: DyadicOpenTable
    densities: tuple[Density, Density]

    def evaluate(self, t: float) -> IntervalSet:
        if t < self.params[0] - 1e-12 or t > self.params[-1] + 1e-12:
            raise RangeError(f"parameter {t} outside [{self.params[0]}, {self.params[-1]}]")
        j = max(0, int(np.searchsorted(self.params, t, side="right")) - 1)
        return self.table[j]

    def as_osegment(self) -> OSegment:
        return OSegment(self.params, self.table, lower=float(self.open_table.anchor_value))

    def calibration_errors(self) -> np.ndarray:
        f, g = self.densities
        return np.array([[integrate_over(f, s) - t, integrate_over(g, s) - t] for t, s in zip(self.params, self.table)])


def common_o_segment(
    sp: SpaceAdapter, f: Density, g: Density, D: Optional[IntervalSet] = None, depth: int = 6, tol: float = ROOT_TOL
) -> CommonOSegment:
    """Open family ``w`` on ``(mu_g(D), 1]`` with ``mu_f(w(t)) = mu_g(w(t)) = t`` and ``D ⊆ w(t)`` a.e.

    Level ``n + 1`` keeps the level-``n`` sets and inserts, between each
    consecutive pair, a bridge whose common value lands in
    ``[mid, mid + gap / (4**n + 1))``; the first slot bridges up from ``D``.
    The envelope over all levels is re-indexed by its ``mu_f`` values.
    """
    D = IntervalSet.empty() if D is None else D
    X = sp.universe
    if abs(sp.measure(X) - 1) > 1e-12:
        raise PreconditionError("the universe must have measure 1")
    for h in (f, g):
        if abs(integrate_over(h, X) - 1) > 1e-9:
            raise PreconditionError("both densities must integrate to 1 over the universe")
    if not D.issubset(X):
        raise ValidationError("D must lie inside the universe")
    rD = integrate_over(g, D)
    if abs(integrate_over(f, D) - rD) > 1e-9:
        raise PreconditionError("D must carry equal f- and g-mass")
    entries = [[D, X]]
    rs = [np.array([rD, 1.0])]
    for n in range(depth):
        prev, rp = entries[-1], rs[-1]
        nxt = [D]
        rn = [rD]
        for k in range(len(prev) - 1):
            B, top = prev[k], prev[k + 1]
            a = (rp[k] + rp[k + 1]) / 2
            eps = (rp[k + 1] - rp[k]) / (4**n + 1)
            br = bridge_within(sp, f, g, B, top, a, eps, tol)
            nxt += [br.U, top]
            rn += [integrate_over(g, br.U), rp[k + 1]]
        entries.append(nxt)
        rs.append(np.array(rn))
    table = DyadicOpenTable(entries, rs, rD)
    r, sets = table.finest()
    beta = np.array([integrate_over(f, s) for s in sets])
    if np.any(np.diff(beta) <= 0):
        raise ResolutionError("beta is not strictly increasing on the table")
    return CommonOSegment(beta, sets, r, D, table, (f, g))


# -- block space ---------------------------------------------------------------


class BlockSpace:
    """Blocks ``(2n, 2n+1)``, ``n = 1..N``, carrying ``lambda / 2**n``; opens are unions of whole blocks."""

    def __init__(self, N: int):
        if N < 1:
            raise RangeError("a block space needs at least one block")
        self.N = N
        self.weights = 0.5 ** np.arange(1, N + 1)

    @property
    def universe(self) -> IntervalSet:
        return IntervalSet.from_pairs([(2 * n, 2 * n + 1) for n in range(1, self.N + 1)], open=True)

    def open_set(self, blocks: Sequence[int]) -> IntervalSet:
        return IntervalSet.from_pairs([(2 * n, 2 * n + 1) for n in sorted(blocks)], open=True)

    def measure_blocks(self, blocks: Sequence[int]) -> float:
        return float(sum(self.weights[n - 1] for n in set(blocks)))

    def subset_sum_open(self, target: float) -> list[int]:
        """Greedy binary expansion: blocks whose weights sum to within ``2**-N`` below ``target``."""
        chosen, acc = [], 0.0
        for n in range(1, self.N + 1):
            w = self.weights[n - 1]
            if acc + w <= target:
                chosen.append(n)
                acc += w
        return chosen


def block_chain_gap(bs: BlockSpace, thresholds: Sequence[float]) -> float:
    """Largest jump of ``t -> mu(u(t))`` when block ``n`` enters whole at ``thresholds[n-1]``."""
    th = np.asarray(thresholds, float)
    if th.shape != (bs.N,):
        raise ValidationError(f"expected {bs.N} thresholds")
    _, inv = np.unique(th, return_inverse=True)
    jumps = np.bincount(inv, weights=bs.weights)
    return float(jumps.max())


def skipped_level(bs: BlockSpace, thresholds: Sequence[float]) -> float:
    """A measure value strictly inside the largest jump, which the chain never takes."""
    th = np.asarray(thresholds, float)
    uniq, inv = np.unique(th, return_inverse=True)
    jumps = np.bincount(inv, weights=bs.weights)
    j = int(np.argmax(jumps))
    before = float(jumps[:j].sum())
    return before + jumps[j] / 2


def block_demo_csv(N: int = 20, chains: int = 1000, seed: int = 0) -> str:
    """CSV rows ``order,max_jump`` for random entry orders (ties allowed) of ``N`` blocks."""
    bs = BlockSpace(N)
    rng = np.random.default_rng(seed)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["order", "max_jump"])
    for _ in range(chains):
        th = rng.integers(0, N, N)
        order = "-".join(str(n + 1) for n in np.argsort(th, kind="stable"))
        w.writerow([order, repr(block_chain_gap(bs, th))])
    return buf.getvalue()
