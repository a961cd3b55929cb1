"""Common segments on finite measure spaces by recursive chord halving.

A block ``D = u(b) \\ u(a)`` of the segment under construction is halved by
building a common segment ``v`` for all but the last density on ``D``,
finding a universal chord ``[c, c + 1/2]`` for the last density along ``v``,
and assigning ``v(c + 1/2) \\ v(c)`` to the first half of the parameter range.
One density (Lebesgue) is the base case: ``v`` is the left-to-right prefix.
The per-block work lives in :func:`osegments.kernels.split_block`.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .density import Density, DensityFamily, integrate_over
from .errors import CapacityError, RangeError, ResolutionError, ValidationError
from .intervals import IntervalSet, prefix

MAX_FAMILY = 4
MAX_DEPTH = 14
DEFAULT_TOL = 1e-9


def _family(S) -> DensityFamily:
    return S if isinstance(S, DensityFamily) else DensityFamily(list(S))


def _arrays(X: IntervalSet):
    return np.ascontiguousarray(X.lo, dtype=float), np.ascontiguousarray(X.hi, dtype=float)


def _check_caps(S: DensityFamily, depth: int):
    if len(S) > MAX_FAMILY:
        raise CapacityError(f"family of {len(S)} densities exceeds the cap of {MAX_FAMILY}", required=len(S))
    if depth < 0 or depth > MAX_DEPTH:
        raise CapacityError(f"depth {depth} outside [0, {MAX_DEPTH}]", required=depth)


def _check_leading_one(S: DensityFamily):
    if not S[0].is_constant_one():
        raise ValidationError("the family must start with the constant density 1 (see density.normalize)")


@dataclass
class DyadicSegment:
    """``table[m]`` is the set at parameter ``m / 2**depth``."""

    depth: int
    table: list[IntervalSet]
    universe: IntervalSet
    densities: DensityFamily
    meta: dict = field(default_factory=dict)

    @property
    def size(self) -> int:
        return 1 << self.depth

    def grid(self) -> np.ndarray:
        return np.arange(self.size + 1) / self.size

    def __getitem__(self, m: int) -> IntervalSet:
        return self.table[m]

    def measures(self) -> np.ndarray:
        """``mu[m, i] = mu_{f_i}(table[m])``, recomputed from the sets."""
        return np.array([[integrate_over(f, s) for f in self.densities] for s in self.table])

    def targets(self) -> np.ndarray:
        totals = np.array([integrate_over(f, self.universe) for f in self.densities])
        return np.outer(self.grid(), totals)

    def max_error(self) -> float:
        return float(np.max(np.abs(self.measures() - self.targets())))

    def to_jsonl(self, fp=None) -> str:
        mu = self.measures()
        lines = [
            json.dumps({"t": m / self.size, "set": s.to_json(), "mu": [float(x) for x in mu[m]]}, sort_keys=True)
            for m, s in enumerate(self.table)
        ]
        text = "\n".join(lines) + "\n"
        if fp is not None:
            fp.write(text)
        return text


@dataclass
class PartialSegment:
    """A segment known only on the finite parameter set ``lam`` (which contains 0 and 1)."""

    lam: list[float]
    map: dict[float, IntervalSet]

    def __post_init__(self):
        self.lam = sorted(float(t) for t in self.lam)
        if not self.lam or self.lam[0] != 0.0 or self.lam[-1] != 1.0:
            raise ValidationError("a partial segment's parameter set must contain 0 and 1")
        missing = [t for t in self.lam if t not in self.map]
        if missing:
            raise ValidationError(f"no set given for parameters {missing}")


class LazySegment:
    """Common segment of a family on ``D``, refined only where it is queried.

    Node ``(level, i)`` is the block between parameters ``i/2**level`` and
    ``(i+1)/2**level``. At non-dyadic parameters the descent stops once taking
    the same fraction of every part of the block (after cutting it at the
    densities' breakpoints) is calibrated to within ``leaf_eps``.
    """

    def __init__(self, S: DensityFamily, D: IntervalSet, tol: float = DEFAULT_TOL, leaf_eps: float | None = None):
        self.S = _family(S)
        _check_leading_one(self.S)
        self.D = D
        self.tol = tol
        self.leaf_eps = tol if leaf_eps is None else leaf_eps
        self.k = len(self.S)
        self._pk = self.S.packed
        self._sup = np.ascontiguousarray(self.S.supabs, dtype=float)
        self._m = max(1.0, float(np.max(self._sup[1:]))) if self.k > 1 else 1.0
        self._nodes = {(0, 0): _arrays(D)}

    def node(self, level: int, i: int):
        key = (level, i)
        if key not in self._nodes:
            plo, phi_ = self.node(level - 1, i // 2)
            c, wlo, whi = kernels.split_block(
                self.k, plo, phi_, *self._pk, self._sup, self.tol, self.leaf_eps
            )
            if c < 0:
                raise ResolutionError(f"chord search failed on block ({level - 1}, {i // 2})")
            rlo, rhi = kernels.subtract_parts(plo, phi_, wlo, whi)
            self._nodes[(level, 2 * (i // 2))] = (wlo, whi)
            self._nodes[(level, 2 * (i // 2) + 1)] = (rlo, rhi)
        return self._nodes[key]

    def _leaf(self, lo, hi):
        b, c, npc, _, tail, has_tail = self._pk
        rlo, rhi = kernels.refine_parts(self.k, lo, hi, b, npc)
        return rlo, rhi, kernels.proportional_bound(self.k, rlo, rhi, b, c, npc, tail, has_tail)

    def node_set(self, level: int, i: int) -> IntervalSet:
        return IntervalSet.from_arrays(*self.node(level, i))

    def level_table(self, depth: int) -> list[IntervalSet]:
        pieces_lo, pieces_hi = [], []
        table = [IntervalSet.empty()]
        acc_lo = np.empty(0)
        acc_hi = np.empty(0)
        for i in range(1 << depth):
            lo, hi = self.node(depth, i)
            acc_lo, acc_hi = kernels.merge_parts(np.concatenate([acc_lo, lo]), np.concatenate([acc_hi, hi]))
            table.append(IntervalSet.from_arrays(acc_lo, acc_hi))
        table[-1] = self.D
        return table

    def at(self, s: float) -> IntervalSet:
        if not 0.0 <= s <= 1.0:
            raise RangeError(f"parameter {s} outside [0, 1]")
        if s == 1.0:
            return self.D
        if self.k == 1:
            return prefix(self.D, s * self.D.measure())
        los, his = [], []
        level, i, frac = 0, 0, s
        while True:
            lo, hi = self.node(level, i)
            if frac == 0.0:
                break
            length = float(np.sum(hi - lo))
            rlo, rhi, bound = self._leaf(lo, hi)
            if level >= 200 or length * self._m <= self.leaf_eps or bound <= self.leaf_eps:
                cl, ch = kernels.proportional_cut(rlo, rhi, 0.0, frac)
                los.append(cl), his.append(ch)
                break
            frac *= 2.0
            if frac >= 1.0:
                wl, wh = self.node(level + 1, 2 * i)
                los.append(wl), his.append(wh)
                frac -= 1.0
                i = 2 * i + 1
            else:
                i = 2 * i
            level += 1
        if not los:
            return IntervalSet.empty()
        return IntervalSet.from_arrays(*kernels.merge_parts(np.concatenate(los), np.concatenate(his)))


def lebesgue_segment(X: IntervalSet, depth: int) -> DyadicSegment:
    """``table[m] = prefix(X, m/2**depth * measure(X))``."""
    _check_caps(DensityFamily([Density.constant()]), depth)
    n = 1 << depth
    total = X.measure()
    if total == 0:
        return DyadicSegment(depth, [X] * (n + 1), X, DensityFamily([Density.constant()]), {"trivial": True})
    table = [prefix(X, total * m / n) for m in range(n)] + [X]
    return DyadicSegment(depth, table, X, DensityFamily([Density.constant()]))


def common_segment(
    S, X: IntervalSet, depth: int, tol: float = DEFAULT_TOL, leaf_eps: float | None = None
) -> DyadicSegment:
    """Dyadic common segment of the family ``S`` (leading density ``1``) on ``X``.

    Every grid set ``table[m]`` satisfies ``mu_f(table[m]) ~ m/2**depth * mu_f(X)``
    for all members, with per-halving error at most ``tol`` (chord) plus
    ``leaf_eps`` (inner interpolation, defaults to ``tol``).
    """
    S = _family(S)
    _check_caps(S, depth)
    _check_leading_one(S)
    if len(S) == 1:
        seg = lebesgue_segment(X, depth)
        seg.densities = S
        return seg
    n = 1 << depth
    if X.measure() == 0:
        return DyadicSegment(depth, [X] * (n + 1), X, S, {"trivial": True})
    lazy = LazySegment(S, X, tol, leaf_eps)
    table = lazy.level_table(depth)
    return DyadicSegment(depth, table, X, S, {"tol": tol, "leaf_eps": lazy.leaf_eps})


def evaluate(seg: DyadicSegment, t: float) -> IntervalSet:
    """Right-continuous step evaluation: the grid set at ``floor(t * 2**depth)``."""
    if not 0.0 <= t <= 1.0:
        raise RangeError(f"parameter {t} outside [0, 1]")
    return seg.table[int(math.floor(t * seg.size))]


def _check_partial(p: PartialSegment, S: DensityFamily, tol: float):
    sets = [p.map[t] for t in p.lam]
    if len(sets[0]):
        raise ValidationError("a partial segment must start at the empty set")
    X = sets[-1]
    totals = S.measures(X)
    for (t0, a), (t1, b) in zip(zip(p.lam, sets), zip(p.lam[1:], sets[1:])):
        if not a.issubset(b):
            raise ValidationError(f"sets at {t0} and {t1} are not nested")
    for t, s in zip(p.lam, sets):
        err = np.max(np.abs(S.measures(s) - t * totals))
        if err > tol:
            raise ValidationError(f"set at {t} is off calibration by {err:.3g}")


def extend_partial(
    p: PartialSegment, S, depth: int, tol: float = DEFAULT_TOL, check_tol: float = 1e-7
) -> DyadicSegment:
    """Complete a partial segment on the dyadic grid, keeping its known sets.

    Each gap ``(a, b)`` of the parameter set gets its own common segment on
    ``u(b) \\ u(a)``; grid points inside the gap read it at ``(t - a)/(b - a)``.
    """
    S = _family(S)
    _check_caps(S, depth)
    _check_leading_one(S)
    _check_partial(p, S, check_tol)
    n = 1 << depth
    lam = p.lam
    gaps = {}
    table = []
    for m in range(n + 1):
        t = m / n
        if t in p.map:
            table.append(p.map[t])
            continue
        j = int(np.searchsorted(lam, t, side="right")) - 1
        a, b = lam[j], lam[j + 1]
        if j not in gaps:
            D = p.map[b] - p.map[a]
            gaps[j] = LazySegment(S, D, tol) if D.measure() > 0 else None
        lazy = gaps[j]
        inner = IntervalSet.empty() if lazy is None else lazy.at((t - a) / (b - a))
        table.append(p.map[a] | inner)
    return DyadicSegment(depth, table, p.map[1.0], S, {"extended_from": lam})


def induced_segment(seg: DyadicSegment, Y: IntervalSet) -> DyadicSegment:
    """Lebesgue segment of ``Y`` read off ``v(s) = Y ∩ u(s)``.

    ``w(t)`` is the largest ``v(s)`` with ``measure(v(s)) <= t * measure(Y)``,
    topped up with a prefix of the next increment so the calibration is exact.
    """
    one = DensityFamily([Density.constant()])
    n = seg.size
    lam_y = Y.measure()
    if lam_y == 0:
        return DyadicSegment(seg.depth, [Y] * (n + 1), Y, one, {"trivial": True})
    if not Y.issubset(seg.universe):
        raise ValidationError("Y must lie inside the segment's universe")
    v = [Y & s for s in seg.table]
    fv = np.array([s.measure() for s in v])
    table = []
    for m in range(n + 1):
        target = m / n * lam_y
        j = int(np.searchsorted(fv, target + 1e-15 * lam_y, side="right")) - 1
        j = max(0, min(j, n))
        w = v[j]
        short = target - fv[j]
        if short > 0 and j < n:
            w = w | prefix(v[j + 1] - v[j], min(short, (v[j + 1] - v[j]).measure()))
        table.append(w)
    table[-1] = Y
    return DyadicSegment(seg.depth, table, Y, one)


@dataclass
class SegmentReport:
    max_error: list[float]
    nesting_violations: list[int]
    starts_empty: bool
    ends_at_universe: bool

    @property
    def worst(self) -> float:
        return max(self.max_error) if self.max_error else 0.0

    def ok(self, tol: float) -> bool:
        return not self.nesting_violations and self.starts_empty and self.ends_at_universe and self.worst <= tol


def verify_segment(seg: DyadicSegment) -> SegmentReport:
    mu = seg.measures()
    err = np.max(np.abs(mu - seg.targets()), axis=0)
    bad = [m for m in range(seg.size) if not seg.table[m].issubset(seg.table[m + 1])]
    return SegmentReport(
        [float(e) for e in err],
        bad,
        seg.table[0].measure() == 0,
        seg.table[-1] == seg.universe,
    )
