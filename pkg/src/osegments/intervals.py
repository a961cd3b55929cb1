"""Finite unions of disjoint real intervals."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import RangeError
from .kernels import GAP_EPS

_OPS = ("union", "intersect", "subtract", "symdiff")


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float
    lo_open: bool = False
    hi_open: bool = False

    def __post_init__(self):
        if math.isnan(self.lo) or math.isnan(self.hi):
            raise ValueError("interval endpoints cannot be NaN")
        if self.lo > self.hi:
            raise ValueError(f"interval goes backwards: {self.lo} > {self.hi}")
        if self.lo == self.hi and (self.lo_open or self.hi_open):
            raise ValueError("a degenerate interval must be closed at both ends")

    @property
    def length(self) -> float:
        return self.hi - self.lo

    def __str__(self):
        return f"{'(' if self.lo_open else '['}{_fmt(self.lo)},{_fmt(self.hi)}{')' if self.hi_open else ']'}"


def _fmt(x: float) -> str:
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(float(x))


class IntervalSet:
    """Immutable, normalized union of disjoint intervals.

    Parts are kept sorted, pairwise disjoint and separated by gaps of at least
    ``GAP_EPS``; anything closer is merged on construction. Endpoint flags are
    tracked for :attr:`is_open` but never change :meth:`measure`.
    """

    __slots__ = ("lo", "hi", "lo_open", "hi_open")

    def __init__(self, lo=(), hi=(), lo_open=None, hi_open=None, *, _normalized=False):
        lo = np.asarray(lo, dtype=float).reshape(-1)
        hi = np.asarray(hi, dtype=float).reshape(-1)
        lo_open = np.zeros(lo.shape, bool) if lo_open is None else np.asarray(lo_open, bool).reshape(-1)
        hi_open = np.zeros(lo.shape, bool) if hi_open is None else np.asarray(hi_open, bool).reshape(-1)
        if not (lo.shape == hi.shape == lo_open.shape == hi_open.shape):
            raise ValueError("endpoint arrays must have equal length")
        if not _normalized:
            lo, hi, lo_open, hi_open = _normalize(lo, hi, lo_open, hi_open)
        for arr in (lo, hi, lo_open, hi_open):
            arr.flags.writeable = False
        self.lo, self.hi, self.lo_open, self.hi_open = lo, hi, lo_open, hi_open

    # -- constructors -------------------------------------------------------
    @classmethod
    def empty(cls) -> IntervalSet:
        return cls()

    @classmethod
    def closed(cls, a: float, b: float) -> IntervalSet:
        return cls([a], [b])

    @classmethod
    def open(cls, a: float, b: float) -> IntervalSet:
        if a == b:
            return cls()
        return cls([a], [b], [True], [True])

    @classmethod
    def point(cls, x: float) -> IntervalSet:
        return cls([x], [x])

    @classmethod
    def from_intervals(cls, parts: Iterable[Interval]) -> IntervalSet:
        parts = list(parts)
        return cls(
            [p.lo for p in parts], [p.hi for p in parts], [p.lo_open for p in parts], [p.hi_open for p in parts]
        )

    @classmethod
    def from_pairs(cls, pairs: Sequence[tuple[float, float]], open: bool = False) -> IntervalSet:
        pairs = [(a, b) for a, b in pairs if not (open and a == b)]
        flags = [open] * len(pairs)
        return cls([a for a, _ in pairs], [b for _, b in pairs], flags, flags)

    @classmethod
    def from_arrays(cls, lo, hi, open: bool = False) -> IntervalSet:
        """Wrap already sorted, disjoint closed parts (kernel output) without re-normalizing."""
        lo = np.array(lo, dtype=float)
        hi = np.array(hi, dtype=float)
        flags = np.full(lo.shape, bool(open))
        return cls(lo, hi, flags, flags.copy(), _normalized=True)

    # -- basic properties ---------------------------------------------------
    @property
    def parts(self) -> tuple[Interval, ...]:
        return tuple(
            Interval(float(a), float(b), bool(x), bool(y))
            for a, b, x, y in zip(self.lo, self.hi, self.lo_open, self.hi_open)
        )

    def __len__(self):
        return self.lo.shape[0]

    def __bool__(self):
        return len(self) > 0

    def measure(self) -> float:
        return float(np.sum(self.hi - self.lo))

    @property
    def is_open(self) -> bool:
        return bool(np.all(self.lo_open) and np.all(self.hi_open))

    @property
    def bounds(self) -> tuple[float, float]:
        if not len(self):
            raise ValueError("empty set has no bounds")
        return float(self.lo[0]), float(self.hi[-1])

    def contains_point(self, x: float) -> bool:
        return bool(_point_membership(self, np.array([x]))[0])

    def issubset(self, other: IntervalSet) -> bool:
        """Containment by endpoint comparison; boundary flags (null sets) are ignored."""
        if not len(self):
            return True
        if not len(other):
            return False
        j = np.searchsorted(other.lo, self.lo, side="right") - 1
        if np.any(j < 0):
            return False
        return bool(np.all(other.hi[j] >= self.hi))

    def __eq__(self, other):
        if not isinstance(other, IntervalSet):
            return NotImplemented
        return (
            np.array_equal(self.lo, other.lo)
            and np.array_equal(self.hi, other.hi)
            and np.array_equal(self.lo_open, other.lo_open)
            and np.array_equal(self.hi_open, other.hi_open)
        )

    def __hash__(self):
        return hash((self.lo.tobytes(), self.hi.tobytes(), self.lo_open.tobytes(), self.hi_open.tobytes()))

    def __str__(self):
        if not len(self):
            return "∅"
        return " ∪ ".join(str(p) for p in self.parts)

    def __repr__(self):
        return f"IntervalSet({self})"

    # -- algebra ------------------------------------------------------------
    def boolean(self, other: IntervalSet, op: str) -> IntervalSet:
        return boolean(self, other, op)

    def __or__(self, other):
        return boolean(self, other, "union")

    def __and__(self, other):
        return boolean(self, other, "intersect")

    def __sub__(self, other):
        return boolean(self, other, "subtract")

    def __xor__(self, other):
        return boolean(self, other, "symdiff")

    def prefix(self, mass: float) -> IntervalSet:
        return prefix(self, mass)

    def interior(self) -> IntervalSet:
        return interior(self)

    def closure(self) -> IntervalSet:
        keep = self.hi >= self.lo
        return IntervalSet(self.lo[keep], self.hi[keep])

    def shift(self, dx: float) -> IntervalSet:
        return IntervalSet(self.lo + dx, self.hi + dx, self.lo_open, self.hi_open, _normalized=True)

    # -- serialization ------------------------------------------------------
    def to_json(self) -> list[dict]:
        return [
            {"lo": _num(p.lo), "hi": _num(p.hi), "lo_open": p.lo_open, "hi_open": p.hi_open} for p in self.parts
        ]

    @classmethod
    def from_json(cls, data) -> IntervalSet:
        parts = [
            Interval(_unnum(d["lo"]), _unnum(d["hi"]), bool(d.get("lo_open", False)), bool(d.get("hi_open", False)))
            for d in data
        ]
        return cls.from_intervals(parts)


def _num(x: float):
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def _unnum(x) -> float:
    if isinstance(x, str):
        return float(x)
    return float(x)


def _normalize(lo, hi, lo_open, hi_open):
    if lo.size == 0:
        return lo.copy(), hi.copy(), lo_open.copy(), hi_open.copy()
    if np.any(np.isnan(lo)) or np.any(np.isnan(hi)):
        raise ValueError("interval endpoints cannot be NaN")
    if np.any(lo > hi):
        raise ValueError("interval goes backwards")
    # an open-ended zero-length interval is empty
    keep = ~((lo == hi) & (lo_open | hi_open))
    lo, hi, lo_open, hi_open = lo[keep], hi[keep], lo_open[keep], hi_open[keep]
    # closed ends first when two parts start at the same point
    order = np.lexsort((lo_open, lo))
    lo, hi, lo_open, hi_open = lo[order], hi[order], lo_open[order], hi_open[order]
    out_lo, out_hi, out_lo_open, out_hi_open = [], [], [], []
    for a, b, ao, bo in zip(lo.tolist(), hi.tolist(), lo_open.tolist(), hi_open.tolist()):
        if out_lo and a - out_hi[-1] < GAP_EPS:
            if b > out_hi[-1]:
                out_hi[-1] = b
                out_hi_open[-1] = bo
            elif b == out_hi[-1]:
                out_hi_open[-1] = out_hi_open[-1] and bo
            continue
        out_lo.append(a)
        out_hi.append(b)
        out_lo_open.append(ao)
        out_hi_open.append(bo)
    return (
        np.array(out_lo, float),
        np.array(out_hi, float),
        np.array(out_lo_open, bool),
        np.array(out_hi_open, bool),
    )


def _point_membership(s: IntervalSet, x: np.ndarray) -> np.ndarray:
    if not len(s):
        return np.zeros(x.shape, bool)
    j = np.searchsorted(s.lo, x, side="right") - 1
    ok = j >= 0
    jj = np.where(ok, j, 0)
    lo, hi = s.lo[jj], s.hi[jj]
    inside = (lo < x) & (x < hi)
    at_lo = (x == lo) & ~s.lo_open[jj]
    at_hi = (x == hi) & ~s.hi_open[jj]
    return ok & (inside | at_lo | at_hi)


def _interior_membership(s: IntervalSet, x: np.ndarray) -> np.ndarray:
    if not len(s):
        return np.zeros(x.shape, bool)
    j = np.searchsorted(s.lo, x, side="right") - 1
    ok = j >= 0
    jj = np.where(ok, j, 0)
    return ok & (s.lo[jj] < x) & (x < s.hi[jj])


def _apply(op: str, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if op == "union":
        return a | b
    if op == "intersect":
        return a & b
    if op == "subtract":
        return a & ~b
    return a ^ b


def boolean(A: IntervalSet, B: IntervalSet, op: str) -> IntervalSet:
    """Set operation ``op`` in {union, intersect, subtract, symdiff}, endpoint flags included."""
    if op not in _OPS:
        raise ValueError(f"unknown set operation {op!r}")
    pts = np.unique(np.concatenate([A.lo, A.hi, B.lo, B.hi]))
    if pts.size == 0:
        return IntervalSet()
    pt_in = _apply(op, _point_membership(A, pts), _point_membership(B, pts))
    mids = 0.5 * (pts[:-1] + pts[1:])
    el_in = _apply(op, _interior_membership(A, mids), _interior_membership(B, mids))
    lo, hi, lo_open, hi_open = [], [], [], []
    start = None
    start_open = False
    n = pts.size
    for i in range(n):
        p = float(pts[i])
        if pt_in[i]:
            if start is None:
                start, start_open = p, False
        elif start is not None:
            lo.append(start), hi.append(p), lo_open.append(start_open), hi_open.append(True)
            start = None
        if i < n - 1:
            if el_in[i]:
                if start is None:
                    start, start_open = p, True
            elif start is not None:
                lo.append(start), hi.append(p), lo_open.append(start_open), hi_open.append(False)
                start = None
    if start is not None:
        # the run reaches the last breakpoint, which is itself a member
        lo.append(start), hi.append(float(pts[-1])), lo_open.append(start_open), hi_open.append(False)
    return IntervalSet(lo, hi, lo_open, hi_open)


def union_all(sets: Iterable[IntervalSet]) -> IntervalSet:
    sets = [s for s in sets if len(s)]
    if not sets:
        return IntervalSet()
    return IntervalSet(
        np.concatenate([s.lo for s in sets]),
        np.concatenate([s.hi for s in sets]),
        np.concatenate([s.lo_open for s in sets]),
        np.concatenate([s.hi_open for s in sets]),
    )


def measure(A: IntervalSet) -> float:
    return A.measure()


def prefix(A: IntervalSet, mass: float) -> IntervalSet:
    """Leftmost sub-union of ``A`` with Lebesgue measure ``mass``.

    Landing exactly on a part boundary includes the completed part and nothing
    further; a cut part ends closed at the cut.
    """
    total = A.measure()
    if mass < 0 or mass > total + 1e-12 * max(1.0, total):
        raise RangeError(f"prefix mass {mass} outside [0, {total}]")
    if mass <= 0:
        return IntervalSet()
    lengths = A.hi - A.lo
    cum = np.cumsum(lengths)
    j = int(np.searchsorted(cum, mass, side="left"))
    if j >= len(A):
        return A
    before = cum[j - 1] if j > 0 else 0.0
    cut = float(A.lo[j] + (mass - before))
    cut = min(cut, float(A.hi[j]))
    lo = A.lo[: j + 1].copy()
    hi = A.hi[: j + 1].copy()
    lo_open = A.lo_open[: j + 1].copy()
    hi_open = A.hi_open[: j + 1].copy()
    if cut < hi[j]:
        hi[j] = cut
        hi_open[j] = False
    if hi[j] == lo[j] and lo_open[j]:
        lo, hi, lo_open, hi_open = lo[:j], hi[:j], lo_open[:j], hi_open[:j]
    return IntervalSet(lo, hi, lo_open, hi_open, _normalized=True)


def interior(A: IntervalSet) -> IntervalSet:
    keep = A.hi > A.lo
    flags = np.ones(int(keep.sum()), bool)
    return IntervalSet(A.lo[keep], A.hi[keep], flags, flags.copy(), _normalized=True)
