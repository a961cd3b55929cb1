"""Signed piecewise-polynomial densities and the measures they induce."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy.special import comb

from . import kernels
from .errors import DomainError, ParseError, RangeError
from .intervals import IntervalSet

MAX_DEGREE = 3
_EPS_DOMAIN = 1e-12


def _to_local(coeffs: np.ndarray, b: float) -> np.ndarray:
    """Coefficients of ``p(b + y)`` in ``y`` given those of ``p(t)`` in ``t``."""
    out = np.zeros(MAX_DEGREE + 1)
    for k, ck in enumerate(coeffs):
        for j in range(k + 1):
            out[j] += ck * comb(k, j, exact=True) * b ** (k - j)
    return out


@dataclass(frozen=True, eq=False)
class Density:
    """``f(t) = sum_k coeffs[i][k] * t**k`` on ``[breaks[i], breaks[i+1])``.

    ``domain_hi`` is ``1.0`` for the finite case or ``math.inf``. On an
    infinite domain the density equals ``1 + tail / t**2`` past the last
    breakpoint (``tail = 0`` means identically one there).
    """

    breaks: np.ndarray
    coeffs: np.ndarray  # (pieces, 4), global power basis
    domain_hi: float = 1.0
    tail: float | None = None
    local: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        breaks = np.asarray(self.breaks, float)
        coeffs = np.atleast_2d(np.asarray(self.coeffs, float))
        if breaks.ndim != 1 or breaks.size < 2:
            raise ParseError("a density needs at least one piece")
        if np.any(np.diff(breaks) <= 0):
            raise ParseError("pieces must tile the domain in increasing order without gaps")
        if coeffs.shape[0] != breaks.size - 1:
            raise ParseError("one coefficient list per piece is required")
        if coeffs.shape[1] > MAX_DEGREE + 1:
            extra = coeffs[:, MAX_DEGREE + 1 :]
            if np.any(extra != 0):
                raise ParseError(f"polynomial degree above {MAX_DEGREE} is not supported")
            coeffs = coeffs[:, : MAX_DEGREE + 1]
        if coeffs.shape[1] < MAX_DEGREE + 1:
            coeffs = np.pad(coeffs, ((0, 0), (0, MAX_DEGREE + 1 - coeffs.shape[1])))
        if math.isinf(self.domain_hi):
            if self.tail is not None and breaks[-1] <= 0:
                raise ParseError("a tail needs a positive last breakpoint")
        else:
            if self.tail is not None:
                raise ParseError("tails are only allowed on [0, inf)")
            if abs(breaks[-1] - self.domain_hi) > _EPS_DOMAIN:
                raise ParseError("pieces must cover the whole bounded domain")
        object.__setattr__(self, "breaks", breaks)
        object.__setattr__(self, "coeffs", coeffs)
        local = np.array([_to_local(c, b) for c, b in zip(coeffs, breaks[:-1])])
        object.__setattr__(self, "local", local)

    # -- constructors -------------------------------------------------------
    @classmethod
    def constant(cls, value: float = 1.0, domain_hi: float = 1.0) -> Density:
        hi = 1.0 if math.isinf(domain_hi) else domain_hi
        return cls(np.array([0.0, hi]), np.array([[value]]), domain_hi, 0.0 if math.isinf(domain_hi) else None)

    @classmethod
    def polynomial(cls, coeffs: Sequence[float]) -> Density:
        return cls(np.array([0.0, 1.0]), np.array([list(coeffs)]))

    @classmethod
    def piecewise_constant(cls, breaks: Sequence[float], values: Sequence[float], domain_hi=None, tail=None) -> Density:
        breaks = np.asarray(breaks, float)
        hi = breaks[-1] if domain_hi is None else domain_hi
        return cls(breaks, np.asarray(values, float).reshape(-1, 1), hi, tail)

    # -- basic quantities ---------------------------------------------------
    @property
    def domain(self) -> tuple[float, float]:
        return float(self.breaks[0]), float(self.domain_hi)

    @property
    def has_tail(self) -> bool:
        return math.isinf(self.domain_hi)

    @property
    def degree(self) -> int:
        nz = np.nonzero(np.any(self.coeffs != 0, axis=0))[0]
        return int(nz[-1]) if nz.size else 0

    def __call__(self, t):
        t = np.asarray(t, float)
        i = np.clip(np.searchsorted(self.breaks, t, side="right") - 1, 0, len(self.breaks) - 2)
        y = t - self.breaks[i]
        c = self.local[i]
        val = c[..., 0] + y * (c[..., 1] + y * (c[..., 2] + y * c[..., 3]))
        if self.has_tail:
            tail = self.tail or 0.0
            past = t >= self.breaks[-1]
            with np.errstate(divide="ignore", invalid="ignore"):
                val = np.where(past, 1.0 + tail / np.where(past, t, 1.0) ** 2, val)
        else:
            val = np.where((t < self.breaks[0]) | (t > self.breaks[-1]), 0.0, val)
        return val

    def sup_abs(self) -> float:
        """``sup |f|`` over the domain, from piece endpoints and interior critical points."""
        best = 0.0
        for c, a, b in zip(self.local, self.breaks[:-1], self.breaks[1:]):
            ys = [0.0, b - a]
            deriv = np.array([c[1], 2 * c[2], 3 * c[3]])
            if np.any(deriv != 0):
                for r in np.roots(deriv[::-1]) if np.any(deriv[1:] != 0) else []:
                    if abs(r.imag) < 1e-12 and 0 < r.real < b - a:
                        ys.append(r.real)
            for y in ys:
                best = max(best, abs(c[0] + y * (c[1] + y * (c[2] + y * c[3]))))
        if self.has_tail:
            best = max(best, 1.0, abs(1.0 + (self.tail or 0.0) / self.breaks[-1] ** 2))
        return best

    def total(self) -> float:
        """``mu_f`` of the bounded domain (``[0, 1]``, or ``[0, last breakpoint]`` when unbounded)."""
        return float(self.cum[-1])

    @cached_property
    def cum(self) -> np.ndarray:
        lengths = np.diff(self.breaks)
        c = self.local
        y = lengths
        per = y * (c[:, 0] + y * (c[:, 1] / 2 + y * (c[:, 2] / 3 + y * c[:, 3] / 4)))
        return np.concatenate([[0.0], np.cumsum(per)])

    @cached_property
    def packed(self):
        return pack_family([self])

    def antiderivative(self, x) -> np.ndarray:
        """``mu_f([0, x])`` for an array of points in the domain."""
        x = np.asarray(x, float)
        b = self.breaks
        xc = np.minimum(np.maximum(x, b[0]), b[-1])
        i = np.minimum(np.maximum(np.searchsorted(b, xc, side="right") - 1, 0), len(b) - 2)
        y = xc - b[i]
        c = self.local[i]
        out = self.cum[i] + y * (c[..., 0] + y * (c[..., 1] / 2 + y * (c[..., 2] / 3 + y * c[..., 3] / 4)))
        if self.has_tail:
            beyond = x > b[-1]
            xb = np.where(beyond, x, b[-1])
            out = out + np.where(beyond, (xb - b[-1]) + (self.tail or 0.0) * (1.0 / b[-1] - 1.0 / xb), 0.0)
        return out

    def excess_integral(self) -> float:
        """``int (f - 1)`` over ``[0, inf)``; only defined for unbounded densities."""
        if not self.has_tail:
            raise DomainError("excess integral needs an unbounded density")
        b = self.breaks[-1]
        return float(self.cum[-1] - (b - self.breaks[0]) + (self.tail or 0.0) / b)

    # -- arithmetic ---------------------------------------------------------
    def scaled(self, factor: float) -> Density:
        if self.has_tail:
            raise DomainError("scaling an unbounded density breaks its tail form")
        return Density(self.breaks, self.coeffs * factor, self.domain_hi, self.tail)

    def shifted(self, value: float) -> Density:
        """``f + value``."""
        if self.has_tail:
            raise DomainError("shifting an unbounded density breaks its tail form")
        c = self.coeffs.copy()
        c[:, 0] += value
        return Density(self.breaks, c, self.domain_hi, self.tail)

    def is_constant_one(self) -> bool:
        if self.has_tail and (self.tail or 0.0) != 0.0:
            return False
        return bool(np.all(self.coeffs[:, 0] == 1.0) and np.all(self.coeffs[:, 1:] == 0.0))

    # -- serialization ------------------------------------------------------
    def to_json(self) -> dict:
        pieces = []
        for a, b, c in zip(self.breaks[:-1], self.breaks[1:], self.coeffs):
            deg = int(np.max(np.nonzero(c)[0])) if np.any(c) else 0
            pieces.append({"from": float(a), "to": float(b), "coeffs": [float(x) for x in c[: deg + 1]]})
        out = {"domain": [float(self.breaks[0]), "inf" if self.has_tail else float(self.domain_hi)], "pieces": pieces}
        if self.has_tail and self.tail:
            out["tail"] = {"c": float(self.tail)}
        return out

    @classmethod
    def from_json(cls, data: dict) -> Density:
        try:
            x0, x1 = data["domain"]
            domain_hi = math.inf if x1 in ("inf", "Infinity", math.inf) else float(x1)
            if float(x0) != 0.0:
                raise ParseError("domains must start at 0")
            pieces = data["pieces"]
            breaks = [float(pieces[0]["from"])]
            coeffs = []
            for p in pieces:
                if abs(float(p["from"]) - breaks[-1]) > _EPS_DOMAIN:
                    raise ParseError("pieces must tile the domain without gaps or overlaps")
                breaks.append(float(p["to"]))
                cs = [float(v) for v in p["coeffs"]]
                if len(cs) > MAX_DEGREE + 1:
                    raise ParseError(f"polynomial degree above {MAX_DEGREE} is not supported")
                coeffs.append(cs + [0.0] * (MAX_DEGREE + 1 - len(cs)))
            tail = data.get("tail")
            tail_c = float(tail["c"]) if tail is not None else (0.0 if math.isinf(domain_hi) else None)
        except ParseError:
            raise
        except (KeyError, TypeError, ValueError, IndexError) as exc:
            raise ParseError(f"malformed density: {exc}") from exc
        if breaks[0] != 0.0:
            raise ParseError("pieces must start at 0")
        return cls(np.array(breaks), np.array(coeffs), domain_hi, tail_c)


class DensityFamily(Sequence):
    """A non-empty finite list of densities over one domain, packed for the kernels."""

    def __init__(self, members: Sequence[Density]):
        members = list(members)
        if not members:
            raise ValueError("a density family cannot be empty")
        his = {m.domain_hi for m in members}
        if len(his) != 1:
            raise DomainError("all members must share a domain")
        self.members = members

    def __getitem__(self, i):
        if isinstance(i, slice):
            return DensityFamily(self.members[i])
        return self.members[i]

    def __len__(self):
        return len(self.members)

    @property
    def domain_hi(self) -> float:
        return self.members[0].domain_hi

    @cached_property
    def packed(self):
        return pack_family(self.members)

    @cached_property
    def supabs(self) -> np.ndarray:
        return np.array([m.sup_abs() for m in self.members])

    def measures(self, E: IntervalSet) -> np.ndarray:
        return np.array([integrate_over(m, E) for m in self.members])

    def measures_raw(self, lo, hi) -> np.ndarray:
        pk = self.packed
        return np.array([kernels.integrate_set(d, lo, hi, *pk) for d in range(len(self))])

    def to_json(self) -> list:
        return [m.to_json() for m in self.members]

    @classmethod
    def from_json(cls, data) -> DensityFamily:
        if isinstance(data, dict):
            data = data.get("densities", [data])
        if not isinstance(data, list):
            raise ParseError("expected a list of densities")
        return cls([Density.from_json(d) for d in data])


def pack_family(members: Sequence[Density]):
    n = len(members)
    P = max(len(m.breaks) - 1 for m in members)
    breaks = np.zeros((n, P + 1))
    coeffs = np.zeros((n, P, MAX_DEGREE + 1))
    npc = np.zeros(n, np.int64)
    cum = np.zeros((n, P + 1))
    tail = np.zeros(n)
    has_tail = np.zeros(n, np.bool_)
    for d, m in enumerate(members):
        p = len(m.breaks) - 1
        npc[d] = p
        breaks[d, : p + 1] = m.breaks
        breaks[d, p + 1 :] = m.breaks[-1]
        coeffs[d, :p] = m.local
        cum[d, : p + 1] = m.cum
        cum[d, p + 1 :] = m.cum[-1]
        has_tail[d] = m.has_tail
        tail[d] = m.tail or 0.0
    return breaks, coeffs, npc, cum, tail, has_tail


def integrate_over(f: Density, E: IntervalSet) -> float:
    """``mu_f(E)``: exact antiderivative differences over the parts of ``E``."""
    if len(E):
        lo, hi = f.domain
        if E.lo[0] < lo - _EPS_DOMAIN or E.hi[-1] > hi + _EPS_DOMAIN:
            raise DomainError(f"set {E} leaves the domain [{lo}, {hi}]")
    return float(kernels.integrate_set(0, np.ascontiguousarray(E.lo), np.ascontiguousarray(E.hi), *f.packed))


def normalize(S: DensityFamily | Sequence[Density]) -> DensityFamily:
    """Rescale a family on ``[0, 1]`` so every member has total 1 and ``1`` leads the list.

    A member with nonzero total is divided by it; one with total zero is
    replaced by ``f + 1``.
    """
    members = list(S)
    if any(f.has_tail for f in members):
        raise DomainError("normalize works on [0, 1] only")
    had_one = [f.is_constant_one() for f in members]
    out = []
    for f in members:
        tot = f.total()
        out.append(f.scaled(1.0 / tot) if abs(tot) > 1e-14 else f.shifted(1.0))
    if any(had_one):
        i = had_one.index(True)
        out.insert(0, out.pop(i))
    else:
        out.insert(0, Density.constant(1.0))
    return DensityFamily(out)


def difference(f: Density, g: Density) -> Density:
    """``f - g`` on the common refinement of both piece grids (bounded domains only)."""
    if f.has_tail or g.has_tail or f.domain_hi != g.domain_hi:
        raise DomainError("difference needs two densities on the same bounded domain")
    breaks = np.union1d(f.breaks, g.breaks)
    mids = 0.5 * (breaks[:-1] + breaks[1:])
    fi = np.clip(np.searchsorted(f.breaks, mids, side="right") - 1, 0, len(f.breaks) - 2)
    gi = np.clip(np.searchsorted(g.breaks, mids, side="right") - 1, 0, len(g.breaks) - 2)
    return Density(breaks, f.coeffs[fi] - g.coeffs[gi], f.domain_hi)


def _abs_mass_above(f: Density, M: float) -> float:
    """``int_{|f| > M} |f|`` computed piecewise by splitting at roots of ``f = ±M`` and ``f = 0``."""
    total = 0.0
    for c, a, b in zip(f.local, f.breaks[:-1], f.breaks[1:]):
        L = b - a
        cuts = {0.0, L}
        for shift in (M, -M, 0.0):
            poly = c.copy()
            poly[0] -= shift
            if np.any(poly[1:] != 0):
                for r in np.roots(np.trim_zeros(poly[::-1], "f")):
                    if abs(r.imag) < 1e-12 and 0 < r.real < L:
                        cuts.add(float(r.real))
        ys = sorted(cuts)
        anti = np.array([c[0], c[1] / 2, c[2] / 3, c[3] / 4])
        for y0, y1 in zip(ys[:-1], ys[1:]):
            ym = 0.5 * (y0 + y1)
            v = c[0] + ym * (c[1] + ym * (c[2] + ym * c[3]))
            if abs(v) > M:
                seg = y1 * np.polyval(anti[::-1], y1) - y0 * np.polyval(anti[::-1], y0)
                total += abs(seg)
    if f.has_tail and f.tail:
        # 1 + c/t^2 is monotone past the last breakpoint
        b, cc = f.breaks[-1], f.tail
        edge = abs(1.0 + cc / b**2)
        if edge > M:
            # |f| exceeds M on (b, t*) where f = ±M
            target = M if 1.0 + cc / b**2 > 0 else -M
            denom = target - 1.0
            t_star = math.sqrt(cc / denom) if denom != 0 and cc / denom > 0 else math.inf
            if math.isinf(t_star):
                return math.inf
            total += abs((t_star - b) - cc * (1.0 / t_star - 1.0 / b))
    return total


def ui_delta(S: DensityFamily | Sequence[Density], eps: float) -> float:
    """``delta`` with ``mu(A) < delta  =>  int_A |f| < eps`` for every member.

    Doubles a truncation level ``M`` until ``int_{|f| > M} |f| < eps/2`` holds for
    the whole family, then returns ``eps / (4 M)``.
    """
    if not eps > 0:
        raise RangeError("eps must be positive")
    M = 1.0
    for _ in range(200):
        if all(_abs_mass_above(f, M) < eps / 2 for f in S):
            return eps / (4 * M)
        M *= 2.0
    raise RangeError("could not bound the family's truncated mass")


def riemann_oracle(f: Density, E: IntervalSet, n_samples: int) -> float:
    """Midpoint rule with ``n_samples`` equal cells laid end to end along ``E``."""
    if n_samples < 1:
        raise RangeError("n_samples must be at least 1")
    total = E.measure()
    if total == 0:
        return 0.0
    h = total / n_samples
    s = (np.arange(n_samples) + 0.5) * h
    starts = np.concatenate([[0.0], np.cumsum(E.hi - E.lo)])
    j = np.clip(np.searchsorted(starts, s, side="right") - 1, 0, len(E) - 1)
    x = E.lo[j] + (s - starts[j])
    return float(np.sum(f(x)) * h)
