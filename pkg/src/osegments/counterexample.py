"""A countable family of densities with no common half-measure set.

``f_pq(p, q)`` equals ``q`` on ``I(p, q) = [(2p-1)/2q, (2p+1)/2q]`` and zero
elsewhere on ``[0, 1]``. A set ``E`` with ``mu_f(E) = 1/2`` for every member
would need ``|E ∩ I(p, q)| = 1/(2q)`` for all ``p < q``. Near a point of
density of ``E`` this is impossible: on an interval ``(a, b)`` where ``E``
fills more than three quarters, the equalities cap ``|E ∩ (a, b)|`` at
``(b - a)/2 + 3/(2q)``, which drops below ``(3/4)(b - a)`` once
``q > 6/(b - a)``. :func:`refute_half_set` finds such an interval and reports
the index that breaks.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .density import Density
from .errors import CapacityError, DomainError, PreconditionError, RangeError, ValidationError
from .intervals import IntervalSet
from .oseg import IntervalSpace

VIOLATION_TOL = 1e-9
DENSITY_LEVEL = 0.75
SEARCH_RATIO = 0.8


def index_interval(p: int, q: int) -> tuple[float, float]:
    if not (isinstance(p, (int, np.integer)) and isinstance(q, (int, np.integer))):
        raise RangeError("p and q must be integers")
    if not 0 < p < q:
        raise RangeError(f"need 0 < p < q, got p={p}, q={q}")
    return (2 * p - 1) / (2 * q), (2 * p + 1) / (2 * q)


def f_pq(p: int, q: int) -> Density:
    """Height ``q`` on ``I(p, q)``, zero elsewhere; total mass one."""
    lo, hi = index_interval(p, q)
    return Density.piecewise_constant([0.0, lo, hi, 1.0], [0.0, float(q), 0.0])


def fpq_family(q_max: int) -> list[tuple[int, int]]:
    return [(p, q) for q in range(2, q_max + 1) for p in range(1, q)]


# -- intervals where a set is dense -------------------------------------------


def _densest_run(E: IntervalSet, r: float) -> tuple[float, float]:
    # longest hull of consecutive parts in which E still fills at least r
    lo, hi = E.lo, E.hi
    cum = np.concatenate([[0.0], np.cumsum(hi - lo)])
    best, best_len = (float(lo[0]), float(hi[0])), -1.0
    n = len(lo)
    for i in range(n):
        span = hi[i:] - lo[i]
        filled = cum[i + 1 : n + 1] - cum[i]
        ok = np.nonzero(filled >= r * span)[0]
        if ok.size:
            j = int(ok[-1])
            if span[j] > best_len + 1e-15:
                best, best_len = (float(lo[i]), float(hi[i + j])), float(span[j])
    return best


def dense_interval(
    E: IntervalSet, r: float, mode: str = "exact", seed: int = 0, eps: Optional[float] = None
) -> tuple[float, float]:
    """An open interval ``J`` with ``|E ∩ J| >= r |J|``.

    ``mode="fuzzed"`` follows the covering argument: dilate ``E`` to an open
    ``U`` with ``|U \\ E| < (1 - r)|E|``; some component of ``U`` must then be
    dense enough, and the first one found is returned. ``mode="exact"``
    returns the longest hull of consecutive parts of ``E`` that is dense
    enough, which is at least as long as the longest part.
    """
    if not 0 < r < 1:
        raise RangeError("the density ratio must lie in (0, 1)")
    m = E.measure()
    if m <= 0:
        raise PreconditionError("a null set has no point of density")
    if mode == "exact":
        return _densest_run(E, r)
    if mode != "fuzzed":
        raise ValidationError(f"unknown mode {mode!r}")
    budget = (1.0 - r) * m if eps is None else eps
    if not 0 < budget <= (1.0 - r) * m:
        raise RangeError("the cover slack must lie in (0, (1 - r) |E|]")
    lo, hi = E.bounds
    space = IntervalSpace(IntervalSet.open(lo - 1.0, hi + 1.0), mode="fuzzed", seed=seed)
    U = space.approx_open(E, budget)
    for a, b in zip(U.lo, U.hi):
        if (E & IntervalSet.open(a, b)).measure() >= r * (b - a):
            return float(a), float(b)
    raise AssertionError("no component of the cover is dense enough")  # excluded by the measure count


# -- refutation certificates --------------------------------------------------


@dataclass
class RefutationCertificate:
    """Violated indices plus the interval that forces them.

    ``kind="chain"``: ``q`` is the least integer above ``6/(b - a)`` and the
    bound ``lhs < rhs`` is evaluated at ``q``. ``kind="scan"``: that ``q``
    exceeded the cap, so the smallest violated ``q`` up to the cap was found
    by direct search; the bound is still reported at the forcing ``q``.
    ``kind="null"``: ``E`` has measure zero.
    """

    interval: tuple[float, float]
    q: int
    violations: list[dict]
    bound_lhs: float
    bound_rhs: float
    kind: str = "chain"
    meta: dict = field(default_factory=dict)

    @property
    def trivial(self) -> bool:
        return self.kind == "null"

    def to_json(self) -> dict:
        out = {
            "interval": [self.interval[0], self.interval[1]],
            "q": self.q,
            "violations": self.violations,
            "bound": {"lhs": self.bound_lhs, "rhs": self.bound_rhs},
            "kind": self.kind,
        }
        if "cell" in self.meta:
            out["cell"] = self.meta["cell"]
        return out


def _cum_measure(E: IntervalSet, x: np.ndarray) -> np.ndarray:
    # |E ∩ (-inf, x]|
    lo, hi = E.lo, E.hi
    full = np.concatenate([[0.0], np.cumsum(hi - lo)])
    i = np.searchsorted(lo, x, side="right")
    last = np.maximum(i - 1, 0)
    part = np.where(i > 0, np.clip(x - lo[last], 0.0, (hi - lo)[last]), 0.0)
    return full[np.maximum(i - 1, 0)] * (i > 0) + part


def _measured(E: IntervalSet, p: np.ndarray, q: int) -> np.ndarray:
    if not len(E):
        return np.zeros(p.shape)
    lo, hi = (2 * p - 1) / (2 * q), (2 * p + 1) / (2 * q)
    return _cum_measure(E, hi) - _cum_measure(E, lo)


def _forcing_q(a: float, b: float) -> int:
    return max(math.floor(6.0 / (b - a)) + 1, 2)


def _bound(q: int, a: float, b: float) -> tuple[float, float]:
    return (b - a) / 2 + 3 / (2 * q), DENSITY_LEVEL * (b - a)


def _violations(E: IntervalSet, q: int, p: np.ndarray, tol: float) -> list[dict]:
    expected = 1.0 / (2 * q)
    got = _measured(E, p, q)
    bad = np.nonzero(np.abs(got - expected) > tol)[0]
    return [{"p": int(p[i]), "q": int(q), "measured": float(got[i]), "expected": expected} for i in bad]


def _null(E: IntervalSet) -> RefutationCertificate:
    lo, hi = index_interval(1, 2)
    got = float(_measured(E, np.array([1]), 2)[0])
    return RefutationCertificate(
        (lo, hi), 2, [{"p": 1, "q": 2, "measured": got, "expected": 0.25}], got, 0.25, kind="null"
    )


def refute_half_set(
    E: IntervalSet,
    q_max: int = 1024,
    mode: str = "exact",
    seed: int = 0,
    tol: float = VIOLATION_TOL,
    periodic: bool = False,
) -> RefutationCertificate:
    """Index ``(p, q)`` at which ``|E ∩ I(p, q)|`` differs from ``1/(2q)``.

    With ``periodic=True``, ``E`` may live on ``[0, K]``; each unit cell is
    shifted back to ``[0, 1]`` and the first refutable cell is reported
    (the densities are then read modulo one).
    """
    if periodic:
        return _refute_periodic(E, q_max, mode, seed, tol)
    if len(E):
        lo, hi = E.bounds
        if lo < 0 or hi > 1:
            raise DomainError("the candidate set must lie in [0, 1]")
    if E.measure() <= 0:
        return _null(E)
    a, b = dense_interval(E, SEARCH_RATIO, mode, seed)
    q = _forcing_q(a, b)
    lhs, rhs = _bound(q, a, b)
    if q <= q_max:
        p = np.arange(max(1, math.ceil(q * a)), min(q - 1, math.floor(q * b)) + 1)
        violations = _violations(E, q, p, tol)
        if not violations:
            raise AssertionError("the bound chain forces a violation")  # |E ∩ (a, b)| > 3/4 (b - a)
        return RefutationCertificate((a, b), q, violations, lhs, rhs)
    for qq in range(2, q_max + 1):
        violations = _violations(E, qq, np.arange(1, qq), tol)
        if violations:
            return RefutationCertificate((a, b), qq, violations, lhs, rhs, kind="scan")
    raise CapacityError(
        f"the dense interval ({a:.6g}, {b:.6g}) needs q >= {q} but q_max = {q_max}", required=q
    )


def _refute_periodic(E: IntervalSet, q_max: int, mode: str, seed: int, tol: float) -> RefutationCertificate:
    if not len(E):
        return _null(E)
    lo, hi = E.bounds
    if lo < 0:
        raise DomainError("periodic candidates live on [0, inf)")
    need = None
    for k in range(int(math.floor(lo)), int(math.ceil(hi))):
        cell = (E & IntervalSet.closed(k, k + 1)).shift(-k)
        if cell.measure() <= 0:
            continue
        try:
            cert = refute_half_set(cell, q_max, mode, seed, tol)
        except CapacityError as e:
            need = e.required if need is None else min(need, e.required)
            continue
        cert.meta["cell"] = k
        return cert
    if need is not None:
        raise CapacityError(f"no unit cell refutable with q_max = {q_max}; need q >= {need}", required=need)
    return _null(IntervalSet.empty())


def validate_certificate(cert: RefutationCertificate, E: IntervalSet, tol: float = VIOLATION_TOL) -> bool:
    """Recompute every recorded quantity from ``E`` alone, using plain set algebra."""
    k = cert.meta.get("cell", 0)
    if k:
        E = (E & IntervalSet.closed(k, k + 1)).shift(-k)
    if not cert.violations:
        return False
    for v in cert.violations:
        lo, hi = index_interval(v["p"], v["q"])
        got = (E & IntervalSet.closed(lo, hi)).measure()
        if v["q"] != cert.q or abs(got - v["measured"]) > 1e-12 or abs(got - 1.0 / (2 * v["q"])) <= tol:
            return False
    if cert.kind == "null":
        return E.measure() <= 0 and cert.bound_lhs < cert.bound_rhs
    a, b = cert.interval
    if not (E & IntervalSet.open(a, b)).measure() > DENSITY_LEVEL * (b - a):
        return False
    forcing = _forcing_q(a, b)
    if cert.kind == "chain" and cert.q != forcing:
        return False
    if cert.kind == "scan" and cert.q >= forcing:
        return False
    lhs, rhs = _bound(forcing, a, b)
    return abs(lhs - cert.bound_lhs) <= 1e-12 and abs(rhs - cert.bound_rhs) <= 1e-12 and lhs < rhs
