"""Hot numeric kernels.

Sets are passed as two sorted float arrays ``lo``/``hi`` of disjoint closed
parts. A density family is packed into padded arrays (see
:func:`osegments.density.pack_family`):

``breaks[d, :npc[d]+1]``
    breakpoints of density ``d``
``coeffs[d, i, :]``
    local polynomial coefficients of piece ``i`` in ``y = t - breaks[d, i]``
``cum[d, i]``
    integral of density ``d`` from ``breaks[d, 0]`` to ``breaks[d, i]``
``tail[d]``, ``has_tail[d]``
    ``f(t) = 1 + tail/t**2`` past the last breakpoint when ``has_tail``

All functions here are decorated with :func:`optional_njit`; with numba
disabled they run as ordinary Python.
"""
import numpy as np

from ._jit import optional_njit

GAP_EPS = 1e-13
MAX_BISECT_DEPTH = 60


@optional_njit(cache=True)
def phi(d, x, breaks, coeffs, npc, cum, tail, has_tail):
    """Antiderivative of density ``d`` at ``x``, anchored at its first breakpoint."""
    n = npc[d]
    if x <= breaks[d, 0]:
        return 0.0
    b_end = breaks[d, n]
    if x >= b_end:
        if has_tail[d]:
            return cum[d, n] + (x - b_end) + tail[d] * (1.0 / b_end - 1.0 / x)
        return cum[d, n]
    i = np.searchsorted(breaks[d, : n + 1], x, side="right") - 1
    y = x - breaks[d, i]
    c = coeffs[d, i]
    return cum[d, i] + y * (c[0] + y * (c[1] / 2.0 + y * (c[2] / 3.0 + y * c[3] / 4.0)))


@optional_njit(cache=True)
def integrate_set(d, lo, hi, breaks, coeffs, npc, cum, tail, has_tail):
    total = 0.0
    for j in range(lo.shape[0]):
        total += phi(d, hi[j], breaks, coeffs, npc, cum, tail, has_tail) - phi(
            d, lo[j], breaks, coeffs, npc, cum, tail, has_tail
        )
    return total


@optional_njit(cache=True)
def arc_starts(lo, hi):
    out = np.empty(lo.shape[0] + 1)
    out[0] = 0.0
    for j in range(lo.shape[0]):
        out[j + 1] = out[j] + (hi[j] - lo[j])
    return out


@optional_njit(cache=True)
def arc_point(lo, hi, starts, s):
    """Map arc length ``s`` (measured left to right through the parts) to a part index and a position."""
    m = lo.shape[0]
    if m == 0:
        return 0, 0.0
    j = np.searchsorted(starts[:m], s, side="right") - 1
    if j < 0:
        j = 0
    x = lo[j] + (s - starts[j])
    if x > hi[j]:
        x = hi[j]
    return j, x


@optional_njit(cache=True)
def arc_cut(lo, hi, s0, s1):
    """Sub-set of the parts lying between arc positions ``s0 <= s1``."""
    starts = arc_starts(lo, hi)
    m = lo.shape[0]
    olo = np.empty(m + 1)
    ohi = np.empty(m + 1)
    k = 0
    for j in range(m):
        a = starts[j]
        b = starts[j + 1]
        if b <= s0 or a >= s1:
            continue
        x0 = lo[j] + (s0 - a) if s0 > a else lo[j]
        x1 = lo[j] + (s1 - a) if s1 < b else hi[j]
        if x1 > hi[j]:
            x1 = hi[j]
        if x1 > x0:
            olo[k] = x0
            ohi[k] = x1
            k += 1
    return olo[:k].copy(), ohi[:k].copy()


@optional_njit(cache=True)
def prefix_measure(d, lo, hi, starts, partial, s, breaks, coeffs, npc, cum, tail, has_tail):
    """Measure of density ``d`` over the leftmost arc-length ``s`` of the set.

    ``partial[j]`` must hold the density's integral over parts ``0..j-1``.
    """
    if lo.shape[0] == 0:
        return 0.0
    j, x = arc_point(lo, hi, starts, s)
    return partial[j] + phi(d, x, breaks, coeffs, npc, cum, tail, has_tail) - phi(
        d, lo[j], breaks, coeffs, npc, cum, tail, has_tail
    )


@optional_njit(cache=True)
def partial_integrals(d, lo, hi, breaks, coeffs, npc, cum, tail, has_tail):
    out = np.empty(lo.shape[0] + 1)
    out[0] = 0.0
    for j in range(lo.shape[0]):
        out[j + 1] = out[j] + phi(d, hi[j], breaks, coeffs, npc, cum, tail, has_tail) - phi(
            d, lo[j], breaks, coeffs, npc, cum, tail, has_tail
        )
    return out


@optional_njit(cache=True)
def merge_parts(lo, hi):
    """Sort parts and merge overlapping ones or ones separated by less than ``GAP_EPS``."""
    m = lo.shape[0]
    if m == 0:
        return lo.copy(), hi.copy()
    order = np.argsort(lo, kind="mergesort")
    olo = np.empty(m)
    ohi = np.empty(m)
    k = 0
    for idx in range(m):
        j = order[idx]
        a = lo[j]
        b = hi[j]
        if k > 0 and a - ohi[k - 1] < GAP_EPS:
            if b > ohi[k - 1]:
                ohi[k - 1] = b
        else:
            olo[k] = a
            ohi[k] = b
            k += 1
    return olo[:k].copy(), ohi[:k].copy()


@optional_njit(cache=True)
def subtract_parts(alo, ahi, blo, bhi):
    """``A \\ B`` for sorted disjoint part arrays; slivers shorter than ``GAP_EPS`` are dropped."""
    m = alo.shape[0]
    nb = blo.shape[0]
    olo = np.empty(m + nb + 1)
    ohi = np.empty(m + nb + 1)
    k = 0
    jb = 0
    for i in range(m):
        cur = alo[i]
        end = ahi[i]
        while jb < nb and bhi[jb] <= cur:
            jb += 1
        jj = jb
        while jj < nb and blo[jj] < end:
            if blo[jj] > cur:
                if blo[jj] - cur >= GAP_EPS:
                    olo[k] = cur
                    ohi[k] = blo[jj]
                    k += 1
            if bhi[jj] > cur:
                cur = bhi[jj]
            if cur >= end:
                break
            jj += 1
        if end - cur >= GAP_EPS:
            olo[k] = cur
            ohi[k] = end
            k += 1
    return olo[:k].copy(), ohi[:k].copy()


@optional_njit(cache=True)
def _poly_range(c, y0, y1):
    lo = np.inf
    hi = -np.inf
    ys = np.empty(4)
    ys[0] = y0
    ys[1] = y1
    n = 2
    # critical points of c0 + c1 y + c2 y^2 + c3 y^3
    a = 3.0 * c[3]
    b = 2.0 * c[2]
    cc = c[1]
    if a != 0.0:
        disc = b * b - 4.0 * a * cc
        if disc >= 0.0:
            r = np.sqrt(disc)
            ys[n] = (-b - r) / (2.0 * a)
            ys[n + 1] = (-b + r) / (2.0 * a)
            n += 2
    elif b != 0.0:
        ys[n] = -cc / b
        n += 1
    for i in range(n):
        y = ys[i]
        if y < y0 or y > y1:
            continue
        v = c[0] + y * (c[1] + y * (c[2] + y * c[3]))
        if v < lo:
            lo = v
        if v > hi:
            hi = v
    return lo, hi


@optional_njit(cache=True)
def oscillation(d, lo, hi, breaks, coeffs, npc, tail, has_tail):
    """``sup f - inf f`` of density ``d`` over the parts."""
    vmin = np.inf
    vmax = -np.inf
    n = npc[d]
    for j in range(lo.shape[0]):
        a = lo[j]
        b = hi[j]
        i0 = np.searchsorted(breaks[d, : n + 1], a, side="right") - 1
        if i0 < 0:
            i0 = 0
        i = i0
        while i < n and breaks[d, i] < b:
            x0 = max(a, breaks[d, i])
            x1 = min(b, breaks[d, i + 1])
            if x1 >= x0:
                r0, r1 = _poly_range(coeffs[d, i], x0 - breaks[d, i], x1 - breaks[d, i])
                if r0 < vmin:
                    vmin = r0
                if r1 > vmax:
                    vmax = r1
            i += 1
        if has_tail[d] and b > breaks[d, n]:
            x0 = max(a, breaks[d, n])
            for x in (x0, b):
                v = 1.0 + tail[d] / (x * x)
                if v < vmin:
                    vmin = v
                if v > vmax:
                    vmax = v
    if vmax < vmin:
        return 0.0
    return vmax - vmin


@optional_njit(cache=True)
def refine_parts(k, lo, hi, breaks, npc):
    """Cut the parts at every breakpoint of densities ``1..k-1``."""
    m = lo.shape[0]
    total = m
    for d in range(1, k):
        total += npc[d] + 1
    olo = np.empty(m + total * 2)
    ohi = np.empty(m + total * 2)
    cuts = np.empty(total + 2)
    n = 0
    for j in range(m):
        a = lo[j]
        b = hi[j]
        nc = 0
        for d in range(1, k):
            nb = npc[d]
            bk = breaks[d, : nb + 1]
            i = np.searchsorted(bk, a, side="right")
            while i <= nb and bk[i] < b:
                cuts[nc] = bk[i]
                nc += 1
                i += 1
        if nc > 1:
            cuts[:nc] = np.sort(cuts[:nc])
        x = a
        for i in range(nc):
            if cuts[i] > x:
                if n >= olo.shape[0]:
                    olo = np.concatenate((olo, np.empty(olo.shape[0])))
                    ohi = np.concatenate((ohi, np.empty(ohi.shape[0])))
                olo[n] = x
                ohi[n] = cuts[i]
                n += 1
                x = cuts[i]
        if n >= olo.shape[0]:
            olo = np.concatenate((olo, np.empty(olo.shape[0])))
            ohi = np.concatenate((ohi, np.empty(ohi.shape[0])))
        olo[n] = x
        ohi[n] = b
        n += 1
    return olo[:n].copy(), ohi[:n].copy()


@optional_njit(cache=True)
def proportional_bound(k, plo, phi_, breaks, coeffs, npc, tail, has_tail):
    """Calibration error bound, for densities ``1..k-1``, of taking the same
    fraction of every refined part: the sum of ``osc * length`` over parts."""
    worst = 0.0
    for d in range(1, k):
        acc = 0.0
        for j in range(plo.shape[0]):
            acc += oscillation(d, plo[j : j + 1], phi_[j : j + 1], breaks, coeffs, npc, tail, has_tail) * (
                phi_[j] - plo[j]
            )
        if acc > worst:
            worst = acc
    return worst


@optional_njit(cache=True)
def proportional_measure(d, plo, phi_, x, breaks, coeffs, npc, cum, tail, has_tail):
    """Measure of density ``d`` over the left fraction ``x`` of every part."""
    total = 0.0
    for j in range(plo.shape[0]):
        total += phi(d, plo[j] + x * (phi_[j] - plo[j]), breaks, coeffs, npc, cum, tail, has_tail) - phi(
            d, plo[j], breaks, coeffs, npc, cum, tail, has_tail
        )
    return total


@optional_njit(cache=True)
def proportional_cut(plo, phi_, x0, x1):
    m = plo.shape[0]
    olo = np.empty(m)
    ohi = np.empty(m)
    n = 0
    for j in range(m):
        w = phi_[j] - plo[j]
        a = plo[j] + x0 * w if x0 > 0.0 else plo[j]
        b = plo[j] + x1 * w if x1 < 1.0 else phi_[j]
        if b > a:
            olo[n] = a
            ohi[n] = b
            n += 1
    return olo[:n].copy(), ohi[:n].copy()


@optional_njit(cache=True)
def _prefix_gap(h, lo, hi, starts, partial, total_len, H, c, breaks, coeffs, npc, cum, tail, has_tail):
    return (
        prefix_measure(h, lo, hi, starts, partial, (c + 0.5) * total_len, breaks, coeffs, npc, cum, tail, has_tail)
        - prefix_measure(h, lo, hi, starts, partial, c * total_len, breaks, coeffs, npc, cum, tail, has_tail)
    ) / H - 0.5


@optional_njit(cache=True)
def prefix_chord(h, lo, hi, breaks, coeffs, npc, cum, tail, has_tail, tol):
    """Universal chord for ``F(s) = mu_h(prefix(S, s*len(S))) / mu_h(S)``.

    Returns a root ``c`` in ``[0, 1/2]`` of ``G(c) = F(c + 1/2) - F(c) - 1/2``,
    or ``-1.0`` when the block's ``h``-mass vanishes. ``G`` is a polynomial
    between the arc images of part boundaries and density breakpoints; since
    ``G(0) = -G(1/2)``, a binary search over those points brackets a sign change
    on a single polynomial piece, which false position then resolves.
    """
    m = lo.shape[0]
    starts = arc_starts(lo, hi)
    total_len = starts[m]
    partial = partial_integrals(h, lo, hi, breaks, coeffs, npc, cum, tail, has_tail)
    H = partial[m]
    if m == 0 or total_len <= 0.0 or abs(H) < 1e-300:
        return -1.0
    g0 = _prefix_gap(h, lo, hi, starts, partial, total_len, H, 0.0, breaks, coeffs, npc, cum, tail, has_tail)
    if abs(g0) <= tol:
        return 0.0
    # breakpoints of G in normalized arc units
    nb = npc[h]
    bk = breaks[h, : nb + 1]
    cand = np.empty(2 * (m + 1 + nb + 1) + 2)
    nc = 0
    for j in range(m + 1):
        cand[nc] = starts[j] / total_len
        nc += 1
    for j in range(m):
        i = np.searchsorted(bk, lo[j], side="right")
        while i <= nb and bk[i] < hi[j]:
            cand[nc] = (starts[j] + bk[i] - lo[j]) / total_len
            nc += 1
            i += 1
    base = nc
    for i in range(base):
        cand[nc] = cand[i] - 0.5
        nc += 1
    cand[nc] = 0.0
    cand[nc + 1] = 0.5
    nc += 2
    pts = np.sort(cand[:nc])
    ia = np.searchsorted(pts, 0.0, side="right") - 1
    ib = np.searchsorted(pts, 0.5, side="left")
    ga = g0
    gb = -g0
    while ib - ia > 1:
        im = (ia + ib) // 2
        c = pts[im]
        if c <= pts[ia] or c >= pts[ib]:
            # duplicate points: move the index without evaluating
            if c <= pts[ia]:
                ia = im
            else:
                ib = im
            continue
        gm = _prefix_gap(h, lo, hi, starts, partial, total_len, H, c, breaks, coeffs, npc, cum, tail, has_tail)
        if abs(gm) <= tol:
            return c
        if (gm > 0.0) == (ga > 0.0):
            ia = im
            ga = gm
        else:
            ib = im
            gb = gm
    a = pts[ia]
    b = pts[ib]
    side = 0
    mid = 0.5 * (a + b)
    for _ in range(200):
        mid = (a * gb - b * ga) / (gb - ga)
        if not (mid > a and mid < b):
            mid = 0.5 * (a + b)
        gm = _prefix_gap(h, lo, hi, starts, partial, total_len, H, mid, breaks, coeffs, npc, cum, tail, has_tail)
        if abs(gm) <= tol or b - a < 1e-16:
            return mid
        if (gm > 0.0) == (ga > 0.0):
            a = mid
            ga = gm
            if side == -1:
                gb *= 0.5
            side = -1
        else:
            b = mid
            gb = gm
            if side == 1:
                ga *= 0.5
            side = 1
    return mid


@optional_njit(cache=True)
def _concat(alo, ahi, blo, bhi):
    olo = np.empty(alo.shape[0] + blo.shape[0])
    ohi = np.empty(alo.shape[0] + blo.shape[0])
    olo[: alo.shape[0]] = alo
    ohi[: alo.shape[0]] = ahi
    olo[alo.shape[0] :] = blo
    ohi[alo.shape[0] :] = bhi
    return olo, ohi


# self-recursive: numba cannot reload it from the on-disk cache
@optional_njit
def split_block(k, lo, hi, breaks, coeffs, npc, cum, tail, has_tail, supabs, tol, leaf_eps):
    """Halve a block for the first ``k`` densities of the family.

    Returns ``(c, wlo, whi)``: the chord parameter and the window
    ``v(c + 1/2) \\ v(c)`` where ``v`` is the common segment of the first
    ``k - 1`` densities on the block. The window carries half of the block's
    mass for every one of the ``k`` densities. ``c < 0`` signals failure.

    * ``k == 1``: Lebesgue only, the window is the left half by arc length.
    * ``k == 2``: ``v`` is the Lebesgue prefix segment, chord solved exactly.
    * ``k >= 3``: ``v`` is built lazily by recursive halving; the chord is
      bracketed by bisection over ``v``'s dyadic points and finished inside a
      leaf where taking the same fraction of every part (cut at the inner
      densities' breakpoints) calibrates them to within ``leaf_eps``.
    """
    starts = arc_starts(lo, hi)
    total_len = starts[lo.shape[0]]
    if k == 1:
        a, b = arc_cut(lo, hi, 0.0, 0.5 * total_len)
        return 0.0, a, b
    if k == 2:
        c = prefix_chord(1, lo, hi, breaks, coeffs, npc, cum, tail, has_tail, tol)
        if c < 0.0:
            return c, lo[:0].copy(), hi[:0].copy()
        a, b = arc_cut(lo, hi, c * total_len, (c + 0.5) * total_len)
        return c, a, b

    h = k - 1
    H = integrate_set(h, lo, hi, breaks, coeffs, npc, cum, tail, has_tail)
    if abs(H) < 1e-300 or total_len <= 0.0:
        return -1.0, lo[:0].copy(), hi[:0].copy()
    m_inner = 0.0
    for i in range(1, k - 1):
        if supabs[i] > m_inner:
            m_inner = supabs[i]
    if m_inner < 1.0:
        m_inner = 1.0

    # first level of the inner segment: v(1/2)
    c0, llo, lhi = split_block(k - 1, lo, hi, breaks, coeffs, npc, cum, tail, has_tail, supabs, tol, leaf_eps)
    if c0 < 0.0:
        return -1.0, lo[:0].copy(), hi[:0].copy()
    rlo, rhi = subtract_parts(lo, hi, llo, lhi)
    g_half = integrate_set(h, llo, lhi, breaks, coeffs, npc, cum, tail, has_tail)
    g_lo = g_half / H - 0.5
    if abs(g_lo) <= tol:
        return 0.0, llo, lhi

    # c-stream node covers [lo_t, lo_t + w] of v, d-stream node the same shifted by 1/2
    clo, chi = llo, lhi
    dlo, dhi = rlo, rhi
    acc_c = 0.0
    acc_d = g_half
    width = 0.5
    lo_t = 0.0
    wlo = lo[:0].copy()
    whi = hi[:0].copy()
    node_len = 0.5 * total_len
    depth = 1
    while depth < MAX_BISECT_DEPTH:
        if node_len * m_inner <= leaf_eps:
            break
        crlo, crhi = refine_parts(k - 1, clo, chi, breaks, npc)
        drlo, drhi = refine_parts(k - 1, dlo, dhi, breaks, npc)
        if (
            proportional_bound(k - 1, crlo, crhi, breaks, coeffs, npc, tail, has_tail) <= leaf_eps
            and proportional_bound(k - 1, drlo, drhi, breaks, coeffs, npc, tail, has_tail) <= leaf_eps
        ):
            break
        cc, a1, b1 = split_block(k - 1, clo, chi, breaks, coeffs, npc, cum, tail, has_tail, supabs, tol, leaf_eps)
        cd, a2, b2 = split_block(k - 1, dlo, dhi, breaks, coeffs, npc, cum, tail, has_tail, supabs, tol, leaf_eps)
        if cc < 0.0 or cd < 0.0:
            return -1.0, lo[:0].copy(), hi[:0].copy()
        rc_lo, rc_hi = subtract_parts(clo, chi, a1, b1)
        rd_lo, rd_hi = subtract_parts(dlo, dhi, a2, b2)
        mc = integrate_set(h, a1, b1, breaks, coeffs, npc, cum, tail, has_tail)
        md = integrate_set(h, a2, b2, breaks, coeffs, npc, cum, tail, has_tail)
        g_mid = (acc_d + md - acc_c - mc) / H - 0.5
        width *= 0.5
        node_len *= 0.5
        depth += 1
        if abs(g_mid) <= tol:
            wlo, whi = _concat(wlo, whi, rc_lo, rc_hi)
            wlo, whi = _concat(wlo, whi, a2, b2)
            wlo, whi = merge_parts(wlo, whi)
            return lo_t + width, wlo, whi
        if (g_mid > 0.0) == (g_lo > 0.0):
            lo_t += width
            acc_c += mc
            acc_d += md
            g_lo = g_mid
            clo, chi = rc_lo, rc_hi
            wlo, whi = _concat(wlo, whi, a2, b2)
            dlo, dhi = rd_lo, rd_hi
        else:
            wlo, whi = _concat(wlo, whi, rc_lo, rc_hi)
            clo, chi = a1, b1
            dlo, dhi = a2, b2

    # finish inside the leaves: v takes the same fraction x of every refined
    # part of a leaf; G(x=0) = g_lo and the sign has flipped by x=1
    crlo, crhi = refine_parts(k - 1, clo, chi, breaks, npc)
    drlo, drhi = refine_parts(k - 1, dlo, dhi, breaks, npc)
    a = 0.0
    b = 1.0
    ga = g_lo
    gb = (acc_d + integrate_set(h, dlo, dhi, breaks, coeffs, npc, cum, tail, has_tail) - acc_c
          - integrate_set(h, clo, chi, breaks, coeffs, npc, cum, tail, has_tail)) / H - 0.5
    x = 0.5
    side = 0
    if abs(gb) <= tol:
        x = 1.0
    else:
        for _ in range(200):
            x = (a * gb - b * ga) / (gb - ga)
            if not (x > a and x < b):
                x = 0.5 * (a + b)
            gx = (
                acc_d
                + proportional_measure(h, drlo, drhi, x, breaks, coeffs, npc, cum, tail, has_tail)
                - acc_c
                - proportional_measure(h, crlo, crhi, x, breaks, coeffs, npc, cum, tail, has_tail)
            ) / H - 0.5
            if abs(gx) <= tol or b - a < 1e-16:
                break
            if (gx > 0.0) == (ga > 0.0):
                a = x
                ga = gx
                if side == -1:
                    gb *= 0.5
                side = -1
            else:
                b = x
                gb = gx
                if side == 1:
                    ga *= 0.5
                side = 1
    t1, t2 = proportional_cut(crlo, crhi, x, 1.0)
    wlo, whi = _concat(wlo, whi, t1, t2)
    t1, t2 = proportional_cut(drlo, drhi, 0.0, x)
    wlo, whi = _concat(wlo, whi, t1, t2)
    wlo, whi = merge_parts(wlo, whi)
    return lo_t + x * width, wlo, whi


@optional_njit(cache=True)
def arc_mass_position(d, lo, hi, target, lebesgue, breaks, coeffs, npc, cum, tail, has_tail):
    """Arc position ``x`` with ``mu_d(prefix of length x) = target``; monotone ``mu_d`` assumed."""
    starts = arc_starts(lo, hi)
    total = starts[lo.shape[0]]
    if lebesgue:
        return min(max(target, 0.0), total)
    partial = partial_integrals(d, lo, hi, breaks, coeffs, npc, cum, tail, has_tail)
    if target <= 0.0:
        return 0.0
    if target >= partial[lo.shape[0]]:
        return total
    a = 0.0
    b = total
    for _ in range(200):
        m = 0.5 * (a + b)
        if prefix_measure(d, lo, hi, starts, partial, m, breaks, coeffs, npc, cum, tail, has_tail) < target:
            a = m
        else:
            b = m
        if b - a <= 1e-15 * (1.0 + total):
            break
    return 0.5 * (a + b)


@optional_njit(cache=True)
def path_masses(ts, lows, base_f, off, ilo, ihi, f, g, lebesgue, breaks, coeffs, npc, cum, tail, has_tail):
    """``mu_f`` along a layered path: layer ``j`` starts at ``mu_g = lows[j]`` from a base set of
    ``f``-mass ``base_f[j]`` and adds the ``g``-calibrated prefix of increment parts
    ``ilo/ihi[off[j]:off[j+1]]``. Parameters below ``lows[0]`` stay on the lowest base."""
    n = ts.shape[0]
    L = lows.shape[0]
    out = np.empty(n)
    for i in range(n):
        t = ts[i]
        j = np.searchsorted(lows, t, side="right") - 1
        if j < 0:
            out[i] = base_f[0]
            continue
        lo = ilo[off[j] : off[j + 1]]
        hi = ihi[off[j] : off[j + 1]]
        x = arc_mass_position(g, lo, hi, t - lows[j], lebesgue, breaks, coeffs, npc, cum, tail, has_tail)
        starts = arc_starts(lo, hi)
        partial = partial_integrals(f, lo, hi, breaks, coeffs, npc, cum, tail, has_tail)
        out[i] = base_f[j] + prefix_measure(f, lo, hi, starts, partial, x, breaks, coeffs, npc, cum, tail, has_tail)
    return out
