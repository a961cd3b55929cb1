"""Acceptance suite: one PASS/FAIL line per criterion, repeated in the pytest summary.

Timing budgets are wall-clock on the construction calls only. numba kernels
are compiled before the timed region so the budgets measure the algorithms.
"""
import math
import time

import numpy as np
import pytest

from conftest import random_open_set
from oracles import half_sets_on_grid, min_largest_group, quarter_step_density, random_step_family, set_partitions
from osegments.chord import universal_chord
from osegments.cli import main
from osegments.counterexample import refute_half_set, validate_certificate
from osegments.density import Density, integrate_over, normalize
from osegments.intervals import IntervalSet
from osegments.oseg import BlockSpace, IntervalSpace, block_chain_gap, common_o_segment, grow_open_to_measure
from osegments.segment import common_segment, verify_segment
from osegments.sigma import evaluate_sigma, exhaust, sigma_common_segment

UNIT = IntervalSet.closed(0, 1)
ONE = Density.constant()
TWO_T = Density.polynomial([0, 2])


def _warm():
    # compile the numba kernels outside every timed region
    common_segment(normalize([TWO_T, Density.piecewise_constant([0, 0.5, 1], [1.5, 0.5])]), UNIT, 2)
    common_o_segment(IntervalSpace(mode="fuzzed"), TWO_T, ONE, depth=1)


def _random_cdf(rng):
    n = int(rng.integers(1, 5))
    breaks = np.concatenate([[0.0], np.sort(rng.uniform(0, 1, n - 1)), [1.0]])
    a, b, floor = rng.uniform(-2, 2, n), rng.uniform(-2, 2, n), rng.uniform(0.01, 3, n)
    # a nonnegative cubic per piece: (a + b t)^2 + floor, plus a cubic term that keeps it positive
    c3 = rng.uniform(0, 1, n)
    f = Density(breaks, np.stack([a * a + floor, 2 * a * b, b * b, c3], 1))
    total = f.total()
    return lambda x: f.antiderivative(np.asarray(x, float)) / total


def test_criterion_1_universal_chord(report):
    rng = np.random.default_rng(2024)
    Fs = [_random_cdf(rng) for _ in range(1000)]
    universal_chord(Fs[0])
    t0 = time.perf_counter()
    sols = [universal_chord(F) for F in Fs]
    elapsed = time.perf_counter() - t0
    worst = max(abs(float(F(s.d)) - float(F(s.c)) - 0.5) for F, s in zip(Fs, sols))
    exact = all(s.d - s.c == 0.5 for s in sols)
    ok = worst <= 1e-9 and exact and elapsed < 1.0
    report(1, ok, f"1000 chords, worst |F(c+1/2)-F(c)-1/2| = {worst:.2e}, d-c exact: {exact}, {elapsed:.2f} s (< 1 s)")
    assert ok


def test_criterion_2_common_segment_depth_10(report):
    _warm()
    rng = np.random.default_rng(2)
    families = [normalize(random_step_family(rng, 2, 16)) for _ in range(100)]
    t0 = time.perf_counter()
    segs = [common_segment(S, UNIT, 10) for S in families]
    elapsed = time.perf_counter() - t0
    reports = [verify_segment(s) for s in segs]
    worst = max(r.worst for r in reports)
    nested = all(not r.nesting_violations for r in reports)
    ok = worst <= 1e-6 and nested and elapsed < 30
    report(2, ok, f"100 families {{1,f,g}} at depth 10, max error {worst:.2e} (<= 1e-6), nested: {nested}, {elapsed:.1f} s (< 30 s)")
    assert ok


def test_criterion_3_brute_force_half_set(report):
    worst, found = 0.0, 0
    for seed in range(5):
        f, k = quarter_step_density(np.random.default_rng(300 + seed))
        hits = half_sets_on_grid(k)
        found += bool(hits)
        # measure pair of the first lattice hit, in exact integer units
        a, b_, c, d = hits[0]
        P = np.concatenate([[0], np.cumsum(np.repeat(k, 64 // len(k)))])
        target = ((b_ - a + d - c) / 64, (P[b_] - P[a] + P[d] - P[c]) / 256)
        for depth in (1, 2, 3):
            seg = common_segment([ONE, f], UNIT, depth)
            mid = seg.table[1 << (depth - 1)]
            pair = (mid.measure(), integrate_over(f, mid))
            worst = max(worst, abs(pair[0] - target[0]), abs(pair[1] - target[1]))
    ok = found == 5 and worst <= 1e-6
    report(3, ok, f"lattice search found half sets for {found}/5 densities; table[1/2] mass pair off by {worst:.2e} (<= 1e-6)")
    assert ok


def test_criterion_4_growth_sandwich(report):
    bad, rounds = 0, 0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        A = random_open_set(rng, 4)
        a = float(rng.uniform(A.measure(), 1.0))
        sp = IntervalSpace(mode="fuzzed", seed=seed)
        g = grow_open_to_measure(sp, A, a, check=False)
        start = A.measure()
        for n, m in enumerate(g.trajectory):
            lo = a + 0.75**n * (start - a)
            hi = a + 0.25**n * (start - a)
            rounds += 1
            bad += not (lo - 1e-12 <= m <= hi + 1e-12)
        bad += not (A - g.open).measure() == 0 or not g.open.is_open
    ok = bad == 0
    report(4, ok, f"100 fuzzed (A, a) pairs, {rounds} rounds checked, {bad} outside the 3/4 and 1/4 sandwich")
    assert ok


def _symmetric_anchor(seed: int) -> IntervalSet:
    # symmetric about 1/2, so 2t, 1 and 2-2t all give it the same mass
    rng = np.random.default_rng(seed)
    k = int(rng.integers(1, 4))
    pts = np.sort(rng.uniform(0.05, 0.45, 2 * k))
    half = list(zip(pts[0::2], pts[1::2]))
    return IntervalSet.from_pairs(half + [(1 - b, 1 - a) for a, b in half])


@pytest.mark.slow
def test_criterion_5_common_o_segment(report):
    _warm()
    D = _symmetric_anchor(7)
    lines, ok_all, total = [], True, 0.0
    for name, g in (("g=1", ONE), ("g=2-2t", Density.polynomial([2, -2]))):
        t0 = time.perf_counter()
        w = common_o_segment(IntervalSpace(mode="fuzzed", seed=7), TWO_T, g, D, depth=8)
        total += time.perf_counter() - t0
        err = float(np.max(np.abs(w.calibration_errors())))
        opened = all(s.is_open for s in w.table)
        leak = max((D - s).measure() for s in w.table)
        ok_all &= err <= 1e-4 and opened and leak == 0
        lines.append(f"{name}: {len(w.table)} sets, err {err:.1e}, open {opened}, mu(D minus w) {leak}")
    ok = ok_all and total < 60
    report(5, ok, f"f=2t at depth 8 (fuzzed, seed 7): {'; '.join(lines)}; {total:.1f} s (< 60 s)")
    assert ok


def test_criterion_6_sigma_finite_cases(report):
    inf = math.inf
    one = Density.constant(1.0, inf)
    bump = Density.piecewise_constant([0, 1, 2], [2, 0], inf, 0.0)
    slow = Density.piecewise_constant([0, 1], [2], inf, -1.0)
    ex_i = exhaust([one, bump], k_max=8)
    ex_ii = exhaust([one, slow], k_max=8)
    cases = (ex_i.case, ex_ii.case)
    fin = max(ex_i.worst_residual, ex_ii.worst_residual)
    # closed form for the second example: F = 1/t past 1, so the matched levels give t_k = 1/s_k
    level = max(abs(t * s - 1) for s, t in zip(ex_ii.s, ex_ii.times))
    glued = 0.0
    for fam in ([one, bump], [one, slow]):
        ss = sigma_common_segment(fam, 6, k_max=8)
        for m in ss.masses:
            E = evaluate_sigma(ss, float(m))
            glued = max(glued, max(abs(integrate_over(f, E) - m) for f in fam))
    ok = cases == ("i", "ii") and len(ex_i.Y) == len(ex_ii.Y) == 8 and fin <= 1e-6 and level <= 1e-6 and glued <= 1e-6
    report(
        6,
        ok,
        f"cases {cases}, residual of Y_1..Y_8 {fin:.1e}, |t_k s_k - 1| {level:.1e}, glued at block boundaries {glued:.1e} (all <= 1e-6)",
    )
    assert ok


def test_criterion_7_refutation(report):
    invalid, kinds = 0, {}
    for seed in range(500):
        E = random_open_set(np.random.default_rng(10_000 + seed))
        for mode in ("exact", "fuzzed"):
            cert = refute_half_set(E, q_max=1024, mode=mode, seed=seed)
            kinds[cert.kind] = kinds.get(cert.kind, 0) + 1
            invalid += not validate_certificate(cert, E)
    half = IntervalSet.open(0, 0.5)
    cert = refute_half_set(half, q_max=8)
    small_q = cert.q <= 8 and validate_certificate(cert, half)
    ok = invalid == 0 and small_q
    report(7, ok, f"500 random sets x 2 modes, {invalid} certificates failed re-validation {kinds}; E=(0,1/2) refuted at q={cert.q} (<= 8)")
    assert ok


def test_criterion_8_block_space(report):
    # a chain's jumps are the weights of its tie groups; the order of the groups does not matter,
    # so the set partitions of the blocks cover every chain
    worst, visited = math.inf, 0
    for N in range(1, 13):
        best, count = min_largest_group(N)
        worst, visited = min(worst, best), visited + count
    lib = math.inf
    for N in range(1, 9):
        bs = BlockSpace(N)
        for labels in set_partitions(N):
            lib = min(lib, block_chain_gap(bs, labels))
    rng = np.random.default_rng(20)
    bs = BlockSpace(20)
    rand = min(block_chain_gap(bs, rng.integers(0, 20, 20)) for _ in range(1000))
    misses = 0
    for k in range(4096):
        target = k / 4096 * (1 - 2.0**-20)
        got = bs.measure_blocks(bs.subset_sum_open(target))
        misses += not (0 <= target - got <= 2.0**-20)
    ok = worst >= 0.5 and lib >= 0.5 and rand >= 0.5 and misses == 0
    report(
        8,
        ok,
        f"min max_jump over all {visited} chains for N <= 12: {worst}, library check N <= 8: {lib}, "
        f"1000 random N=20: {rand}; subset sums within 2^-20: {4096 - misses}/4096",
    )
    assert ok


def test_criterion_9_cli_determinism(report, tmp_path, capsys):
    import json

    fam = json.dumps([ONE.to_json(), TWO_T.to_json()])
    runs = {
        "segment-build": ["segment-build", "--densities", fam, "--depth", "8"],
        "oseg-build": ["oseg-build", "--densities", json.dumps([TWO_T.to_json()]), "--depth", "4", "--seed", "7"],
        "refute": ["refute", "--set", "[[0.1, 0.3], [0.5, 0.55]]", "--mode", "fuzzed", "--seed", "3"],
    }
    same = {}
    for name, argv in runs.items():
        a, b = tmp_path / f"{name}.a", tmp_path / f"{name}.b"
        codes = (main(argv + ["--out", str(a)]), main(argv + ["--out", str(b)]))
        same[name] = codes == (0, 0) and a.read_bytes() == b.read_bytes()
    capsys.readouterr()
    ok = all(same.values())
    report(9, ok, f"byte-identical output files for repeated runs: {same}")
    assert ok
