"""Compare the numba kernels against the pure numpy/Python fallback.

Each backend runs in its own interpreter because the switch
(``OSEGMENTS_DISABLE_NUMBA``) is read at import time. numba timings exclude
compilation: every case runs once untimed first.

    python3 benchmarks/bench_kernels.py [--repeat 3] [--depth 6]
"""
from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import time

CASES = ("integrate_set", "prefix_chord", "common_segment_2", "common_segment_3")


def _family(seed: int, pieces: int = 16):
    import numpy as np

    from osegments.density import Density, normalize

    rng = np.random.default_rng(seed)
    out = []
    for _ in range(2):
        br = np.concatenate([[0.0], np.sort(rng.uniform(0, 1, pieces - 1)), [1.0]])
        out.append(Density.piecewise_constant(br, rng.uniform(0.1, 3.0, pieces)))
    return normalize(out)


def _run_case(name: str, depth: int):
    import numpy as np

    from osegments import kernels
    from osegments.intervals import IntervalSet
    from osegments.segment import common_segment

    S = _family(0)
    pk = S.packed
    rng = np.random.default_rng(1)
    pts = np.sort(rng.uniform(0, 1, 400))
    lo, hi = np.ascontiguousarray(pts[0::2]), np.ascontiguousarray(pts[1::2])
    X = IntervalSet.closed(0.0, 1.0)
    if name == "integrate_set":
        return lambda: [kernels.integrate_set(d, lo, hi, *pk) for d in range(3) for _ in range(200)]
    if name == "prefix_chord":
        return lambda: [kernels.prefix_chord(1, lo, hi, *pk, 1e-10) for _ in range(50)]
    if name == "common_segment_2":
        return lambda: common_segment(S[:2], X, depth)
    return lambda: common_segment(S, X, depth)


def worker(depth: int, repeat: int):
    from osegments._jit import USE_NUMBA

    out = {"numba": USE_NUMBA, "times": {}}
    for name in CASES:
        fn = _run_case(name, depth)
        fn()  # warm-up (and compile under numba)
        best = float("inf")
        for _ in range(repeat):
            t = time.perf_counter()
            fn()
            best = min(best, time.perf_counter() - t)
        out["times"][name] = best
    print(json.dumps(out))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--depth", type=int, default=6)
    ap.add_argument("--worker", action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args()
    if args.worker:
        worker(args.depth, args.repeat)
        return
    results = {}
    for label, flag in (("numba", "0"), ("fallback", "1")):
        env = dict(os.environ, OSEGMENTS_DISABLE_NUMBA=flag)
        cmd = [sys.executable, __file__, "--worker", "--repeat", str(args.repeat), "--depth", str(args.depth)]
        proc = subprocess.run(cmd, env=env, capture_output=True, text=True, check=True)
        results[label] = json.loads(proc.stdout.strip().splitlines()[-1])["times"]
    print(f"{'case':<20}{'numba [s]':>12}{'fallback [s]':>14}{'speedup':>10}")
    for name in CASES:
        a, b = results["numba"][name], results["fallback"][name]
        print(f"{name:<20}{a:>12.4f}{b:>14.4f}{b / a:>9.1f}x")


if __name__ == "__main__":
    main()
