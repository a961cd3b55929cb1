"""``osegments`` command line: build segments and O-segments, run refutations.

Exit codes: 0 success, 2 bad input or configuration, 3 numerical resolution
failure (including a calibration check that misses its tolerance).
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from .density import Density, DensityFamily, integrate_over, normalize
from .errors import CapacityError, OSegmentError, ParseError, ResolutionError, ValidationError
from .intervals import IntervalSet

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_RESOLUTION = 3
MAX_DEPTH = 14
MIN_TOL = 1e-12


class ConfigError(Exception):
    pass


def _load_json(arg: str):
    """``arg`` is a path to a JSON file or a JSON literal."""
    text = arg
    p = Path(arg)
    if not arg.lstrip().startswith(("[", "{")) and p.exists():
        text = p.read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed JSON in {arg[:60]!r}: {exc}") from exc


def _densities(arg: Optional[str]) -> DensityFamily:
    if arg is None:
        raise ConfigError("--densities is required")
    return DensityFamily.from_json(_load_json(arg))


def _interval_set(arg: str) -> IntervalSet:
    data = _load_json(arg)
    try:
        if isinstance(data, dict):
            data = data.get("set", data)
        if data and isinstance(data[0], (list, tuple)):
            return IntervalSet.from_pairs([tuple(map(float, d)) for d in data])
        return IntervalSet.from_json(data)
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise ParseError(f"malformed interval set: {exc}") from exc


def _check_common(cfg: argparse.Namespace):
    if getattr(cfg, "depth", None) is not None and not 0 <= cfg.depth <= MAX_DEPTH:
        raise ConfigError(f"--depth must lie in [0, {MAX_DEPTH}]")
    if getattr(cfg, "tol", None) is not None and not cfg.tol >= MIN_TOL:
        raise ConfigError(f"--tol must be at least {MIN_TOL}")
    if getattr(cfg, "jobs", 1) < 1:
        raise ConfigError("--jobs must be positive")


def _emit(text: str, out: Optional[str]):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _set_csv(t: float, E: IntervalSet, mu) -> str:
    return ",".join([repr(float(t)), f'"{E}"'] + [repr(float(x)) for x in mu])


def _records_to_csv(jsonl: str, k: int) -> str:
    rows = ["t,set," + ",".join(f"mu{i}" for i in range(k))]
    for line in jsonl.splitlines():
        rec = json.loads(line)
        rows.append(_set_csv(rec["t"], IntervalSet.from_json(rec["set"]), rec["mu"]))
    return "\n".join(rows) + "\n"


def _format(jsonl: str, k: int, fmt: str) -> str:
    return jsonl if fmt == "jsonl" else _records_to_csv(jsonl, k)


def _max_jsonl_error(jsonl: str, totals: np.ndarray) -> float:
    worst = 0.0
    for line in jsonl.splitlines():
        rec = json.loads(line)
        worst = max(worst, float(np.max(np.abs(np.asarray(rec["mu"]) - rec["t"] * totals))))
    return worst


# -- commands -------------------------------------------------------------------


def cmd_segment_build(cfg: argparse.Namespace) -> int:
    from .segment import common_segment, evaluate
    from .sigma import evaluate_sigma, sigma_common_segment

    S = _densities(cfg.densities)
    depth = 8 if cfg.depth is None else cfg.depth
    tol_cal = 2 * cfg.tol * max(depth, 1)
    if math.isinf(S.domain_hi):
        if not S[0].is_constant_one():
            S = DensityFamily([Density.constant(1.0, math.inf)] + list(S))
        ss = sigma_common_segment(S, depth, horizon=cfg.horizon, tol=cfg.tol, jobs=cfg.jobs)
        jsonl = ss.to_jsonl()
        err = _max_jsonl_error(jsonl, np.ones(len(S)))
        # chord tolerances are relative to the block being halved
        tol_cal *= max(1.0, float(np.max(np.diff(ss.masses))))
        at = (lambda t: evaluate_sigma(ss, t)) if cfg.at is not None else None
        label = f"sigma-finite segment over {len(ss.per_block)} blocks up to t = {ss.horizon:.6g}"
    else:
        S = normalize(S)
        seg = common_segment(S, IntervalSet.closed(0.0, 1.0), depth, cfg.tol)
        jsonl = seg.to_jsonl()
        err = seg.max_error()
        at = (lambda t: evaluate(seg, t)) if cfg.at is not None else None
        label = f"common segment of {len(S)} densities at depth {depth}"
    if cfg.out:
        _emit(_format(jsonl, len(S), cfg.format), cfg.out)
    print(label)
    print(f"max calibration error {err:.3e} (tolerance {tol_cal:.1e})")
    if at is not None:
        E = at(cfg.at)
        print(f"u({cfg.at}) = {E}")
    return EXIT_OK if err <= tol_cal else EXIT_RESOLUTION


def cmd_oseg_build(cfg: argparse.Namespace) -> int:
    from .oseg import IntervalSpace, block_demo_csv, common_o_segment

    if cfg.block_demo is not None:
        csv_text = block_demo_csv(cfg.block_demo, cfg.chains, cfg.seed)
        _emit(csv_text, cfg.out)
        if cfg.out:
            jumps = [float(r.split(",")[1]) for r in csv_text.splitlines()[1:]]
            print(f"{len(jumps)} chains over {cfg.block_demo} blocks; smallest max jump {min(jumps)}")
        return EXIT_OK
    S = _densities(cfg.densities)
    if len(S) == 1:
        f, g = S[0], Density.constant()
    elif len(S) == 2:
        f, g = S[0], S[1]
    else:
        raise ConfigError("oseg-build takes one or two densities (f, optionally g; g defaults to 1)")
    D = _interval_set(cfg.anchor) if cfg.anchor else None
    depth = 6 if cfg.depth is None else cfg.depth
    sp = IntervalSpace(mode=cfg.mode, seed=cfg.seed)
    w = common_o_segment(sp, f, g, D, depth, cfg.tol)
    err = float(np.max(np.abs(w.calibration_errors())))
    jsonl = w.as_osegment().to_jsonl([f, g])
    if cfg.out:
        _emit(_format(jsonl, 2, cfg.format), cfg.out)
    print(f"common O-segment at depth {depth}, {len(w.params)} open sets on ({w.params[0]:.6g}, {w.params[-1]:.6g}]")
    print(f"max calibration error {err:.3e}")
    if cfg.at is not None:
        print(f"w({cfg.at}) = {w.evaluate(cfg.at)}")
    bad = not all(s.is_open or not len(s) for s in w.table)
    return EXIT_RESOLUTION if bad or err > max(cfg.oseg_tol, cfg.tol) else EXIT_OK


def cmd_refute(cfg: argparse.Namespace) -> int:
    from .counterexample import refute_half_set

    E = _interval_set(cfg.set)
    try:
        cert = refute_half_set(E, cfg.q_max, cfg.mode, cfg.seed, periodic=cfg.periodic)
    except CapacityError as exc:
        print(f"{exc}; rerun with --q-max {exc.required}", file=sys.stderr)
        return EXIT_RESOLUTION
    text = json.dumps(cert.to_json(), sort_keys=True, indent=2) + "\n"
    if cfg.out:
        _emit(text, cfg.out)
    sys.stdout.write(text)
    return EXIT_OK


# -- parser ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="osegments", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, mode_default="exact"):
        p.add_argument("--depth", type=int, default=None)
        p.add_argument("--tol", type=float, default=1e-9)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--mode", choices=("exact", "fuzzed"), default=mode_default)
        p.add_argument("--out", default=None, help="output file (stdout summary is always printed)")
        p.add_argument("--format", choices=("jsonl", "csv"), default="jsonl")
        p.add_argument("--at", type=float, default=None, help="print the set at this parameter")
        p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("segment-build", help="common segment of a density family")
    p.add_argument("--densities", help="JSON file or literal: a density or a list of densities")
    p.add_argument("--horizon", type=float, default=1024.0, help="scan horizon on [0, inf)")
    common(p)
    p.set_defaults(func=cmd_segment_build)

    p = sub.add_parser("oseg-build", help="common open segment of two densities on (0, 1)")
    p.add_argument("--densities", help="JSON list [f] or [f, g]")
    p.add_argument("--anchor", default=None, help="interval set D every open set must contain")
    p.add_argument("--oseg-tol", type=float, default=1e-4, help="calibration tolerance for the exit code")
    p.add_argument("--block-demo", type=int, default=None, metavar="N", help="emit the block-space CSV instead")
    p.add_argument("--chains", type=int, default=1000)
    p.add_argument("--horizon", type=float, default=None, help=argparse.SUPPRESS)
    common(p, "fuzzed")
    p.set_defaults(func=cmd_oseg_build)

    p = sub.add_parser("refute", help="certificate that a set is not a common half for the f_pq family")
    p.add_argument("--set", required=True, help="interval set as JSON (list of parts or [[lo, hi], ...])")
    p.add_argument("--q-max", type=int, default=1024)
    p.add_argument("--periodic", action="store_true", help="read the family modulo 1 on [0, inf)")
    common(p)
    p.set_defaults(func=cmd_refute)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        cfg = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        _check_common(cfg)
        return cfg.func(cfg)
    except (ConfigError, ParseError, ValidationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except CapacityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ResolutionError as exc:
        print(f"resolution error: {exc}", file=sys.stderr)
        return EXIT_RESOLUTION
    except OSegmentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
