"""Command line entry point ``synth``.

Exit codes: 0 ok, 1 other stage failure, 2 configuration error, 3 solver
assertion, 4 oracle mismatch.
"""
from __future__ import annotations

import argparse
import csv
import logging
import os
import sys

import numpy as np

from .config import load_config
from .errors import ConfigError, SolverAssertionError

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_ORACLE = 0, 2, 3, 4


def _parser():
    p = argparse.ArgumentParser(prog="synth", description="Almost-sure parity synthesis on grid abstractions.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--eta", help="cell width, e.g. 1/8 (overrides the config)")
    common.add_argument("--spec", help="automaton file or shipped name (phi1, phi2)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int, help="simulation / campaign seed")
    common.add_argument("--mode", choices=("under", "over", "both"), help="which approximations to solve")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="cmd", required=True)
    r = sub.add_parser("run", parents=[common], help="run the pipeline for one config")
    r.add_argument("config")
    b = sub.add_parser("bench", parents=[common], help="run a benchmark suite (full, quick)")
    b.add_argument("suite")
    o = sub.add_parser("oracle", parents=[common], help="random-game oracle campaign")
    o.add_argument("n_games", type=int)
    o.add_argument("seed_pos", type=int, metavar="seed")
    return p


def _unwrap(e):
    from .pipeline import StageError
    return e.cause if isinstance(e, StageError) else e


def cmd_run(a) -> int:
    from .pipeline import run_pipeline
    cfg = load_config(a.config).with_overrides(a.eta, a.spec, a.out, a.seed, a.mode)
    rr = run_pipeline(cfg)
    s = rr.stats
    print(f"{cfg.name}: eta={'x'.join(s['eta'])} cells={s['cells']} product states={s['product_states']}")
    for m, info in s["solve"].items():
        print(f"  {m}: {info['winning_states']} winning product states")
    if rr.error is not None:
        print(f"  approximation error: {float(rr.error):g} sq. units")
    if "sim" in s:
        print(f"  simulation: {s['sim']['runs']} runs, {s['sim']['left_over_approximation']} left the "
              f"over-approximation, {s['sim']['tail_even']} with even tail priority")
    print(f"  artifacts in {cfg.out_dir}")
    return EXIT_OK


def cmd_bench(a) -> int:
    from .pipeline import benchmark, format_bench
    out = a.out or "bench_out"
    ids = a.suite
    if a.eta or a.spec:
        from .pipeline import SUITES
        if ids not in SUITES:
            raise ConfigError(f"unknown suite {ids!r}")
        ids = [(s, e) for s, e in SUITES[ids]
               if (a.eta is None or e == a.eta) and (a.spec is None or s == a.spec)]
    rows = benchmark(ids, out_root=out, write=True)
    print(format_bench(rows))
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "bench.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["spec", "eta", "error", "abstraction_s", "solve_s", "cells", "product_states", "failure"])
        for r in rows:
            w.writerow([r.spec, r.eta, r.error, r.abstraction_s, r.solve_s, r.cells, r.product_states,
                        r.failure or ""])
    return EXIT_OK if all(r.failure is None for r in rows) else 1


def cmd_oracle(a) -> int:
    from .game import explicit_combined_apre, explicit_game, combined_apre, MODES
    from .oracle import enumerative_oracle, random_product
    from .solver import solve_parity
    rng = np.random.default_rng(a.seed_pos if a.seed is None else a.seed)
    bad_win = bad_op = 0
    for _ in range(a.n_games):
        prod = random_product(rng)
        g = explicit_game(prod)
        if not np.array_equal(solve_parity(prod).winning, enumerative_oracle(g)):
            bad_win += 1
        y = rng.random(prod.n_states) < 0.6
        z = y & (rng.random(prod.n_states) < 0.5)
        for mode in MODES:
            if not np.array_equal(combined_apre(prod, y, z, mode), explicit_combined_apre(g, y, z, mode)):
                bad_op += 1
    print(f"{a.n_games} games: {bad_win} winning-set mismatches, {bad_op} operator mismatches")
    return EXIT_OK if bad_win == 0 and bad_op == 0 else EXIT_ORACLE


def main(argv=None) -> int:
    a = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return {"run": cmd_run, "bench": cmd_bench, "oracle": cmd_oracle}[a.cmd](a)
    except Exception as e:
        cause = _unwrap(e)
        if isinstance(cause, ConfigError):
            print(f"configuration error: {e}", file=sys.stderr)
            return EXIT_CONFIG
        if isinstance(cause, SolverAssertionError):
            print(f"solver assertion failed: {e}", file=sys.stderr)
            return EXIT_SOLVER
        from .pipeline import StageError
        if isinstance(e, StageError):
            print(f"stage failure: {e}", file=sys.stderr)
            return 1
        raise


if __name__ == "__main__":
    sys.exit(main())
