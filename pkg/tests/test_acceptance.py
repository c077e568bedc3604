"""Acceptance criteria, one test each; every test prints a PASS/FAIL line.

Run alone with ``pytest -s tests/test_acceptance.py`` (the lines are also
repeated in the terminal summary).
"""
import time

import numpy as np
import pytest

from helpers import report, toy_walk, toy_walk_hit_probability
from stochsynth.automata import ParityAutomaton, PredicateSet, product
from stochsynth.config import load_config
from stochsynth.game import (ADVERSARIAL, COOPERATIVE, MODES, combined_apre, combined_cpre, explicit_combined_apre,
                             explicit_combined_cpre, explicit_game)
from stochsynth.oracle import enumerative_oracle, random_product
from stochsynth.pipeline import SUITES, bench_config, build_model, run_pipeline, start_states
from stochsynth.reach import build_abstraction
from stochsynth.refine import refine
from stochsynth.simulate import estimate_reach, simulate_batch
from stochsynth.solver import reach_ranking, solve_buchi_reach, solve_parity
from stochsynth.system import Box, Grid, SystemModel

pytestmark = pytest.mark.acceptance


def test_criterion_1_oracle_equivalence():
    rng = np.random.default_rng(20240501)
    t0 = time.perf_counter()
    bad = 0
    for _ in range(500):
        p = random_product(rng, max_states=8, max_inputs=2, max_priority=4)
        if not np.array_equal(solve_parity(p, mode=ADVERSARIAL).winning, enumerative_oracle(explicit_game(p))):
            bad += 1
    dt = time.perf_counter() - t0
    ok = bad == 0 and dt < 120
    report(1, "oracle equivalence", ok, f"{bad} mismatches on 500 games in {dt:.1f}s")
    assert ok


def _random_grid_product(rng):
    """1-D affine system on a grid of at most 12 cells, product with a one-state automaton."""
    n = int(rng.integers(2, 13))
    nu = int(rng.integers(1, 4))
    a = rng.uniform(0.3, 1.2)
    b = rng.uniform(-1, 1)
    lo = rng.uniform(-1.5, 0)
    d = Box([lo], [lo + rng.uniform(0, 1.5)])
    inputs = np.sort(rng.choice(np.linspace(-1, 1, 9), nu, replace=False))[:, None]
    mode = "sink" if rng.random() < 0.4 else "saturate"
    m = SystemModel(1, lambda s, u: (a * s[0] + b + u[0],), d, inputs, Box([0.0], [float(n)]),
                    boundary_mode=mode)
    g = Grid.from_eta(m.domain, 1.0)
    aut = ParityAutomaton.build(["q"], [2], "q", [], [("q", "true", "q")])
    return product(build_abstraction(m, g), aut, PredicateSet({}))


def test_criterion_2_combined_operator_soundness():
    rng = np.random.default_rng(7)
    t0 = time.perf_counter()
    bad = checked = 0
    for k in range(200):
        p = random_product(rng, max_states=12, max_inputs=3, max_over=5) if k % 2 else _random_grid_product(rng)
        g = explicit_game(p)
        y = rng.random(p.n_states) < 0.6
        for z in (y & (rng.random(p.n_states) < 0.5), rng.random(p.n_states) < 0.4):
            for m in MODES:
                bad += not np.array_equal(combined_apre(p, y, z, m), explicit_combined_apre(g, y, z, m))
                bad += not np.array_equal(combined_cpre(p, z, m), explicit_combined_cpre(g, z, m))
                checked += 2
    dt = time.perf_counter() - t0
    ok = bad == 0 and dt < 60
    report(2, "combined-operator soundness", ok,
           f"{bad} mismatches in {checked} operator checks on 200 abstractions, {dt:.1f}s")
    assert ok


def test_criterion_3_base_case_coincidence():
    rng = np.random.default_rng(11)
    t0 = time.perf_counter()
    bad_b = bad_r = 0
    for _ in range(300):
        p = random_product(rng)
        b = rng.random(p.n_states) < 0.5
        br = solve_buchi_reach(p, b, np.zeros(p.n_states, bool))
        bad_b += not np.array_equal(br.winning, solve_parity(p, np.where(b, 2, 1)).winning)
    for _ in range(300):
        p = random_product(rng)
        u = rng.random(p.n_states) < 0.3
        r = solve_buchi_reach(p, np.zeros(p.n_states, bool), u)
        rank = reach_ranking(p, r.strategy, u)
        bad_r += not np.array_equal(np.isfinite(rank), r.winning)
    dt = time.perf_counter() - t0
    ok = bad_b == 0 and bad_r == 0 and dt < 60
    report(3, "base-case coincidence", ok,
           f"Buchi vs parity {bad_b}/300 mismatches, ranking vs reach {bad_r}/300 mismatches, {dt:.1f}s")
    assert ok


def test_criterion_4_two_state_discriminator(s_a, s_b):
    wa, wb = solve_parity(s_a).winning_states, solve_parity(s_b).winning_states
    oa = set(np.flatnonzero(enumerative_oracle(explicit_game(s_a))).tolist())
    ob = set(np.flatnonzero(enumerative_oracle(explicit_game(s_b))).tolist())
    ok = wa == oa == {0, 1} and wb == ob == {1}
    report(4, "S_A/S_B discriminator", ok, f"S_A wins {sorted(wa)}, S_B wins {sorted(wb)} (x1=0, x2=1)")
    assert ok


@pytest.fixture(scope="module")
def sweep(tmp_path_factory):
    out = tmp_path_factory.mktemp("sweep")
    rows = {}
    for spec, eta in SUITES["full"]:
        t0 = time.perf_counter()
        rr = run_pipeline(bench_config(spec, eta, str(out)), write=False, simulate=False)
        rows[spec, eta] = (rr, time.perf_counter() - t0)
    return rows


def test_criterion_5_benchmark_monotonicity(sweep):
    ok = True
    parts = []
    for spec in ("phi1", "phi2"):
        etas = [e for s, e in SUITES["full"] if s == spec]
        errs = [float(sweep[spec, e][0].error) for e in etas]
        mono = all(b <= a for a, b in zip(errs, errs[1:]))
        shrink = errs[-1] < 0.25 * errs[0]
        slowest = max(sweep[spec, e][1] for e in etas)
        ok &= mono and shrink
        parts.append(f"{spec} errors {', '.join(f'{e:g}' for e in errs)} "
                     f"(non-increasing={mono}, last/first={errs[-1] / errs[0]:.3f}, slowest row {slowest:.0f}s)")
    report(5, "benchmark monotonicity", ok, "; ".join(parts))
    assert ok


def test_criterion_6_mode_dominance(sweep):
    bench_bad = sum(int(np.any(rr.under_cells & ~rr.over_cells)) +
                    int(np.any(rr.results[ADVERSARIAL].winning & ~rr.results[COOPERATIVE].winning))
                    for rr, _ in sweep.values())
    rng = np.random.default_rng(13)
    rand_bad = 0
    for _ in range(300):
        p = random_product(rng, max_inputs=3, max_priority=6)
        rand_bad += int(np.any(solve_parity(p).winning & ~solve_parity(p, mode=COOPERATIVE).winning))
    ok = bench_bad == 0 and rand_bad == 0
    report(6, "mode dominance", ok,
           f"{bench_bad} violations over {len(sweep)} benchmark rows, {rand_bad} over 300 random instances")
    assert ok


def test_criterion_7_closed_loop_validation():
    cfg = load_config("bistable_phi1").with_overrides(eta="1/8", mode="both")
    rr = run_pipeline(cfg, write=False, simulate=False)
    prod = rr.prod
    n = prod.base.n_cells
    over = rr.results[COOPERATIVE].winning[:n * prod.n_q].reshape(n, prod.n_q)
    ctrl = refine(rr.results[ADVERSARIAL], prod)
    s0 = start_states(rr.grid, rr.under_cells, 500, seed=0)
    t0 = time.perf_counter()
    b = simulate_batch(build_model(cfg.system), ctrl, s0, 10_000, 0, letters=prod.letters,
                       over_region=over, tail=0.2)
    dt = time.perf_counter() - t0
    left = int(b.left_over.sum())
    even = float(b.tail_even.mean())
    ok = left == 0 and even >= 0.99 and not b.violations.any()
    report(7, "closed-loop validation", ok,
           f"500 runs x 10^4 steps from {int(rr.under_cells.sum())} under cells: {left} left the "
           f"over-approximation, tail-window max priority even in {100 * even:.1f}% "
           f"(finite-horizon surrogate), {dt:.1f}s")
    assert ok


def test_criterion_8_reach_estimator_sanity():
    m, k, n_runs, campaigns, horizon = 8, 1, 51, 100, 1000
    model, grid, target = toy_walk(m)
    exact = k / m
    assert abs(toy_walk_hit_probability(m, k, horizon) - exact) < 1e-12
    covered = 0
    for c in range(campaigns):
        r = estimate_reach(model, np.zeros(1), target, n_runs, horizon, [k + 0.5], seed=c, grid=grid)
        covered += r.interval[0] <= exact <= r.interval[1]
    ok = covered >= 95
    report(8, "reach estimator sanity", ok,
           f"Wilson 95% interval covers k/M = {exact} in {covered}/{campaigns} campaigns "
           f"({n_runs} runs each, lazy walk M={m} from cell {k})")
    assert ok
