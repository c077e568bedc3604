import numpy as np
import pytest

from helpers import constant_controller, rotation_model, toy_walk, toy_walk_hit_probability
from stochsynth.automata import product
from stochsynth.reach import build_abstraction
from stochsynth.refine import refine
from stochsynth.simulate import (estimate_reach, run_rng, sample_noise, simulate, simulate_batch,
                                 tail_stats, wilson_interval)
from stochsynth.solver import solve_parity
from stochsynth.system import Grid


def test_noise_bounds_and_coverage(bistable):
    d = bistable.noise_support
    x = sample_noise(run_rng(0), d, 10_000)
    assert x.shape == (10_000, 2)
    assert np.all((x >= -0.4) & (x <= -0.2))
    span = (x.max(axis=0) - x.min(axis=0)) / d.widths
    assert np.all(span >= 0.95)


def test_noise_reproducible(bistable):
    a = sample_noise(run_rng(5, 3), bistable.noise_support, 100)
    b = sample_noise(run_rng(5, 3), bistable.noise_support, 100)
    c = sample_noise(run_rng(5, 4), bistable.noise_support, 100)
    assert np.array_equal(a, b) and not np.array_equal(a, c)


def test_horizon_zero():
    m = rotation_model()
    g = Grid.from_eta(m.domain, 0.5)
    traj, stats = simulate(m, constant_controller(g, m.inputs), [3.0, 2.5], 0, seed=1)
    assert traj.states.shape == (1, 2) and np.array_equal(traj.states[0], [3.0, 2.5])
    assert traj.inputs.shape == (0,) and stats.max_tail_priority == 2


def test_four_cycle_replay():
    m = rotation_model()
    g = Grid.from_eta(m.domain, 0.5)
    traj, _ = simulate(m, constant_controller(g, m.inputs), [3.0, 2.5], 8, seed=0)
    cycle = np.array([[3.0, 2.5], [1.5, 3.0], [1.0, 1.5], [2.5, 1.0]])
    assert np.allclose(traj.states, np.vstack([cycle, cycle, cycle[:1]]), atol=1e-12)


def test_tail_stats():
    s = tail_stats([1, 2, 1, 3, 1, 1, 2, 1, 2, 2], False, tail=0.2)
    assert s.max_tail_priority == 2 and s.tail_even and s.counts == {1: 5, 2: 4, 3: 1}
    assert tail_stats([2, 2, 3], True, tail=0.2).max_tail_priority == 3


@pytest.fixture(scope="module")
def phi1_ctrl(bistable, preds, phi1):
    g = Grid.from_eta(bistable.domain, 0.125)
    prod = product(build_abstraction(bistable, g), phi1, preds)
    res = solve_parity(prod)
    coop = solve_parity(prod, mode="cooperative")
    return prod, res, refine(res, prod), coop.winning.reshape(g.n_cells, prod.n_q)


def _winning_starts(prod, res, k, rng):
    g = prod.base.grid
    cells = np.flatnonzero(res.winning[prod.initial])
    lo, hi = g.all_cell_bounds()
    pick = cells[rng.integers(cells.size, size=k)]
    return lo[pick] + rng.random((k, 2)) * (hi[pick] - lo[pick])


def test_batch_equals_single(bistable, phi1_ctrl):
    prod, res, ctrl, over = phi1_ctrl
    s0 = _winning_starts(prod, res, 4, np.random.default_rng(0))
    batch = simulate_batch(bistable, ctrl, s0, 300, 9, letters=prod.letters, over_region=over, record=True,
                           block=64)
    for i in range(4):
        traj, stats = simulate(bistable, ctrl, s0[i], 300, 9, letters=prod.letters, over_region=over, run=i)
        assert np.array_equal(traj.states, batch.trajectories[i].states)
        assert np.array_equal(traj.automaton_states, batch.trajectories[i].automaton_states)
        assert stats.max_tail_priority == batch.max_tail_priority[i]


def test_seed_determinism(bistable, phi1_ctrl):
    prod, res, ctrl, over = phi1_ctrl
    s0 = _winning_starts(prod, res, 1, np.random.default_rng(1))[0]
    a, _ = simulate(bistable, ctrl, s0, 200, 42, letters=prod.letters)
    b, _ = simulate(bistable, ctrl, s0, 200, 42, letters=prod.letters)
    c, _ = simulate(bistable, ctrl, s0, 200, 43, letters=prod.letters)
    assert np.array_equal(a.states, b.states) and not np.array_equal(a.states, c.states)


def test_closed_loop_stays_and_obeys_dynamics(bistable, phi1_ctrl):
    prod, res, ctrl, over = phi1_ctrl
    s0 = _winning_starts(prod, res, 20, np.random.default_rng(2))
    b = simulate_batch(bistable, ctrl, s0, 500, 3, letters=prod.letters, over_region=over, record=True)
    assert not b.left_over.any() and not b.violations.any()
    # replay the run's own noise stream: every step is s' = saturate(f(s, u) + d), d ∈ D
    for i in (0, 7):
        t = b.trajectories[i]
        d = sample_noise(run_rng(3, i), bistable.noise_support, 500)
        u = bistable.inputs[t.inputs]
        assert np.all(t.inputs >= 0)
        assert np.array_equal(t.states[1:], bistable.step(t.states[:-1], u, d))
        assert np.all((d >= -0.4) & (d <= -0.2))


def test_failed_lookup_recorded():
    m = rotation_model()
    g = Grid.from_eta(m.domain, 0.5)
    ctrl = constant_controller(g, m.inputs)
    ctrl.table[:] = -1
    traj, _ = simulate(m, ctrl, [3.0, 2.5], 4, seed=0)
    assert traj.violations == [0, 1, 2, 3]
    assert np.allclose(traj.states[4], [3.0, 2.5])  # zero input keeps the rotation


def test_estimate_reach_trivial():
    m = rotation_model()
    g = Grid.from_eta(m.domain, 0.5)
    tgt = np.zeros(g.n_cells, bool)
    tgt[g.flat_index([6, 5])] = True
    r = estimate_reach(m, np.zeros(2), tgt, 10, 5, [3.25, 2.75], seed=0, grid=g)
    assert r.estimate == 1.0 and r.hits == 10
    # the orbit of (3, 2.5) never enters the bottom-left corner cell
    far = np.zeros(g.n_cells, bool)
    far[0] = True
    r = estimate_reach(m, np.zeros(2), far, 10, 100, [3.0, 2.5], seed=0, grid=g)
    assert r.estimate == 0.0 and r.interval[0] == 0.0


def test_estimate_reach_with_controller_and_callable():
    m = rotation_model()
    g = Grid.from_eta(m.domain, 0.5)
    tgt = np.zeros(g.n_cells, bool)
    tgt[g.flat_index([2, 3])] = True  # the cell of (1, 1.5)
    ctrl = constant_controller(g, m.inputs)
    assert estimate_reach(m, ctrl, tgt, 5, 3, [3.0, 2.5], 0).estimate == 1.0
    assert estimate_reach(m, lambda s: np.zeros_like(s), tgt, 5, 1, [3.0, 2.5], 0, grid=g).estimate == 0.0


def test_wilson():
    lo, hi = wilson_interval(0, 10)
    assert lo == 0.0 and 0.27 < hi < 0.28
    lo, hi = wilson_interval(5, 10)
    assert lo == pytest.approx(0.2366, abs=1e-4) and hi == pytest.approx(0.7634, abs=1e-4)
    with pytest.raises(ValueError):
        wilson_interval(0, 0)


def test_toy_walk_closed_form():
    for m, k in ((8, 1), (5, 2)):
        assert toy_walk_hit_probability(m, k, 1000) == pytest.approx(k / m, abs=1e-12)


def test_toy_walk_estimate():
    model, grid, target = toy_walk(8)
    r = estimate_reach(model, np.zeros(1), target, 2000, 1000, [3.5], seed=4, grid=grid)
    lo, hi = r.interval
    assert lo <= 3 / 8 <= hi


def test_toy_walk_one_step_law():
    model, grid, _ = toy_walk(8)
    rng = run_rng(0)
    d = sample_noise(rng, model.noise_support, 40_000)
    nxt = model.step(np.full((40_000, 1), 4.3), np.zeros((40_000, 1)), d)
    cells = np.floor(nxt[:, 0]).astype(int)
    freq = np.bincount(cells - 3, minlength=3) / 40_000
    assert np.allclose(freq, [0.25, 0.5, 0.25], atol=0.01)
