import numpy as np
import pytest

from stochsynth import solver as solver_mod
from stochsynth.automata import ProductAbstraction
from stochsynth.errors import SolverAssertionError
from stochsynth.game import ADVERSARIAL, COOPERATIVE, MODES, explicit_game
from stochsynth.oracle import enumerative_oracle, random_product
from stochsynth.solver import (SolveResult, check_closure, reach_ranking, solve_buchi_reach,
                               solve_parity)


def test_all_even_wins():
    rng = np.random.default_rng(0)
    for _ in range(20):
        p = random_product(rng)
        p = ProductAbstraction(p.table, np.full(p.n_states, 2))
        for m in MODES:
            assert solve_parity(p, mode=m).winning.all()


def test_all_odd_loses():
    rng = np.random.default_rng(1)
    for _ in range(20):
        p = random_product(rng)
        for pr in (1, 3):
            for m in MODES:
                assert not solve_parity(p, np.full(p.n_states, pr), mode=m).winning.any()


def test_two_state(s_a, s_b):
    assert solve_parity(s_a).winning_states == {0, 1}
    assert solve_parity(s_b).winning_states == {1}
    # the cooperative reading wins S_B too
    assert solve_parity(s_b, mode=COOPERATIVE).winning_states == {0, 1}
    for p in (s_a, s_b):
        assert np.array_equal(solve_parity(p).winning, enumerative_oracle(explicit_game(p)))


def test_strategy_defined_exactly_on_winning():
    rng = np.random.default_rng(2)
    for _ in range(100):
        p = random_product(rng)
        for m in MODES:
            r = solve_parity(p, mode=m)
            assert np.array_equal(r.strategy >= 0, r.winning)
            assert set(r.strategy_map()) == r.winning_states


def test_strategy_wins_by_oracle():
    rng = np.random.default_rng(3)
    for _ in range(150):
        p = random_product(rng, max_inputs=3)
        r = solve_parity(p)
        g = explicit_game(p)
        fixed = np.where(r.winning, r.strategy, -1)
        under_fixed = enumerative_oracle(g, strategy=fixed)
        assert not np.any(r.winning & ~under_fixed)


def test_padding_neutral():
    rng = np.random.default_rng(4)
    for _ in range(100):
        p = random_product(rng, max_priority=5)
        base = solve_parity(p).winning
        padded = solver_mod._classes(p.priority, pad_to=p.priority.max() + 2)
        s = solver_mod._Solver(p, p.priority, ADVERSARIAL)
        s.top, s.classes = padded
        s.ev = solver_mod._Evaluator(p, ADVERSARIAL, s.classes)
        win, _ = s.solve(s.top, np.zeros(p.n_states, bool), np.full(p.n_states, -1))
        assert np.array_equal(win, base)


def test_odd_top_priority_padded():
    top, classes = solver_mod._classes([1, 3])
    assert top == 4 and not classes[4].any()
    with pytest.raises(ValueError):
        solver_mod._classes([0, 2])


def test_buchi_base_case():
    rng = np.random.default_rng(5)
    for _ in range(300):
        p = random_product(rng)
        b = rng.random(p.n_states) < 0.5
        z = np.zeros(p.n_states, bool)
        for m in MODES:
            br = solve_buchi_reach(p, b, z, mode=m)
            assert np.array_equal(br.winning, solve_parity(p, np.where(b, 2, 1), mode=m).winning)


def test_buchi_trivial():
    rng = np.random.default_rng(6)
    p = random_product(rng, min_states=3)
    n = p.n_states
    assert solve_buchi_reach(p, np.zeros(n, bool), np.ones(n, bool)).winning.all()
    assert not solve_buchi_reach(p, np.zeros(n, bool), np.zeros(n, bool)).winning.any()


def test_reach_matches_oracle():
    # ◇T as a parity game: T absorbing with priority 2, the rest priority 1
    rng = np.random.default_rng(7)
    for _ in range(100):
        p = random_product(rng)
        t = rng.random(p.n_states) < 0.3
        r = solve_buchi_reach(p, np.zeros(p.n_states, bool), t)
        # with T absorbing, the Büchi game on T equals reachability
        over, under = [], []
        for v in range(p.n_states):
            ov, un = [], []
            for u in range(p.n_inputs):
                o, uu = p.successors(v, u)
                ov.append([v] if t[v] else list(o))
                un.append([v] if t[v] else list(uu))
            over.append(ov)
            under.append(un)
        q = ProductAbstraction.from_sets(over, under, np.where(t, 2, 1), p.n_inputs)
        assert np.array_equal(r.winning, enumerative_oracle(explicit_game(q)))


def test_ranking_chain():
    n = 5  # c_k -> c_{k-1} surely, c_0 is the target
    over = [[[max(k - 1, 0)]] for k in range(n)]
    p = ProductAbstraction.from_sets(over, over, np.ones(n))
    target = np.zeros(n, bool)
    target[0] = True
    rank = reach_ranking(p, np.zeros(n, np.int64), target)
    assert rank.tolist() == [0, 1, 2, 3, 4]


def test_ranking_infinite_on_trap():
    over = [[[0]], [[0, 2]], [[2]]]
    p = ProductAbstraction.from_sets(over, [[[0]], [[0]], [[2]]], np.ones(3))
    rank = reach_ranking(p, np.zeros(3, np.int64), np.array([True, False, False]))
    assert rank[0] == 0 and np.isinf(rank[1]) and np.isinf(rank[2])


def test_ranking_positive_progress():
    # state 1: F̲ = {0}, F̄ = {0, 1}; progress with positive probability every step
    over = [[[0]], [[0, 1]]]
    p = ProductAbstraction.from_sets(over, [[[0]], [[0]]], np.ones(2))
    rank = reach_ranking(p, np.zeros(2, np.int64), np.array([True, False]))
    assert rank.tolist() == [0, 1]


def test_ranking_set_equals_reach_winning():
    rng = np.random.default_rng(8)
    for _ in range(300):
        p = random_product(rng)
        t = rng.random(p.n_states) < 0.3
        r = solve_buchi_reach(p, np.zeros(p.n_states, bool), t)
        rank = reach_ranking(p, r.strategy, t)
        assert np.array_equal(np.isfinite(rank), r.winning | t)
        # ranks decrease along positive-probability steps
        for v in np.flatnonzero(np.isfinite(rank) & ~t):
            o, u = p.successors(v, r.strategy[v])
            assert np.all(np.isfinite(rank[o]))
            step_to = u if len(u) else o
            assert rank[step_to].min() < rank[v]


def test_mode_dominance_random():
    rng = np.random.default_rng(9)
    for _ in range(300):
        p = random_product(rng, max_inputs=3, max_priority=6)
        a = solve_parity(p, mode=ADVERSARIAL).winning
        c = solve_parity(p, mode=COOPERATIVE).winning
        assert not np.any(a & ~c)


def test_iteration_counts_recorded(s_b):
    r = solve_parity(s_b)
    assert r.iteration_counts["Y2"] >= 1 and r.iteration_counts["X1"] >= 1


def test_check_closure_flags_bad_strategy(s_b):
    bad = SolveResult(np.array([True, True]), np.array([0, 0]), ADVERSARIAL)
    with pytest.raises(SolverAssertionError, match="leaves"):
        check_closure(s_b, SolveResult(np.array([True, False]), np.array([0, -1]), ADVERSARIAL))
    check_closure(s_b, bad)  # {x1, x2} is closed under F̄
    with pytest.raises(SolverAssertionError, match="undefined"):
        check_closure(s_b, SolveResult(np.array([True, True]), np.array([-1, 0]), ADVERSARIAL))


def test_monotonicity_assertion(monkeypatch):
    # a non-monotone operator makes the X iterate shrink and must trip the guard
    rng = np.random.default_rng(10)
    p = random_product(rng, min_states=4)
    flip = {"n": 0}

    def broken(self, k, y, x):
        flip["n"] += 1
        st = self.states[k]
        win = np.full(st.size, flip["n"] % 2 == 1)
        return st, win, np.zeros(st.size, np.int64)

    monkeypatch.setattr(solver_mod._Evaluator, "apre", broken)
    monkeypatch.setattr(solver_mod._Evaluator, "cpre", lambda self, k, y: (self.states[k][:0],) * 3)
    with pytest.raises(SolverAssertionError):
        solve_parity(p, np.full(p.n_states, 1))
