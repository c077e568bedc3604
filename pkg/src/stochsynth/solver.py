"""Almost-sure parity solving by the nested ν/μ fixpoint over combined operators.

With priority classes ``B_1..B_l`` (``l`` even) the winning region is
``I_l(∅)`` where ``I_0(T) = T`` and::

    I_k(T) = νY. μX. I_{k-2}( (B_{<k} ∩ Apre(Y, X)) ∪ (B_k ∩ Cpre(Y)) ∪ T )

``B_{<k}`` is every state of priority below ``k``, not only ``B_{k-1}``: a
low even-priority state may also make positive-probability progress towards
``X`` (with only ``B_{k-1}`` the iteration misses plays that cycle through a
lower even state before reaching ``B_k``).  For ``k = 2`` the two coincide.

Strategies are read off the last X-pass of each level: a state takes the
witness input of the first μ-layer that contains it, either from its own
Apre/Cpre seed or from the inner level that pulled it in.  States of ``T``
keep the input handed down by the enclosing level.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import SolverAssertionError
from .game import ADVERSARIAL, _check_mode, row_ok


@dataclass
class SolveResult:
    winning: np.ndarray
    strategy: np.ndarray  # input index per state, -1 outside the winning set
    mode: str
    iteration_counts: dict = field(default_factory=dict)

    def strategy_map(self) -> dict:
        return {int(v): int(self.strategy[v]) for v in np.flatnonzero(self.winning)}

    @property
    def winning_states(self) -> set:
        return set(np.flatnonzero(self.winning).tolist())


def _classes(priority, pad_to=None):
    priority = np.asarray(priority, dtype=np.int64)
    if priority.size and priority.min() < 1:
        raise ValueError("priorities must be >= 1")
    top = int(priority.max()) if priority.size else 2
    top = max(top, pad_to or 0, 2)
    top += top % 2
    return top, [priority == i for i in range(top + 1)]


class _Evaluator:
    """Combined operators restricted to the states of one priority class."""

    def __init__(self, prod, mode, classes):
        self.table = prod.table
        self.nu = prod.n_inputs
        self.mode = mode
        self.states = [np.flatnonzero(c) for c in classes]
        # odd levels act on every state below the level's even priority
        below = np.zeros_like(classes[0])
        for k in range(1, len(classes), 2):
            below = below | classes[k] | (classes[k - 1] if k > 1 else False)
            self.states[k] = np.flatnonzero(below)
        ar = np.arange(self.nu)
        self.rows = [(s[:, None] * self.nu + ar).ravel() for s in self.states]
        self._cpre_cache = {}

    def _eval(self, k, y, z, z_in_y):
        st = self.states[k]
        if st.size == 0:
            return st, np.zeros(0, bool), np.zeros(0, np.int64)
        ok = row_ok(self.table, y, z, self.mode, self.rows[k], assume_z_in_y=z_in_y).reshape(-1, self.nu)
        win = ok.any(axis=1)
        return st, win, ok.argmax(axis=1)

    def apre(self, k, y, x):
        return self._eval(k, y, x, not np.any(x & ~y))

    def cpre(self, k, y):
        hit = self._cpre_cache.get(k)
        if hit is not None and np.array_equal(hit[0], y):
            return hit[1]
        res = self._eval(k, y, y, True)
        self._cpre_cache[k] = (y.copy(), res)
        return res


class _Solver:
    def __init__(self, prod, priority, mode, check=True):
        _check_mode(mode)
        self.n = prod.n_states
        self.top, self.classes = _classes(priority)
        self.ev = _Evaluator(prod, mode, self.classes)
        self.check = check
        self.counts = {}

    def _tick(self, name):
        self.counts[name] = self.counts.get(name, 0) + 1

    def solve(self, level, t, t_strat):
        """Returns ``(I_level(t), strategy)``; ``t_strat`` gives inputs on ``t``."""
        if level == 0:
            return t.copy(), np.where(t, t_strat, -1)
        n = self.n
        y = np.ones(n, dtype=bool)
        while True:
            self._tick(f"Y{level}")
            x = np.zeros(n, dtype=bool)
            strat = np.full(n, -1, dtype=np.int64)
            while True:
                self._tick(f"X{level - 1}")
                seed = t.copy()
                seed_strat = np.where(t, t_strat, -1)
                for k, (st, win, wit) in ((level - 1, self.ev.apre(level - 1, y, x)),
                                          (level, self.ev.cpre(level, y))):
                    add = st[win & ~t[st]]
                    seed[add] = True
                    seed_strat[add] = wit[win & ~t[st]]
                xn, inner = self.solve(level - 2, seed, seed_strat)
                if self.check and np.any(x & ~xn):
                    raise SolverAssertionError(f"X iterate at level {level - 1} decreased")
                new = xn & ~x
                strat[new] = inner[new]
                if not new.any():
                    break
                x = xn
            if self.check and np.any(x & ~y):
                raise SolverAssertionError(f"Y iterate at level {level} increased")
            if np.array_equal(x, y):
                return y, strat
            y = x


def solve_parity(prod, priorities=None, mode: str = ADVERSARIAL, check: bool = True) -> SolveResult:
    """Almost-sure winning region of the parity objective (max priority seen infinitely often is even)."""
    priorities = prod.priority if priorities is None else np.asarray(priorities)
    s = _Solver(prod, priorities, mode, check)
    n = prod.n_states
    win, strat = s.solve(s.top, np.zeros(n, bool), np.full(n, -1, np.int64))
    res = SolveResult(win, np.where(win, strat, -1), mode, s.counts)
    if check:
        check_closure(prod, res)
    return res


def solve_buchi_reach(prod, b, t, mode: str = ADVERSARIAL, check: bool = True) -> SolveResult:
    """Winning region of ``□◇B ∨ ◇T``; states of ``T`` get the lowest input that stays winning if any."""
    b = np.asarray(b, dtype=bool)
    t = np.asarray(t, dtype=bool)
    prio = np.where(b, 2, 1)
    s = _Solver(prod, prio, mode, check)
    n = prod.n_states
    win, strat = s.solve(2, t, np.zeros(n, np.int64))
    if t.any():
        from .game import combined_cpre
        ok, wit = combined_cpre(prod, win, mode, with_witness=True)
        strat = np.where(t & ok, wit, strat)
    return SolveResult(win, np.where(win, strat, -1), mode, s.counts)


def check_closure(prod, res: SolveResult) -> None:
    """Every winning state's input keeps the play inside the winning set."""
    v = np.flatnonzero(res.winning)
    if v.size == 0:
        return
    u = res.strategy[v]
    if np.any(u < 0):
        raise SolverAssertionError("strategy undefined on a winning state")
    rows = v * prod.n_inputs + u
    tab = prod.table
    w = res.winning
    o, un = tab.counts(w, rows)
    if res.mode == ADVERSARIAL:
        bad = o != tab.over_size[rows]
    else:
        bad = (un != tab.under_size[rows]) | (o == 0)
    if np.any(bad):
        raise SolverAssertionError(f"strategy leaves the winning set at state {int(v[bad][0])}")


def reach_ranking(prod, strategy, target) -> np.ndarray:
    """Rank of each state for reaching ``target`` almost surely under a fixed strategy (inf if none)."""
    strategy = np.asarray(strategy, dtype=np.int64)
    target = np.asarray(target, dtype=bool)
    n, nu, tab = prod.n_states, prod.n_inputs, prod.table
    cand = np.flatnonzero((strategy >= 0) & ~target)
    rows = cand * nu + strategy[cand]
    osz, usz = tab.over_size[rows], tab.under_size[rows]
    y = np.ones(n, dtype=bool)
    while True:
        rank = np.full(n, np.inf)
        rank[target] = 0
        ranked = target.copy()
        oy, = tab.counts(y, rows, ("over",))
        stay = oy == osz
        i = 0
        while True:
            o, un = tab.counts(ranked, rows)
            step = stay & ~ranked[cand] & ((un > 0) | ((usz == 0) & (o == osz)))
            if not step.any():
                break
            i += 1
            rank[cand[step]] = i
            ranked[cand[step]] = True
        if np.array_equal(ranked, y):
            return rank
        y = ranked
