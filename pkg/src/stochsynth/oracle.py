"""Brute-force almost-sure parity solver for tiny games, plus random instances.

For every pair of deterministic memoryless strategies the game collapses to
a finite Markov chain on V0.  A state is won under a player-0 strategy iff,
for every player-1 strategy, every bottom SCC reachable from it has an even
maximal priority.  Enumeration is vectorised over all strategy pairs with
states encoded as bitmasks.
"""
from __future__ import annotations

import numpy as np

from .automata import ProductAbstraction
from .errors import InstanceTooLargeError
from .game import ExplicitGame

MAX_CONFIGS = 4_000_000
MAX_V0 = 16
CHUNK = 1 << 18


def _choices(g: ExplicitGame, fixed=None):
    """Per V0 state: list of (input, support bitmask) joint choices."""
    base_r = g.n0 + g.n1
    out = []
    for v in range(g.n0):
        ch = []
        for u in range(g.n_inputs):
            if fixed is not None and fixed[v] >= 0 and u != fixed[v]:
                continue
            for r in g.succ[g.v1(v, u)]:
                mask = 0
                for w in g.supports[int(r) - base_r]:
                    mask |= 1 << int(w)
                ch.append((u, mask))
        out.append(ch)
    return out


def enumerative_oracle(g: ExplicitGame, priorities=None, strategy=None) -> np.ndarray:
    """Almost-sure winning V0 states (bool mask).

    With ``strategy`` (an input per V0 state, -1 for free) player 0 is
    restricted to it, which checks a given strategy instead of solving.
    """
    n = g.n0
    if n > MAX_V0:
        raise InstanceTooLargeError(f"{n} V0 states exceed the oracle limit of {MAX_V0}")
    prio = np.asarray(g.priority if priorities is None else priorities, dtype=np.int64)
    choices = _choices(g, strategy)
    radix = np.array([len(c) for c in choices], dtype=np.int64)
    total = int(np.prod(radix.astype(object)))
    if total > MAX_CONFIGS:
        raise InstanceTooLargeError(f"{total} strategy combinations exceed {MAX_CONFIGS}")
    succ_tab = [np.array([m for _, m in c], dtype=np.int64) for c in choices]
    inp_tab = [np.array([u for u, _ in c], dtype=np.int64) for c in choices]

    # max priority of every subset of V0, to grade BSCCs
    masks = np.arange(1 << n, dtype=np.int64)
    maxp = np.zeros(1 << n, dtype=np.int64)
    for v in range(n):
        maxp = np.where((masks >> v) & 1, np.maximum(maxp, prio[v]), maxp)
    good = maxp % 2 == 0

    # π0 code: mixed radix over inputs per state
    nu = g.n_inputs
    lose_by_pi0 = np.zeros((nu ** n, n), dtype=bool)
    for start in range(0, total, CHUNK):
        idx = np.arange(start, min(total, start + CHUNK), dtype=np.int64)
        reach = np.empty((idx.size, n), dtype=np.int64)
        code = np.zeros(idx.size, dtype=np.int64)
        rem = idx
        for v in range(n):
            digit = rem % radix[v]
            rem = rem // radix[v]
            reach[:, v] = succ_tab[v][digit] | (1 << v)
            code = code * nu + inp_tab[v][digit]
        # transitive closure by repeated squaring of the reachability relation
        for _ in range(max(1, int(np.ceil(np.log2(max(n, 2)))) + 1)):
            nxt = reach.copy()
            for w in range(n):
                has = ((reach >> w) & 1).astype(bool)
                nxt |= np.where(has, reach[:, w:w + 1], 0)
            if np.array_equal(nxt, reach):
                break
            reach = nxt
        bad_bscc = np.zeros(idx.size, dtype=np.int64)
        for v in range(n):
            rv = reach[:, v]
            back = np.ones(idx.size, dtype=bool)
            for w in range(n):
                back &= ~(((rv >> w) & 1).astype(bool)) | ((reach[:, w] >> v) & 1).astype(bool)
            is_bad = back & ~good[rv]
            bad_bscc |= np.where(is_bad, 1 << v, 0)
        lose = (reach & bad_bscc[:, None]) != 0
        np.logical_or.at(lose_by_pi0, code, lose)
    # codes that never occur (inputs excluded by a fixed strategy) must not count as wins
    seen = np.zeros(nu ** n, dtype=bool)
    seen[_all_codes(inp_tab, nu)] = True
    win = (~lose_by_pi0 & seen[:, None]).any(axis=0)
    return win


def _all_codes(inp_tab, nu):
    codes = np.zeros(1, dtype=np.int64)
    for t in inp_tab:
        codes = (codes[:, None] * nu + np.unique(t)[None, :]).ravel()
    return codes


def random_product(rng: np.random.Generator, max_states: int = 8, max_inputs: int = 2,
                   max_priority: int = 4, max_over: int = 3, min_states: int = 1) -> ProductAbstraction:
    """Random arena: small F̄ per (state, input) and F̲ a random subset of it."""
    n = int(rng.integers(min_states, max_states + 1))
    nu = int(rng.integers(1, max_inputs + 1))
    over, under = [], []
    for _ in range(n):
        ov, un = [], []
        for _ in range(nu):
            k = int(rng.integers(1, min(max_over, n) + 1))
            o = rng.choice(n, size=k, replace=False)
            keep = rng.random(k) < 0.5
            ov.append(sorted(o.tolist()))
            un.append(sorted(o[keep].tolist()))
        over.append(ov)
        under.append(un)
    prio = rng.integers(1, max_priority + 1, size=n)
    return ProductAbstraction.from_sets(over, under, prio, nu)
