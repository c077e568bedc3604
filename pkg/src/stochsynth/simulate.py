"""Closed-loop Monte-Carlo rollouts and reach-probability estimates.

Every run owns a Philox stream seeded by ``SeedSequence([seed, run])`` and
draws its noise as one uniform ``(horizon, dim)`` block over D, so a run
replays bit-for-bit whether simulated alone or inside a batch.

Parity satisfaction is a tail property; the statistics here use the highest
priority seen in the last ``tail`` fraction of the trajectory as a finite
surrogate.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

from .errors import OutOfDomainError
from .system import Box, SystemModel, quantize


def run_rng(seed: int, run: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(run)])))


def sample_noise(rng: np.random.Generator, d: Box, size=None) -> np.ndarray:
    """Uniform samples over the box ``d``; ``size`` is the leading shape."""
    shape = (d.dim,) if size is None else tuple(np.atleast_1d(size)) + (d.dim,)
    return d.lower + rng.random(shape) * (d.upper - d.lower)


@dataclass
class Trajectory:
    states: np.ndarray  # (horizon + 1, dim)
    automaton_states: np.ndarray  # (horizon + 1,)
    priorities: np.ndarray  # (horizon + 1,)
    inputs: np.ndarray  # (horizon,) input index, -1 where no guarantee
    seed: int
    run: int = 0
    violations: list = field(default_factory=list)  # steps with a failed lookup

    def dump_csv(self, path) -> None:
        with open(path, "w") as fh:
            dim = self.states.shape[1]
            fh.write(",".join(["step"] + [f"s{i}" for i in range(dim)] + ["q", "priority"]) + "\n")
            for k, (s, q, p) in enumerate(zip(self.states, self.automaton_states, self.priorities)):
                fh.write(",".join([str(k)] + [repr(float(x)) for x in s] + [str(int(q)), str(int(p))]) + "\n")


@dataclass
class ParityStats:
    max_tail_priority: int
    counts: dict
    left_over: bool
    tail_fraction: float

    @property
    def tail_even(self) -> bool:
        return self.max_tail_priority % 2 == 0


def tail_stats(priorities, left_over: bool, tail: float = 0.2) -> ParityStats:
    priorities = np.asarray(priorities)
    k = max(1, int(round(tail * priorities.size)))
    vals, cnt = np.unique(priorities, return_counts=True)
    return ParityStats(int(priorities[-k:].max()), dict(zip(vals.tolist(), cnt.tolist())),
                       bool(left_over), tail)


@dataclass
class BatchResult:
    final_states: np.ndarray
    max_tail_priority: np.ndarray
    left_over: np.ndarray
    violations: np.ndarray  # per run count of failed lookups
    trajectories: list | None = None

    @property
    def n_runs(self) -> int:
        return self.final_states.shape[0]

    @property
    def tail_even(self) -> np.ndarray:
        return self.max_tail_priority % 2 == 0


def _letters_for(ctrl, letters):
    aut = ctrl.automaton
    if aut is None:
        raise ValueError("controller has no automaton attached")
    if letters is None:
        if aut.alphabet:
            raise ValueError("cell letters are required when the automaton reads predicates")
        letters = np.zeros(ctrl.grid.n_cells, dtype=np.int64)
    return aut, np.asarray(letters, dtype=np.int64)


def simulate_batch(model: SystemModel, ctrl, s0, horizon: int, seed: int, *, letters=None,
                   over_region=None, tail: float = 0.2, runs=None, record: bool = False,
                   block: int = 2048) -> BatchResult:
    """Roll out one run per row of ``s0`` under ``ctrl``.

    ``over_region`` is a ``(n_cells, n_q)`` mask of the cooperative winning
    set; visiting a product state outside it sets ``left_over``.  A failed
    lookup is recorded and the run continues with the zero input.
    """
    aut, letters = _letters_for(ctrl, letters)
    grid = ctrl.grid
    s = np.array(np.atleast_2d(s0), dtype=float)
    r = s.shape[0]
    runs = np.arange(r) if runs is None else np.asarray(runs)
    rngs = [run_rng(seed, k) for k in runs]
    cell = quantize(grid, s)
    q = aut.delta[aut.initial, letters[cell]]
    prio = aut.priority
    tail_len = max(1, int(round(tail * (horizon + 1))))
    tail_start = horizon + 1 - tail_len
    max_tail = np.where(0 >= tail_start, prio[q], 0)
    left = np.zeros(r, dtype=bool) if over_region is None else ~over_region[cell, q]
    viol = np.zeros(r, dtype=np.int64)
    zero = np.zeros(ctrl.inputs.shape[1])
    rec = None
    if record:
        rec = ([s.copy()], [q.copy()], [prio[q].copy()], [])
    noise = None
    for t in range(horizon):
        if t % block == 0:
            m = min(block, horizon - t)
            noise = np.stack([sample_noise(g, model.noise_support, m) for g in rngs], axis=1)
        u_idx = ctrl.table[cell, q]
        bad = u_idx < 0
        viol += bad
        u = np.where(bad[:, None], zero, ctrl.inputs[np.maximum(u_idx, 0)])
        s = model.step(s, u, noise[t % block])
        try:
            cell = quantize(grid, s)
        except OutOfDomainError:
            # sink-mode exit: freeze the run at the boundary and mark it as leaving
            out = np.any((s < grid.domain.lower) | (s > grid.domain.upper), axis=1)
            left |= out
            s = np.clip(s, grid.domain.lower, grid.domain.upper)
            cell = quantize(grid, s)
        q = aut.delta[q, letters[cell]]
        if over_region is not None:
            left |= ~over_region[cell, q]
        if t + 1 >= tail_start:
            max_tail = np.maximum(max_tail, prio[q])
        if record:
            rec[0].append(s.copy())
            rec[1].append(q.copy())
            rec[2].append(prio[q].copy())
            rec[3].append(np.where(bad, -1, u_idx))
    trajs = None
    if record:
        st = np.stack(rec[0], axis=1)
        qs = np.stack(rec[1], axis=1)
        ps = np.stack(rec[2], axis=1)
        us = np.stack(rec[3], axis=1) if rec[3] else np.zeros((r, 0), dtype=np.int64)
        trajs = [Trajectory(st[i], qs[i], ps[i], us[i], seed, int(runs[i]),
                            np.flatnonzero(us[i] < 0).tolist()) for i in range(r)]
    return BatchResult(s, max_tail, left, viol, trajs)


def simulate(model: SystemModel, ctrl, s0, horizon: int, seed: int, *, letters=None,
             over_region=None, tail: float = 0.2, run: int = 0):
    """Single closed-loop run; returns ``(Trajectory, ParityStats)``."""
    b = simulate_batch(model, ctrl, np.atleast_2d(s0), horizon, seed, letters=letters,
                       over_region=over_region, tail=tail, runs=[run], record=True)
    traj = b.trajectories[0]
    return traj, tail_stats(traj.priorities, bool(b.left_over[0]), tail)


def wilson_interval(k: int, n: int, level: float = 0.95):
    if n < 1:
        raise ValueError("need at least one run")
    z = norm.ppf(0.5 + level / 2)
    p = k / n
    den = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / den
    half = z * np.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
    return max(0.0, centre - half), min(1.0, centre + half)


@dataclass
class ReachEstimate:
    estimate: float
    interval: tuple
    hits: int
    runs: int


def estimate_reach(model: SystemModel, policy, target, n: int, horizon: int, s0, seed: int,
                   grid=None, *, letters=None) -> ReachEstimate:
    """Fraction of ``n`` runs from ``s0`` whose cell is in ``target`` at some step ``<= horizon``.

    ``policy`` is a Controller (needs ``letters`` when the automaton reads
    predicates), a fixed input vector, or a callable mapping a state batch to
    an input batch.  Runs leaving a sink-mode domain count as misses.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    from .refine import Controller
    if isinstance(policy, Controller):
        grid = policy.grid
        aut, letters = _letters_for(policy, letters)
    elif grid is None:
        raise ValueError("a grid is needed to evaluate the target")
    target = np.asarray(getattr(target, "bits", target), dtype=bool)
    s = np.repeat(np.atleast_2d(np.asarray(s0, dtype=float)), n, axis=0)
    rngs = [run_rng(seed, k) for k in range(n)]
    cell = quantize(grid, s)
    alive = np.ones(n, dtype=bool)
    hit = target[cell].copy()
    q = aut.delta[aut.initial, letters[cell]] if isinstance(policy, Controller) else None
    noise = np.stack([sample_noise(g, model.noise_support, horizon) for g in rngs], axis=1) \
        if horizon else None
    for t in range(horizon):
        active = alive & ~hit
        if not active.any():
            break
        if isinstance(policy, Controller):
            idx = policy.table[cell, q]
            u = np.where((idx < 0)[:, None], 0.0, policy.inputs[np.maximum(idx, 0)])
        elif callable(policy):
            u = np.asarray(policy(s), dtype=float)
        else:
            u = np.broadcast_to(np.asarray(policy, dtype=float), (n, model.inputs.shape[1]))
        nxt = model.step(s, u, noise[t])
        out = np.any((nxt < grid.domain.lower) | (nxt > grid.domain.upper), axis=1)
        alive &= ~out
        s = np.where(active[:, None] & ~out[:, None], nxt, s)
        cell = quantize(grid, s)
        if q is not None:
            q = np.where(active, aut.delta[q, letters[cell]], q)
        hit |= active & ~out & target[cell]
    k = int(hit.sum())
    return ReachEstimate(k / n, wilson_interval(k, n), k, n)
