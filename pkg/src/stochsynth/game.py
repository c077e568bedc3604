"""Explicit 2½-player game and the predecessor operators.

The explicit game has player-0 vertices (product states), player-1 vertices
``(v, u)`` and random vertices, one per admissible support ``vr`` with
``F̲ ⊆ vr ⊆ F̄`` and ``|vr| ≤ |F̲| + 1`` (singletons of F̄ when F̲ is empty).
It exists for testing; the solver works with the combined operators, which
fold the three-step alternation V0 -> V1 -> Vr -> V0 into per-row counts on
the product tables.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ADVERSARIAL = "adversarial"
COOPERATIVE = "cooperative"
MODES = (ADVERSARIAL, COOPERATIVE)


def _check_mode(mode):
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")


@dataclass(eq=False)
class ExplicitGame:
    n0: int
    n_inputs: int
    supports: list  # Vr vertices as frozensets of V0 ids
    succ: list  # successor id arrays, indexed by vertex id
    priority: np.ndarray  # V0 priorities

    @property
    def n1(self) -> int:
        return self.n0 * self.n_inputs

    @property
    def nr(self) -> int:
        return len(self.supports)

    @property
    def n_vertices(self) -> int:
        return self.n0 + self.n1 + self.nr

    def v1(self, v: int, u: int) -> int:
        return self.n0 + v * self.n_inputs + u

    def vr(self, k: int) -> int:
        return self.n0 + self.n1 + k

    def owner(self, x: int) -> str:
        if x < self.n0:
            return "0"
        return "1" if x < self.n0 + self.n1 else "r"

    def blocks(self):
        """Index slices of V0, V1, Vr."""
        a, b = self.n0, self.n0 + self.n1
        return slice(0, a), slice(a, b), slice(b, self.n_vertices)

    def lift(self, v0_mask) -> np.ndarray:
        """Vertex set equal to ``v0_mask`` on V0 and empty elsewhere."""
        s = np.zeros(self.n_vertices, dtype=bool)
        s[:self.n0] = v0_mask
        return s

    def dumps(self) -> str:
        lines = []
        for x in range(self.n_vertices):
            o = self.owner(x)
            p = str(int(self.priority[x])) if o == "0" else "-"
            lines.append(" ".join([str(x), o, p] + [str(int(y)) for y in self.succ[x]]))
        return "\n".join(lines) + "\n"


def random_supports(over, under):
    """Admissible supports of one player-1 vertex."""
    over = sorted(set(int(x) for x in over))
    under = frozenset(int(x) for x in under)
    if not under:
        return [frozenset([x]) for x in over]
    out = [under]
    out += [under | {x} for x in over if x not in under]
    return out


def explicit_game(prod) -> ExplicitGame:
    n0, nu = prod.n_states, prod.n_inputs
    index = {}
    supports = []
    v1_succ = []
    for v in range(n0):
        for u in range(nu):
            over, under = prod.successors(v, u)
            if len(over) == 0:
                raise ValueError(f"dead vertex: state {v} input {u} has no successor")
            ids = []
            for s in random_supports(over, under):
                if s not in index:
                    index[s] = len(supports)
                    supports.append(s)
                ids.append(index[s])
            v1_succ.append(ids)
    base_r = n0 + n0 * nu
    succ = [np.arange(n0 + v * nu, n0 + (v + 1) * nu) for v in range(n0)]
    succ += [np.array(sorted(base_r + k for k in ids), dtype=np.int64) for ids in v1_succ]
    succ += [np.array(sorted(s), dtype=np.int64) for s in supports]
    return ExplicitGame(n0, nu, supports, succ, np.asarray(prod.priority, dtype=np.int64))


def _all_any(g: ExplicitGame, s):
    s = np.asarray(s, dtype=bool)
    all_in = np.array([bool(np.all(s[e])) for e in g.succ])
    any_in = np.array([bool(np.any(s[e])) for e in g.succ])
    return all_in, any_in


def cpre(g: ExplicitGame, s, mode: str = ADVERSARIAL) -> np.ndarray:
    """Player 0 picks, player 1 (universal unless cooperative) and random vertices must stay."""
    _check_mode(mode)
    all_in, any_in = _all_any(g, s)
    b0, b1, br = g.blocks()
    out = np.empty(g.n_vertices, dtype=bool)
    out[b0] = any_in[b0]
    out[b1] = any_in[b1] if mode == COOPERATIVE else all_in[b1]
    out[br] = all_in[br]
    return out


def apre(g: ExplicitGame, s, t, mode: str = ADVERSARIAL) -> np.ndarray:
    """``Cpre(t)`` plus random vertices that stay in ``s`` and hit ``t`` with positive probability."""
    out = cpre(g, t, mode)
    all_s, _ = _all_any(g, s)
    _, any_t = _all_any(g, t)
    br = g.blocks()[2]
    out[br] |= all_s[br] & any_t[br]
    return out


def explicit_combined_cpre(g: ExplicitGame, y, mode: str = ADVERSARIAL) -> np.ndarray:
    s = g.lift(y)
    return cpre(g, cpre(g, cpre(g, s, mode), mode), mode)[:g.n0]


def explicit_combined_apre(g: ExplicitGame, y, z, mode: str = ADVERSARIAL) -> np.ndarray:
    r = apre(g, g.lift(y), g.lift(z), mode)
    return cpre(g, cpre(g, r, mode), mode)[:g.n0]


# --- combined operators on product tables -------------------------------------------------

def row_ok(table, y, z, mode: str, rows=None, assume_z_in_y: bool | None = None) -> np.ndarray:
    """Per-row test that input ``u`` at state ``v`` forces (or allows) a step into ``Apre(y, z)``."""
    _check_mode(mode)
    y = np.asarray(y, dtype=bool)
    z = np.asarray(z, dtype=bool)
    osz = table.over_size if rows is None else table.over_size[rows]
    usz = table.under_size if rows is None else table.under_size[rows]
    ue = usz == 0
    if assume_z_in_y is None:
        assume_z_in_y = not np.any(z & ~y)
    if assume_z_in_y:
        if mode == ADVERSARIAL:
            oy, = table.counts(y, rows, ("over",))
            oz, uz = table.counts(z, rows)
            return (oy == osz) & ((uz > 0) | (ue & (oz == osz)))
        oz, = table.counts(z, rows, ("over",))
        uy, = table.counts(y, rows, ("under",))
        return (uy == usz) & (oz > 0)

    oy, uy = table.counts(y, rows)
    oz, uz = table.counts(z, rows)
    oyz, uyz = table.counts(y & z, rows)
    a, b, c = uz == usz, uy == usz, uz > 0
    e_y, e_z, e_yz = oy - uy, oz - uz, oyz - uyz
    n_ext = osz - usz
    # extras x ∈ F̄ \ F̲ must satisfy (a ∧ z[x]) ∨ (b ∧ y[x] ∧ (c ∨ z[x]))
    cnt = np.zeros_like(n_ext)
    cnt = np.where(~b & a, e_z, cnt)
    cnt = np.where(b & c & a, e_y + e_z - e_yz, cnt)
    cnt = np.where(b & c & ~a, e_y, cnt)
    cnt = np.where(b & ~c & a, e_z, cnt)
    cnt = np.where(b & ~c & ~a, e_yz, cnt)
    if mode == ADVERSARIAL:
        return (ue | a | (b & c)) & (cnt == n_ext)
    return (~ue & (a | (b & c))) | (cnt > 0)


def _reduce(ok: np.ndarray, n_inputs: int):
    ok = ok.reshape(-1, n_inputs)
    win = ok.any(axis=1)
    wit = np.where(win, ok.argmax(axis=1), -1)
    return win, wit


def combined_apre(prod, y, z, mode: str = ADVERSARIAL, with_witness: bool = False):
    """States with an input leading into ``Apre(y, z)`` after the three-step alternation."""
    win, wit = _reduce(row_ok(prod.table, y, z, mode), prod.n_inputs)
    return (win, wit) if with_witness else win


def combined_cpre(prod, y, mode: str = ADVERSARIAL, with_witness: bool = False):
    y = np.asarray(y, dtype=bool)
    return combined_apre(prod, y, y, mode, with_witness)
