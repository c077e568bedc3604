"""Deterministic parity automata over predicate letters, cell labelling and the product.

Automaton files are plain text with four sections::

    STATES
    q0:2
    q1:1
    INITIAL
    q0
    ALPHABET
    A B
    TRANS
    q0, A & !B, q1

Guards are boolean formulas over predicate names with ``!``, ``&``, ``|``,
parentheses and the constants ``true`` / ``false``.  Letters are the sets of
predicates holding in a cell.  The product reads the label of the cell being
entered, and the initial automaton state is advanced once on the start cell.
"""
from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .reach import Abstraction
from .system import Box, Grid
from .tables import RectProductTable, SparseTable

_TOKEN = re.compile(r"\s*(?:(\()|(\))|(!)|(&)|(\|)|([A-Za-z_][A-Za-z0-9_]*))")


def _tokenize(text: str):
    pos, out = 0, []
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ConfigError(f"bad guard syntax at {text[pos:]!r} in {text!r}")
        out.append(next(g for g in m.groups() if g is not None))
        pos = m.end()
    return out


def parse_guard(text: str, alphabet):
    """Compile a guard into a predicate on letter bitmasks (bit ``i`` = ``alphabet[i]``)."""
    index = {name: i for i, name in enumerate(alphabet)}
    toks = _tokenize(text)
    if not toks:
        raise ConfigError("empty guard")
    pos = 0

    def peek():
        return toks[pos] if pos < len(toks) else None

    def take(expected=None):
        nonlocal pos
        t = peek()
        if t is None or (expected is not None and t != expected):
            raise ConfigError(f"guard {text!r}: expected {expected or 'term'}, got {t!r}")
        pos += 1
        return t

    def disj():
        f = conj()
        while peek() == "|":
            take("|")
            g, f0 = conj(), f
            f = lambda m, a=f0, b=g: a(m) or b(m)
        return f

    def conj():
        f = unary()
        while peek() == "&":
            take("&")
            g, f0 = unary(), f
            f = lambda m, a=f0, b=g: a(m) and b(m)
        return f

    def unary():
        t = peek()
        if t == "!":
            take("!")
            g = unary()
            return lambda m: not g(m)
        if t == "(":
            take("(")
            g = disj()
            take(")")
            return g
        name = take()
        if name in ("&", "|", ")"):
            raise ConfigError(f"guard {text!r}: unexpected {name!r}")
        if name == "true":
            return lambda m: True
        if name == "false":
            return lambda m: False
        if name not in index:
            raise ConfigError(f"guard {text!r} uses {name!r} which is not in the alphabet")
        bit = 1 << index[name]
        return lambda m: bool(m & bit)

    f = disj()
    if pos != len(toks):
        raise ConfigError(f"trailing tokens in guard {text!r}")
    return f


@dataclass(frozen=True, eq=False)
class ParityAutomaton:
    states: tuple
    priority: np.ndarray
    initial: int
    alphabet: tuple
    transitions: tuple  # (src index, guard text, dst index)
    delta: np.ndarray = field(repr=False)  # (n_states, 2**|alphabet|), -1 undefined, -2 ambiguous

    @classmethod
    def build(cls, states, priorities, initial, alphabet, transitions) -> "ParityAutomaton":
        states = tuple(states)
        if len(set(states)) != len(states) or not states:
            raise ConfigError("automaton states must be unique and non-empty")
        idx = {s: i for i, s in enumerate(states)}
        if isinstance(priorities, dict):
            priorities = [priorities[s] for s in states]
        prio = np.array([int(p) for p in priorities], dtype=np.int64)
        if prio.shape != (len(states),):
            raise ConfigError("one priority per state required")
        if np.any(prio < 1):
            raise ConfigError("priorities must be positive integers")
        alphabet = tuple(alphabet)
        if len(set(alphabet)) != len(alphabet):
            raise ConfigError("duplicate predicate in alphabet")
        if len(alphabet) > 16:
            raise ConfigError("alphabet too large")
        if initial not in idx:
            raise ConfigError(f"unknown initial state {initial!r}")
        trans = []
        for src, guard, dst in transitions:
            if src not in idx or dst not in idx:
                raise ConfigError(f"transition {src} -> {dst} names an unknown state")
            trans.append((idx[src], guard.strip(), idx[dst]))
        n_letters = 1 << len(alphabet)
        delta = np.full((len(states), n_letters), -1, dtype=np.int64)
        for s, guard, d in trans:
            g = parse_guard(guard, alphabet)
            for m in range(n_letters):
                if g(m):
                    if delta[s, m] == -1:
                        delta[s, m] = d
                    elif delta[s, m] != d:
                        delta[s, m] = -2
        return cls(states, prio, idx[initial], alphabet, tuple(trans), delta)

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def max_priority(self) -> int:
        return int(self.priority.max())

    def letter_names(self, mask: int):
        return frozenset(a for i, a in enumerate(self.alphabet) if mask >> i & 1)

    def letter_mask(self, names) -> int:
        names = set(names)
        return sum(1 << i for i, a in enumerate(self.alphabet) if a in names)

    def step(self, q: int, letter) -> int:
        """Successor of ``q`` on a letter given as bitmask or set of predicate names."""
        m = letter if isinstance(letter, (int, np.integer)) else self.letter_mask(letter)
        d = int(self.delta[q, m])
        if d < 0:
            self._fail(q, m, d)
        return d

    def _fail(self, q, m, d):
        what = "no transition" if d == -1 else "more than one transition"
        raise ConfigError(f"automaton has {what} from {self.states[q]} on letter "
                          f"{{{', '.join(sorted(self.letter_names(m)))}}}")

    def check_letters(self, masks) -> None:
        for m in np.unique(np.asarray(masks)):
            for q in range(self.n_states):
                if self.delta[q, m] < 0:
                    self._fail(q, int(m), int(self.delta[q, m]))

    def dumps(self) -> str:
        lines = ["STATES"]
        lines += [f"{s}:{p}" for s, p in zip(self.states, self.priority.tolist())]
        lines += ["INITIAL", self.states[self.initial], "ALPHABET", " ".join(self.alphabet), "TRANS"]
        lines += [f"{self.states[s]}, {g}, {self.states[d]}" for s, g, d in self.transitions]
        return "\n".join(lines) + "\n"

    def hash(self) -> str:
        # canonical: the compiled transition function, not the guard spelling
        h = hashlib.sha256()
        h.update(("|".join(self.states) + ";" + "|".join(self.alphabet) + ";").encode())
        h.update(f"{self.initial};".encode())
        h.update(self.priority.astype("<i8").tobytes())
        h.update(self.delta.astype("<i8").tobytes())
        return h.hexdigest()


def parse_automaton(text: str) -> ParityAutomaton:
    sections = {"STATES": [], "INITIAL": [], "ALPHABET": [], "TRANS": []}
    cur = None
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.upper() in sections:
            cur = line.upper()
            continue
        if cur is None:
            raise ConfigError(f"content before first section: {line!r}")
        sections[cur].append(line)
    if not sections["STATES"] or len(sections["INITIAL"]) != 1:
        raise ConfigError("automaton needs a STATES section and exactly one INITIAL state")
    names, prio = [], {}
    for line in sections["STATES"]:
        name, sep, p = line.partition(":")
        if not sep:
            raise ConfigError(f"state line {line!r} lacks ':priority'")
        try:
            prio[name.strip()] = int(p)
        except ValueError:
            raise ConfigError(f"bad priority in {line!r}") from None
        names.append(name.strip())
    alphabet = [a for line in sections["ALPHABET"] for a in re.split(r"[\s,]+", line) if a]
    trans = []
    for line in sections["TRANS"]:
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 3:
            raise ConfigError(f"transition {line!r} must be 'src, guard, dst'")
        trans.append(tuple(parts))
    return ParityAutomaton.build(names, prio, sections["INITIAL"][0].strip(), alphabet, trans)


def load_automaton(path) -> ParityAutomaton:
    with open(path) as fh:
        return parse_automaton(fh.read())


@dataclass(frozen=True)
class PredicateSet:
    """Named regions, each a finite union of boxes."""

    regions: dict

    def __post_init__(self):
        for name, boxes in self.regions.items():
            for b in boxes:
                if not isinstance(b, Box):
                    raise TypeError(f"region {name} must be a list of Box")

    @property
    def names(self):
        return tuple(self.regions)


def bistable_predicates() -> PredicateSet:
    B = lambda x0, x1, y0, y1: Box([x0, y0], [x1, y1])
    return PredicateSet({
        "A": [B(1, 3, 1, 2), B(2, 3, 2, 3)],
        "B": [B(0, 1, 0, 1)],
        "C": [B(1, 2, 1, 2), B(3, 4, 1, 3), B(0, 1, 3, 4)],
        "D": [B(2, 3, 3, 4)],
    })


def label_cells(preds: PredicateSet, grid: Grid, alphabet=None) -> np.ndarray:
    """Letter bitmask of every cell (bit ``i`` for ``alphabet[i]``).

    Each region box must contain a cell fully or meet it in a null set.
    """
    alphabet = tuple(preds.names if alphabet is None else alphabet)
    lo, hi = grid.all_cell_bounds()
    width = hi - lo
    tol = 1e-9 * np.min(grid.eta)
    masks = np.zeros(grid.n_cells, dtype=np.int64)
    for i, name in enumerate(alphabet):
        inside = np.zeros(grid.n_cells, dtype=bool)
        for box in preds.regions.get(name, []):
            ov = np.minimum(hi, box.upper) - np.maximum(lo, box.lower)
            full = np.all(ov >= width - tol, axis=1)
            null = np.any(ov <= tol, axis=1)
            cut = ~full & ~null
            if np.any(cut):
                c = int(np.flatnonzero(cut)[0])
                raise ConfigError(f"region {name} box {box} cuts through cell "
                                  f"{tuple(int(k) for k in grid.multi_index(c))}; "
                                  f"the grid does not respect predicate boundaries")
            inside |= full
        masks[inside] |= 1 << i
    return masks


def label_cell(preds: PredicateSet, grid: Grid, c: int) -> frozenset:
    masks = label_cells(preds, grid)
    names = preds.names
    return frozenset(n for i, n in enumerate(names) if masks[int(c)] >> i & 1)


@dataclass(eq=False)
class ProductAbstraction:
    """Game arena over product states with per-(state, input) F̄/F̲ tables."""

    table: object
    priority: np.ndarray
    base: Abstraction | None = None
    automaton: ParityAutomaton | None = None
    letters: np.ndarray | None = None
    initial: np.ndarray | None = None  # cell -> product state after the initial advance
    n_q: int = 1
    sink: int | None = None

    @property
    def n_states(self) -> int:
        return self.table.n_states

    @property
    def n_inputs(self) -> int:
        return self.table.n_inputs

    def state_id(self, c: int, q: int) -> int:
        return int(c) * self.n_q + int(q)

    def split(self, v: int):
        return divmod(int(v), self.n_q)

    def successors(self, v: int, u: int):
        return self.table.successors(int(v) * self.n_inputs + int(u))

    @classmethod
    def from_sets(cls, over, under, priority, n_inputs=None) -> "ProductAbstraction":
        """Small arena from nested lists ``over[v][u]`` / ``under[v][u]`` of successor ids."""
        n = len(over)
        nu = len(over[0]) if n_inputs is None else n_inputs
        rows_o = [over[v][u] for v in range(n) for u in range(nu)]
        rows_u = [under[v][u] for v in range(n) for u in range(nu)]
        for a, b in zip(rows_o, rows_u):
            if not set(b) <= set(a):
                raise ValueError("under-approximation must be a subset of the over-approximation")
            if not a:
                raise ValueError("every (state, input) needs at least one successor")
        tab = SparseTable.from_sets(rows_o, rows_u, n, nu)
        return cls(tab, np.asarray(priority, dtype=np.int64))

    def to_sparse(self) -> "ProductAbstraction":
        return ProductAbstraction(self.table.to_sparse(), self.priority, self.base, self.automaton,
                                  self.letters, self.initial, self.n_q, self.sink)


def product(abs_: Abstraction, aut: ParityAutomaton, preds: PredicateSet) -> ProductAbstraction:
    letters = label_cells(preds, abs_.grid, aut.alphabet)
    aut.check_letters(letters)
    n_q, n = aut.n_states, abs_.n_cells
    cells = np.arange(n)
    nxt = aut.delta[:, letters]  # (n_q, n_cells)
    gather = cells[None, :] * n_q + nxt
    has_sink = abs_.boundary_mode == "sink"
    table = RectProductTable(abs_, gather, n_q, has_sink)
    prio = np.tile(aut.priority, n)
    if has_sink:
        prio = np.append(prio, 1)
    initial = cells * n_q + nxt[aut.initial]
    return ProductAbstraction(table, prio, abs_, aut, letters, initial, n_q, table.sink)
