"""One-step reach sets and the over/under transition approximations.

For a cell ``c`` and input ``u`` with nominal reach box ``R``:

* ``S1 = D (+) R`` holds every point reachable with some disturbance; the
  over-approximation collects all cells touching ``S1``.
* ``S2 = D (-) (-R)`` holds the points reachable from *every* ``s`` in the
  cell; the under-approximation collects all cells overlapping ``S2`` with
  positive volume.

Both images are boxes, so every successor set is an index rectangle of the
grid.  :class:`Abstraction` stores the rectangles and expands them to
:class:`CellSet` on demand.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .system import Box, Grid, NaturalExtension, SystemModel, cell_box

# positive-measure threshold, as a fraction of the cell width per dimension
MEASURE_TOL = 1e-12


class CellSet:
    """Set of cell ids over a fixed universe, backed by a dense bool vector."""

    __slots__ = ("bits",)

    def __init__(self, bits):
        self.bits = np.asarray(bits, dtype=bool)

    @classmethod
    def empty(cls, n: int) -> "CellSet":
        return cls(np.zeros(n, dtype=bool))

    @classmethod
    def full(cls, n: int) -> "CellSet":
        return cls(np.ones(n, dtype=bool))

    @classmethod
    def from_ids(cls, n: int, ids) -> "CellSet":
        bits = np.zeros(n, dtype=bool)
        bits[np.asarray(list(ids), dtype=np.int64)] = True
        return cls(bits)

    @property
    def universe(self) -> int:
        return self.bits.size

    def __contains__(self, c) -> bool:
        return 0 <= int(c) < self.bits.size and bool(self.bits[int(c)])

    def insert(self, c) -> "CellSet":
        bits = self.bits.copy()
        bits[int(c)] = True
        return CellSet(bits)

    def __or__(self, other):
        return CellSet(self.bits | other.bits)

    def __and__(self, other):
        return CellSet(self.bits & other.bits)

    def __sub__(self, other):
        return CellSet(self.bits & ~other.bits)

    def __invert__(self):
        return CellSet(~self.bits)

    union = __or__
    intersection = __and__
    complement = __invert__

    def issubset(self, other) -> bool:
        return not np.any(self.bits & ~other.bits)

    __le__ = issubset

    def __iter__(self):
        return iter(np.flatnonzero(self.bits).tolist())

    def __len__(self):
        return int(self.bits.sum())

    def __eq__(self, other):
        if not isinstance(other, CellSet):
            return NotImplemented
        return np.array_equal(self.bits, other.bits)

    def __hash__(self):
        return hash(np.packbits(self.bits).tobytes())

    def __repr__(self):
        return f"CellSet({list(self)})"


def minkowski_sum(a: Box, b: Box) -> Box:
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    if a.is_empty or b.is_empty:
        return Box.empty(a.dim)
    return Box(a.lower + b.lower, a.upper + b.upper)


def minkowski_diff(a: Box, b: Box) -> Box:
    """``{y | y + b ⊆ a}``; empty when ``b`` is wider than ``a`` in some axis."""
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    if a.is_empty:
        return Box.empty(a.dim)
    if b.is_empty:
        # every y satisfies y + {} ⊆ a; not needed by the abstraction, keep it bounded
        raise ValueError("Minkowski difference with an empty subtrahend is unbounded")
    return Box(a.lower - b.lower, a.upper - b.upper)


def touching_range(grid: Grid, lo, hi):
    """Index range of cells whose closed hull meets the box ``[lo, hi]`` (boundary contact counts).

    Works on ``(..., dim)`` batches; returns inclusive ``(imin, imax)``, empty where ``imax < imin``.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    n = np.asarray(grid.cells_per_dim)
    ta = (lo - grid.domain.lower) / grid.eta
    tb = (hi - grid.domain.lower) / grid.eta
    imin = np.maximum(np.ceil(ta).astype(np.int64) - 1, 0)
    imax = np.minimum(np.floor(tb).astype(np.int64), n - 1)
    bad = np.any(lo > hi, axis=-1, keepdims=True)
    imin = np.where(bad, 1, imin)
    imax = np.where(bad, 0, imax)
    return imin, imax


def positive_range(grid: Grid, lo, hi, tol: float = MEASURE_TOL):
    """Index range of cells overlapping ``[lo, hi]`` with positive volume."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    n = np.asarray(grid.cells_per_dim)
    ta = (lo - grid.domain.lower) / grid.eta
    tb = (hi - grid.domain.lower) / grid.eta
    imin = np.floor(ta).astype(np.int64)
    imin = np.where(imin + 1 - ta <= tol, imin + 1, imin)
    imax = np.ceil(tb).astype(np.int64) - 1
    imax = np.where(tb - imax <= tol, imax - 1, imax)
    imin = np.maximum(imin, 0)
    imax = np.minimum(imax, n - 1)
    thin = np.any(tb - ta <= tol, axis=-1, keepdims=True)
    imin = np.where(thin, 1, imin)
    imax = np.where(thin, 0, imax)
    return imin, imax


def _range_to_set(grid: Grid, imin, imax) -> CellSet:
    imin = np.asarray(imin)
    imax = np.asarray(imax)
    if np.any(imax < imin):
        return CellSet.empty(grid.n_cells)
    axes = [np.arange(a, b + 1) for a, b in zip(imin, imax)]
    mesh = np.meshgrid(*axes, indexing="ij")
    ids = np.ravel_multi_index(tuple(m.ravel() for m in mesh), grid.cells_per_dim)
    return CellSet.from_ids(grid.n_cells, ids)


def _range_size(imin, imax) -> np.ndarray:
    return np.prod(np.maximum(imax - imin + 1, 0), axis=-1)


class AbstractionBuilder:
    """Computes reach boxes and successor rectangles for one model on one grid."""

    def __init__(self, model: SystemModel, grid: Grid, ext=None):
        if grid.dim != model.dim:
            raise ValueError("grid and model dimensions differ")
        if not (np.allclose(grid.domain.lower, model.domain.lower)
                and np.allclose(grid.domain.upper, model.domain.upper)):
            raise ValueError("grid must partition the model domain")
        self.model = model
        self.grid = grid
        self.ext = ext if ext is not None else NaturalExtension(model)

    def reach_box(self, c: int, u: int) -> Box:
        return self.ext.box(cell_box(self.grid, c), self.model.inputs[u])

    def s1(self, c: int, u: int) -> Box:
        return minkowski_sum(self.model.noise_support, self.reach_box(c, u))

    def s2(self, c: int, u: int) -> Box:
        return minkowski_diff(self.model.noise_support, -self.reach_box(c, u))

    def _over_ranges(self, s1_lo, s1_hi):
        dom = self.model.domain
        exits = np.any((s1_lo < dom.lower) | (s1_hi > dom.upper), axis=-1)
        if self.model.boundary_mode == "saturate":
            s1_lo = np.clip(s1_lo, dom.lower, dom.upper)
            s1_hi = np.clip(s1_hi, dom.lower, dom.upper)
            sink = np.zeros(exits.shape, dtype=bool)
        else:
            sink = exits
        imin, imax = touching_range(self.grid, s1_lo, s1_hi)
        return imin, imax, sink

    def _under_ranges(self, s2_lo, s2_hi):
        imin, imax = positive_range(self.grid, s2_lo, s2_hi)
        if self.model.boundary_mode == "saturate":
            sink = np.zeros(imin.shape[:-1], dtype=bool)
        else:
            dom = self.model.domain
            tol = MEASURE_TOL * self.grid.eta
            fat = np.all(s2_hi - s2_lo > tol, axis=-1)
            sticks_out = np.any((dom.lower - s2_lo > tol) | (s2_hi - dom.upper > tol), axis=-1)
            sink = fat & sticks_out
        return imin, imax, sink

    def overapprox_post(self, c: int, u: int):
        """``(CellSet, sink flag)`` of the over-approximated successors of ``(c, u)``."""
        s1 = self.s1(c, u)
        imin, imax, sink = self._over_ranges(s1.lower, s1.upper)
        return _range_to_set(self.grid, imin, imax), bool(sink)

    def underapprox_post(self, c: int, u: int):
        """``(CellSet, sink flag)`` of the under-approximated successors of ``(c, u)``."""
        s2 = self.s2(c, u)
        if s2.is_empty:
            return CellSet.empty(self.grid.n_cells), False
        imin, imax, sink = self._under_ranges(s2.lower, s2.upper)
        return _range_to_set(self.grid, imin, imax), bool(sink)

    def build(self) -> "Abstraction":
        grid, model = self.grid, self.model
        n, nu, dim = grid.n_cells, model.n_inputs, grid.dim
        lo, hi = grid.all_cell_bounds()
        d = model.noise_support
        shape = (n, nu, dim)
        over_lo = np.empty(shape, dtype=np.int64)
        over_hi = np.empty(shape, dtype=np.int64)
        under_lo = np.empty(shape, dtype=np.int64)
        under_hi = np.empty(shape, dtype=np.int64)
        sink_over = np.zeros((n, nu), dtype=bool)
        sink_under = np.zeros((n, nu), dtype=bool)
        for k in range(nu):
            rlo, rhi = self.ext(lo, hi, model.inputs[k])
            a, b, s = self._over_ranges(rlo + d.lower, rhi + d.upper)
            over_lo[:, k], over_hi[:, k], sink_over[:, k] = a, b, s
            # S2 = [D.lo + R.hi, D.hi + R.lo]
            s2_lo, s2_hi = d.lower + rhi, d.upper + rlo
            a, b, s = self._under_ranges(s2_lo, s2_hi)
            empty = np.any(s2_lo > s2_hi, axis=-1, keepdims=True)
            under_lo[:, k] = np.where(empty, 1, a)
            under_hi[:, k] = np.where(empty, 0, b)
            sink_under[:, k] = s & ~empty[:, 0]
        return Abstraction(grid, model.inputs, over_lo, over_hi, under_lo, under_hi,
                           sink_over, sink_under, model.boundary_mode)


def reach_box(builder: AbstractionBuilder, c: int, u: int) -> Box:
    return builder.reach_box(c, u)


def overapprox_post(builder: AbstractionBuilder, c: int, u: int):
    return builder.overapprox_post(c, u)


def underapprox_post(builder: AbstractionBuilder, c: int, u: int):
    return builder.underapprox_post(c, u)


@dataclass(frozen=True, eq=False)
class Abstraction:
    """Finite transition structure: per (cell, input) successor rectangles plus sink flags.

    Rectangles are inclusive multi-index ranges; a rectangle with any
    ``hi < lo`` is empty.
    """

    grid: Grid
    inputs: np.ndarray
    over_lo: np.ndarray
    over_hi: np.ndarray
    under_lo: np.ndarray
    under_hi: np.ndarray
    sink_over: np.ndarray
    sink_under: np.ndarray
    boundary_mode: str = "saturate"

    def __post_init__(self):
        self.validate()

    @property
    def n_cells(self) -> int:
        return self.grid.n_cells

    @property
    def n_inputs(self) -> int:
        return self.over_lo.shape[1]

    @property
    def over_size(self) -> np.ndarray:
        return _range_size(self.over_lo, self.over_hi)

    @property
    def under_size(self) -> np.ndarray:
        return _range_size(self.under_lo, self.under_hi)

    def over(self, c: int, u: int) -> CellSet:
        return _range_to_set(self.grid, self.over_lo[c, u], self.over_hi[c, u])

    def under(self, c: int, u: int) -> CellSet:
        return _range_to_set(self.grid, self.under_lo[c, u], self.under_hi[c, u])

    def validate(self):
        under_nonempty = self.under_size > 0
        inside = np.all((self.under_lo >= self.over_lo) & (self.under_hi <= self.over_hi), axis=-1)
        if np.any(under_nonempty & ~inside):
            raise ValueError("under-approximation not contained in over-approximation")
        if np.any(self.sink_under & ~self.sink_over):
            raise ValueError("sink in under-approximation but not in over-approximation")
        if np.any((self.over_size == 0) & ~self.sink_over):
            raise ValueError("some (cell, input) pair has no successor")

    def export_csv(self, path) -> None:
        """Rows ``cell_id,input_idx,kind,successor``; sink rows carry ``over``/``under`` as successor."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["cell_id", "input_idx", "kind", "successor_id"])
            for c in range(self.n_cells):
                for u in range(self.n_inputs):
                    for succ in self.over(c, u):
                        w.writerow([c, u, "over", succ])
                    for succ in self.under(c, u):
                        w.writerow([c, u, "under", succ])
                    if self.sink_over[c, u]:
                        w.writerow([c, u, "sink", "over"])
                    if self.sink_under[c, u]:
                        w.writerow([c, u, "sink", "under"])


def import_abstraction_csv(path, grid: Grid, inputs, boundary_mode: str = "saturate") -> Abstraction:
    """Inverse of :meth:`Abstraction.export_csv`; successor sets must be index rectangles."""
    inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
    n, nu = grid.n_cells, inputs.shape[0]
    sets = {"over": [[[] for _ in range(nu)] for _ in range(n)],
            "under": [[[] for _ in range(nu)] for _ in range(n)]}
    sink = {"over": np.zeros((n, nu), bool), "under": np.zeros((n, nu), bool)}
    with open(path, newline="") as fh:
        rows = csv.reader(fh)
        header = next(rows)
        if header[:3] != ["cell_id", "input_idx", "kind"]:
            raise ConfigError(f"unexpected abstraction header {header}")
        for row in rows:
            c, u, kind, succ = int(row[0]), int(row[1]), row[2], row[3]
            if kind == "sink":
                sink[succ][c, u] = True
            elif kind in sets:
                sets[kind][c][u].append(int(succ))
            else:
                raise ConfigError(f"unknown transition kind {kind!r}")
    ranges = {}
    for kind, table in sets.items():
        lo = np.ones((n, nu, grid.dim), dtype=np.int64)
        hi = np.zeros((n, nu, grid.dim), dtype=np.int64)
        for c in range(n):
            for u in range(nu):
                ids = table[c][u]
                if not ids:
                    continue
                midx = np.stack(np.unravel_index(np.array(ids), grid.cells_per_dim), axis=-1)
                a, b = midx.min(axis=0), midx.max(axis=0)
                if int(np.prod(b - a + 1)) != len(set(ids)):
                    raise ConfigError(f"{kind} successors of ({c},{u}) are not a grid rectangle")
                lo[c, u], hi[c, u] = a, b
        ranges[kind] = (lo, hi)
    return Abstraction(grid, inputs, *ranges["over"], *ranges["under"],
                       sink["over"], sink["under"], boundary_mode)


def build_abstraction(model: SystemModel, grid: Grid, ext=None) -> Abstraction:
    return AbstractionBuilder(model, grid, ext).build()
