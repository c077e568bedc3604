"""Stochastic nonlinear system model, boxes, and the uniform grid quantizer.

The system is ``s' = f(s, u) + d`` with ``d`` drawn from a bounded support
box ``D``.  Dynamics are written once against a component-wise interface so
the same expression evaluates on floats (simulation) and on
:class:`Interval` objects (reach-set over-approximation).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import OutOfDomainError


class Box:
    """Axis-aligned closed box ``[lower, upper]``.

    Any box with ``lower[i] > upper[i]`` for some ``i`` is normalised to the
    canonical empty box (``+inf`` lower, ``-inf`` upper).
    """

    __slots__ = ("lower", "upper")

    def __init__(self, lower, upper):
        lo = np.array(lower, dtype=float).reshape(-1)
        hi = np.array(upper, dtype=float).reshape(-1)
        if lo.shape != hi.shape:
            raise ValueError(f"bound length mismatch: {lo.shape} vs {hi.shape}")
        if np.any(lo > hi):
            lo = np.full_like(lo, np.inf)
            hi = np.full_like(hi, -np.inf)
        lo.setflags(write=False)
        hi.setflags(write=False)
        self.lower = lo
        self.upper = hi

    @classmethod
    def empty(cls, dim: int) -> "Box":
        return cls(np.full(dim, np.inf), np.full(dim, -np.inf))

    @classmethod
    def point(cls, p) -> "Box":
        return cls(p, p)

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def is_empty(self) -> bool:
        return bool(np.any(self.lower > self.upper))

    @property
    def widths(self) -> np.ndarray:
        if self.is_empty:
            return np.zeros(self.dim)
        return self.upper - self.lower

    @property
    def volume(self) -> float:
        return float(np.prod(self.widths))

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    def contains(self, s, atol: float = 0.0) -> bool:
        s = np.asarray(s, dtype=float)
        if self.is_empty:
            return False
        return bool(np.all(s >= self.lower - atol) and np.all(s <= self.upper + atol))

    def contains_box(self, other: "Box", atol: float = 0.0) -> bool:
        if other.is_empty:
            return True
        if self.is_empty:
            return False
        return bool(np.all(other.lower >= self.lower - atol) and np.all(other.upper <= self.upper + atol))

    def intersect(self, other: "Box") -> "Box":
        _check_dim(self, other)
        return Box(np.maximum(self.lower, other.lower), np.minimum(self.upper, other.upper))

    def clip(self, lo, hi) -> "Box":
        """Clamp both corners into ``[lo, hi]`` (the image of the box under saturation)."""
        if self.is_empty:
            return self
        return Box(np.clip(self.lower, lo, hi), np.clip(self.upper, lo, hi))

    def __neg__(self) -> "Box":
        if self.is_empty:
            return self
        return Box(-self.upper, -self.lower)

    def __eq__(self, other):
        if not isinstance(other, Box):
            return NotImplemented
        return self.dim == other.dim and bool(
            np.array_equal(self.lower, other.lower) and np.array_equal(self.upper, other.upper))

    def __hash__(self):
        return hash((self.lower.tobytes(), self.upper.tobytes()))

    def __repr__(self):
        if self.is_empty:
            return f"Box.empty({self.dim})"
        return f"Box({self.lower.tolist()}, {self.upper.tolist()})"


def _check_dim(a: Box, b: Box) -> None:
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")


class Interval:
    """Vectorised closed interval ``[lo, hi]`` supporting natural interval extension.

    ``lo``/``hi`` may be scalars or equally-shaped arrays, so one instance
    can carry a whole batch of cells.
    """

    __slots__ = ("lo", "hi")

    def __init__(self, lo, hi):
        self.lo = np.asarray(lo, dtype=float)
        self.hi = np.asarray(hi, dtype=float)

    def __add__(self, other):
        if isinstance(other, Interval):
            return Interval(self.lo + other.lo, self.hi + other.hi)
        return Interval(self.lo + other, self.hi + other)

    __radd__ = __add__

    def __neg__(self):
        return Interval(-self.hi, -self.lo)

    def __sub__(self, other):
        if isinstance(other, Interval):
            return Interval(self.lo - other.hi, self.hi - other.lo)
        return Interval(self.lo - other, self.hi - other)

    def __rsub__(self, other):
        return Interval(other - self.hi, other - self.lo)

    def __mul__(self, other):
        if isinstance(other, Interval):
            cands = np.stack([self.lo * other.lo, self.lo * other.hi,
                              self.hi * other.lo, self.hi * other.hi])
            return Interval(cands.min(axis=0), cands.max(axis=0))
        other = np.asarray(other, dtype=float)
        a, b = self.lo * other, self.hi * other
        return Interval(np.minimum(a, b), np.maximum(a, b))

    __rmul__ = __mul__

    def reciprocal(self):
        if np.any((self.lo <= 0) & (self.hi >= 0)):
            raise ZeroDivisionError("interval reciprocal over an interval containing 0")
        return Interval(1.0 / self.hi, 1.0 / self.lo)

    def __truediv__(self, other):
        if isinstance(other, Interval):
            return self * other.reciprocal()
        return self * (1.0 / np.asarray(other, dtype=float))

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def sq(self):
        # x*x would lose the dependency between the factors; the square is exact.
        lo2, hi2 = self.lo * self.lo, self.hi * self.hi
        upper = np.maximum(lo2, hi2)
        lower = np.where((self.lo <= 0) & (self.hi >= 0), 0.0, np.minimum(lo2, hi2))
        return Interval(lower, upper)

    def __repr__(self):
        return f"Interval({self.lo!r}, {self.hi!r})"


def sq(x):
    """Square that is exact on both floats and intervals."""
    if isinstance(x, Interval):
        return x.sq()
    return x * x


# f(state components, input components) -> next-state components
Dynamics = Callable[[Sequence, Sequence], Sequence]


@dataclass(frozen=True, eq=False)
class SystemModel:
    """Discrete-time system ``s' = f(s, u) + d`` on a rectangular domain."""

    dim: int
    dynamics: Dynamics
    noise_support: Box
    inputs: np.ndarray
    domain: Box
    boundary_mode: str = "saturate"
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        inputs = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        object.__setattr__(self, "inputs", inputs)
        if self.dim < 1:
            raise ValueError("dim must be positive")
        for name, box in (("noise_support", self.noise_support), ("domain", self.domain)):
            if box.dim != self.dim:
                raise ValueError(f"{name} has dimension {box.dim}, expected {self.dim}")
            if box.is_empty:
                raise ValueError(f"{name} must be non-empty")
        if np.any(self.domain.lower >= self.domain.upper):
            raise ValueError("domain must be a non-degenerate box")
        if inputs.shape[0] == 0:
            raise ValueError("input set must be non-empty")
        if len({tuple(row) for row in inputs.tolist()}) != inputs.shape[0]:
            raise ValueError("input set contains duplicates")
        if self.boundary_mode not in ("saturate", "sink"):
            raise ValueError(f"unknown boundary_mode {self.boundary_mode!r}")

    @property
    def n_inputs(self) -> int:
        return self.inputs.shape[0]

    def nominal(self, s, u) -> np.ndarray:
        """Unclamped ``f(s, u)``; ``s`` may carry leading batch dimensions."""
        s = np.asarray(s, dtype=float)
        u = np.asarray(u, dtype=float)
        if s.shape[-1] != self.dim:
            raise ValueError(f"state has dimension {s.shape[-1]}, expected {self.dim}")
        if u.shape[-1] != self.inputs.shape[1]:
            raise ValueError(f"input has dimension {u.shape[-1]}, expected {self.inputs.shape[1]}")
        comps = self.dynamics([s[..., i] for i in range(self.dim)],
                              [u[..., j] for j in range(u.shape[-1])])
        return np.stack(np.broadcast_arrays(*comps), axis=-1)

    def saturate(self, s) -> np.ndarray:
        return np.clip(s, self.domain.lower, self.domain.upper)

    def step(self, s, u, d) -> np.ndarray:
        """One stochastic step ``f(s,u) + d``, saturated at the domain in saturate mode."""
        nxt = self.nominal(s, u) + np.asarray(d, dtype=float)
        if self.boundary_mode == "saturate":
            nxt = self.saturate(nxt)
        return nxt


def eval_dynamics(model: SystemModel, s, u) -> np.ndarray:
    """Nominal next state ``f(s, u)``, clamped to the domain in saturate mode."""
    nxt = model.nominal(s, u)
    if model.boundary_mode == "saturate":
        nxt = model.saturate(nxt)
    return nxt


class NaturalExtension:
    """Natural interval extension of ``model.dynamics``.

    Sound and inclusion-monotone because every arithmetic primitive of
    :class:`Interval` is.
    """

    def __init__(self, model: SystemModel):
        self.model = model

    def __call__(self, lo, hi, u):
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        u = np.asarray(u, dtype=float)
        comps = self.model.dynamics([Interval(lo[..., i], hi[..., i]) for i in range(self.model.dim)],
                                    [u[..., j] for j in range(u.shape[-1])])
        out_lo = np.stack(np.broadcast_arrays(*[c.lo if isinstance(c, Interval) else np.asarray(c, float)
                                                for c in comps]), axis=-1)
        out_hi = np.stack(np.broadcast_arrays(*[c.hi if isinstance(c, Interval) else np.asarray(c, float)
                                                for c in comps]), axis=-1)
        return out_lo, out_hi

    def box(self, box: Box, u) -> Box:
        if box.is_empty:
            return box
        lo, hi = self(box.lower, box.upper, u)
        return Box(lo, hi)


def bistable_switch(a: float = 1.3, b: float = 0.25, tau: float = 0.05,
                    noise=((-0.4, -0.2), (-0.4, -0.2)),
                    domain=((0.0, 4.0), (0.0, 4.0)),
                    input_values=(-0.05, 0.0, 0.05),
                    boundary_mode: str = "saturate") -> SystemModel:
    """Perturbed two-dimensional bistable switch.

    Written so each state variable occurs once per output component, which
    makes the natural interval extension exact on boxes in the positive
    orthant: ``s1*(1 - a*tau) + s2*tau`` and ``s2*(1 - b*tau) + tau*(1 - 1/(1 + s1^2))``.
    """

    def f(s, u):
        s1, s2 = s
        u1, u2 = u
        return (s1 * (1.0 - a * tau) + s2 * tau + u1,
                s2 * (1.0 - b * tau) + (1.0 - 1.0 / (1.0 + sq(s1))) * tau + u2)

    vals = list(input_values)
    inputs = np.array([(x, y) for x in vals for y in vals], dtype=float)
    return SystemModel(
        dim=2, dynamics=f,
        noise_support=Box([n[0] for n in noise], [n[1] for n in noise]),
        inputs=inputs,
        domain=Box([d[0] for d in domain], [d[1] for d in domain]),
        boundary_mode=boundary_mode, name="bistable",
        params={"a": a, "b": b, "tau": tau})


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform partition of ``domain`` into half-open cells, topmost cell closed."""

    domain: Box
    eta: np.ndarray
    cells_per_dim: tuple

    @classmethod
    def from_eta(cls, domain: Box, eta) -> "Grid":
        eta = np.broadcast_to(np.asarray(eta, dtype=float), (domain.dim,)).copy()
        if np.any(eta <= 0):
            raise ValueError("cell widths must be positive")
        width = domain.upper - domain.lower
        counts = np.rint(width / eta).astype(int)
        if np.any(counts < 1) or np.any(np.abs(counts * eta - width) > 1e-9 * width):
            raise ValueError(f"eta {eta.tolist()} does not divide domain widths {width.tolist()}")
        eta.setflags(write=False)
        return cls(domain, eta, tuple(int(n) for n in counts))

    @property
    def dim(self) -> int:
        return self.domain.dim

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.cells_per_dim))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.eta))

    def multi_index(self, c):
        return np.unravel_index(c, self.cells_per_dim)

    def flat_index(self, idx) -> np.ndarray:
        return np.ravel_multi_index(tuple(np.asarray(idx).T), self.cells_per_dim)

    def cell_lower(self, idx) -> np.ndarray:
        return self.domain.lower + np.asarray(idx) * self.eta

    def all_cell_bounds(self):
        """Lower/upper corners of every cell in flat order, each of shape (n_cells, dim)."""
        idx = np.stack(np.unravel_index(np.arange(self.n_cells), self.cells_per_dim), axis=-1)
        lo = self.domain.lower + idx * self.eta
        n = np.asarray(self.cells_per_dim)
        hi = np.where(idx == n - 1, self.domain.upper, self.domain.lower + (idx + 1) * self.eta)
        return lo, hi


def quantize(grid: Grid, s):
    """Cell id(s) containing ``s`` (one point or an ``(n, dim)`` batch)."""
    s = np.asarray(s, dtype=float)
    single = s.ndim == 1
    pts = np.atleast_2d(s)
    if pts.shape[-1] != grid.dim:
        raise ValueError(f"state has dimension {pts.shape[-1]}, expected {grid.dim}")
    outside = np.any((pts < grid.domain.lower) | (pts > grid.domain.upper) | ~np.isfinite(pts), axis=-1)
    if np.any(outside):
        raise OutOfDomainError(f"state {pts[outside][0].tolist()} outside domain {grid.domain}")
    idx = np.floor((pts - grid.domain.lower) / grid.eta).astype(np.int64)
    idx = np.minimum(idx, np.asarray(grid.cells_per_dim) - 1)
    flat = np.ravel_multi_index(tuple(idx.T), grid.cells_per_dim)
    return int(flat[0]) if single else flat


def cell_box(grid: Grid, c: int) -> Box:
    """Closed hull of cell ``c``; the cell itself is half-open except on the top faces."""
    if not 0 <= int(c) < grid.n_cells:
        raise ValueError(f"cell id {c} out of range [0, {grid.n_cells})")
    idx = np.array(grid.multi_index(int(c)))
    lo = grid.cell_lower(idx)
    top = idx == np.asarray(grid.cells_per_dim) - 1
    hi = np.where(top, grid.domain.upper, lo + grid.eta)
    return Box(lo, hi)
