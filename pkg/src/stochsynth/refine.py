"""Concrete state-feedback controllers from abstract winning strategies."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NoGuaranteeError, OutOfDomainError
from .game import ADVERSARIAL
from .system import Box, Grid, quantize


@dataclass(frozen=True, eq=False)
class Controller:
    """Lookup table ``(cell, automaton state) -> input index``, -1 where nothing is guaranteed."""

    grid: Grid
    inputs: np.ndarray
    table: np.ndarray  # (n_cells, n_q)
    automaton_hash: str
    automaton: object = None

    @property
    def n_q(self) -> int:
        return self.table.shape[1]

    @property
    def domain(self) -> np.ndarray:
        return self.table >= 0

    @property
    def is_empty(self) -> bool:
        return not self.domain.any()

    def covers(self, c: int, q: int) -> bool:
        return bool(self.table[int(c), int(q)] >= 0)

    def input_index(self, s, q: int) -> int:
        try:
            c = quantize(self.grid, s)
        except OutOfDomainError as e:
            raise NoGuaranteeError(str(e)) from None
        u = int(self.table[c, int(q)])
        if u < 0:
            raise NoGuaranteeError(f"no guarantee at cell {c}, automaton state {q}")
        return u

    def check_deployment(self, grid: Grid, automaton=None) -> None:
        """Hard-fail when the controller was synthesised for another grid or automaton."""
        same = (grid.cells_per_dim == self.grid.cells_per_dim
                and np.array_equal(grid.eta, self.grid.eta)
                and grid.domain == self.grid.domain)
        if not same:
            raise ConfigError("controller grid does not match the deployment grid")
        if automaton is not None and automaton.hash() != self.automaton_hash:
            raise ConfigError("controller was synthesised for a different automaton")

    def dumps(self) -> str:
        g = self.grid
        f = lambda xs: " ".join(repr(float(x)) for x in xs)
        lines = [
            f"dim {g.dim}",
            f"eta {f(g.eta)}",
            f"domain_lower {f(g.domain.lower)}",
            f"domain_upper {f(g.domain.upper)}",
            f"cells {' '.join(str(n) for n in g.cells_per_dim)}",
            f"automaton {self.automaton_hash}",
            f"automaton_states {self.n_q}",
            f"inputs {self.inputs.shape[0]}",
        ]
        lines += [f"input {k} {f(row)}" for k, row in enumerate(self.inputs)]
        cells, qs = np.nonzero(self.domain)
        lines.append(f"rows {cells.size}")
        for c, q in zip(cells.tolist(), qs.tolist()):
            idx = " ".join(str(int(i)) for i in g.multi_index(c))
            lines.append(f"{idx} {q} {int(self.table[c, q])}")
        return "\n".join(lines) + "\n"

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.dumps())


def loads_controller(text: str, automaton=None) -> Controller:
    head = {}
    rows = []
    inputs = []
    lines = [ln for ln in text.splitlines() if ln.strip()]
    it = iter(lines)
    try:
        for ln in it:
            key, _, rest = ln.partition(" ")
            if key == "input":
                parts = rest.split()
                inputs.append([float(x) for x in parts[1:]])
            elif key == "rows":
                n = int(rest)
                rows = [next(it).split() for _ in range(n)]
                break
            else:
                head[key] = rest.split()
        dim = int(head["dim"][0])
        domain = Box([float(x) for x in head["domain_lower"]], [float(x) for x in head["domain_upper"]])
        grid = Grid.from_eta(domain, [float(x) for x in head["eta"]])
        if list(grid.cells_per_dim) != [int(x) for x in head["cells"]] or grid.dim != dim:
            raise ConfigError("controller header is inconsistent")
        n_q = int(head["automaton_states"][0])
        table = np.full((grid.n_cells, n_q), -1, dtype=np.int64)
        for r in rows:
            idx = [int(x) for x in r[:dim]]
            c = int(np.ravel_multi_index(tuple(idx), grid.cells_per_dim))
            table[c, int(r[dim])] = int(r[dim + 1])
    except (KeyError, ValueError, StopIteration, IndexError) as e:
        raise ConfigError(f"malformed controller file: {e}") from None
    ctrl = Controller(grid, np.array(inputs, dtype=float), table, head["automaton"][0], automaton)
    if automaton is not None:
        ctrl.check_deployment(grid, automaton)
    return ctrl


def load_controller(path, automaton=None) -> Controller:
    with open(path) as fh:
        return loads_controller(fh.read(), automaton)


def refine(result, prod) -> Controller:
    """Re-index an adversarial strategy by (cell, automaton state)."""
    if result.mode != ADVERSARIAL:
        raise ValueError("only adversarial (under-approximation) results carry a guarantee")
    if prod.base is None or prod.automaton is None:
        raise ValueError("refinement needs a grid product")
    n, n_q = prod.base.n_cells, prod.n_q
    strat = np.where(result.winning, result.strategy, -1)[:n * n_q].reshape(n, n_q)
    return Controller(prod.base.grid, np.asarray(prod.base.inputs), strat.copy(),
                      prod.automaton.hash(), prod.automaton)


def lookup(ctrl: Controller, s, q: int) -> np.ndarray:
    return ctrl.inputs[ctrl.input_index(s, q)]
