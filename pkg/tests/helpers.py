"""Shared toy systems for the simulation tests and the acceptance suite."""
import numpy as np

from stochsynth.automata import ParityAutomaton
from stochsynth.refine import Controller
from stochsynth.system import Box, Grid, SystemModel


def toy_walk(m: int = 8) -> tuple:
    """Lazy symmetric walk on cells 0..m of ``[0, m+1]``.

    From cell j in 1..m-1 the state jumps to the centre of j and gets noise
    U[-1, 1], so it moves to j-1, j, j+1 with probabilities 1/4, 1/2, 1/4.
    Cell 0 throws the state out of the (sink-mode) domain; cell m is the
    target.  Hitting m from k therefore has probability k/m.
    """
    def f(s, u):
        x = s[0]
        return (np.where(x < 1, -5.0, np.floor(x) + 0.5) + u[0],)

    model = SystemModel(1, f, Box([-1.0], [1.0]), [[0.0]], Box([0.0], [m + 1.0]),
                        boundary_mode="sink", name="toy_walk")
    grid = Grid.from_eta(model.domain, 1.0)
    target = np.zeros(grid.n_cells, dtype=bool)
    target[m] = True
    return model, grid, target


def toy_walk_hit_probability(m: int, k: int, horizon: int) -> float:
    """Finite-horizon hitting probability by the transition matrix power."""
    # states 0..m plus an absorbing 'out' state m+1
    p = np.zeros((m + 2, m + 2))
    p[0, m + 1] = 1.0
    p[m, m] = 1.0
    p[m + 1, m + 1] = 1.0
    for j in range(1, m):
        p[j, j - 1] += 0.25
        p[j, j] += 0.5
        p[j, j + 1] += 0.25
    return float(np.linalg.matrix_power(p, horizon)[k, m])


def constant_controller(grid: Grid, inputs, u_idx: int = 0) -> Controller:
    aut = ParityAutomaton.build(["q"], [2], "q", [], [("q", "true", "q")])
    table = np.full((grid.n_cells, 1), u_idx, dtype=np.int64)
    return Controller(grid, np.atleast_2d(np.asarray(inputs, dtype=float)), table, aut.hash(), aut)


def rotation_model() -> SystemModel:
    """Quarter turn about (2, 2) with point noise: a period-4 orbit."""
    def f(s, u):
        return (2.0 - (s[1] - 2.0) + u[0], 2.0 + (s[0] - 2.0) + u[1])

    return SystemModel(2, f, Box([0.0, 0.0], [0.0, 0.0]), [[0.0, 0.0]], Box([0.0, 0.0], [4.0, 4.0]))


ACCEPTANCE_LINES = []


def report(number: int, title: str, ok: bool, detail: str) -> None:
    line = f"criterion {number} [{'PASS' if ok else 'FAIL'}] {title}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
