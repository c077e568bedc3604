"""End-to-end runs: abstraction, product, solving, refinement, simulation and artifacts."""
from __future__ import annotations

import json
import logging
import os
import time
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .automata import PredicateSet, load_automaton, product
from .config import RunConfig, SimConfig, SystemConfig, shipped_path
from .errors import ConfigError
from .game import ADVERSARIAL, COOPERATIVE
from .reach import build_abstraction
from .refine import refine
from .simulate import simulate_batch
from .solver import solve_parity
from .system import Grid, bistable_switch

log = logging.getLogger(__name__)

SWEEP_ETAS = ("1/2", "1/4", "1/8", "1/16", "1/32")
SUITES = {"full": [(s, e) for s in ("phi1", "phi2") for e in SWEEP_ETAS],
          "quick": [(s, e) for s in ("phi1", "phi2") for e in SWEEP_ETAS[:3]]}


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause


class _stage:
    def __init__(self, name, timings):
        self.name, self.timings = name, timings

    def __enter__(self):
        self.t0 = time.perf_counter()

    def __exit__(self, typ, exc, tb):
        self.timings[self.name] = time.perf_counter() - self.t0
        if exc is not None and not isinstance(exc, StageError):
            raise StageError(self.name, exc) from exc
        return False


def build_model(sc: SystemConfig):
    if sc.model != "bistable":
        raise ConfigError(f"unknown model {sc.model!r}")
    p = sc.params
    noise = list(zip(sc.noise.lower, sc.noise.upper))
    domain = list(zip(sc.domain.lower, sc.domain.upper))
    return bistable_switch(p["a"], p["b"], p["tau"], noise, domain, sc.input_values, sc.boundary_mode)


@dataclass
class RunResult:
    cfg: RunConfig
    grid: Grid
    prod: object
    results: dict  # mode -> SolveResult
    under_cells: np.ndarray | None
    over_cells: np.ndarray | None
    error: Fraction | None
    controller: object = None
    sim: object = None
    timings: dict = field(default_factory=dict)
    files: dict = field(default_factory=dict)

    @property
    def stats(self) -> dict:
        out = {
            "name": self.cfg.name,
            "eta": [str(e) for e in self.cfg.eta],
            "cells": self.grid.n_cells,
            "product_states": int(self.prod.n_states),
            "inputs": int(self.prod.n_inputs),
            "error": None if self.error is None else float(self.error),
            "error_exact": None if self.error is None else str(self.error),
            "timings_s": {k: round(v, 6) for k, v in self.timings.items()},
            "solve": {m: {"winning_states": int(r.winning.sum()),
                          "iterations": dict(sorted(r.iteration_counts.items()))}
                      for m, r in self.results.items()},
        }
        if self.under_cells is not None:
            out["under_cells"] = int(self.under_cells.sum())
        if self.over_cells is not None:
            out["over_cells"] = int(self.over_cells.sum())
        if self.sim is not None:
            out["sim"] = {
                "runs": int(self.sim.n_runs),
                "left_over_approximation": int(self.sim.left_over.sum()),
                "tail_even": int(self.sim.tail_even.sum()),
                "lookup_failures": int(self.sim.violations.sum()),
            }
        return out


def cell_regions(prod, results):
    """Per-cell winning flags: a cell wins if its start product state does."""
    n = prod.base.n_cells
    start = prod.initial[np.arange(n)]
    under = results[ADVERSARIAL].winning[start] if ADVERSARIAL in results else None
    over = results[COOPERATIVE].winning[start] if COOPERATIVE in results else None
    return under, over


def approximation_error(grid: Grid, eta, under, over) -> Fraction:
    """Area of over \\ under, exact in grid units."""
    cell = Fraction(1)
    for e in eta:
        cell *= Fraction(e)
    return int(np.count_nonzero(over & ~under)) * cell


def write_winning_csv(path, prod, res) -> None:
    grid = prod.base.grid
    with open(path, "w") as fh:
        fh.write(",".join([f"i{k}" for k in range(grid.dim)] + ["q", "winning", "input"]) + "\n")
        n_q = prod.n_q
        for c in range(grid.n_cells):
            idx = [str(int(i)) for i in grid.multi_index(c)]
            for q in range(n_q):
                v = c * n_q + q
                w = bool(res.winning[v])
                fh.write(",".join(idx + [str(q), "1" if w else "0",
                                         str(int(res.strategy[v])) if w else "-"]) + "\n")


def region_codes(under, over) -> np.ndarray:
    code = np.zeros(under.shape if under is not None else over.shape, dtype=np.int64)
    if over is not None:
        code[over] = 1
    if under is not None:
        code[under] = 2
    return code


def write_pgm(path, grid: Grid, codes) -> None:
    """One pixel per cell, first axis left to right, second axis bottom to top."""
    dims = grid.cells_per_dim
    img = codes.reshape(dims)
    if grid.dim == 1:
        img = img[None, :]
    else:
        img = img.reshape(dims[0], -1).T[::-1]
    h, w = img.shape
    with open(path, "w") as fh:
        fh.write(f"P2\n{w} {h}\n2\n")
        for row in img:
            fh.write(" ".join(str(int(x)) for x in row) + "\n")


def read_pgm(path) -> np.ndarray:
    with open(path) as fh:
        toks = fh.read().split()
    if toks[0] != "P2":
        raise ValueError("not an ASCII PGM")
    w, h = int(toks[1]), int(toks[2])
    return np.array([int(t) for t in toks[4:4 + w * h]]).reshape(h, w)


def run_pipeline(cfg: RunConfig, write: bool = True, simulate: bool = True) -> RunResult:
    timings = {}
    with _stage("config", timings):
        try:
            model = build_model(cfg.system)
            grid = Grid.from_eta(model.domain, [float(e) for e in cfg.eta])
            aut = load_automaton(cfg.automaton_path)
            preds = PredicateSet(cfg.predicates)
        except (ValueError, TypeError, OSError) as e:
            if isinstance(e, ConfigError):
                raise
            raise ConfigError(str(e)) from e
    with _stage("abstraction", timings):
        abs_ = build_abstraction(model, grid)
    with _stage("product", timings):
        prod = product(abs_, aut, preds)
    results = {}
    for mode in cfg.modes:
        with _stage(f"solve_{mode}", timings):
            results[mode] = solve_parity(prod, mode=mode)
    under, over = cell_regions(prod, results)
    if under is not None and over is not None and np.any(under & ~over):
        raise StageError("solve", AssertionError("under-approximation not contained in over-approximation"))
    error = approximation_error(grid, cfg.eta, under, over) if under is not None and over is not None else None
    ctrl = None
    if ADVERSARIAL in results:
        with _stage("refine", timings):
            ctrl = refine(results[ADVERSARIAL], prod)
    rr = RunResult(cfg, grid, prod, results, under, over, error, ctrl, None, timings)
    if simulate and cfg.sim.runs > 0 and ctrl is not None and under is not None and under.any():
        with _stage("simulate", timings):
            rr.sim = closed_loop_campaign(rr, cfg.sim)
    elif simulate and cfg.sim.runs > 0 and (under is None or not under.any()):
        log.warning("no under-approximation cells; simulation skipped")
    if error is not None and under is not None and not under.any():
        log.warning("empty under-approximation: error equals the over-approximation area")
    if write:
        with _stage("write", timings):
            write_artifacts(rr)
    return rr


def start_states(grid: Grid, cells, runs: int, seed: int) -> np.ndarray:
    """Uniform start points in cells chosen round-robin over ``cells``."""
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), 2 ** 32 - 1])))
    ids = np.flatnonzero(cells)
    pick = ids[np.arange(runs) % ids.size]
    lo, hi = grid.all_cell_bounds()
    return lo[pick] + rng.random((runs, grid.dim)) * (hi[pick] - lo[pick])


def closed_loop_campaign(rr: RunResult, sim: SimConfig):
    prod = rr.prod
    over_region = None
    if COOPERATIVE in rr.results:
        n = prod.base.n_cells
        over_region = rr.results[COOPERATIVE].winning[:n * prod.n_q].reshape(n, prod.n_q)
    s0 = start_states(rr.grid, rr.under_cells, sim.runs, sim.seed)
    model = build_model(rr.cfg.system)
    return simulate_batch(model, rr.controller, s0, sim.horizon, sim.seed, letters=prod.letters,
                          over_region=over_region, tail=sim.tail)


def write_artifacts(rr: RunResult) -> None:
    out = rr.cfg.out_dir
    os.makedirs(out, exist_ok=True)
    files = {}
    for mode, fname in ((ADVERSARIAL, "winning_under.csv"), (COOPERATIVE, "winning_over.csv")):
        if mode in rr.results:
            files[fname] = os.path.join(out, fname)
            write_winning_csv(files[fname], rr.prod, rr.results[mode])
    if rr.controller is not None:
        files["controller.txt"] = os.path.join(out, "controller.txt")
        rr.controller.save(files["controller.txt"])
    files["error.txt"] = os.path.join(out, "error.txt")
    with open(files["error.txt"], "w") as fh:
        if rr.error is None:
            fh.write("nan\n# needs both under and over approximations\n")
        else:
            fh.write(f"{float(rr.error)!r}\n# exact {rr.error} square units\n")
    files["region.pgm"] = os.path.join(out, "region.pgm")
    write_pgm(files["region.pgm"], rr.grid, region_codes(rr.under_cells, rr.over_cells))
    files["stats.json"] = os.path.join(out, "stats.json")
    with open(files["stats.json"], "w") as fh:
        json.dump(rr.stats, fh, indent=2, sort_keys=True)
        fh.write("\n")
    rr.files = files


@dataclass
class BenchRow:
    spec: str
    eta: str
    error: float | None
    abstraction_s: float | None
    solve_s: float | None
    cells: int | None
    product_states: int | None
    failure: str | None = None


def bench_config(spec: str, eta: str, out_root: str) -> RunConfig:
    from .config import load_config
    cfg = load_config(shipped_path(f"bistable_{spec}.ini"))
    cfg = cfg.with_overrides(eta=eta, out=os.path.join(out_root, f"{spec}_eta{eta.replace('/', '_')}"))
    return cfg.with_overrides(mode="both")


def benchmark(ids, out_root: str = "bench_out", write: bool = False) -> list:
    """Run ``(spec, eta)`` rows; a failing row is reported, not raised."""
    if isinstance(ids, str):
        if ids not in SUITES:
            raise ConfigError(f"unknown suite {ids!r}; available: {', '.join(SUITES)}")
        ids = SUITES[ids]
    rows = []
    for spec, eta in ids:
        try:
            rr = run_pipeline(bench_config(spec, eta, out_root), write=write, simulate=False)
            t = rr.timings
            rows.append(BenchRow(spec, eta, float(rr.error), t["abstraction"] + t["product"],
                                 t.get("solve_adversarial", 0) + t.get("solve_cooperative", 0),
                                 rr.grid.n_cells, int(rr.prod.n_states)))
        except Exception as e:  # isolate the row
            rows.append(BenchRow(spec, eta, None, None, None, None, None, str(e)))
    return rows


def format_bench(rows) -> str:
    head = f"{'spec':<6}{'eta':>7}{'error':>12}{'abstr[s]':>10}{'solve[s]':>10}{'cells':>8}{'states':>9}"
    lines = [head]
    for r in rows:
        if r.failure:
            lines.append(f"{r.spec:<6}{r.eta:>7}  FAILED: {r.failure}")
        else:
            lines.append(f"{r.spec:<6}{r.eta:>7}{r.error:>12.6g}{r.abstraction_s:>10.3f}"
                         f"{r.solve_s:>10.3f}{r.cells:>8}{r.product_states:>9}")
    return "\n".join(lines)
