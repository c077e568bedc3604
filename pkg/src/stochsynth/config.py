"""INI run configurations.

Example::

    [system]
    model = bistable
    a = 1.3
    b = 0.25
    tau = 0.05
    noise = -0.4 -0.2; -0.4 -0.2
    domain = 0 4; 0 4
    inputs = -0.05 0 0.05
    boundary_mode = saturate

    [grid]
    eta = 1/8

    [spec]
    automaton = phi1.aut

    [predicates]
    A = 1 3 1 2; 2 3 2 3

    [solve]
    modes = both

    [sim]
    runs = 100
    horizon = 1000
    seed = 0

Boxes are written as ``lo hi`` per dimension, dimensions separated by
``;`` inside one box and boxes of a union separated by ``|``.  Relative
paths resolve against the config file, then against the shipped configs.
"""
from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field, replace
from fractions import Fraction
from importlib import resources

from .errors import ConfigError
from .system import Box

SHIPPED = resources.files("stochsynth") / "configs"
MODELS = ("bistable",)


def shipped_path(name: str) -> str:
    return str(SHIPPED / name)


def parse_fraction(text: str) -> Fraction:
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"not a number: {text!r}") from None


def parse_box(text: str) -> Box:
    lo, hi = [], []
    for part in text.split(";"):
        vals = part.split()
        if len(vals) != 2:
            raise ConfigError(f"box component {part!r} must be 'lo hi'")
        a, b = (float(parse_fraction(v)) for v in vals)
        if a > b:
            raise ConfigError(f"box component {part!r} has lo > hi")
        lo.append(a)
        hi.append(b)
    return Box(lo, hi)


@dataclass(frozen=True)
class SystemConfig:
    model: str = "bistable"
    params: dict = field(default_factory=lambda: {"a": 1.3, "b": 0.25, "tau": 0.05})
    noise: Box = field(default_factory=lambda: Box([-0.4, -0.4], [-0.2, -0.2]))
    domain: Box = field(default_factory=lambda: Box([0.0, 0.0], [4.0, 4.0]))
    input_values: tuple = (-0.05, 0.0, 0.05)
    boundary_mode: str = "saturate"


@dataclass(frozen=True)
class SimConfig:
    runs: int = 0
    horizon: int = 10_000
    seed: int = 0
    tail: float = 0.2


@dataclass(frozen=True)
class RunConfig:
    system: SystemConfig
    eta: tuple  # Fractions, one per dimension
    automaton_path: str
    predicates: dict  # name -> list of Box
    modes: tuple = ("adversarial", "cooperative")
    sim: SimConfig = SimConfig()
    out_dir: str = "out"
    name: str = "run"

    def with_overrides(self, eta=None, spec=None, out=None, seed=None, mode=None) -> "RunConfig":
        cfg = self
        if eta is not None:
            e = parse_fraction(eta) if isinstance(eta, str) else Fraction(eta)
            cfg = replace(cfg, eta=(e,) * len(cfg.eta))
        if spec is not None:
            cfg = replace(cfg, automaton_path=_resolve(spec, os.getcwd()))
        if out is not None:
            cfg = replace(cfg, out_dir=out)
        if seed is not None:
            cfg = replace(cfg, sim=replace(cfg.sim, seed=int(seed)))
        if mode is not None:
            cfg = replace(cfg, modes=parse_modes(mode))
        return cfg


def parse_modes(text: str) -> tuple:
    table = {"under": ("adversarial",), "over": ("cooperative",),
             "both": ("adversarial", "cooperative")}
    key = text.strip().lower()
    if key not in table:
        raise ConfigError(f"mode must be under, over or both, got {text!r}")
    return table[key]


def _resolve(path: str, base: str) -> str:
    cands = [path] if os.path.isabs(path) else [os.path.join(base, path), shipped_path(path)]
    if not path.endswith(".aut"):
        cands.append(shipped_path(path + ".aut"))
    for c in cands:
        if os.path.isfile(c):
            return c
    raise ConfigError(f"file not found: {path}")


def load_config(path: str) -> RunConfig:
    if not os.path.isfile(path):
        candidate = shipped_path(path if path.endswith(".ini") else path + ".ini")
        if not os.path.isfile(candidate):
            raise ConfigError(f"config file not found: {path}")
        path = candidate
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    cp.optionxform = str  # predicate names are case-sensitive
    try:
        cp.read(path)
    except configparser.Error as e:
        raise ConfigError(f"cannot parse {path}: {e}") from None
    base = os.path.dirname(os.path.abspath(path))

    def get(sec, key, default=None):
        if cp.has_option(sec, key):
            return cp.get(sec, key)
        if default is None:
            raise ConfigError(f"[{sec}] {key} is required")
        return default

    try:
        sysd = dict(cp.items("system")) if cp.has_section("system") else {}
        model = sysd.pop("model", "bistable")
        if model not in MODELS:
            raise ConfigError(f"unknown model {model!r}; available: {', '.join(MODELS)}")
        domain = parse_box(sysd.pop("domain", "0 4; 0 4"))
        noise = parse_box(sysd.pop("noise", "-0.4 -0.2; -0.4 -0.2"))
        inputs = tuple(float(parse_fraction(v)) for v in sysd.pop("inputs", "-0.05 0 0.05").split())
        mode = sysd.pop("boundary_mode", "saturate")
        if mode not in ("saturate", "sink"):
            raise ConfigError(f"boundary_mode must be saturate or sink, got {mode!r}")
        params = {k: float(parse_fraction(v)) for k, v in sysd.items()}
        sysc = SystemConfig(model, {**SystemConfig().params, **params}, noise, domain, inputs, mode)

        eta_txt = get("grid", "eta").split()
        eta = tuple(parse_fraction(e) for e in eta_txt)
        if len(eta) == 1:
            eta = eta * domain.dim
        if len(eta) != domain.dim or any(e <= 0 for e in eta):
            raise ConfigError("eta must be positive, one value or one per dimension")

        aut = _resolve(get("spec", "automaton"), base)
        preds = {}
        if cp.has_section("predicates"):
            for name, txt in cp.items("predicates"):
                preds[name] = [parse_box(b) for b in txt.split("|") if b.strip()]
        modes = parse_modes(get("solve", "modes", "both"))
        sim = SimConfig(int(get("sim", "runs", "0")), int(get("sim", "horizon", "10000")),
                        int(get("sim", "seed", "0")), float(get("sim", "tail", "0.2")))
        if sim.runs < 0 or sim.horizon < 0 or not 0 < sim.tail <= 1:
            raise ConfigError("sim runs/horizon must be >= 0 and tail in (0, 1]")
        out = get("output", "dir", os.path.splitext(os.path.basename(path))[0] + "_out")
    except configparser.Error as e:
        raise ConfigError(str(e)) from None
    except ValueError as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(str(e)) from None
    name = os.path.splitext(os.path.basename(path))[0]
    return RunConfig(sysc, eta, aut, preds, modes, sim, out, name)
