"""Experiment configuration: TOML schema, collect-all validation, builders.

Schema (nested tables, all keys explicit):

    [graph]      n, edges = [[source, target, weight], ...]   # 1-based
    [gain]       c, gamma
    [noise]      sigma (uniform) and/or per_edge = [[source, target, sigma], ...]
    [sim]        x0, dt, t_end, seed, sample_stride, trigger_scale, continuous
    [experiment] runs, moments, rho_list, output_dir, emit

``validate_raw`` reports every violated constraint instead of stopping at
the first, so a broken config is fixed in one pass.
"""
from __future__ import annotations

import hashlib
import math
import sys
from dataclasses import dataclass
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib as _toml
else:
    import tomli as _toml

from .gain import GAMMA_CONSTRAINT, make_gain
from .graph import Digraph, build_digraph
from .sde import NoiseModel, SimConfig

__all__ = ["Violation", "ExperimentConfig", "load_raw", "validate_raw", "build_experiment"]

EMIT_KINDS = frozenset({"trajectories", "events", "moments", "xinf", "report"})


@dataclass(frozen=True)
class Violation:
    field: str
    message: str


@dataclass(frozen=True)
class ExperimentConfig:
    sim: SimConfig
    runs: int
    moments: tuple[float, ...]
    rho_list: tuple[float, ...]
    output_dir: Path
    emit: frozenset[str]


def load_raw(path) -> tuple[dict, str]:
    """Parse a TOML config file; returns (raw dict, sha256 of the bytes)."""
    data = Path(path).read_bytes()
    raw = _toml.loads(data.decode("utf-8"))
    return raw, hashlib.sha256(data).hexdigest()


def _table(raw, name) -> dict:
    val = raw.get(name)
    return val if isinstance(val, dict) else {}


def _check_edges(n, edges, out: list[Violation]) -> None:
    seen = set()
    for idx, edge in enumerate(edges):
        label = f"graph.edges[{idx}]"
        try:
            j, i, w = edge
            j, i, w = int(j), int(i), float(w)
        except (TypeError, ValueError):
            out.append(Violation(label, f"edge must be [source, target, weight], got {edge!r}"))
            continue
        if isinstance(n, int) and n >= 1 and not (1 <= j <= n and 1 <= i <= n):
            out.append(Violation(label, f"edge ({j}, {i}, {w}): endpoints must lie in 1..{n}"))
        if j == i:
            out.append(Violation(label, f"edge ({j}, {i}, {w}): self-loops are not allowed"))
        if (j, i) in seen:
            out.append(Violation(label, f"edge ({j}, {i}, {w}): duplicate of an earlier ({j}, {i}) edge"))
        if not (w > 0.0) or not math.isfinite(w):
            out.append(Violation(label, f"edge ({j}, {i}, {w}): weight must be finite and > 0"))
        seen.add((j, i))


def validate_raw(raw: dict) -> list[Violation]:
    """Check every schema constraint; returns all violations found."""
    v: list[Violation] = []
    graph_t = _table(raw, "graph")
    gain_t = _table(raw, "gain")
    noise_t = _table(raw, "noise")
    sim_t = _table(raw, "sim")
    exp_t = _table(raw, "experiment")

    n = graph_t.get("n")
    if not isinstance(n, int) or n < 1:
        v.append(Violation("graph.n", f"agent count must be an integer >= 1, got {n!r}"))
    edges = graph_t.get("edges", [])
    if not isinstance(edges, list):
        v.append(Violation("graph.edges", "edges must be a list of [source, target, weight]"))
        edges = []
    _check_edges(n, edges, v)

    c = gain_t.get("c")
    gamma = gain_t.get("gamma")
    if not isinstance(c, (int, float)) or not (c > 0.0) or not math.isfinite(float(c)):
        v.append(Violation("gain.c", f"gain amplitude c must be finite and > 0, got {c!r}"))
    if not isinstance(gamma, (int, float)) or not (0.5 < float(gamma) < 1.0):
        v.append(Violation("gain.gamma", f"{GAMMA_CONSTRAINT}, got {gamma!r}"))

    sigma = noise_t.get("sigma", 0.0)
    if not isinstance(sigma, (int, float)) or not (float(sigma) >= 0.0):
        v.append(Violation("noise.sigma", f"uniform sigma must be >= 0, got {sigma!r}"))
    edge_pairs = set()
    for e in edges:
        try:
            edge_pairs.add((int(e[0]), int(e[1])))
        except (TypeError, ValueError, IndexError):
            pass
    for idx, entry in enumerate(noise_t.get("per_edge", [])):
        label = f"noise.per_edge[{idx}]"
        try:
            j, i, s = int(entry[0]), int(entry[1]), float(entry[2])
        except (TypeError, ValueError, IndexError):
            v.append(Violation(label, f"entry must be [source, target, sigma], got {entry!r}"))
            continue
        if (j, i) not in edge_pairs:
            v.append(Violation(label, f"({j}, {i}) is not an edge of the digraph"))
        if not (s >= 0.0) or not math.isfinite(s):
            v.append(Violation(label, f"sigma for edge ({j}, {i}) must be finite and >= 0, got {s}"))

    x0 = sim_t.get("x0")
    if not isinstance(x0, list) or not all(isinstance(u, (int, float)) for u in x0):
        v.append(Violation("sim.x0", f"x0 must be a list of numbers, got {x0!r}"))
    elif isinstance(n, int) and n >= 1 and len(x0) != n:
        v.append(Violation("sim.x0", f"x0 has {len(x0)} entries for {n} agents"))
    elif not all(math.isfinite(float(u)) for u in x0):
        v.append(Violation("sim.x0", "x0 must be finite"))

    dt = sim_t.get("dt")
    t_end = sim_t.get("t_end")
    if not isinstance(dt, (int, float)) or not (float(dt) > 0.0):
        v.append(Violation("sim.dt", f"dt must be > 0, got {dt!r}"))
    if not isinstance(t_end, (int, float)) or not (float(t_end) > 0.0):
        v.append(Violation("sim.t_end", f"t_end must be > 0, got {t_end!r}"))
    if isinstance(dt, (int, float)) and isinstance(t_end, (int, float)) \
            and float(dt) > 0.0 and float(t_end) > 0.0 and float(dt) > float(t_end):
        v.append(Violation("sim.dt", f"dt={dt} exceeds t_end={t_end}"))

    seed = sim_t.get("seed")
    if not isinstance(seed, int) or not (0 <= seed < 2 ** 64):
        v.append(Violation("sim.seed", f"seed must be an integer in [0, 2^64), got {seed!r}"))
    stride = sim_t.get("sample_stride", 1)
    if not isinstance(stride, int) or stride < 1:
        v.append(Violation("sim.sample_stride", f"sample_stride must be an integer >= 1, got {stride!r}"))
    kappa = sim_t.get("trigger_scale", 1.0)
    if not isinstance(kappa, (int, float)) or not (float(kappa) > 0.0):
        v.append(Violation("sim.trigger_scale", f"trigger_scale must be > 0, got {kappa!r}"))
    continuous = sim_t.get("continuous", False)
    if not isinstance(continuous, bool):
        v.append(Violation("sim.continuous", f"continuous must be a boolean, got {continuous!r}"))

    # Stability guard needs a well-formed graph + gain + dt.
    graph_ok = isinstance(n, int) and n >= 1 and not any(f.field.startswith("graph") for f in v)
    gain_ok = not any(f.field.startswith("gain") for f in v)
    if graph_ok and gain_ok and isinstance(dt, (int, float)) and float(dt) > 0.0:
        g = build_digraph(n, [(int(e[0]), int(e[1]), float(e[2])) for e in edges])
        guard = float(c) * g.max_degree * float(dt)
        if guard >= 1.0:
            v.append(Violation(
                "sim.dt",
                f"dt fails the explicit-Euler stability guard: a(0)*max(l_ii)*dt = {guard:.4g} >= 1",
            ))

    runs = exp_t.get("runs", 1)
    if not isinstance(runs, int) or runs < 1:
        v.append(Violation("experiment.runs", f"runs must be an integer >= 1, got {runs!r}"))
    for idx, p in enumerate(exp_t.get("moments", [2.0])):
        if not isinstance(p, (int, float)) or float(p) < 2.0:
            v.append(Violation(f"experiment.moments[{idx}]", f"moment order must be >= 2, got {p!r}"))
    for idx, rho in enumerate(exp_t.get("rho_list", [])):
        if not isinstance(rho, (int, float)) or not (0.0 < float(rho) < 1.0):
            v.append(Violation(f"experiment.rho_list[{idx}]", f"rho must lie in (0, 1), got {rho!r}"))
    for kind in exp_t.get("emit", sorted(EMIT_KINDS)):
        if kind not in EMIT_KINDS:
            v.append(Violation("experiment.emit", f"unknown artifact kind {kind!r}; "
                                                  f"choose from {sorted(EMIT_KINDS)}"))
    out_dir = exp_t.get("output_dir", "out")
    if not isinstance(out_dir, str) or not out_dir:
        v.append(Violation("experiment.output_dir", f"output_dir must be a non-empty path, got {out_dir!r}"))
    return v


def build_experiment(raw: dict, *, seed=None, runs=None, output=None,
                     no_noise=False, continuous=False) -> ExperimentConfig:
    """Construct a validated ExperimentConfig, applying CLI overrides.

    Assumes ``validate_raw(raw)`` came back empty; construction re-checks
    the same constraints and raises on the first problem.
    """
    graph_t = _table(raw, "graph")
    gain_t = _table(raw, "gain")
    noise_t = _table(raw, "noise")
    sim_t = _table(raw, "sim")
    exp_t = _table(raw, "experiment")

    g: Digraph = build_digraph(graph_t["n"], [tuple(e) for e in graph_t.get("edges", [])])
    gain = make_gain(gain_t["c"], gain_t["gamma"])
    if no_noise:
        noise = NoiseModel.zero(g)
    else:
        mapping = {(int(e[0]), int(e[1])): float(e[2]) for e in noise_t.get("per_edge", [])}
        noise = NoiseModel.from_map(g, mapping, default=float(noise_t.get("sigma", 0.0)))

    sim = SimConfig(
        graph=g,
        gain=gain,
        noise=noise,
        x0=tuple(float(u) for u in sim_t["x0"]),
        dt=float(sim_t["dt"]),
        t_end=float(sim_t["t_end"]),
        seed=int(seed if seed is not None else sim_t["seed"]),
        sample_stride=int(sim_t.get("sample_stride", 1)),
        trigger_scale=float(sim_t.get("trigger_scale", 1.0)),
        continuous=bool(continuous or sim_t.get("continuous", False)),
    )
    return ExperimentConfig(
        sim=sim,
        runs=int(runs if runs is not None else exp_t.get("runs", 1)),
        moments=tuple(float(p) for p in exp_t.get("moments", [2.0])),
        rho_list=tuple(float(r) for r in exp_t.get("rho_list", [])),
        output_dir=Path(output if output is not None else exp_t.get("output_dir", "out")),
        emit=frozenset(exp_t.get("emit", sorted(EMIT_KINDS))),
    )
