"""Euler-Maruyama simulation of event-triggered consensus over noisy channels.

Closed loop, scalar state per agent. With ``xt`` the piecewise-constant
broadcast vector and one independent Wiener channel per directed edge
(j, i) of intensity ``s_ji``, agent i advances per step of size dt as

    x_i += a(t) * sum_j w_ij * (xt_j - xt_i) * dt
         + a(t) * sum_j w_ij * s_ji * dW_ji,      dW_ji ~ Normal(0, dt),

summing over its in-edges. After every state update each agent evaluates
the trigger at the new time t':

    kappa * (xt_i - x_i)**2 >= a(t')      (boundary equality triggers)

and on firing re-broadcasts (xt_i <- x_i, error reset to zero); all agents
that fire in the same step reset simultaneously, so there is no ordering
ambiguity. In continuous mode the broadcast vector tracks the state every
step and no triggers are evaluated.

Determinism
-----------
A run is a pure function of its configuration and seed. Each directed edge
owns an independent PCG64 stream: stream e is the e-th spawn of
``numpy.random.SeedSequence(run_seed)``, with e the edge's position in the
config edge list. Ensemble run seeds come from ``derive_run_seed``, the
splitmix64 output stream seeded at the base seed. Identical inputs give
bitwise-identical trajectories; relabeling agents while carrying edges
(with their list positions) along gives the relabeled trajectory exactly.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .gain import GainFunction
from .graph import Digraph, PerronData, has_spanning_tree, left_perron_vector

__all__ = [
    "NoiseModel",
    "SimConfig",
    "Trajectory",
    "RngProvenance",
    "SimulationAbort",
    "derive_run_seed",
    "control_input",
    "check_trigger",
    "simulate",
    "simulate_ensemble",
]

_MASK64 = 0xFFFFFFFFFFFFFFFF
_GOLDEN = 0x9E3779B97F4A7C15

EDGE_STREAM_SCHEME = (
    "per-edge stream e = numpy.random.SeedSequence(run_seed).spawn(E)[e], "
    "PCG64, e = position of the edge in the config edge list"
)
RUN_SEED_SCHEME = (
    "run_seed_k = splitmix64 stream seeded at base_seed, k-th output: "
    "finalize((base_seed + (k+1)*0x9E3779B97F4A7C15) mod 2^64)"
)


def derive_run_seed(base_seed: int, run_index: int) -> int:
    """k-th output of the splitmix64 stream seeded at ``base_seed``."""
    x = (int(base_seed) + (int(run_index) + 1) * _GOLDEN) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


class SimulationAbort(RuntimeError):
    """Non-finite state during integration; carries the failure location."""

    def __init__(self, message, *, step, time, agent, run_index=None, values=None):
        super().__init__(message)
        self.step = step
        self.time = time
        self.agent = agent
        self.run_index = run_index
        self.values = values


@dataclass(frozen=True)
class NoiseModel:
    """Per-edge channel noise intensities, aligned with ``graph.edges``.

    One independent Wiener channel per directed edge; intensities are zero
    for non-edges by construction since only edges are represented.
    """

    graph: Digraph
    sigmas: tuple[float, ...]

    def __post_init__(self):
        if len(self.sigmas) != len(self.graph.edges):
            raise ValueError(
                f"{len(self.sigmas)} intensities for {len(self.graph.edges)} edges"
            )
        for (j, i, _), s in zip(self.graph.edges, self.sigmas):
            if not (s >= 0.0) or not math.isfinite(s):
                raise ValueError(f"sigma for edge ({j}, {i}) must be finite and >= 0, got {s!r}")

    @classmethod
    def uniform(cls, graph: Digraph, sigma: float) -> "NoiseModel":
        return cls(graph=graph, sigmas=tuple(float(sigma) for _ in graph.edges))

    @classmethod
    def zero(cls, graph: Digraph) -> "NoiseModel":
        return cls.uniform(graph, 0.0)

    @classmethod
    def from_map(cls, graph: Digraph, mapping, default: float = 0.0) -> "NoiseModel":
        """Build from a {(source, target): sigma} map; keys must be edges."""
        edge_set = {(j, i) for j, i, _ in graph.edges}
        for key in mapping:
            if tuple(key) not in edge_set:
                raise ValueError(f"noise map key {tuple(key)} is not an edge of the digraph")
        sigmas = tuple(float(mapping.get((j, i), default)) for j, i, _ in graph.edges)
        return cls(graph=graph, sigmas=sigmas)

    def sigma_for(self, source: int, target: int) -> float:
        for (j, i, _), s in zip(self.graph.edges, self.sigmas):
            if (j, i) == (source, target):
                return s
        raise ValueError(f"({source}, {target}) is not an edge of the digraph")

    @cached_property
    def edge_coefficients(self) -> np.ndarray:
        """Per-edge diffusion coefficient w_e * sigma_e, edge-list order."""
        coeff = np.array([w * s for (_, _, w), s in zip(self.graph.edges, self.sigmas)])
        coeff.flags.writeable = False
        return coeff

    @cached_property
    def gram_diagonal(self) -> np.ndarray:
        """Per-agent sum of squared diffusion coefficients over in-edges."""
        g = np.zeros(self.graph.n)
        for (_, i, w), s in zip(self.graph.edges, self.sigmas):
            g[i - 1] += (w * s) ** 2
        g.flags.writeable = False
        return g

    def stacked_diffusion(self) -> np.ndarray:
        """The (n, n*n) stacked diffusion matrix: row i carries w_ij*s_ji at
        column (i-1)*n + (j-1) for each in-edge (j, i). Its Gram matrix is
        diagonal and equals ``diag(gram_diagonal)``."""
        n = self.graph.n
        out = np.zeros((n, n * n))
        for (j, i, w), s in zip(self.graph.edges, self.sigmas):
            out[i - 1, (i - 1) * n + (j - 1)] = w * s
        return out

    def weighted_diffusion_power(self, r: np.ndarray) -> float:
        """r^T (Sigma Sigma^T) r for a weight vector r: the squared diffusion
        magnitude of the r-weighted average state."""
        r = np.asarray(r, dtype=float)
        if r.shape != (self.graph.n,):
            raise ValueError(f"weight vector has shape {r.shape}, expected ({self.graph.n},)")
        return float(np.dot(r * r, self.gram_diagonal))


@dataclass(frozen=True)
class SimConfig:
    """Complete description of one simulation run.

    ``trigger_scale`` (kappa) multiplies the squared broadcast error in the
    trigger test; 1.0 is the canonical rule, anything else is an extension.
    ``continuous`` disables triggering and broadcasts every step.
    """

    graph: Digraph
    gain: GainFunction
    noise: NoiseModel
    x0: tuple[float, ...]
    dt: float
    t_end: float
    seed: int
    sample_stride: int = 1
    trigger_scale: float = 1.0
    continuous: bool = False

    def __post_init__(self):
        if self.noise.graph != self.graph:
            raise ValueError("noise model was built for a different digraph")
        if len(self.x0) != self.graph.n:
            raise ValueError(f"x0 has {len(self.x0)} entries for {self.graph.n} agents")
        if not all(math.isfinite(v) for v in self.x0):
            raise ValueError("x0 must be finite")
        if not (self.dt > 0.0) or not (self.t_end > 0.0) or self.dt > self.t_end:
            raise ValueError(f"need 0 < dt <= t_end, got dt={self.dt}, t_end={self.t_end}")
        if int(self.sample_stride) != self.sample_stride or self.sample_stride < 1:
            raise ValueError(f"sample_stride must be an integer >= 1, got {self.sample_stride}")
        if not (self.trigger_scale > 0.0):
            raise ValueError(f"trigger_scale must be > 0, got {self.trigger_scale}")
        guard = self.gain(0.0) * self.graph.max_degree * self.dt
        if guard >= 1.0:
            raise ValueError(
                f"dt fails the explicit-Euler stability guard: "
                f"a(0)*max(l_ii)*dt = {guard:.4g} >= 1"
            )

    @property
    def num_steps(self) -> int:
        return max(1, int(round(self.t_end / self.dt)))

    @property
    def horizon(self) -> float:
        """Effective integration horizon: num_steps * dt."""
        return self.num_steps * self.dt


@dataclass(frozen=True)
class RngProvenance:
    run_seed: int
    num_streams: int
    bit_generator: str = "PCG64"
    edge_stream_scheme: str = EDGE_STREAM_SCHEME


@dataclass(frozen=True)
class Trajectory:
    """Recorded output of one run.

    ``times`` is the decimated sample grid (always containing 0 and the
    final step). ``event_log[i]`` lists agent i+1's broadcast instants,
    starting with the initial broadcast at t=0; ``event_errors[i]`` holds
    the pre-reset broadcast error at each instant (0.0 at t=0). Between two
    consecutive instants the recorded broadcast row for that agent is
    constant. ``terminal_weighted_state`` is r @ x(horizon) when the graph
    has a spanning tree, else None.
    """

    times: np.ndarray
    states: np.ndarray
    broadcasts: np.ndarray
    event_log: tuple[np.ndarray, ...]
    event_errors: tuple[np.ndarray, ...]
    terminal_weighted_state: float | None
    rng_provenance: RngProvenance
    config: SimConfig = field(repr=False)


def control_input(graph: Digraph, noise: NoiseModel, gain: GainFunction,
                  i: int, x_tilde, noise_increments, t: float, dt: float) -> float:
    """One Euler-Maruyama state increment for agent i (1-based).

    ``noise_increments`` maps source agent j -> Wiener increment dW_ji for
    exactly the in-edges of i. Reference arithmetic for the vectorized
    stepper; the two are tested against each other.
    """
    a_t = float(gain(t))
    drift = 0.0
    diffusion = 0.0
    for j, w, _ in graph.in_edges[i - 1]:
        drift += w * (x_tilde[j - 1] - x_tilde[i - 1])
        diffusion += w * noise.sigma_for(j, i) * noise_increments[j]
    return a_t * drift * dt + a_t * diffusion


def check_trigger(i: int, x, x_tilde, gain: GainFunction, t: float,
                  kappa: float = 1.0) -> bool:
    """True iff kappa * (xt_i - x_i)**2 >= a(t); equality triggers."""
    e = x_tilde[i - 1] - x[i - 1]
    return bool(kappa * e * e >= float(gain(t)))


def _edge_generators(run_seed: int, num_edges: int):
    children = np.random.SeedSequence(run_seed).spawn(num_edges)
    return [np.random.default_rng(c) for c in children]


def _integrate(cfg: SimConfig, seeds: list[int]) -> list[Trajectory]:
    g = cfg.graph
    n = g.n
    runs = len(seeds)
    edges = g.edges
    n_edges = len(edges)
    src = np.array([j - 1 for j, _, _ in edges], dtype=np.intp)
    tgt = np.array([i - 1 for _, i, _ in edges], dtype=np.intp)
    wts = np.array([w for _, _, w in edges])
    coeff = cfg.noise.edge_coefficients
    noise_free = n_edges == 0 or not np.any(coeff > 0.0)

    steps = cfg.num_steps
    dt = cfg.dt
    sqdt = math.sqrt(dt)
    kappa = cfg.trigger_scale
    a_vals = cfg.gain(np.arange(steps + 1) * dt)

    sample_steps = list(range(0, steps + 1, cfg.sample_stride))
    if sample_steps[-1] != steps:
        sample_steps.append(steps)
    sample_pos = {k: idx for idx, k in enumerate(sample_steps)}
    n_samples = len(sample_steps)

    x = np.tile(np.asarray(cfg.x0, dtype=float), (runs, 1))
    xt = x.copy()
    states = np.empty((runs, n_samples, n))
    broadcasts = np.empty((runs, n_samples, n))
    states[:, 0] = x
    broadcasts[:, 0] = xt

    gens = [_edge_generators(seed, n_edges) for seed in seeds]
    events: list[tuple[int, np.ndarray, np.ndarray, np.ndarray]] = []
    drift = np.empty((runs, n))
    chunk = 2048

    for c0 in range(0, steps, chunk):
        c1 = min(c0 + chunk, steps)
        width = c1 - c0
        nu = None
        if not noise_free:
            nu = np.zeros((runs, n, width))
            for e in range(n_edges):
                ce = coeff[e]
                if ce == 0.0:
                    continue
                te = tgt[e]
                for rr in range(runs):
                    nu[rr, te, :] += ce * gens[rr][e].standard_normal(width)
        for b in range(width):
            k = c0 + b
            a_k = a_vals[k]
            drift.fill(0.0)
            for e in range(n_edges):
                drift[:, tgt[e]] += wts[e] * (xt[:, src[e]] - xt[:, tgt[e]])
            x += (a_k * dt) * drift
            if nu is not None:
                x += (a_k * sqdt) * nu[:, :, b]
            if not np.isfinite(x).all():
                rows, cols = np.nonzero(~np.isfinite(x))
                rr, aa = int(rows[0]), int(cols[0])
                raise SimulationAbort(
                    f"non-finite state at step {k + 1} (t={(k + 1) * dt:.6g}), "
                    f"agent {aa + 1}, run index {rr}: x={x[rr].tolist()}",
                    step=k + 1, time=(k + 1) * dt, agent=aa + 1,
                    run_index=rr, values=x[rr].copy(),
                )
            if cfg.continuous:
                np.copyto(xt, x)
            else:
                err = xt - x
                fired = kappa * err * err >= a_vals[k + 1]
                if fired.any():
                    rows, cols = np.nonzero(fired)
                    events.append((k + 1, rows, cols, err[rows, cols].copy()))
                    xt[rows, cols] = x[rows, cols]
            pos = sample_pos.get(k + 1)
            if pos is not None:
                states[:, pos] = x
                broadcasts[:, pos] = xt

    times = np.array(sample_steps, dtype=float) * dt
    times.flags.writeable = False

    ev_times: list[list[list[float]]] = [[[0.0] for _ in range(n)] for _ in range(runs)]
    ev_errs: list[list[list[float]]] = [[[0.0] for _ in range(n)] for _ in range(runs)]
    for k_new, rows, cols, errs in events:
        t_ev = k_new * dt
        for rr, aa, ee in zip(rows.tolist(), cols.tolist(), errs.tolist()):
            ev_times[rr][aa].append(t_ev)
            ev_errs[rr][aa].append(ee)

    if has_spanning_tree(g):
        r_vec = left_perron_vector(g).r
    else:
        warnings.warn("digraph has no spanning tree: consensus is not guaranteed",
                      stacklevel=3)
        r_vec = None

    out = []
    for rr in range(runs):
        st = states[rr]
        bc = broadcasts[rr]
        st.flags.writeable = False
        bc.flags.writeable = False
        terminal = float(r_vec @ st[-1]) if r_vec is not None else None
        out.append(Trajectory(
            times=times,
            states=st,
            broadcasts=bc,
            event_log=tuple(np.array(ts) for ts in ev_times[rr]),
            event_errors=tuple(np.array(es) for es in ev_errs[rr]),
            terminal_weighted_state=terminal,
            rng_provenance=RngProvenance(run_seed=int(seeds[rr]), num_streams=n_edges),
            config=cfg,
        ))
    return out


def simulate(cfg: SimConfig) -> Trajectory:
    """Run one trajectory. Deterministic given the config (incl. its seed)."""
    return _integrate(cfg, [cfg.seed])[0]


def simulate_ensemble(cfg: SimConfig, runs: int, base_seed: int) -> list[Trajectory]:
    """Run ``runs`` independent trajectories, seeded from ``base_seed``.

    Run k's seed is ``derive_run_seed(base_seed, k)``; the list is in run
    index order and run k is bitwise-identical to ``simulate`` with that
    seed. Runs are advanced together in one vectorized stepper, which under
    elementwise IEEE arithmetic produces the same bits as stepping each run
    alone.
    """
    if int(runs) != runs or runs < 1:
        raise ValueError(f"runs must be an integer >= 1, got {runs!r}")
    seeds = [derive_run_seed(base_seed, k) for k in range(int(runs))]
    return _integrate(cfg, seeds)
