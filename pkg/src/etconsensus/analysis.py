"""Ensemble post-processing: convergence moments, accuracy of the limit
value, inter-event statistics, and an eavesdropper probe.

All operations are pure functions over immutable trajectories. Reductions
over runs use exact compensated summation (math.fsum) so the result does
not depend on accumulation order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .gain import GainFunction, gain_integral
from .graph import PerronData
from .sde import NoiseModel, Trajectory

__all__ = [
    "disagreement",
    "MomentCurve",
    "moment_curve",
    "AccuracyReport",
    "accuracy_report",
    "TailExtension",
    "extended_weighted_terminals",
    "InterEventReport",
    "interevent_report",
    "PrivacyProbeReport",
    "privacy_probe",
    "EnsembleStats",
    "ensemble_stats",
]


def disagreement(traj, perron: PerronData) -> np.ndarray:
    """Deviation from the weighted-average subspace: (I - 1 r^T) x.

    Accepts a Trajectory (projects every recorded state row) or a raw
    array whose last axis indexes agents. The map is a projection, and the
    r-weighted component of the result is identically zero.
    """
    x = traj.states if isinstance(traj, Trajectory) else np.asarray(traj, dtype=float)
    r = perron.r
    if x.shape[-1] != r.shape[0]:
        raise ValueError(f"state dimension {x.shape[-1]} != weight dimension {r.shape[0]}")
    return x - np.multiply.outer(x @ r, np.ones_like(r))


def _slope_with_se(logx: np.ndarray, logy: np.ndarray) -> tuple[float, float]:
    m = len(logx)
    xbar = logx.mean()
    sxx = float(((logx - xbar) ** 2).sum())
    slope, intercept = np.polyfit(logx, logy, 1)
    if m <= 2:
        return float(slope), float("nan")
    resid = logy - (slope * logx + intercept)
    se = math.sqrt(float((resid ** 2).sum()) / (m - 2) / sxx)
    return float(slope), se


@dataclass(frozen=True)
class MomentCurve:
    """Ensemble estimate of E ||delta(t)||^p with its tail decay fit."""

    p: float
    times: np.ndarray
    values: np.ndarray
    tail_slope: float
    tail_slope_se: float
    tail_start: float


def moment_curve(ensemble: list[Trajectory], perron: PerronData, p: float) -> MomentCurve:
    """Pointwise ensemble mean of ||delta(t)||^p plus a log-log least-squares
    slope over the last decade of the time grid.

    Needs at least 30 runs and p >= 2. Grid points where the mean underflows
    to zero are excluded from the fit; if fewer than two positive tail points
    remain the slope is NaN.
    """
    if p < 2.0:
        raise ValueError(f"moment order p must be >= 2, got {p}")
    if len(ensemble) < 30:
        raise ValueError(f"need at least 30 runs for a moment estimate, got {len(ensemble)}")
    times = ensemble[0].times
    for tr in ensemble[1:]:
        if not np.array_equal(tr.times, times):
            raise ValueError("ensemble trajectories have differing sample grids")
    norms = np.stack([
        np.linalg.norm(disagreement(tr, perron), axis=1) ** p for tr in ensemble
    ])
    values = np.array([math.fsum(norms[:, k]) / len(ensemble) for k in range(norms.shape[1])])

    tail_start = times[-1] / 10.0
    tail = (times >= tail_start) & (times > 0.0)
    if np.count_nonzero(tail) < 2:
        raise ValueError("fewer than 2 tail grid points; cannot fit a decay exponent")
    pos = tail & (values > 0.0)
    if np.count_nonzero(pos) < 2:
        slope, se = float("nan"), float("nan")
    else:
        slope, se = _slope_with_se(np.log(times[pos]), np.log(values[pos]))
    return MomentCurve(p=float(p), times=times, values=values,
                       tail_slope=slope, tail_slope_se=se, tail_start=float(tail_start))


@dataclass(frozen=True)
class AccuracyReport:
    """Theory vs empirical statistics of the limit value x_inf.

    ``var_theory`` is r^T Sigma Sigma^T r times the full squared-gain
    integral; for unit gain amplitude this is the closed form
    r^T Sigma Sigma^T r / (2*gamma - 1), otherwise ``general_form`` marks
    the amplitude-generalised substitution. ``alpha_theory`` is the
    Chebyshev radius sqrt(var_theory / rho).
    """

    rho: float
    alpha_theory: float
    var_theory: float
    var_empirical: float
    empirical_coverage: float
    x_inf_mean: float
    x_inf_se: float
    weighted_initial: float
    mean_error_in_se: float
    n_runs: int
    general_form: bool


def accuracy_report(ensemble: list[Trajectory], perron: PerronData,
                    noise: NoiseModel, gain: GainFunction, rho: float,
                    x_inf=None) -> AccuracyReport:
    """Confront the limit-value statistics with their predicted law.

    ``x_inf`` defaults to each run's terminal weighted state; pass the
    output of :func:`extended_weighted_terminals` to evaluate at a horizon
    beyond the simulated one.
    """
    if not (0.0 < rho < 1.0):
        raise ValueError(f"rho must lie in (0, 1), got {rho}")
    if x_inf is None:
        vals = [tr.terminal_weighted_state for tr in ensemble]
        if any(v is None for v in vals):
            raise ValueError("trajectory lacks a terminal weighted state (no spanning tree?)")
        x_inf = np.array(vals, dtype=float)
    else:
        x_inf = np.asarray(x_inf, dtype=float)
    if not np.all(np.isfinite(x_inf)):
        raise ValueError("x_inf samples must be finite")
    m = len(x_inf)

    power = noise.weighted_diffusion_power(perron.r)
    sq_int = gain_integral(gain, 0.0, math.inf, 2.0)
    var_theory = power * sq_int
    alpha = math.sqrt(var_theory / rho)

    mean = float(x_inf.mean())
    var_emp = float(x_inf.var(ddof=1)) if m > 1 else 0.0
    se = math.sqrt(var_emp / m)
    coverage = float(np.mean(np.abs(x_inf - mean) < alpha))

    x0 = np.asarray(ensemble[0].config.x0, dtype=float)
    weighted_initial = float(perron.r @ x0)
    err = abs(mean - weighted_initial)
    mean_error_in_se = err / se if se > 0.0 else (0.0 if err == 0.0 else math.inf)

    return AccuracyReport(
        rho=float(rho), alpha_theory=alpha, var_theory=float(var_theory),
        var_empirical=var_emp, empirical_coverage=coverage,
        x_inf_mean=mean, x_inf_se=se, weighted_initial=weighted_initial,
        mean_error_in_se=mean_error_in_se, n_runs=m,
        general_form=(gain.c != 1.0),
    )


@dataclass(frozen=True)
class TailExtension:
    """Limit-value samples extended past the simulated horizon.

    The weighted state r^T x(t) is a Gaussian martingale whose increments
    do not depend on the triggering (the drift vanishes under r), so its
    value at any later horizon is the simulated terminal value plus an
    independent Normal(0, r^T Sigma Sigma^T r * integral of a^2 over
    [horizon, t_eval]) draw — sampled here exactly, from a dedicated seed.
    """

    samples: np.ndarray
    t_sim: float
    t_eval: float
    tail_variance: float
    simulated_variance_share: float


def extended_weighted_terminals(ensemble: list[Trajectory], perron: PerronData,
                                noise: NoiseModel, gain: GainFunction,
                                t_eval: float, seed: int) -> TailExtension:
    """Extend each run's terminal weighted state to horizon ``t_eval``
    (may be ``math.inf``) by sampling the exact law of the remaining
    weighted-state increment."""
    t_sim = ensemble[0].config.horizon
    if not (t_eval >= t_sim):
        raise ValueError(f"t_eval={t_eval} is before the simulated horizon {t_sim}")
    vals = [tr.terminal_weighted_state for tr in ensemble]
    if any(v is None for v in vals):
        raise ValueError("trajectory lacks a terminal weighted state (no spanning tree?)")
    terminals = np.array(vals, dtype=float)

    power = noise.weighted_diffusion_power(perron.r)
    tail_var = power * gain_integral(gain, t_sim, t_eval, 2.0)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    samples = terminals + math.sqrt(tail_var) * rng.standard_normal(len(terminals))

    total = power * gain_integral(gain, 0.0, t_eval, 2.0)
    share = 1.0 if total == 0.0 else (total - tail_var) / total
    return TailExtension(samples=samples, t_sim=float(t_sim), t_eval=float(t_eval),
                         tail_variance=float(tail_var),
                         simulated_variance_share=float(share))


@dataclass(frozen=True)
class InterEventReport:
    """Distribution of inter-broadcast gaps, pooled over an ensemble.

    ``tail_probs[k]`` estimates P{gap <= iota_grid[k]}; ``tail_slope`` is
    the log-log slope of that curve over its positive range. A slope of at
    least 1.5 is consistent with the quadratic small-gap suppression the
    trigger analysis predicts; the flag is advisory because the bound's
    constants are not constructive.
    """

    per_agent_gaps: dict[int, np.ndarray]
    min_gap: float | None
    iota_grid: np.ndarray
    tail_probs: np.ndarray
    tail_slope: float | None
    quadratic_suppression_ok: bool | None


def interevent_report(ensemble: list[Trajectory]) -> InterEventReport:
    """Pool inter-event gaps per agent and summarise the small-gap tail.

    Trajectories whose only logged instant is the initial broadcast
    contribute no gaps; an ensemble with no gaps at all yields an empty
    report (min_gap None, no grid, no slope).
    """
    n = ensemble[0].config.graph.n
    per_agent: dict[int, list[np.ndarray]] = {i + 1: [] for i in range(n)}
    for tr in ensemble:
        for i in range(n):
            log = tr.event_log[i]
            if len(log) >= 2:
                per_agent[i + 1].append(np.diff(log))
    gaps = {
        agent: (np.concatenate(parts) if parts else np.empty(0))
        for agent, parts in per_agent.items()
    }
    pooled = np.concatenate([v for v in gaps.values()]) if gaps else np.empty(0)
    if pooled.size == 0:
        return InterEventReport(per_agent_gaps=gaps, min_gap=None,
                                iota_grid=np.empty(0), tail_probs=np.empty(0),
                                tail_slope=None, quadratic_suppression_ok=None)

    min_gap = float(pooled.min())
    median = float(np.median(pooled))
    if median <= min_gap:
        grid = np.array([min_gap])
    else:
        grid = np.geomspace(min_gap, median, 12)
    probs = np.array([np.mean(pooled <= i) for i in grid])

    pos = probs > 0.0
    if np.count_nonzero(pos) >= 2 and grid[pos][-1] > grid[pos][0]:
        slope, _ = _slope_with_se(np.log(grid[pos]), np.log(probs[pos]))
    else:
        slope = None
    ok = None if slope is None else bool(slope >= 1.5)
    return InterEventReport(per_agent_gaps=gaps, min_gap=min_gap,
                            iota_grid=grid, tail_probs=probs,
                            tail_slope=slope, quadratic_suppression_ok=ok)


@dataclass(frozen=True)
class PrivacyProbeReport:
    """What a channel eavesdropper learns about the sender's initial state.

    The observer of edge (j, i) sees, per step, the broadcast value plus
    discretised white noise of standard deviation sigma/sqrt(dt), and
    averages the first ``window_used`` samples. The window is truncated at
    the sender's first re-broadcast (``truncated`` marks this), since the
    signal changes there. ``sq_errors_by_window`` gives the squared error
    of the running average after 1..window_used samples.
    """

    edge: tuple[int, int]
    window_requested: int
    window_used: int
    truncated: bool
    estimate: float
    true_initial: float
    sq_error: float
    per_sample_noise_std: float
    sq_errors_by_window: np.ndarray


def privacy_probe(traj: Trajectory, edge: tuple[int, int], window: int) -> PrivacyProbeReport:
    """Reconstruct one channel's observations from the run's RNG provenance
    and estimate the sender's initial state by averaging them."""
    cfg = traj.config
    steps = cfg.num_steps
    window = int(window)
    if not (1 <= window <= steps):
        raise ValueError(f"window must lie in 1..{steps}, got {window}")
    edge = (int(edge[0]), int(edge[1]))
    edge_idx = None
    for idx, (j, i, _) in enumerate(cfg.graph.edges):
        if (j, i) == edge:
            edge_idx = idx
            break
    if edge_idx is None:
        raise ValueError(f"{edge} is not an edge of the digraph")

    j = edge[0]
    sender_log = traj.event_log[j - 1]
    if len(sender_log) >= 2:
        first_rebroadcast_step = int(round(sender_log[1] / cfg.dt))
    else:
        first_rebroadcast_step = steps
    window_used = min(window, first_rebroadcast_step)
    truncated = window_used < window

    children = np.random.SeedSequence(traj.rng_provenance.run_seed).spawn(len(cfg.graph.edges))
    stream = np.random.default_rng(children[edge_idx])
    dw = math.sqrt(cfg.dt) * stream.standard_normal(window_used)

    sigma = cfg.noise.sigmas[edge_idx]
    x_j0 = float(cfg.x0[j - 1])
    observations = x_j0 + sigma * dw / cfg.dt
    running_mean = np.cumsum(observations) / np.arange(1, window_used + 1)
    sq_errors = (running_mean - x_j0) ** 2

    return PrivacyProbeReport(
        edge=edge, window_requested=window, window_used=window_used,
        truncated=truncated, estimate=float(running_mean[-1]),
        true_initial=x_j0, sq_error=float(sq_errors[-1]),
        per_sample_noise_std=sigma / math.sqrt(cfg.dt),
        sq_errors_by_window=sq_errors,
    )


@dataclass(frozen=True)
class EnsembleStats:
    """Monte Carlo aggregates of one ensemble."""

    times: np.ndarray
    moment_curves: dict[float, MomentCurve]
    fitted_decay_exponents: dict[float, float]
    x_inf_samples: np.ndarray
    x_inf_mean: float
    x_inf_mean_se: float
    x_inf_var: float
    x_inf_var_se: float
    interevent: InterEventReport
    min_gap: float | None


def ensemble_stats(ensemble: list[Trajectory], perron: PerronData,
                   moments=(2.0,)) -> EnsembleStats:
    """Assemble moment curves, limit-value statistics and gap statistics.

    Moment curves need at least 30 runs and are omitted (empty dict) for
    smaller ensembles. The variance standard error uses the Gaussian
    approximation var * sqrt(2/(M-1)), adequate here because the limit
    value is a Gaussian stochastic integral.
    """
    if len(ensemble) >= 30:
        curves = {float(p): moment_curve(ensemble, perron, p) for p in moments}
    else:
        curves = {}
    for p, c in curves.items():
        if np.any(c.values < 0.0):
            raise ValueError(f"moment curve p={p} has negative entries")
    vals = [tr.terminal_weighted_state for tr in ensemble]
    if any(v is None for v in vals):
        raise ValueError("trajectory lacks a terminal weighted state (no spanning tree?)")
    x_inf = np.array(vals, dtype=float)
    if not np.all(np.isfinite(x_inf)):
        raise ValueError("x_inf samples must be finite")
    m = len(x_inf)
    var = float(x_inf.var(ddof=1)) if m > 1 else 0.0

    inter = interevent_report(ensemble)
    dt = ensemble[0].config.dt
    if inter.min_gap is not None and inter.min_gap < dt - 1e-12:
        raise ValueError(f"inter-event gap {inter.min_gap} below the step size {dt}")

    return EnsembleStats(
        times=ensemble[0].times,
        moment_curves=curves,
        fitted_decay_exponents={p: c.tail_slope for p, c in curves.items()},
        x_inf_samples=x_inf,
        x_inf_mean=float(x_inf.mean()),
        x_inf_mean_se=math.sqrt(var / m),
        x_inf_var=var,
        x_inf_var_se=var * math.sqrt(2.0 / (m - 1)) if m > 1 else 0.0,
        interevent=inter,
        min_gap=inter.min_gap,
    )
