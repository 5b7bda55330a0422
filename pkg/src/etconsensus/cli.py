"""Experiment driver: validate configs, run ensembles, persist results.

Exit codes: 0 ok, 2 validation failure, 3 simulation abort, 4 acceptance
check failure under --strict. Failures emit a machine-readable JSON record
on stderr. CSV artifacts are byte-identical across invocations for the
same config and seed; report.json additionally carries wall-clock time.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import accuracy_report, ensemble_stats
from .config import build_experiment, load_raw, validate_raw
from .gain import gain_integral
from .graph import left_perron_vector
from .sde import (EDGE_STREAM_SCHEME, RUN_SEED_SCHEME, SimulationAbort,
                  simulate_ensemble)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_ABORT = 3
EXIT_STRICT = 4


def _err_record(kind: str, **extra) -> None:
    print(json.dumps({"error": kind, **extra}, sort_keys=True), file=sys.stderr)


def _fmt(v) -> str:
    return repr(float(v))


def _write_csv(path: Path, header: str, rows) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


def _write_trajectory(path: Path, traj) -> None:
    n = traj.states.shape[1]
    header = "t," + ",".join(f"x_{i+1}" for i in range(n)) \
        + "," + ",".join(f"xt_{i+1}" for i in range(n))
    rows = (
        [_fmt(t)] + [_fmt(v) for v in xs] + [_fmt(v) for v in bs]
        for t, xs, bs in zip(traj.times, traj.states, traj.broadcasts)
    )
    _write_csv(path, header, rows)


def _write_event_log(path: Path, traj) -> None:
    rows = (
        [str(agent + 1), str(k), _fmt(t)]
        for agent, log in enumerate(traj.event_log)
        for k, t in enumerate(log)
    )
    _write_csv(path, "agent,k,t_k", rows)


def _run_checks(ensemble, perron, stats, exp) -> list[dict]:
    """Pass/fail records for the runtime invariants of the simulation and
    analysis layers; all are reported, --strict turns failures into exit 4."""
    cfg = exp.sim
    checks: list[dict] = []
    r = perron.r
    x0 = np.asarray(cfg.x0)
    truth = float(r @ x0)
    m = len(ensemble)

    # the scheme conserves r.x up to accumulated rounding; give the SE
    # comparisons an absolute floor so zero-variance instants (t=0,
    # deterministic runs) are not judged on rounding-vs-rounding ratios
    atol = 1e-9 * max(1.0, abs(truth))

    weighted = np.stack([tr.states @ r for tr in ensemble])
    mean_path = weighted.mean(axis=0)
    se_path = weighted.std(axis=0, ddof=1) / math.sqrt(m) if m > 1 else np.zeros_like(mean_path)
    dev = np.abs(mean_path - truth)
    passed = bool(np.all(dev <= 4.0 * se_path + atol))
    binding = dev > atol
    worst = float(np.max(dev[binding] / np.maximum(se_path[binding], 1e-300))) \
        if binding.any() else 0.0
    checks.append({"name": "martingale_mean_4se", "passed": passed,
                   "value": worst, "threshold": 4.0,
                   "detail": "max over sampled t of |mean r.x(t) - r.x(0)| in SE units"})

    err = abs(stats.x_inf_mean - truth)
    lim = 4.0 * stats.x_inf_mean_se + atol
    checks.append({"name": "unbiasedness_4se", "passed": bool(err <= lim),
                   "value": err, "threshold": lim,
                   "detail": "|mean(x_inf) - r.x(0)| vs 4 standard errors"})

    worst_proj = max(
        float(np.max(np.abs((tr.states - np.outer(tr.states @ r, np.ones_like(r))) @ r)))
        for tr in ensemble
    )
    checks.append({"name": "weighted_disagreement_zero", "passed": bool(worst_proj <= 1e-10),
                   "value": worst_proj, "threshold": 1e-10,
                   "detail": "max |r.delta(t)| over all runs and samples"})

    if stats.min_gap is None:
        checks.append({"name": "event_gaps_at_least_dt", "passed": True, "value": None,
                       "threshold": cfg.dt, "detail": "no gaps logged"})
    else:
        checks.append({"name": "event_gaps_at_least_dt",
                       "passed": bool(stats.min_gap >= cfg.dt - 1e-12),
                       "value": stats.min_gap, "threshold": cfg.dt,
                       "detail": "smallest inter-event gap vs the step size"})

    consistent = True
    for tr in ensemble:
        for log, errs in zip(tr.event_log, tr.event_errors):
            if len(log) > 1:
                fired = cfg.trigger_scale * np.asarray(errs[1:]) ** 2 >= cfg.gain(np.asarray(log[1:]))
                if not np.all(fired):
                    consistent = False
    checks.append({"name": "event_log_consistency", "passed": consistent, "value": None,
                   "threshold": None,
                   "detail": "kappa*e^2 >= a(t) at every logged instant (pre-reset error)"})

    clean = True
    if not cfg.continuous:
        for tr in ensemble:
            e = tr.broadcasts - tr.states
            if np.any(cfg.trigger_scale * e * e >= cfg.gain(tr.times)[:, None]):
                clean = False
    checks.append({"name": "sampled_post_trigger_condition", "passed": clean, "value": None,
                   "threshold": None,
                   "detail": "kappa*e^2 < a(t) at every sampled instant after reset"})

    power = cfg.noise.weighted_diffusion_power(r)
    var_trunc = power * gain_integral(cfg.gain, 0.0, cfg.horizon, 2.0)
    if var_trunc == 0.0:
        ok = stats.x_inf_var == 0.0
        val = stats.x_inf_var
    else:
        val = abs(stats.x_inf_var - var_trunc) / var_trunc
        ok = val <= 0.15
    checks.append({"name": "variance_vs_truncated_theory_15pct", "passed": bool(ok),
                   "value": float(val), "threshold": 0.15,
                   "detail": "sample var(x_inf) vs r.SS.r * integral of a^2 over the simulated horizon"})

    if 2.0 in stats.moment_curves and 4.0 in stats.moment_curves:
        p2 = stats.moment_curves[2.0].values
        p4 = stats.moment_curves[4.0].values
        ok = bool(np.all(p4 >= p2 ** 2 - 1e-12 * (1.0 + p2 ** 2)))
        checks.append({"name": "moment_jensen_p4_ge_p2sq", "passed": ok, "value": None,
                       "threshold": None, "detail": "fourth moment dominates squared second moment"})
    return checks


def _coverage_records(ensemble, perron, exp) -> list[dict]:
    cfg = exp.sim
    out = []
    for rho in exp.rho_list:
        rep = accuracy_report(ensemble, perron, cfg.noise, cfg.gain, rho)
        floor = 1.0 - rho - 3.0 * math.sqrt(rho * (1.0 - rho) / rep.n_runs)
        out.append({"name": f"coverage_chebyshev_rho_{rho:g}",
                    "passed": bool(rep.empirical_coverage >= floor),
                    "value": rep.empirical_coverage, "threshold": floor,
                    "detail": f"alpha_theory={rep.alpha_theory:.6g}, "
                              f"general_form={rep.general_form}"})
    return out


def run_experiment(config_path, *, seed=None, runs=None, output=None,
                   no_noise=False, continuous=False, strict=False) -> int:
    t_start = time.perf_counter()
    try:
        raw, sha = load_raw(config_path)
    except (OSError, ValueError) as exc:
        _err_record("config_parse", path=str(config_path), detail=str(exc))
        return EXIT_VALIDATION
    violations = validate_raw(raw)
    if violations:
        _err_record("validation", path=str(config_path),
                    violations=[{"field": v.field, "message": v.message} for v in violations])
        return EXIT_VALIDATION

    exp = build_experiment(raw, seed=seed, runs=runs, output=output,
                           no_noise=no_noise, continuous=continuous)
    try:
        exp.output_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        _err_record("validation", path=str(config_path),
                    violations=[{"field": "experiment.output_dir", "message": str(exc)}])
        return EXIT_VALIDATION

    cfg = exp.sim
    try:
        ensemble = simulate_ensemble(cfg, exp.runs, cfg.seed)
    except SimulationAbort as exc:
        _err_record("simulation_abort", detail=str(exc), step=exc.step,
                    agent=exc.agent, run_index=exc.run_index)
        return EXIT_ABORT

    perron = left_perron_vector(cfg.graph)
    stats = ensemble_stats(ensemble, perron, moments=exp.moments)
    checks = _run_checks(ensemble, perron, stats, exp)
    checks.extend(_coverage_records(ensemble, perron, exp))

    if "moments" in exp.emit:
        ps = sorted(stats.moment_curves)
        header = "t," + ",".join(f"m_p{p:g}" for p in ps)
        rows = (
            [_fmt(t)] + [_fmt(stats.moment_curves[p].values[k]) for p in ps]
            for k, t in enumerate(stats.times)
        )
        _write_csv(exp.output_dir / "moments.csv", header, rows)
    if "xinf" in exp.emit:
        _write_csv(exp.output_dir / "xinf.csv", "run,value",
                   ([str(k), _fmt(v)] for k, v in enumerate(stats.x_inf_samples)))
    if "events" in exp.emit:
        rows = (
            [str(agent), _fmt(gap)]
            for agent in sorted(stats.interevent.per_agent_gaps)
            for gap in stats.interevent.per_agent_gaps[agent]
        )
        _write_csv(exp.output_dir / "events.csv", "agent,gap", rows)
    if "trajectories" in exp.emit:
        for k, tr in enumerate(ensemble):
            _write_trajectory(exp.output_dir / f"trajectory_run{k:04d}.csv", tr)
            _write_event_log(exp.output_dir / f"event_log_run{k:04d}.csv", tr)

    power = cfg.noise.weighted_diffusion_power(perron.r)
    report = {
        "version": f"etconsensus-{__version__}",
        "config": raw,
        "config_sha256": sha,
        "overrides": {"seed": seed, "runs": runs, "output": str(output) if output else None,
                      "no_noise": no_noise, "continuous": continuous},
        "base_seed": cfg.seed,
        "run_seed_derivation": RUN_SEED_SCHEME,
        "edge_stream_scheme": EDGE_STREAM_SCHEME,
        "n_runs": exp.runs,
        "horizon": cfg.horizon,
        "trigger_scale": cfg.trigger_scale,
        "trigger_rule": "canonical" if cfg.trigger_scale == 1.0 else "extension",
        "continuous_mode": cfg.continuous,
        "results": {
            "x_inf_mean": stats.x_inf_mean,
            "x_inf_mean_se": stats.x_inf_mean_se,
            "x_inf_var": stats.x_inf_var,
            "x_inf_var_se": stats.x_inf_var_se,
            "weighted_initial": float(perron.r @ np.asarray(cfg.x0)),
            "consensus_weights": perron.r.tolist(),
            "weighted_diffusion_power": power,
            "var_theory_full_horizon": power * gain_integral(cfg.gain, 0.0, math.inf, 2.0),
            "var_theory_simulated_horizon": power * gain_integral(cfg.gain, 0.0, cfg.horizon, 2.0),
            "fitted_decay_exponents": {f"p{p:g}": stats.fitted_decay_exponents[p]
                                       for p in sorted(stats.fitted_decay_exponents)},
            "min_interevent_gap": stats.min_gap,
            "interevent_tail_slope": stats.interevent.tail_slope,
            "quadratic_gap_suppression_advisory": stats.interevent.quadratic_suppression_ok,
        },
        "tolerances": {"martingale_se_units": 4.0, "unbiasedness_se_units": 4.0,
                       "variance_rel": 0.15, "weighted_disagreement_abs": 1e-10},
        "checks": checks,
        "wall_clock_s": time.perf_counter() - t_start,
    }
    if "report" in exp.emit:
        with open(exp.output_dir / "report.json", "w") as fh:
            json.dump(report, fh, sort_keys=True, indent=2, default=str)
            fh.write("\n")

    failed = [c["name"] for c in checks if not c["passed"]]
    for c in checks:
        print(f"[{'PASS' if c['passed'] else 'FAIL'}] {c['name']}")
    print(f"wrote {exp.output_dir}/ ({exp.runs} runs, horizon {cfg.horizon:g}, "
          f"{len(failed)} failed checks)")
    if failed and strict:
        _err_record("acceptance", failed_checks=failed)
        return EXIT_STRICT
    return EXIT_OK


def validate_config(config_path) -> int:
    try:
        raw, _ = load_raw(config_path)
    except (OSError, ValueError) as exc:
        print(json.dumps({"valid": False, "violations": [
            {"field": "(file)", "message": str(exc)}]}, sort_keys=True, indent=2))
        return EXIT_VALIDATION
    violations = validate_raw(raw)
    print(json.dumps({
        "valid": not violations,
        "violations": [{"field": v.field, "message": v.message} for v in violations],
    }, sort_keys=True, indent=2))
    return EXIT_OK if not violations else EXIT_VALIDATION


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="etconsensus",
        description="Event-triggered consensus simulation over noisy directed channels",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment from a config file")
    p_run.add_argument("config")
    p_run.add_argument("--seed", type=int, default=None, help="override sim.seed")
    p_run.add_argument("--runs", type=int, default=None, help="override experiment.runs")
    p_run.add_argument("--strict", action="store_true",
                       help="exit 4 if any runtime check fails")
    p_run.add_argument("--output", default=None, help="override experiment.output_dir")
    p_run.add_argument("--no-noise", action="store_true", help="force all sigma to 0")
    p_run.add_argument("--continuous", action="store_true",
                       help="disable triggering; broadcast every step")

    p_val = sub.add_parser("validate", help="list every constraint a config violates")
    p_val.add_argument("config")

    args = parser.parse_args(argv)
    if args.command == "run":
        return run_experiment(args.config, seed=args.seed, runs=args.runs,
                              output=args.output, no_noise=args.no_noise,
                              continuous=args.continuous, strict=args.strict)
    return validate_config(args.config)


if __name__ == "__main__":
    sys.exit(main())
