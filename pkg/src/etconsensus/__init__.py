"""Event-triggered weighted consensus over noisy directed channels.

A numpy/scipy library for simulating continuous-time multi-agent consensus
where agents broadcast only when a state-dependent trigger fires, every
directed channel adds independent white noise to protect the sender's
state, and a decreasing gain suppresses the noise asymptotically. Includes
Monte Carlo tooling to measure convergence moments, the statistics of the
random agreement value, inter-event times, and what a channel eavesdropper
can infer.
"""

from .analysis import (AccuracyReport, EnsembleStats, InterEventReport,
                       MomentCurve, PrivacyProbeReport, TailExtension,
                       accuracy_report, disagreement, ensemble_stats,
                       extended_weighted_terminals, interevent_report,
                       moment_curve, privacy_probe)
from .gain import (DIVERGENT, GainFunction, GainLimitReport, gain_integral,
                   gain_decay_limits, make_gain)
from .graph import (Digraph, DigraphError, DuplicateEdgeError, EdgeIndexError,
                    EdgeWeightError, NonSimpleZeroError, NoSpanningTreeError,
                    PerronData, SelfLoopError, build_digraph,
                    has_spanning_tree, left_perron_vector,
                    nonzero_spectrum_min_real)
from .sde import (NoiseModel, RngProvenance, SimConfig, SimulationAbort,
                  Trajectory, check_trigger, control_input, derive_run_seed,
                  simulate, simulate_ensemble)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # graph
    "Digraph", "PerronData", "DigraphError", "SelfLoopError",
    "DuplicateEdgeError", "EdgeWeightError", "EdgeIndexError",
    "NoSpanningTreeError", "NonSimpleZeroError", "build_digraph",
    "has_spanning_tree", "left_perron_vector", "nonzero_spectrum_min_real",
    # gain
    "GainFunction", "make_gain", "gain_integral", "DIVERGENT",
    "GainLimitReport", "gain_decay_limits",
    # sde
    "NoiseModel", "SimConfig", "Trajectory", "RngProvenance",
    "SimulationAbort", "derive_run_seed", "control_input", "check_trigger",
    "simulate", "simulate_ensemble",
    # analysis
    "disagreement", "MomentCurve", "moment_curve", "AccuracyReport",
    "accuracy_report", "TailExtension", "extended_weighted_terminals",
    "InterEventReport", "interevent_report", "PrivacyProbeReport",
    "privacy_probe", "EnsembleStats", "ensemble_stats",
]
