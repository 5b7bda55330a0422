"""The decreasing consensus gain a(t) = c * (1 + t)^(-gamma).

With gamma strictly between 0.5 and 1 the gain integral diverges (the
coupling never switches off) while the squared-gain integral converges
(injected channel noise has finite cumulative variance). Both properties
are required for the protocol to reach agreement under noise, so the
constructor rejects exponents outside the open interval.

Only this power-law family is supported: it satisfies the sandwich
c*(1+t)^(-gamma) <= a(t) <= c*(1+t)^(-gamma) with equality, admits closed
form integrals of every power, and is the family the inter-event analysis
assumes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

__all__ = [
    "GainFunction",
    "make_gain",
    "gain_integral",
    "DIVERGENT",
    "GainLimitReport",
    "gain_decay_limits",
]

GAMMA_CONSTRAINT = "gamma must lie strictly in (0.5, 1)"


class _Divergent:
    """Tagged result for improper gain integrals that do not converge."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "DIVERGENT"


DIVERGENT = _Divergent()


@dataclass(frozen=True)
class GainFunction:
    """a(t) = c * (1 + t)^(-gamma), decreasing, bounded by a(0) = c."""

    c: float
    gamma: float

    def __call__(self, t):
        return self.c * np.power(1.0 + np.asarray(t, dtype=float), -self.gamma)

    def cumulative(self, t):
        """Closed-form running integral of a over [0, t]."""
        t = np.asarray(t, dtype=float)
        return self.c * (np.power(1.0 + t, 1.0 - self.gamma) - 1.0) / (1.0 - self.gamma)


def make_gain(c: float, gamma: float) -> GainFunction:
    """Build a gain function, rejecting amplitudes and exponents that break
    the divergent-integral / convergent-square-integral pair.
    """
    c = float(c)
    gamma = float(gamma)
    if not (c > 0.0) or not math.isfinite(c):
        raise ValueError(f"gain amplitude c must be finite and > 0, got {c!r}")
    if not (0.5 < gamma < 1.0):
        raise ValueError(
            f"{GAMMA_CONSTRAINT}: got {gamma!r} "
            "(<= 0.5 makes the noise variance integral diverge, "
            ">= 1 makes the gain integral converge)"
        )
    return GainFunction(c=c, gamma=gamma)


def gain_integral(g: GainFunction, t0: float, t1: float, power: float = 1.0):
    """Integral of a(s)**power over [t0, t1], in closed form.

    ``t1 = math.inf`` is allowed: the result is finite iff
    power * gamma > 1, otherwise the sentinel ``DIVERGENT`` is returned
    (check with ``result is DIVERGENT``) so callers must face the
    divergent/convergent dichotomy explicitly.
    """
    power = float(power)
    t0 = float(t0)
    t1 = float(t1)
    if power < 1.0:
        raise ValueError(f"power must be >= 1, got {power}")
    if not (0.0 <= t0 <= t1) or math.isinf(t0):
        raise ValueError(f"need 0 <= t0 <= t1 with finite t0, got t0={t0}, t1={t1}")
    pg = power * g.gamma
    amp = g.c ** power
    if math.isinf(t1):
        if pg <= 1.0:
            return DIVERGENT
        return amp * (1.0 + t0) ** (1.0 - pg) / (pg - 1.0)
    if abs(pg - 1.0) < 1e-14:
        return amp * math.log((1.0 + t1) / (1.0 + t0))
    return amp * ((1.0 + t0) ** (1.0 - pg) - (1.0 + t1) ** (1.0 - pg)) / (pg - 1.0)


@dataclass(frozen=True)
class GainLimitReport:
    """Numerical check of the two gain asymptotics used by the decay analysis.

    ``decay_seq[k]``    = t_k^(p*gamma/2) * exp(-mu * integral of a over [0, t_k]);
                          must trend to 0 (the exponential beats any polynomial).
    ``integral_seq[k]`` = t_k^(p*gamma/2) * integral over [0, t_k] of
                          a(s)^((p+2)/2) * exp(-mu * integral of a over [s, t_k]) ds;
                          must trend to ``limit_value`` = c^(p/2) / mu.
    """

    t_grid: np.ndarray
    decay_seq: np.ndarray
    integral_seq: np.ndarray
    limit_value: float
    final_decay: float
    final_rel_deviation: float
    decay_tail_monotone: bool
    integral_tail_monotone: bool


def _weighted_gain_integral(g: GainFunction, mu: float, q: float, t: float) -> float:
    # integral over [0, t] of a(s)^q * exp(-mu * (A(t) - A(s))) ds, where A is
    # the running gain integral; substituting v = A(t) - A(s) turns it into
    # a smooth exponentially weighted integral over [0, A(t)].
    at = float(g.cumulative(t))
    gam = g.gamma
    ex = -gam / (1.0 - gam)

    def integrand(v):
        base = 1.0 + (1.0 - gam) * (at - v) / g.c
        a_s = g.c * base ** ex
        return a_s ** (q - 1.0) * math.exp(-mu * v)

    val, _ = quad(integrand, 0.0, at, limit=300)
    return val


def gain_decay_limits(g: GainFunction, mu: float, p: float, t_grid) -> GainLimitReport:
    """Evaluate the two limit sequences on ``t_grid`` and report convergence.

    Requires mu > 0, p > 2, and a positive increasing grid spanning at least
    two decades. Non-monotone tails are flagged, not raised: the sequences
    are analytic limits and the caller decides how much wobble to accept.
    """
    if not (mu > 0.0):
        raise ValueError(f"mu must be > 0, got {mu}")
    if not (p > 2.0):
        raise ValueError(f"p must be > 2, got {p}")
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or len(t) < 2 or t[0] <= 0.0 or np.any(np.diff(t) <= 0.0):
        raise ValueError("t_grid must be a positive, strictly increasing 1-d grid")
    if t[-1] / t[0] < 100.0:
        raise ValueError("t_grid must span at least two decades")

    scale = t ** (p * g.gamma / 2.0)
    decay_seq = scale * np.exp(-mu * g.cumulative(t))
    q = (p + 2.0) / 2.0
    integral_seq = scale * np.array([_weighted_gain_integral(g, mu, q, tk) for tk in t])
    limit_value = g.c ** (p / 2.0) / mu

    tail = slice(len(t) // 2, None)
    decay_tail = decay_seq[tail]
    dev_tail = np.abs(integral_seq[tail] - limit_value)
    decay_monotone = bool(np.all(np.diff(decay_tail) <= 1e-12 * (1.0 + decay_tail[:-1])))
    integral_monotone = bool(np.all(np.diff(dev_tail) <= 1e-9 * (1.0 + dev_tail[:-1])))

    return GainLimitReport(
        t_grid=t,
        decay_seq=decay_seq,
        integral_seq=integral_seq,
        limit_value=limit_value,
        final_decay=float(decay_seq[-1]),
        final_rel_deviation=float(abs(integral_seq[-1] - limit_value) / limit_value),
        decay_tail_monotone=decay_monotone,
        integral_tail_monotone=integral_monotone,
    )
