"""Uniformly stable functions: certification, overshoot, uniform convergence set.

A rate function mu is a USF when its running integral obeys
``int_{t0}^{t} mu <= -eps (t - t0) + delta`` for all t >= t0. The checks here
are exact for periodic piecewise-constant rates and grid-based otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict

import numpy as np

from .signals import (AffineSum, Constant, ScalarSignal, SinPower, SquareWave,
                      TCosTSquared, integrate, sup_window_integral)

SAFETY = 0.99
UCS_GUARD = 1e-12


class UcsPreconditionError(ValueError):
    """The requested window length is not in the uniform convergence set."""


@dataclass(frozen=True)
class UsfCertificate:
    epsilon: float
    delta: float
    window_T: float
    overshoot_at_T: float
    verified_horizon: float
    method: str
    status: str = "certified"

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("certificate needs epsilon > 0")
        if not 0.0 <= self.overshoot_at_T <= self.delta + 1e-12:
            raise ValueError("certificate needs 0 <= overshoot <= delta")

    def to_json(self):
        return {"epsilon": self.epsilon, "delta": self.delta, "T": self.window_T,
                "overshoot": self.overshoot_at_T, "method": self.method,
                "horizon": None if math.isinf(self.verified_horizon) else self.verified_horizon,
                "status": "horizon-verified" if self.method == "numeric-scan" else self.status}


@dataclass(frozen=True)
class UsfRefutation:
    t0: float
    t: float
    integral: float
    rate: float
    method: str
    status: str = "refuted"

    def to_json(self):
        d = asdict(self)
        d["witness"] = [d.pop("t0"), d.pop("t")]
        return d


@dataclass(frozen=True)
class UsfInconclusive:
    reason: str
    horizon: float
    status: str = "inconclusive"

    def to_json(self):
        return asdict(self)


@dataclass(frozen=True)
class RazumikhinGainParams:
    """Linear Razumikhin gain q(s) = q*s with slack rho and window T."""

    q: float
    rho: float
    T: float

    def __post_init__(self):
        if not self.q > 0:
            raise ValueError("gain q must be positive")
        if not 0.0 < self.rho < 1.0:
            raise ValueError("rho must lie in (0, 1)")
        if not self.T > 0:
            raise ValueError("window T must be positive")


# --- helpers ------------------------------------------------------------------

def _window_max(values, width):
    """out[i] = max(values[i : i + width + 1]) for every i with a full window."""
    n = values.size - width
    if n <= 0:
        raise ValueError("window longer than the sampled range")
    table = values.copy()
    span = 1
    # doubling table: table[i] = max over values[i : i + span]
    while 2 * span <= width + 1:
        table = np.maximum(table[:-span], table[span:])
        span *= 2
    rest = width + 1 - span
    return np.maximum(table[:n], table[rest:rest + n])


def _primitive(mu, grid):
    if mu.has_closed_form:
        return np.asarray(mu.antiderivative(grid), dtype=float)
    pieces = [integrate(mu, a, b) for a, b in zip(grid[:-1], grid[1:])]
    return np.concatenate([[0.0], np.cumsum(pieces)])


def _exact_overshoot_pc(mu, T):
    period, cuts, _ = mu.piecewise_constant()
    if period == 0.0:
        return max(0.0, float(mu.eval(0.0)) * T)
    starts = np.unique(np.concatenate([cuts, np.mod(cuts - T, period)]))
    best = 0.0
    for t in starts:
        j0 = math.floor(t / period)
        j1 = math.ceil((t + T) / period)
        inner = [t, t + T] + [p + j * period for j in range(j0, j1 + 1) for p in cuts]
        inner = np.array([s for s in inner if t <= s <= t + T])
        if inner.size == 0:
            continue
        val = float(np.max(mu.antiderivative(inner) - mu.antiderivative(t)))
        best = max(best, val)
    return best


def _numeric_overshoot(mu, T, span, grid_step, refine_rounds=3):
    width = max(int(math.ceil(T / grid_step)), 1)
    h = T / width
    n_starts = max(int(math.ceil(span / h)), 0) + 1
    grid = np.arange(n_starts + width) * h
    F = _primitive(mu, grid)
    gains = _window_max(F, width) - F[:n_starts]
    i = int(np.argmax(gains))
    best = max(0.0, float(gains[i]))
    t_best = float(grid[i])

    def inner(t):
        thetas = np.linspace(0.0, T, width + 1)
        vals = mu.antiderivative(t + thetas) - mu.antiderivative(t) if mu.has_closed_form \
            else np.array([integrate(mu, t, t + th) for th in thetas])
        return float(np.max(vals))

    step = h
    for _ in range(refine_rounds):
        step *= 0.5
        for cand in (t_best - step, t_best + step):
            if 0.0 <= cand <= span:
                v = inner(cand)
                if v > best:
                    best, t_best = v, cand
    return best


# --- operations ---------------------------------------------------------------

def overshoot(mu: ScalarSignal, T, horizon=None, grid_step=1e-3):
    """Worst accumulation of ``mu`` over windows of length at most T.

    Exact for piecewise-constant periodic rates; otherwise a grid double scan
    over one period (periodic) or over [0, horizon].
    """
    if T < 0:
        raise ValueError("T must be nonnegative")
    if T == 0:
        return 0.0
    if mu.piecewise_constant() is not None:
        return _exact_overshoot_pc(mu, T)
    period = mu.period
    if period is not None and period > 0:
        span = period
    else:
        if horizon is None:
            raise ValueError("aperiodic rate needs a horizon")
        span = float(horizon)
    return _numeric_overshoot(mu, T, span, grid_step)


def ucs_contains(mu: ScalarSignal, T, horizon=None, grid_step=1e-3):
    """True iff every window of length T has strictly negative integral."""
    if not T > 0:
        raise ValueError("T must be positive")
    horizon = max(float(horizon if horizon is not None else T), T)
    return sup_window_integral(mu, T, horizon, grid_step) < -UCS_GUARD


def check_gain_condition(params: RazumikhinGainParams, mu: ScalarSignal,
                         horizon=None, grid_step=1e-3):
    """Razumikhin gain condition for linear q: q >= exp(overshoot(T)) / rho."""
    if not ucs_contains(mu, params.T, horizon, grid_step):
        raise UcsPreconditionError(
            f"T={params.T} is not in the uniform convergence set: some window of "
            "that length has a nonnegative integral")
    phi = overshoot(mu, params.T, horizon, grid_step)
    return params.q >= math.exp(phi) / params.rho


def check_usf(mu: ScalarSignal, horizon=100.0, grid_step=1e-3):
    """Certify, refute, or report inconclusive for the USF property of ``mu``."""
    period = mu.period
    if period is not None:
        return _check_usf_periodic(mu, period if period > 0 else 1.0)
    return _check_usf_scan(mu, float(horizon), grid_step)


def _check_usf_periodic(mu, period):
    one = integrate(mu, 0.0, period)
    if not one < -UCS_GUARD:
        return UsfRefutation(0.0, period, one, one / period, "closed-form-periodic")
    eps = SAFETY * abs(one) / period
    shifted = AffineSum(((1.0, mu), (1.0, Constant(eps))))
    delta = overshoot(shifted, period)
    phi = overshoot(mu, period)
    return UsfCertificate(eps, max(delta, phi), period, phi, math.inf, "closed-form-periodic")


def _check_usf_scan(mu, horizon, grid_step):
    n = max(int(math.ceil(horizon / grid_step)), 8)
    grid = np.linspace(0.0, horizon, n + 1)
    F = _primitive(mu, grid)

    def worst(frac):
        w = int(round(n * frac))
        diffs = F[w:] - F[:-w]
        i = int(np.argmax(diffs))
        return float(diffs[i]), float(grid[i]), float(grid[i + w]), w * (horizon / n)

    half_val, h0, h1, half_len = worst(0.5)
    quarter_val, *_ = worst(0.25)
    if half_val < 0:
        eps = SAFETY * (-half_val / half_len)
        G = F + eps * grid
        delta = max(0.0, float(np.max(G - np.minimum.accumulate(G))))
        if delta / eps > 0.5 * horizon:
            return UsfInconclusive("transient bound delta/epsilon exceeds half the horizon", horizon)
        T = _smallest_ucs_window(F, grid, half_len)
        if T is None:
            return UsfInconclusive("no window length with uniformly negative integral found", horizon)
        phi = _numeric_overshoot(mu, T, horizon - T, grid_step)
        return UsfCertificate(eps, max(delta, phi), T, phi, horizon, "numeric-scan")
    if half_val > 0 and half_val >= quarter_val:
        return UsfRefutation(h0, h1, half_val, half_val / half_len, "numeric-scan")
    return UsfInconclusive("long-window integrals neither negative nor growing", horizon)


def _smallest_ucs_window(F, grid, max_len):
    h = grid[1] - grid[0]
    widths = np.unique(np.round(np.geomspace(1.0, max_len / h, 60)).astype(int))
    for w in widths:
        if np.max(F[w:] - F[:-w]) < -UCS_GUARD:
            return w * h
    return None


# --- benchmark examples -------------------------------------------------------------

def example1_gain_signal(c, e, period=1.0):
    """b(t): 0 on the first fraction c of each period, e on the rest."""
    return SquareWave(0.0, float(e), float(c), float(period))


def example1_mu(q, c, e, period=1.0):
    """mu(t) = -1 + q |b(t)| for the square-wave gain b."""
    return AffineSum(((1.0, Constant(-1.0)), (float(q), example1_gain_signal(c, e, period))))


def example1_threshold(c):
    """Largest e for which some admissible q exists: 1 / ((1 - c) exp(c))."""
    if not 0.0 < c < 1.0:
        raise ValueError("c must lie in (0, 1)")
    return 1.0 / ((1.0 - c) * math.exp(c))


def example1_conditions(q, c, e):
    """Closed-form (one-period integral, overshoot at one period) for Example 1.

    Vectorised over ``q``. The overshoot is clipped at 0 for the case where
    mu never turns positive.
    """
    q = np.asarray(q, dtype=float)
    period_integral = -1.0 + q * (1.0 - c) * e
    phi = np.maximum(period_integral + c, 0.0)
    return period_integral, phi


def example1_admissible_q(c, e, q_grid):
    """Entries of ``q_grid`` (q > 1) meeting both USF and gain conditions."""
    q_grid = np.asarray(q_grid, dtype=float)
    one, phi = example1_conditions(q_grid, c, e)
    ok = (q_grid > 1.0) & (one < 0.0) & (q_grid > np.exp(phi))
    return q_grid[ok]


def example2_mu(lam, l, k, q=None):
    """mu(t) = t cos t^2 - lambda + q l sin^{2k} t with q = exp(2 pi lambda) by default."""
    if q is None:
        q = math.exp(2.0 * math.pi * lam)
    return AffineSum(((1.0, TCosTSquared()), (1.0, Constant(-float(lam))),
                      (1.0, SinPower(int(k), float(q) * float(l)))))
