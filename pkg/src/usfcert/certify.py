"""Hypothesis checks for Razumikhin / Krasovskii type stability theorems.

Monitors are read-only passes over expectation curves E V(t) on a uniform
grid. They can only refute a hypothesis (verdict "refuted") or fail to refute
it ("consistent"); nothing here proves stability.

The derivative bound d/dt E V <= mu E V is checked in integrated form over
the central stencil [t_{k-1}, t_{k+1}]:

    E V(t_{k+1}) <= E V(t_{k-1}) exp(int mu) + slack,

which is exact on data solving the equality and needs no division by E V.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .quadrature import cumulative_integral
from .signals import Constant, ScalarSignal, SquareWave, as_signal, positive_part_integral
from .usf import RazumikhinGainParams, check_gain_condition

DEFAULT_BUDGET = 0.05


@dataclass(frozen=True)
class LyapunovSpec:
    """V(t, x, i) = c_i |x|^p with p = 2 by default (so s = |x|^p enters linearly)."""

    c: tuple = (1.0,)
    p: float = 2.0

    def __post_init__(self):
        object.__setattr__(self, "c", tuple(float(v) for v in np.atleast_1d(self.c)))
        if any(v <= 0 for v in self.c):
            raise ValueError("Lyapunov coefficients must be positive")

    def bounds(self):
        """(beta1, beta2, beta0) with beta1 s <= V <= beta2 s for s = |x|^p."""
        return min(self.c), max(self.c), 1.0

    def expected(self, moment):
        """E V(t, x(t), i) for every regime i, shape (T, N), from E|x|^p."""
        return np.asarray(moment, dtype=float)[:, None] * np.asarray(self.c)[None, :]


@dataclass(eq=False)
class MonitorReport:
    times: np.ndarray
    premise: np.ndarray          # bool, premise active
    excess: np.ndarray           # lhs - bound - slack; NaN where not evaluated
    budget: float = DEFAULT_BUDGET
    tol: float = 1e-9
    gain_condition: bool | None = None
    extra: dict = field(default_factory=dict)

    @property
    def violated(self):
        with np.errstate(invalid="ignore"):
            return self.premise & (self.excess > 0)

    @property
    def premise_active_count(self):
        return int(self.premise.sum())

    @property
    def violations(self):
        return int(self.violated.sum())

    @property
    def violation_fraction(self):
        n = self.premise_active_count
        return self.violations / n if n else 0.0

    @property
    def worst_violation(self):
        v = self.excess[self.violated]
        return float(v.max()) if v.size else 0.0

    def quantiles(self, qs=(0.5, 0.9, 0.99)):
        v = self.excess[self.violated]
        return {str(q): (float(np.quantile(v, q)) if v.size else 0.0) for q in qs}

    @property
    def verdict(self):
        return "consistent" if self.violation_fraction <= self.budget else "refuted"

    def summary(self):
        return {
            "premise_active_count": self.premise_active_count,
            "violations": self.violations,
            "violation_fraction": self.violation_fraction,
            "worst_violation": self.worst_violation,
            "violation_quantiles": self.quantiles(),
            "budget": self.budget,
            "gain_condition": self.gain_condition,
            "verdict": self.verdict,
            **self.extra,
        }

    def to_json(self):
        return json.dumps(self.summary(), indent=2)


# --- shared helpers ------------------------------------------------------------

def _uniform_step(times):
    times = np.asarray(times, dtype=float)
    if times.size < 3:
        raise ValueError("need at least three grid points")
    steps = np.diff(times)
    h = float(steps.mean())
    if np.any(np.abs(steps - h) > 1e-9 * max(1.0, abs(times[-1]))):
        raise ValueError("monitor grid must be uniform")
    return h


def _primitive(sig: ScalarSignal, times):
    if sig.has_closed_form:
        F = np.asarray(sig.antiderivative(times), dtype=float)
        return F - F[0]
    F, _ = cumulative_integral(sig.eval, times, sig.breakpoints(times[0], times[-1]))
    return F


def _as_matrix(ev, ci):
    ev = np.asarray(ev, dtype=float)
    if ev.ndim == 1:
        ev = ev[:, None]
    if ci is None:
        ci = np.zeros_like(ev)
    else:
        ci = np.asarray(ci, dtype=float)
        ci = np.broadcast_to(ci[:, None] if ci.ndim == 1 else ci, ev.shape)
    return ev, ci


def _stencil_excess(times, ev, ci, rate_int, forcing=None, tol=1e-9):
    """Per-point excess of the integrated central-stencil check, worst regime.

    ``rate_int[k]`` is the integral of the rate over [t_{k-1}, t_{k+1}];
    ``forcing[k]`` an additive bound from the affine term. Index 0 and T-1
    are NaN (no stencil).
    """
    T = times.size
    out = np.full(T, np.nan)
    growth = np.exp(rate_int)[:, None]
    bound = ev[:-2] * growth
    if forcing is not None:
        bound = bound + forcing[:, None]
    slack = 2.0 * ci[2:] + 2.0 * ci[:-2] * growth
    scale = np.maximum(np.abs(bound), np.abs(ev[2:]))
    ex = ev[2:] - bound - slack - tol * scale
    out[1:-1] = ex.max(axis=1)
    return out


def _lookback_premise(times, ev, q, tau):
    """min_j EV(t+theta, j) <= q max_i EV(t, i) for every grid theta in [-tau, 0]."""
    h = _uniform_step(times)
    w = int(round(tau / h)) if tau > 0 else 0
    if tau > 0 and times[-1] - times[0] < tau:
        raise ValueError("grid lookback shorter than the delay bound")
    lo = ev.min(axis=1)
    hi = ev.max(axis=1)
    T = times.size
    prem = np.zeros(T, dtype=bool)
    if w == 0:
        prem[:] = lo <= q * hi
        return prem
    from .usf import _window_max
    win = _window_max(lo, w)   # max of lo over [k - w, k] stored at index k - w
    prem[w:] = win <= q * hi[w:] * (1 + 1e-12) + 1e-300
    return prem


def _linear_gain(varpi):
    if callable(varpi):
        return varpi
    w = float(varpi)
    return lambda s: w * np.asarray(s, dtype=float)


def _input_values(u, times):
    if u is None:
        return np.zeros_like(times)
    return np.abs(np.asarray(as_signal(u).eval(times), dtype=float))


# --- monitors -------------------------------------------------------------------

def razumikhin_monitor(times, ev, mu: ScalarSignal, q, tau, u=None, varpi=0.0, ci=None,
                       budget=DEFAULT_BUDGET, tol=1e-9, rho=None, T=None) -> MonitorReport:
    """Razumikhin-premise monitor on expectation curves.

    ``ev`` is E V(t, x(t), i) with shape (T,) or (T, N) (one column per regime),
    ``ci`` the matching CI half-widths. Where the premise holds -- the smallest
    regime value at every lookback theta in [-tau, 0] stays below q times the
    largest current value, and (with input) max_i E V >= varpi(|u(t)|) -- the
    integrated stencil check of d/dt E V <= mu E V is applied.
    With ``rho`` and ``T`` given, the gain condition q >= exp(phi(T))/rho is
    checked and recorded.
    """
    times = np.asarray(times, dtype=float)
    ev, ci = _as_matrix(ev, ci)
    h = _uniform_step(times)
    prem = _lookback_premise(times, ev, q, tau)
    if u is not None:
        gain = _linear_gain(varpi)
        prem &= ev.max(axis=1) >= gain(_input_values(u, times))
    prem[0] = prem[-1] = False
    F = _primitive(as_signal(mu), times)
    excess = _stencil_excess(times, ev, ci, F[2:] - F[:-2], tol=tol)
    gain_ok = None
    if rho is not None and T is not None:
        gain_ok = check_gain_condition(RazumikhinGainParams(q, rho, T), mu,
                                       horizon=max(times[-1], T))
    return MonitorReport(times, prem, np.where(prem, excess, np.nan), budget, tol, gain_ok,
                         {"monitor": "razumikhin", "q": q, "tau": tau, "grid_step": h})


def krasovskii_functional(times, moment, c, w, tau):
    """E V(t) = c m(t) + int_{-tau}^0 w(s) m(t+s) ds by the trapezoid rule.

    ``w`` is a constant or a callable of s in [-tau, 0]. Points without a full
    lookback window are NaN.
    """
    times = np.asarray(times, dtype=float)
    m = np.asarray(moment, dtype=float)
    h = _uniform_step(times)
    n = int(round(tau / h)) if tau > 0 else 0
    out = np.full(m.shape, np.nan)
    if n == 0:
        return c * m
    s = -h * np.arange(n, -1, -1)       # -tau .. 0
    wv = np.asarray(w(s), dtype=float) if callable(w) else np.full(n + 1, float(w))
    if np.any(wv < 0):
        raise ValueError("Krasovskii weight must be nonnegative")
    tw = wv * h
    tw[0] *= 0.5
    tw[-1] *= 0.5
    from numpy.lib.stride_tricks import sliding_window_view
    win = sliding_window_view(m, n + 1)
    out[n:] = c * m[n:] + win @ tw
    return out


def krasovskii_monitor(times, moment, c, w, tau, mu: ScalarSignal, u=None, variant="guas",
                       varpi=0.0, varpi1=0.0, varpi2=0.0, ci=None, budget=DEFAULT_BUDGET,
                       tol=1e-9) -> MonitorReport:
    """Functional monitor for V(t, phi) = c phi(0)^2 + int w(s) phi(s)^2 ds.

    variant "guas": d/dt E V <= mu E V everywhere;
    "iss": the same, only where E V >= varpi(|u|);
    "iiss": d/dt E V <= (varpi1(|u|) + mu) E V + varpi2(|u|) everywhere.
    ``ci`` holds CI half-widths of ``moment``; they are carried through the
    functional with the same weights.
    """
    if variant not in ("guas", "iss", "iiss"):
        raise ValueError(f"unknown variant {variant!r}")
    if c <= 0:
        raise ValueError("c must be positive")
    times = np.asarray(times, dtype=float)
    h = _uniform_step(times)
    if tau > 0 and times[-1] - times[0] < tau:
        raise ValueError("grid lookback shorter than the delay bound")
    ev = krasovskii_functional(times, moment, c, w, tau)
    evci = None if ci is None else krasovskii_functional(times, ci, c, w, tau)
    evm, cim = _as_matrix(np.nan_to_num(ev, nan=0.0), None if evci is None else np.nan_to_num(evci))
    prem = np.isfinite(ev)
    uv = _input_values(u, times)
    forcing = None
    mu_sig = as_signal(mu)
    if variant == "iiss":
        g1 = _linear_gain(varpi1)(uv)
        g2 = _linear_gain(varpi2)(uv)
        rate = _primitive(mu_sig, times) + np.concatenate([[0.0], np.cumsum(0.5 * h * (g1[1:] + g1[:-1]))])
        rate_int = rate[2:] - rate[:-2]
        # int_{t-h}^{t+h} exp(int_s^{t+h} a) varpi2 ds <= 2h max(varpi2) exp(max(0, int |a|))
        F_abs = _primitive(_AbsSignal(mu_sig), times) + np.concatenate(
            [[0.0], np.cumsum(0.5 * h * (g1[1:] + g1[:-1]))])
        g2max = np.maximum.reduce([g2[:-2], g2[1:-1], g2[2:]])
        forcing = 2 * h * g2max * np.exp(F_abs[2:] - F_abs[:-2])
    else:
        F = _primitive(mu_sig, times)
        rate_int = F[2:] - F[:-2]
        if variant == "iss":
            prem &= ev >= _linear_gain(varpi)(uv)
    excess = _stencil_excess(times, evm, cim, rate_int, forcing, tol)
    # the stencil needs a full window at t_{k-1}
    valid = np.zeros_like(prem)
    valid[1:-1] = prem[:-2] & prem[1:-1] & prem[2:]
    return MonitorReport(times, valid, np.where(valid, excess, np.nan), budget, tol, None,
                         {"monitor": "krasovskii", "variant": variant, "tau": tau, "grid_step": h})


class _AbsSignal(ScalarSignal):
    """|sig| with numeric integration (used only for forcing envelopes)."""

    def __init__(self, sig):
        self.sig = sig
        self.period = sig.period

    def _eval(self, t):
        return np.abs(self.sig.eval(t))

    @property
    def has_closed_form(self):
        return False

    def breakpoints(self, a, b):
        return self.sig.breakpoints(a, b)

    def quad_pieces(self, a, b):
        return self.sig.quad_pieces(a, b)


# --- benchmark examples ---------------------------------------------------------------

def lv_bound_example1(q, t, x, y, c=0.9, e=2.0, period=1.0):
    """-x^2 + |b(t)| y^2, the operator bound for V = x^2 in the square-wave example.

    ``q`` does not enter the bound itself; see :func:`example1_rate_value`.
    """
    del q
    b = SquareWave(0.0, float(e), float(c), float(period)).eval(t)
    return -np.asarray(x, dtype=float) ** 2 + np.abs(b) * np.asarray(y, dtype=float) ** 2


def example1_rate_value(q, t, c=0.9, e=2.0, period=1.0):
    """mu(t) = -1 + q |b(t)|: the rate once y^2 <= q x^2."""
    return -1.0 + q * np.abs(SquareWave(0.0, float(e), float(c), float(period)).eval(t))


def double_factorial_ratio(k):
    """(2k-1)!!/(2k)!! = prod_{j=1..k} (2j-1)/(2j), computed in log space."""
    if k < 1:
        raise ValueError("k must be positive")
    j = np.arange(1, int(k) + 1, dtype=float)
    return float(np.exp(np.sum(np.log1p(-0.5 / j))))


def example2_k_rhs(lam, l, rule="printed"):
    """Right-hand side of the k condition.

    "printed": (2 lambda pi - 1) / (2 lambda l e^{2 lambda pi});
    "window":  (2 lambda pi - 1) / (2 pi l e^{2 lambda pi}), the version under
    which the mean of mu over a 2 pi window is negative (see README).
    """
    if not lam > 1.0 / (2.0 * math.pi):
        raise ValueError("need lambda > 1/(2 pi)")
    if not l > 0:
        raise ValueError("need l > 0")
    num = 2.0 * lam * math.pi - 1.0
    # work in logs: exp(2 lambda pi) overflows for lambda > ~113
    log_den = math.log(2.0) + math.log(lam if rule == "printed" else math.pi) + math.log(l) \
        + 2.0 * lam * math.pi
    if rule not in ("printed", "window"):
        raise ValueError(f"unknown rule {rule!r}")
    return math.log(num) - log_den


def example2_k_condition(lam, l, rule="printed", k_max=1_000_000):
    """Least k with (2k-1)!!/(2k)!! < rhs, or None when k_max is exceeded."""
    log_rhs = example2_k_rhs(lam, l, rule)
    log_ratio = 0.0
    for k in range(1, k_max + 1):
        log_ratio += math.log1p(-0.5 / k)
        if log_ratio < log_rhs:
            return k
    return None


@dataclass(frozen=True)
class RestrictiveReport:
    horizons: tuple
    positive_mass: tuple
    mu_min: float
    rate_floor: float

    @property
    def mass_finite_signature(self):
        """True when the positive mass stops growing over the horizons scanned."""
        m = np.asarray(self.positive_mass)
        return bool(np.all(np.diff(m) <= 1e-9 * np.maximum(1.0, m[1:])))

    @property
    def strictly_increasing(self):
        return bool(np.all(np.diff(self.positive_mass) > 0))

    @property
    def floor_condition(self):
        """mu(t) >= -ln(q)/tau over the scan."""
        return self.mu_min >= self.rate_floor

    def to_dict(self):
        d = dataclasses.asdict(self)
        d.update(strictly_increasing=self.strictly_increasing,
                 mass_finite_signature=self.mass_finite_signature,
                 floor_condition=self.floor_condition)
        return d


def restrictive_diagnostics(mu: ScalarSignal, q_prior, tau, horizons, scan_step=1e-3,
                            abs_tol=1e-8) -> RestrictiveReport:
    """Earlier-work sufficient conditions evaluated on ``mu``.

    Reports the positive mass int_0^T max(mu, 0) for each horizon (computed
    incrementally, so it is nondecreasing by construction) and the minimum of
    mu over [0, max T] against -ln(q_prior)/tau.
    """
    horizons = [float(h) for h in horizons]
    if any(b <= a for a, b in zip(horizons, horizons[1:])) or horizons[0] <= 0:
        raise ValueError("horizons must be positive and increasing")
    mu = as_signal(mu)
    mass = []
    total = 0.0
    prev = 0.0
    for h in horizons:
        total += positive_part_integral(mu, prev, h, abs_tol=abs_tol)
        mass.append(total)
        prev = h
    grid = np.arange(0.0, horizons[-1] + scan_step / 2, scan_step)
    vals = np.asarray(mu.eval(grid), dtype=float)
    bps = mu.breakpoints(0.0, horizons[-1])
    if bps:
        vals = np.concatenate([vals, np.asarray(mu.eval(np.asarray(bps)), dtype=float)])
    if tau <= 0 or q_prior <= 1:
        raise ValueError("need tau > 0 and q_prior > 1")
    return RestrictiveReport(tuple(horizons), tuple(mass), float(vals.min()),
                             -math.log(q_prior) / tau)
