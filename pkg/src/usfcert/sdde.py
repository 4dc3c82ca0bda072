"""Euler-Maruyama simulation of switching stochastic delay differential equations.

    dx = f(t, x(t), x(t - d(t, r)), r(t), u(t)) dt + g(...) dw(t)

Trajectories are simulated in batches with numpy; each trajectory owns a
Brownian stream and a regime stream keyed by (master_seed, index), so results
are bit-identical whatever the batch size or worker count. Steps are split at
regime jump times so every sub-step sees a single regime.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import rng as rngmod
from .markov import RegimePath, sample_path, validate_generator, GeneratorError
from .signals import ScalarSignal, SquareWave


@dataclass(frozen=True, eq=False)
class SddeModel:
    """Vectorised model. ``drift(t, x, y, r, u)`` returns (B, n) and
    ``diffusion(t, x, y, r, u)`` returns (B, n, m); t, r, u have shape (B,),
    x and y have shape (B, n)."""

    n: int
    m: int
    tau: float
    drift: Callable
    diffusion: Callable
    gamma: np.ndarray = field(default_factory=lambda: np.zeros((1, 1)))
    delay_fn: Callable | None = None
    builtin: str | None = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "gamma", np.atleast_2d(np.asarray(self.gamma, dtype=float)))
        problems = validate_generator(self.gamma)
        if problems:
            raise GeneratorError(problems)
        if self.tau < 0:
            raise ValueError("delay bound must be nonnegative")

    @property
    def n_regimes(self):
        return self.gamma.shape[0]

    def delay(self, t, r):
        if self.delay_fn is None:
            return np.full(np.shape(t), self.tau)
        d = np.asarray(self.delay_fn(t, r), dtype=float)
        if np.any(d < 0) or np.any(d > self.tau + 1e-12):
            raise ValueError("delay function left [0, tau]")
        return d

    def check_trivial(self, times, atol=0.0):
        """True when drift and diffusion vanish at zero state and input."""
        times = np.asarray(times, dtype=float)
        B = times.size
        zero = np.zeros((B, self.n))
        for i in range(self.n_regimes):
            r = np.full(B, i)
            u = np.zeros(B)
            if np.max(np.abs(self.drift(times, zero, zero, r, u))) > atol:
                return False
            if np.max(np.abs(self.diffusion(times, zero, zero, r, u))) > atol:
                return False
        return True


@dataclass(frozen=True, eq=False)
class SimConfig:
    dt: float
    t_span: tuple
    history: object = 1.0
    input: ScalarSignal | None = None
    master_seed: int = 0
    initial_regime: int = 0
    record_every: int = 1

    def validate(self, model: SddeModel):
        t0, t1 = self.t_span
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not t1 > t0:
            raise ValueError("t_span must be increasing")
        if model.tau > 0 and self.dt > model.tau / 10 + 1e-15:
            raise ValueError(f"dt={self.dt} too coarse for delay {model.tau}: need dt <= tau/10")
        if not 0 <= self.initial_regime < model.n_regimes:
            raise ValueError("initial regime out of range")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")

    @property
    def n_steps(self):
        t0, t1 = self.t_span
        return int(round((t1 - t0) / self.dt))


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    regimes: np.ndarray
    max_abs: float
    nan_flag: bool
    truncation_time: float | None
    n_substeps: int

    def write_csv(self, path):
        header = "t," + ",".join(f"x{i + 1}" for i in range(self.states.shape[1])) + ",regime"
        with open(path, "w") as fh:
            fh.write(header + "\n")
            for t, x, r in zip(self.times, self.states, self.regimes):
                fh.write(",".join([repr(float(t))] + [repr(float(v)) for v in x]
                                  + [str(int(r) + 1)]) + "\n")


@dataclass
class BatchResult:
    times: np.ndarray
    states: np.ndarray      # (T, B, n)
    regimes: np.ndarray     # (T, B)
    nan_flag: np.ndarray    # (B,)
    truncation_time: np.ndarray
    n_substeps: np.ndarray
    n_jumps: np.ndarray


def _history_fn(history, n):
    if callable(history):
        def h(theta):
            v = np.asarray(history(theta), dtype=float)
            return np.broadcast_to(v.reshape(v.shape + (1,)) if v.ndim == np.ndim(theta) else v,
                                   np.shape(theta) + (n,))
        return h
    const = np.broadcast_to(np.asarray(history, dtype=float), (n,))
    return lambda theta: np.broadcast_to(const, np.shape(theta) + (n,))


def simulate_batch(model: SddeModel, cfg: SimConfig, indices, regime_paths=None) -> BatchResult:
    """Simulate the trajectories with the given global indices."""
    cfg.validate(model)
    indices = np.asarray(indices, dtype=np.int64)
    B = indices.size
    n, m = model.n, model.m
    t0, t1 = cfg.t_span
    K = cfg.n_steps
    dt = cfg.dt
    grid = t0 + dt * np.arange(K + 1)
    hist_fn = _history_fn(cfg.history, n)
    u_sig = cfg.input

    if regime_paths is None:
        regime_paths = [
            sample_path(model.gamma, t0, t1 + dt, cfg.initial_regime,
                        rngmod.stream(cfg.master_seed, i, rngmod.REGIME))
            for i in indices
        ]
    jumps = [p.jump_times[1:] for p in regime_paths]
    nxt_states = [p.states[1:] for p in regime_paths]
    max_j = max((j.size for j in jumps), default=0)
    J = np.full((B, max_j + 1), np.inf)
    S = np.zeros((B, max_j + 1), dtype=np.intp)
    for b in range(B):
        J[b, :jumps[b].size] = jumps[b]
        S[b, :jumps[b].size] = nxt_states[b]
    jptr = np.zeros(B, dtype=np.intp)
    regime = np.array([p.states[0] for p in regime_paths], dtype=np.intp)

    # sub-steps = grid steps + jumps landing strictly inside a cell
    inside = [int(np.count_nonzero((j < grid[-1]) & ~np.isin(j, grid))) for j in jumps]
    n_draw = K + np.array(inside, dtype=np.int64)
    Z = np.zeros((B, int(n_draw.max()) if B else 0, m))
    for b, i in enumerate(indices):
        g = rngmod.stream(cfg.master_seed, int(i), rngmod.BROWNIAN)
        Z[b, :n_draw[b]] = g.standard_normal((int(n_draw[b]), m))
    zptr = np.zeros(B, dtype=np.int64)

    L = int(math.ceil(model.tau / dt)) + 3
    ring = np.zeros((L, B, n))
    x = np.array(hist_fn(np.zeros(B)), dtype=float).reshape(B, n)
    ring[0] = x

    rec_idx = np.arange(0, K + 1, cfg.record_every)
    out_states = np.empty((rec_idx.size, B, n))
    out_reg = np.empty((rec_idx.size, B), dtype=np.intp)
    out_states[0] = x
    out_reg[0] = regime
    rec_pos = 1
    nan_flag = np.zeros(B, dtype=bool)
    trunc = np.full(B, np.nan)

    def delayed(idx, tcur, xcur, k):
        s = tcur - model.delay(tcur, regime[idx])
        res = np.empty((idx.size, n))
        before = s <= t0
        if np.any(before):
            res[before] = hist_fn(s[before] - t0)
        rest = ~before
        if np.any(rest):
            pos = (s[rest] - t0) / dt
            j = np.minimum(np.floor(pos).astype(np.int64), k)
            cols = idx[rest]
            left = ring[j % L, cols]
            # right neighbour is a stored grid point, or the live state past t_k
            stored = j + 1 <= k
            right = np.where(stored[:, None], ring[(j + 1) % L, cols], xcur[rest])
            span = np.where(stored, dt, tcur[rest] - (t0 + j * dt))
            w = np.where(span[:, None] > 0, (pos - j)[:, None] * dt / np.where(span > 0, span, 1.0)[:, None], 0.0)
            res[rest] = left + np.clip(w, 0.0, 1.0) * (right - left)
        return res

    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(K):
            t_next = grid[k + 1]
            tcur = np.full(B, grid[k])
            idx = np.arange(B)
            while idx.size:
                nj = J[idx, jptr[idx]]
                end = np.minimum(nj, t_next)
                h = end - tcur[idx]
                xs = x[idx]
                ts = tcur[idx]
                rs = regime[idx]
                us = np.zeros(idx.size) if u_sig is None else np.full(idx.size, float(u_sig.eval(ts[0]))) \
                    if np.all(ts == ts[0]) else np.asarray(u_sig.eval(ts), dtype=float)
                ys = delayed(idx, ts, xs, k)
                f = model.drift(ts, xs, ys, rs, us)
                G = model.diffusion(ts, xs, ys, rs, us)
                z = Z[idx, zptr[idx]]
                zptr[idx] += 1
                x[idx] = xs + f * h[:, None] + np.einsum("bij,bj->bi", G, z) * np.sqrt(h)[:, None]
                tcur[idx] = end
                hit = end >= nj
                if np.any(hit):
                    hb = idx[hit]
                    regime[hb] = S[hb, jptr[hb]]
                    jptr[hb] += 1
                idx = idx[tcur[idx] < t_next]
            bad = ~np.all(np.isfinite(x), axis=1) & ~nan_flag
            if np.any(bad):
                nan_flag |= bad
                trunc[bad] = t_next
                x[bad] = np.nan
            ring[(k + 1) % L] = x
            if rec_pos < rec_idx.size and rec_idx[rec_pos] == k + 1:
                out_states[rec_pos] = x
                out_reg[rec_pos] = regime
                rec_pos += 1

    return BatchResult(grid[rec_idx], out_states, out_reg, nan_flag, trunc, zptr.copy(),
                       np.array([j.size for j in jumps]))


def simulate(model: SddeModel, cfg: SimConfig, regime_path: RegimePath | None = None,
             index: int = 0) -> Trajectory:
    """Single trajectory; ``index`` selects the stream under ``cfg.master_seed``."""
    res = simulate_batch(model, cfg, [index], None if regime_path is None else [regime_path])
    states = res.states[:, 0, :]
    finite = states[np.all(np.isfinite(states), axis=1)]
    return Trajectory(res.times, states, res.regimes[:, 0],
                      float(np.max(np.abs(finite))) if finite.size else math.nan,
                      bool(res.nan_flag[0]),
                      None if not res.nan_flag[0] else float(res.truncation_time[0]),
                      int(res.n_substeps[0]))


# --- built-in models --------------------------------------------------------------

def linear_model(a, b, a_delay=0.0, b_delay=0.0, gamma=((0.0,),), tau=0.0, delay_fn=None,
                 input_gain=0.0):
    """Scalar per-regime linear model dx = (a x + a_d y + k u) dt + (b x + b_d y) dw."""
    gamma = np.atleast_2d(np.asarray(gamma, dtype=float))
    N = gamma.shape[0]
    a, b, ad, bd, ku = (np.broadcast_to(np.asarray(v, dtype=float), (N,)).copy()
                        for v in (a, b, a_delay, b_delay, input_gain))

    def drift(t, x, y, r, u):
        return a[r][:, None] * x + ad[r][:, None] * y + (ku[r] * u)[:, None]

    def diffusion(t, x, y, r, u):
        return (b[r][:, None] * x + bd[r][:, None] * y)[:, :, None]

    return SddeModel(1, 1, float(tau), drift, diffusion, gamma, delay_fn, "linear",
                     {"a": a.tolist(), "b": b.tolist(), "a_delay": ad.tolist(),
                      "b_delay": bd.tolist(), "input_gain": ku.tolist()})


EXAMPLE1_GENERATOR = np.array([[-1.0, 1.0], [2.0, -2.0]])
EXAMPLE2_GENERATOR = np.array([[-1.0, 1.0], [1.0, -1.0]])


def builtin_example1(c, e, tau, d_fn=None, period=1.0):
    """Two-regime scalar system with square-wave noise gain b(t) (0 then e)."""
    if not 0 < c < 1 or e < 0 or tau < 0:
        raise ValueError("need c in (0,1), e >= 0, tau >= 0")
    b_sig = SquareWave(0.0, float(e), float(c), float(period))

    def drift(t, x, y, r, u):
        # fourth root of |x| times cube root of x == sign(x) |x|^(7/12)
        frac = np.abs(np.sin(t))[:, None] * np.sign(x) * np.abs(x) ** (7.0 / 12.0)
        return -0.5 * x - np.where((r == 0)[:, None], frac, 0.0)

    def diffusion(t, x, y, r, u):
        amp = np.sqrt(np.abs(b_sig.eval(t)))
        trig = np.where(r == 0, -np.cos(t), np.sin(t))
        return ((amp * trig)[:, None] * y)[:, :, None]

    return SddeModel(1, 1, float(tau), drift, diffusion, EXAMPLE1_GENERATOR, d_fn, "example1",
                     {"c": c, "e": e, "tau": tau, "period": period})


def builtin_example2(lam, l, k, tau, d_fn=None):
    """Two-regime scalar system with input channel and t cos t^2 coefficients."""
    if not lam > 1.0 / (2.0 * math.pi) or not l > 0 or int(k) != k or k < 1:
        raise ValueError("need lambda > 1/(2 pi), l > 0 and a positive integer k")
    k = int(k)
    a1 = math.sqrt(l / 2.0)
    a2 = math.sqrt(2.0 * l) / 2.0

    def drift(t, x, y, r, u):
        osc = (t * np.cos(t * t))[:, None]
        uu = u[:, None]
        f1 = -0.5 * lam * x - 0.5 * x ** 3 + osc * uu / (1.0 + x * x)
        f2 = 0.25 * (osc - lam) * x + osc * uu / (2.0 * (1.0 + x * x))
        return np.where((r == 0)[:, None], f1, f2)

    def diffusion(t, x, y, r, u):
        sk = (np.sin(t) ** k)[:, None]
        g1 = x * x - a1 * sk * y
        g2 = a2 * sk * y
        return np.where((r == 0)[:, None], g1, g2)[:, :, None]

    return SddeModel(1, 1, float(tau), drift, diffusion, EXAMPLE2_GENERATOR, d_fn, "example2",
                     {"lambda": lam, "l": l, "k": k, "tau": tau})
