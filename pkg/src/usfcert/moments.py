"""Monte Carlo ensembles: p-th moment estimates, exponential decay fits, ISS gain probes."""

from __future__ import annotations

import dataclasses
import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .sdde import SddeModel, SimConfig, simulate_batch
from .signals import Constant

Z95 = 1.959963984540054
KURTOSIS_FLAG = 20.0
NAN_BUDGET = 0.01


@dataclass(frozen=True, eq=False)
class MomentEstimate:
    times: np.ndarray
    p: float
    mean: np.ndarray
    ci_half: np.ndarray
    N: int
    n_nan: int = 0
    unreliable: bool = False
    heavy_tails: bool = False
    samples: np.ndarray | None = None   # (T, N) values of |x|^p, NaN for truncated paths

    def write_csv(self, path):
        with open(path, "w") as fh:
            fh.write("t,moment,ci_half,N,p\n")
            for t, m, c in zip(self.times, self.mean, self.ci_half):
                fh.write(f"{float(t)!r},{float(m)!r},{float(c)!r},{self.N},{float(self.p)!r}\n")

    def at(self, t):
        """Index of the grid point nearest ``t``."""
        return int(np.argmin(np.abs(self.times - t)))


def summarize(times, samples, p, keep_samples=True) -> MomentEstimate:
    """Mean and normal-approximation 95% CI of a (T, N) sample matrix."""
    samples = np.asarray(samples, dtype=float)
    T, N = samples.shape
    if N < 2:
        raise ValueError("need at least two trajectories")
    bad = ~np.all(np.isfinite(samples), axis=0)
    good = samples[:, ~bad]
    n_good = good.shape[1]
    if n_good >= 2:
        mean = good.mean(axis=1)
        ci = Z95 * good.std(axis=1, ddof=1) / math.sqrt(n_good)
        with np.errstate(invalid="ignore", divide="ignore"), warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            kurt = stats.kurtosis(good, axis=1, fisher=False, bias=False)
        heavy = bool(np.any(np.nan_to_num(kurt, nan=0.0) > KURTOSIS_FLAG))
    else:
        mean = np.full(T, np.nan)
        ci = np.full(T, np.nan)
        heavy = False
    n_nan = int(bad.sum())
    return MomentEstimate(np.asarray(times, dtype=float), float(p), mean, ci, N, n_nan,
                          n_nan > NAN_BUDGET * N, heavy, samples if keep_samples else None)


def simulate_moments(model: SddeModel, cfg: SimConfig, N, p, threads=1, batch_size=1024,
                     index_offset=0):
    """Return (times, |x|^p matrix of shape (T, N)); column j is trajectory index_offset + j."""
    if N < 2:
        raise ValueError("need N >= 2")
    if not p > 0:
        raise ValueError("need p > 0")
    idx = np.arange(index_offset, index_offset + N)
    chunks = [idx[i:i + batch_size] for i in range(0, N, batch_size)]

    def run(chunk):
        res = simulate_batch(model, cfg, chunk)
        return res.times, np.linalg.norm(res.states, axis=2) ** p

    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, chunks))
    else:
        parts = [run(c) for c in chunks]
    # columns are assembled in trajectory order, so reductions do not depend on scheduling
    return parts[0][0], np.concatenate([pp[1] for pp in parts], axis=1)


def run_ensemble(model: SddeModel, cfg: SimConfig, N, p=2.0, threads=1, batch_size=1024,
                 keep_samples=True, index_offset=0) -> MomentEstimate:
    times, samples = simulate_moments(model, cfg, N, p, threads, batch_size, index_offset)
    return summarize(times, samples, p, keep_samples)


@dataclass(frozen=True)
class DecayFit:
    alpha: float
    beta: float
    window: tuple
    r2: float
    alpha_ci: tuple

    def to_json(self):
        return json.dumps(dataclasses.asdict(self))


def _slope(t, logm):
    A = np.column_stack([np.ones_like(t), t])
    coef, *_ = np.linalg.lstsq(A, logm, rcond=None)
    return coef


def fit_decay(est: MomentEstimate, window=None, n_boot=400, seed=0, level=0.95) -> DecayFit:
    """Least-squares line through log E|x|^p on ``window``; alpha = -slope.

    The alpha CI is a trajectory bootstrap when per-trajectory samples are kept,
    otherwise the OLS t-interval.
    """
    times = est.times
    if window is None:
        window = (float(times[0]), float(times[-1]))
    lo, hi = window
    if lo < times[0] - 1e-12 or hi > times[-1] + 1e-12 or not hi > lo:
        raise ValueError(f"window {window} outside the time grid")
    sel = (times >= lo - 1e-12) & (times <= hi + 1e-12)
    if sel.sum() < 2:
        raise ValueError("fit window holds fewer than two grid points")
    m = est.mean[sel]
    if not np.all(np.isfinite(m)) or np.any(m <= 0):
        raise ValueError("moment estimate must be positive on the fit window")
    t = times[sel] - times[0]
    y = np.log(m)
    b0, b1 = _slope(t, y)
    resid = y - (b0 + b1 * t)
    sst = float(np.sum((y - y.mean()) ** 2))
    r2 = 0.0 if sst <= 1e-300 * max(1, y.size) or np.ptp(y) < 1e-12 else 1.0 - float(np.sum(resid ** 2)) / sst
    r2 = min(max(r2, 0.0), 1.0)
    alpha = -float(b1)

    q = (1 - level) / 2
    if est.samples is not None:
        S = est.samples[sel]
        S = S[:, np.all(np.isfinite(S), axis=0)]
        gen = np.random.default_rng(seed)
        n = S.shape[1]
        boots = []
        for _ in range(n_boot):
            mb = S[:, gen.integers(0, n, n)].mean(axis=1)
            if np.all(mb > 0):
                boots.append(-_slope(t, np.log(mb))[1])
        boots = np.asarray(boots)
        ci = (float(np.quantile(boots, q)), float(np.quantile(boots, 1 - q))) if boots.size else (math.nan, math.nan)
    else:
        dof = t.size - 2
        if dof > 0:
            se = math.sqrt(float(np.sum(resid ** 2)) / dof / float(np.sum((t - t.mean()) ** 2)))
            half = stats.t.ppf(1 - q, dof) * se
        else:
            half = math.nan
        ci = (alpha - half, alpha + half)
    return DecayFit(alpha, float(math.exp(b0)), (float(lo), float(hi)), r2, ci)


def mann_kendall(x):
    """Mann-Kendall S statistic and its normal score (no ties correction)."""
    x = np.asarray(x, dtype=float)
    n = x.size
    s = 0.0
    for i in range(n - 1):
        s += np.sum(np.sign(x[i + 1:] - x[i]))
    var = n * (n - 1) * (2 * n + 5) / 18.0
    if var == 0:
        return s, 0.0
    z = (s - np.sign(s)) / math.sqrt(var) if s != 0 else 0.0
    return float(s), float(z)


@dataclass(frozen=True)
class IssRow:
    level: float
    steady: float
    ci_half: float
    settled: bool
    trend_z: float
    unreliable: bool


def steady_state(est: MomentEstimate, tail=0.2, n_blocks=10, z_crit=2.326):
    """Average over the final ``tail`` fraction of the horizon plus a trend check.

    Returns ``(mean, ci_half, settled, z)``. The window is cut into blocks; an
    upward Mann-Kendall trend across block means that also exceeds the CI
    marks the run as not settled, as do non-finite values.
    """
    t = est.times
    start = t[-1] - tail * (t[-1] - t[0])
    sel = t >= start - 1e-12
    if est.samples is not None:
        S = est.samples[sel]
        per_traj = S.mean(axis=0)
        finite = np.isfinite(per_traj)
        if finite.sum() >= 2:
            mean = float(per_traj[finite].mean())
            ci = Z95 * float(per_traj[finite].std(ddof=1)) / math.sqrt(finite.sum())
        else:
            mean, ci = math.nan, math.nan
    else:
        mean = float(np.mean(est.mean[sel]))
        ci = float(np.mean(est.ci_half[sel]))
    curve = est.mean[sel]
    if not np.all(np.isfinite(curve)) or not math.isfinite(mean) or est.unreliable:
        return mean, ci, False, math.inf
    blocks = np.array([b.mean() for b in np.array_split(curve, min(n_blocks, curve.size))])
    _, z = mann_kendall(blocks)
    rising = blocks[-1] - blocks[0] > max(ci, 1e-300)
    return mean, ci, not (z > z_crit and rising), z


def iss_gain_probe(model: SddeModel, cfg: SimConfig, levels, p=2.0, N=500, threads=1,
                   tail=0.2):
    """Steady-state p-th moment for each constant input magnitude."""
    rows = []
    for level in levels:
        c = dataclasses.replace(cfg, input=Constant(float(level)))
        est = run_ensemble(model, c, N, p, threads=threads)
        mean, ci, settled, z = steady_state(est, tail)
        rows.append(IssRow(float(level), mean, ci, settled, z, est.unreliable))
    return rows


def table_nondecreasing(rows):
    """Steady moments nondecreasing in the level up to CI overlap."""
    rows = sorted(rows, key=lambda r: r.level)
    return all(b.steady + b.ci_half >= a.steady - a.ci_half for a, b in zip(rows, rows[1:]))
