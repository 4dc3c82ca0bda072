"""Scalar time signals: rate functions, gains and input magnitudes.

Every signal is an immutable object that evaluates on numpy arrays. Families
with a known antiderivative integrate in closed form; anything else falls
back to adaptive Gauss-Kronrod quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .quadrature import adaptive_gk

DEFAULT_ABS_TOL = 1e-10


class SignalDomainError(ValueError):
    """Query outside the domain on which a signal is defined."""


class ScalarSignal:
    """Base class. Subclasses implement ``_eval`` and optionally ``_antiderivative``."""

    #: smallest positive period, or None for aperiodic signals; Constant uses 0.0
    period: float | None = None

    def __call__(self, t):
        return self.eval(t)

    def eval(self, t):
        arr = np.asarray(t, dtype=float)
        out = self._eval(arr)
        return float(out) if np.ndim(out) == 0 else out

    def _eval(self, t):
        raise NotImplementedError

    @property
    def has_closed_form(self) -> bool:
        return False

    def antiderivative(self, t):
        """Primitive F with F(0) = 0; only for closed-form families."""
        if not self.has_closed_form:
            raise NotImplementedError(f"{type(self).__name__} has no closed-form primitive")
        arr = np.asarray(t, dtype=float)
        out = self._antiderivative(arr)
        return float(out) if np.ndim(out) == 0 else out

    def _antiderivative(self, t):
        raise NotImplementedError

    def breakpoints(self, a, b):
        """Discontinuities of the signal inside (a, b)."""
        return []

    def quad_pieces(self, a, b):
        """Initial partition count hint for quadrature over [a, b]."""
        return max(1, int(math.ceil((b - a) / 1.0)))

    def piecewise_constant(self):
        """``(period, cut points in [0, period), values)`` or None."""
        return None

    def to_dict(self) -> dict:
        raise NotImplementedError

    def __add__(self, other):
        return AffineSum(((1.0, self), (1.0, as_signal(other))))

    def __radd__(self, other):
        return AffineSum(((1.0, as_signal(other)), (1.0, self)))

    def __sub__(self, other):
        return AffineSum(((1.0, self), (-1.0, as_signal(other))))

    def __mul__(self, coef):
        return AffineSum(((float(coef), self),))

    __rmul__ = __mul__

    def __neg__(self):
        return AffineSum(((-1.0, self),))


def as_signal(x) -> ScalarSignal:
    if isinstance(x, ScalarSignal):
        return x
    return Constant(float(x))


@dataclass(frozen=True, eq=True)
class Constant(ScalarSignal):
    value: float

    period = 0.0

    def _eval(self, t):
        return np.full(np.shape(t), self.value) if np.ndim(t) else np.float64(self.value)

    @property
    def has_closed_form(self):
        return True

    def _antiderivative(self, t):
        return self.value * t

    def piecewise_constant(self):
        return 0.0, np.array([0.0]), np.array([self.value])

    def to_dict(self):
        return {"family": "constant", "value": self.value}


@dataclass(frozen=True, eq=True)
class SquareWave(ScalarSignal):
    """``low`` on [jw, jw + cw), ``high`` on [jw + cw, (j+1)w); right-continuous."""

    low: float
    high: float
    duty: float
    period_len: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.duty < 1.0:
            raise ValueError(f"duty point must lie in (0, 1), got {self.duty}")
        if not self.period_len > 0.0:
            raise ValueError(f"period must be positive, got {self.period_len}")

    @property
    def period(self):
        return self.period_len

    def _phase(self, t):
        j = np.floor(t / self.period_len)
        return j, t - j * self.period_len

    def _eval(self, t):
        _, r = self._phase(t)
        return np.where(r < self.duty * self.period_len, self.low, self.high)

    @property
    def has_closed_form(self):
        return True

    def _antiderivative(self, t):
        w, c = self.period_len, self.duty
        j, r = self._phase(t)
        per_period = w * (c * self.low + (1.0 - c) * self.high)
        return (j * per_period + self.low * np.minimum(r, c * w)
                + self.high * np.maximum(r - c * w, 0.0))

    def breakpoints(self, a, b):
        w, c = self.period_len, self.duty
        j0 = math.floor(a / w) - 1
        j1 = math.ceil(b / w) + 1
        pts = []
        for j in range(j0, j1 + 1):
            for p in (j * w, (j + c) * w):
                if a < p < b:
                    pts.append(p)
        return sorted(pts)

    def piecewise_constant(self):
        w = self.period_len
        return w, np.array([0.0, self.duty * w]), np.array([self.low, self.high])

    def to_dict(self):
        return {"family": "square_wave", "low": self.low, "high": self.high,
                "duty": self.duty, "period": self.period_len}


@dataclass(frozen=True, eq=True)
class TCosTSquared(ScalarSignal):
    """t * cos(t^2); primitive sin(t^2) / 2."""

    def _eval(self, t):
        return t * np.cos(t * t)

    @property
    def has_closed_form(self):
        return True

    def _antiderivative(self, t):
        return 0.5 * np.sin(t * t)

    def quad_pieces(self, a, b):
        # local angular frequency is about 2|t|; aim for ~one oscillation per piece
        tmax = max(abs(a), abs(b), 1.0)
        return max(1, int(math.ceil((b - a) * tmax / math.pi)))

    def to_dict(self):
        return {"family": "t_cos_t_squared"}


@dataclass(frozen=True, eq=True)
class SinPower(ScalarSignal):
    """scale * sin(t)^(2k)."""

    k: int
    scale: float = 1.0

    period = math.pi

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise ValueError(f"k must be a positive integer, got {self.k}")

    def _eval(self, t):
        return self.scale * np.sin(t) ** (2 * int(self.k))

    @property
    def has_closed_form(self):
        return True

    def _antiderivative(self, t):
        # I_{2j} = -sin^{2j-1} cos / (2j) + (2j-1)/(2j) I_{2j-2},  I_0 = t
        s = np.sin(t)
        c = np.cos(t)
        acc = np.array(t, dtype=float, copy=True)
        s_pow = s  # sin^{2j-1}
        s2 = s * s
        for j in range(1, int(self.k) + 1):
            acc = -s_pow * c / (2 * j) + (2 * j - 1) / (2 * j) * acc
            s_pow = s_pow * s2
        return self.scale * acc

    def quad_pieces(self, a, b):
        # sharp peaks for large k: resolve every half period
        return max(1, int(math.ceil((b - a) / (math.pi / 4))))

    def to_dict(self):
        return {"family": "sin_power", "k": int(self.k), "scale": self.scale}


@dataclass(frozen=True, eq=False)
class Sampled(ScalarSignal):
    """Piecewise-linear interpolation of samples on a strictly increasing grid."""

    times: np.ndarray
    values: np.ndarray
    _cum: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.ndim != 1 or t.shape != v.shape or t.size < 2:
            raise ValueError("times and values must be 1-D arrays of equal length >= 2")
        if np.any(np.diff(t) <= 0):
            raise ValueError("sample grid must be strictly increasing")
        if not np.all(np.isfinite(v)):
            raise ValueError("sample values must be finite")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)
        cum = np.concatenate([[0.0], np.cumsum(0.5 * np.diff(t) * (v[1:] + v[:-1]))])
        object.__setattr__(self, "_cum", cum)

    def _check(self, t):
        if np.any(t < self.times[0]) or np.any(t > self.times[-1]):
            raise SignalDomainError(
                f"query outside sampled span [{self.times[0]}, {self.times[-1]}]")

    def _eval(self, t):
        self._check(t)
        return np.interp(t, self.times, self.values)

    @property
    def has_closed_form(self):
        return True

    def _antiderivative(self, t):
        # primitive anchored at times[0]; differences are all that matter
        self._check(t)
        idx = np.clip(np.searchsorted(self.times, t, side="right") - 1, 0, self.times.size - 2)
        t0 = self.times[idx]
        v0 = self.values[idx]
        slope = (self.values[idx + 1] - v0) / (self.times[idx + 1] - t0)
        h = t - t0
        return self._cum[idx] + v0 * h + 0.5 * slope * h * h

    def quad_pieces(self, a, b):
        return 1

    def breakpoints(self, a, b):
        return [p for p in self.times if a < p < b]

    def __eq__(self, other):
        return (isinstance(other, Sampled) and np.array_equal(self.times, other.times)
                and np.array_equal(self.values, other.values))

    def __hash__(self):
        return hash((self.times.tobytes(), self.values.tobytes()))

    def to_dict(self):
        return {"family": "sampled", "times": self.times.tolist(), "values": self.values.tolist()}


def _common_period(periods):
    nonzero = [p for p in periods if p != 0.0]
    if any(p is None for p in periods):
        return None
    if not nonzero:
        return 0.0
    big = max(nonzero)
    for p in nonzero:
        ratio = big / p
        if abs(ratio - round(ratio)) > 1e-9 * ratio:
            return None
    return big


@dataclass(frozen=True, eq=True)
class AffineSum(ScalarSignal):
    """sum_i coef_i * signal_i."""

    terms: tuple

    def __post_init__(self):
        terms = tuple((float(c), as_signal(s)) for c, s in self.terms)
        if not terms:
            raise ValueError("AffineSum needs at least one term")
        object.__setattr__(self, "terms", terms)

    @property
    def period(self):
        return _common_period([s.period for _, s in self.terms])

    def _eval(self, t):
        return sum(c * s._eval(t) for c, s in self.terms)

    @property
    def has_closed_form(self):
        return all(s.has_closed_form for _, s in self.terms)

    def _antiderivative(self, t):
        return sum(c * s._antiderivative(t) for c, s in self.terms)

    def breakpoints(self, a, b):
        pts = set()
        for _, s in self.terms:
            pts.update(s.breakpoints(a, b))
        return sorted(pts)

    def quad_pieces(self, a, b):
        return max(s.quad_pieces(a, b) for _, s in self.terms)

    def piecewise_constant(self):
        parts = [s.piecewise_constant() for _, s in self.terms]
        if any(p is None for p in parts):
            return None
        period = _common_period([p[0] for p in parts])
        if period is None:
            return None
        if period == 0.0:
            return 0.0, np.array([0.0]), np.array([float(self._eval(np.float64(0.0)))])
        cuts = set([0.0])
        for (c, s), (w, pts, _) in zip(self.terms, parts):
            if w == 0.0:
                continue
            reps = int(round(period / w))
            for j in range(reps):
                cuts.update(float(j * w + p) for p in pts)
        cuts = np.array(sorted(x for x in cuts if x < period))
        values = np.asarray(self._eval(cuts), dtype=float)
        return period, cuts, values

    def to_dict(self):
        return {"family": "affine_sum",
                "terms": [{"coef": c, "signal": s.to_dict()} for c, s in self.terms]}


def from_dict(spec: dict) -> ScalarSignal:
    """Build a signal from its config mapping (inverse of ``to_dict``)."""
    spec = dict(spec)
    family = spec.pop("family", None)
    allowed = {
        "constant": {"value"},
        "square_wave": {"low", "high", "duty", "period"},
        "t_cos_t_squared": set(),
        "sin_power": {"k", "scale"},
        "sampled": {"times", "values"},
        "affine_sum": {"terms"},
    }
    if family not in allowed:
        raise ValueError(f"unknown signal family {family!r}")
    unknown = set(spec) - allowed[family]
    if unknown:
        raise ValueError(f"unknown keys for {family}: {sorted(unknown)}")
    if family == "constant":
        return Constant(float(spec["value"]))
    if family == "square_wave":
        return SquareWave(float(spec["low"]), float(spec["high"]), float(spec["duty"]),
                          float(spec.get("period", 1.0)))
    if family == "t_cos_t_squared":
        return TCosTSquared()
    if family == "sin_power":
        return SinPower(int(spec["k"]), float(spec.get("scale", 1.0)))
    if family == "sampled":
        return Sampled(np.asarray(spec["times"], float), np.asarray(spec["values"], float))
    terms = []
    for term in spec["terms"]:
        extra = set(term) - {"coef", "signal"}
        if extra:
            raise ValueError(f"unknown keys in affine_sum term: {sorted(extra)}")
        terms.append((float(term.get("coef", 1.0)), from_dict(term["signal"])))
    return AffineSum(tuple(terms))


# --- operations -------------------------------------------------------------

def evaluate(sig: ScalarSignal, t):
    return sig.eval(t)


def quad(sig, a, b, abs_tol=DEFAULT_ABS_TOL, integrand=None):
    """Quadrature of ``sig`` (or of ``integrand`` shaped like it) over [a, b]."""
    f = integrand if integrand is not None else sig.eval
    value, _ = adaptive_gk(f, a, b, abs_tol=abs_tol, pieces=sig.quad_pieces(a, b),
                           breakpoints=sig.breakpoints(a, b))
    return value


def integrate(sig: ScalarSignal, a, b, abs_tol=DEFAULT_ABS_TOL):
    """Integral of ``sig`` over [a, b]; closed form where the family allows it.

    Raises ``QuadratureError`` (carrying the achieved error) when the numeric
    path cannot meet ``abs_tol``.
    """
    if a > b:
        raise ValueError(f"integration bounds out of order: {a} > {b}")
    if not (math.isfinite(a) and math.isfinite(b)):
        raise ValueError("integration bounds must be finite")
    if sig.has_closed_form:
        return float(sig.antiderivative(b) - sig.antiderivative(a))
    return quad(sig, a, b, abs_tol=abs_tol)


def window_integrals(sig: ScalarSignal, starts, T):
    """Vector of integrals over [s, s + T] for each start s."""
    starts = np.asarray(starts, dtype=float)
    if sig.has_closed_form:
        return np.asarray(sig.antiderivative(starts + T) - sig.antiderivative(starts), dtype=float)
    return np.array([integrate(sig, s, s + T) for s in starts])


def positive_part_integral(sig: ScalarSignal, a, b, abs_tol=1e-8):
    """Integral of max(sig, 0) over [a, b] by adaptive quadrature."""
    return quad(sig, a, b, abs_tol=abs_tol,
                integrand=lambda t: np.maximum(sig.eval(t), 0.0))


def sup_on(sig: ScalarSignal, a, b, samples=2001):
    """Supremum of ``sig`` over [a, b]; exact for piecewise-constant signals."""
    pc = sig.piecewise_constant()
    if pc is not None:
        period, cuts, values = pc
        if period == 0.0:
            return float(values[0])
        # value on each piece present in [a, b]
        probes = [a] + [p for p in sig.breakpoints(a, b)]
        return float(np.max(sig.eval(np.asarray(probes))))
    grid = np.linspace(a, b, samples)
    return float(np.max(sig.eval(grid)))


def _scan_range(sig, horizon):
    period = sig.period
    if period is not None and period > 0.0:
        return period
    if period == 0.0:
        return 0.0
    return float(horizon)


def sup_window_integral(sig: ScalarSignal, T, horizon, grid_step, refine_rounds=3):
    """max over sampled start t in [0, horizon] of the integral over [t, t + T].

    Periodic signals only need one period of starts. Piecewise-constant
    signals additionally get the exact kink candidates; the grid argmax is
    refined by ``refine_rounds`` bisections.
    """
    if T <= 0 or grid_step <= 0 or horizon < T:
        raise ValueError("need T > 0, grid_step > 0 and horizon >= T")
    span = _scan_range(sig, horizon)
    n = max(int(math.ceil(span / grid_step)), 1)
    starts = np.linspace(0.0, span, n + 1)
    pc = sig.piecewise_constant()
    if pc is not None and pc[0] > 0.0:
        period, cuts, _ = pc
        cand = np.concatenate([cuts, np.mod(cuts - T, period)])
        starts = np.concatenate([starts, cand])
    vals = window_integrals(sig, starts, T)
    i = int(np.argmax(vals))
    best_t, best = float(starts[i]), float(vals[i])
    h = grid_step
    for _ in range(refine_rounds):
        h *= 0.5
        probes = np.array([best_t - h, best_t + h])
        probes = probes[(probes >= 0.0) & (probes <= max(span, 0.0))]
        if probes.size == 0:
            break
        pv = window_integrals(sig, probes, T)
        j = int(np.argmax(pv))
        if pv[j] > best:
            best, best_t = float(pv[j]), float(probes[j])
    return best
