"""Comparison-lemma bounds and a trajectory oracle for testing them.

``gronwall_bound`` is the Gronwall-type bound for D+y <= mu y + pi;
``razumikhin_bound`` is the windowed bound that only assumes the inequality
while y(t) >= psi(t). The oracle integrates a trajectory that meets the
hypothesis with equality (forward Euler) so both bounds can be probed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .quadrature import adaptive_gk, cumulative_integral
from .signals import Constant, ScalarSignal, integrate, sup_on
from .usf import overshoot


@dataclass(frozen=True)
class ComparisonInstance:
    mu: ScalarSignal
    pi: ScalarSignal = Constant(0.0)
    psi: ScalarSignal = Constant(0.0)
    y0: float = 1.0
    t_span: tuple = (0.0, 10.0)

    def __post_init__(self):
        if self.y0 < 0:
            raise ValueError("y0 must be nonnegative")
        t0, t1 = self.t_span
        if not t1 > t0:
            raise ValueError("t_span must be increasing")


def _forcing_integral(mu, pi, s, t, abs_tol=1e-10):
    """int_s^t exp(int_lam^t mu) pi(lam) dlam."""
    if t <= s:
        return 0.0
    if isinstance(pi, Constant) and pi.value == 0.0:
        return 0.0
    if mu.has_closed_form:
        Ft = mu.antiderivative(t)

        def integrand(lam):
            return np.exp(Ft - mu.antiderivative(lam)) * pi.eval(lam)
    else:
        def integrand(lam):
            return np.array([math.exp(integrate(mu, x, t)) for x in np.ravel(lam)]) * pi.eval(lam)
    pieces = max(mu.quad_pieces(s, t), pi.quad_pieces(s, t))
    breaks = sorted(set(mu.breakpoints(s, t)) | set(pi.breakpoints(s, t)))
    value, _ = adaptive_gk(integrand, s, t, abs_tol=abs_tol, pieces=pieces, breakpoints=breaks)
    return value


def gronwall_bound(inst: ComparisonInstance, s, t, y_s):
    """y_s exp(int_s^t mu) + int_s^t exp(int_lam^t mu) pi(lam) dlam."""
    t0, t1 = inst.t_span
    if not t0 <= s <= t <= t1:
        raise ValueError(f"need t0 <= s <= t <= t1, got s={s}, t={t}")
    return y_s * math.exp(integrate(inst.mu, s, t)) + _forcing_integral(inst.mu, inst.pi, s, t)


def razumikhin_bound(inst: ComparisonInstance, T, t, y_at_t_minus_T, phi=None):
    """Windowed comparison bound at time t from the value T earlier.

    ``phi`` is the overshoot of mu at T; computed when not supplied.
    """
    if t < T:
        raise ValueError("need t >= T")
    if phi is None:
        phi = overshoot(inst.mu, T, horizon=max(inst.t_span[1], T))
    s = t - T
    decay = y_at_t_minus_T * math.exp(integrate(inst.mu, s, t))
    floor = sup_on(inst.psi, s, t) * math.exp(phi)
    return max(decay, floor) + _forcing_integral(inst.mu, inst.pi, s, t)


def oracle_trajectory(inst: ComparisonInstance, dt):
    """Forward-Euler path of y' = mu y + pi while y >= psi, frozen otherwise.

    Returns ``(times, y)``.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    t0, t1 = inst.t_span
    n = int(round((t1 - t0) / dt))
    times = t0 + dt * np.arange(n + 1)
    mu = np.asarray(inst.mu.eval(times), dtype=float)
    pi = np.asarray(inst.pi.eval(times), dtype=float)
    psi = np.asarray(inst.psi.eval(times), dtype=float)
    y = np.empty(n + 1)
    y[0] = inst.y0
    for k in range(n):
        yk = y[k]
        y[k + 1] = yk + dt * (mu[k] * yk + pi[k]) if yk >= psi[k] else yk
    return times, y


def _window_sup_curve(psi, times, width):
    """sup of psi over [t_i - width*dt, t_i] for i >= width (exact for step psi)."""
    vals = np.asarray(psi.eval(times), dtype=float)
    cell = np.maximum(vals[:-1], vals[1:])
    bps = psi.breakpoints(times[0], times[-1])
    if bps:
        bps = np.asarray(bps)
        idx = np.searchsorted(times, bps, side="right") - 1
        np.maximum.at(cell, idx, np.asarray(psi.eval(bps), dtype=float))
    from .usf import _window_max
    return _window_max(cell, width - 1)


def _forcing_curve(inst, times, width):
    mu, pi = inst.mu, inst.pi
    if isinstance(pi, Constant) and pi.value == 0.0:
        return np.zeros(times.size - width)
    F = np.asarray(mu.antiderivative(times), dtype=float)
    breaks = sorted(set(mu.breakpoints(times[0], times[-1])) | set(pi.breakpoints(times[0], times[-1])))
    H, _ = cumulative_integral(lambda s: np.exp(-mu.antiderivative(s)) * pi.eval(s), times, breaks)
    return np.exp(F[width:]) * (H[width:] - H[:-width])


def gronwall_bound_curve(inst: ComparisonInstance, times, y_start):
    """gronwall_bound from times[0] to every grid time (closed-form mu required)."""
    times = np.asarray(times, dtype=float)
    F = np.asarray(inst.mu.antiderivative(times), dtype=float)
    decay = y_start * np.exp(F - F[0])
    if isinstance(inst.pi, Constant) and inst.pi.value == 0.0:
        return decay
    breaks = sorted(set(inst.mu.breakpoints(times[0], times[-1]))
                    | set(inst.pi.breakpoints(times[0], times[-1])))
    H, _ = cumulative_integral(lambda s: np.exp(-inst.mu.antiderivative(s)) * inst.pi.eval(s),
                               times, breaks)
    return decay + np.exp(F) * H


def razumikhin_bound_curve(inst: ComparisonInstance, T, times, y, phi=None):
    """razumikhin_bound at times[i] for every i with times[i] - T on the grid.

    ``times`` must be uniform with T a multiple of the spacing; ``y`` holds the
    trajectory values on the grid. Returns ``(times[w:], bounds)``.
    """
    times = np.asarray(times, dtype=float)
    y = np.asarray(y, dtype=float)
    dt = times[1] - times[0]
    width = int(round(T / dt))
    if width < 1 or abs(width * dt - T) > 1e-9 * max(T, 1.0):
        raise ValueError("T must be a positive multiple of the grid spacing")
    if phi is None:
        phi = overshoot(inst.mu, T, horizon=max(inst.t_span[1], T))
    F = np.asarray(inst.mu.antiderivative(times), dtype=float)
    decay = y[:-width] * np.exp(F[width:] - F[:-width])
    floor = _window_sup_curve(inst.psi, times, width) * math.exp(phi)
    return times[width:], np.maximum(decay, floor) + _forcing_curve(inst, times, width)
