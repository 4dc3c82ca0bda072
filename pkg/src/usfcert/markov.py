"""Continuous-time Markov chains for the switching signal r(t).

States are 0-based internally; CSV export writes them 1-based.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

TOL = 1e-12


class GeneratorError(ValueError):
    def __init__(self, violations):
        self.violations = violations
        super().__init__("invalid generator: " + "; ".join(violations))


def validate_generator(gamma, tol=TOL):
    """Return the list of violated invariants (empty when ``gamma`` is valid)."""
    g = np.asarray(gamma, dtype=float)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        return [f"generator must be square, got shape {g.shape}"]
    problems = []
    n = g.shape[0]
    for i in range(n):
        for j in range(n):
            if i != j and g[i, j] < -tol:
                problems.append(f"negative rate at ({i + 1},{j + 1}): {g[i, j]}")
        row = g[i].sum()
        if abs(row) > tol:
            problems.append(f"row {i + 1} sums to {row}, not 0")
    return problems


def _checked(gamma):
    problems = validate_generator(gamma)
    if problems:
        raise GeneratorError(problems)
    return np.asarray(gamma, dtype=float)


@dataclass(frozen=True, eq=False)
class RegimePath:
    """Right-continuous step path: ``states[i]`` holds on [jump_times[i], jump_times[i+1])."""

    jump_times: np.ndarray
    states: np.ndarray
    t_end: float

    def state_at(self, t):
        idx = np.searchsorted(self.jump_times, t, side="right") - 1
        return self.states[np.clip(idx, 0, None)]

    @property
    def n_jumps(self):
        return self.jump_times.size - 1

    def occupation(self, n_states):
        """Fraction of [t0, t_end] spent in each state."""
        edges = np.append(self.jump_times, self.t_end)
        durations = np.diff(edges)
        occ = np.bincount(self.states, weights=durations, minlength=n_states)
        return occ / (self.t_end - self.jump_times[0])

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t_jump", "state"])
            for t, s in zip(self.jump_times, self.states):
                w.writerow([repr(float(t)), int(s) + 1])


def sample_path(gamma, t0, t1, initial_state, rng: np.random.Generator) -> RegimePath:
    """Exact jump-chain simulation: exponential holding times, then a jump."""
    g = _checked(gamma)
    if not t1 > t0:
        raise ValueError("need t1 > t0")
    n = g.shape[0]
    times = [float(t0)]
    states = [int(initial_state)]
    t = float(t0)
    i = int(initial_state)
    while True:
        rate = -g[i, i]
        if rate <= 0.0:
            break
        t += rng.exponential(1.0 / rate)
        if t >= t1:
            break
        probs = np.clip(g[i], 0.0, None)
        probs[i] = 0.0
        i = int(rng.choice(n, p=probs / rate))
        times.append(t)
        states.append(i)
    return RegimePath(np.array(times), np.array(states, dtype=np.intp), float(t1))


def stationary_distribution(gamma):
    """Solve pi Gamma = 0, sum(pi) = 1 with the normalisation replacing one equation."""
    g = _checked(gamma)
    n = g.shape[0]
    A = g.T.copy()
    A[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    rank = np.linalg.matrix_rank(A)
    if rank < n:
        raise np.linalg.LinAlgError(
            f"stationary system is rank deficient (rank {rank} < {n}); generator is reducible")
    return np.linalg.solve(A, b)


def occupation_standard_error(path: RegimePath, n_states, n_batches=50):
    """Batch-means standard error of the occupation fractions."""
    t0 = path.jump_times[0]
    edges = np.linspace(t0, path.t_end, n_batches + 1)
    fracs = np.empty((n_batches, n_states))
    jt = np.append(path.jump_times, path.t_end)
    for b in range(n_batches):
        lo, hi = edges[b], edges[b + 1]
        starts = np.clip(jt[:-1], lo, hi)
        ends = np.clip(jt[1:], lo, hi)
        fracs[b] = np.bincount(path.states, weights=ends - starts, minlength=n_states) / (hi - lo)
    return fracs.std(axis=0, ddof=1) / np.sqrt(n_batches)
