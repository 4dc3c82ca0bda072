import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from usfcert.comparison import (ComparisonInstance, gronwall_bound, gronwall_bound_curve,
                                oracle_trajectory, razumikhin_bound, razumikhin_bound_curve)
from usfcert.signals import AffineSum, Constant, SquareWave


def inst(mu=-1.0, pi=0.0, psi=0.0, y0=1.0, span=(0.0, 10.0)):
    wrap = lambda v: v if not isinstance(v, (int, float)) else Constant(float(v))
    return ComparisonInstance(wrap(mu), wrap(pi), wrap(psi), y0, span)


@pytest.mark.parametrize("kw, s, t, ys, expected", [
    (dict(mu=0.0), 0.0, 4.0, 3.0, 3.0),
    (dict(mu=-1.0), 1.0, 1.0 + math.log(2), 2.0, 1.0),
    (dict(mu=-1.0, pi=1.0, span=(0, 40)), 0.0, 40.0, 0.0, 1.0 - math.exp(-40.0)),
])
def test_gronwall_examples(kw, s, t, ys, expected):
    assert gronwall_bound(inst(**kw), s, t, ys) == pytest.approx(expected, abs=1e-10)


def test_gronwall_rejects_bad_interval():
    with pytest.raises(ValueError):
        gronwall_bound(inst(), 2.0, 1.0, 1.0)


@pytest.mark.parametrize("psi, y_prev, expected", [
    (0.5, 10.0, 10 * math.exp(-1.0)),
    (5.0, 1.0, 5.0),
])
def test_razumikhin_examples(psi, y_prev, expected):
    assert razumikhin_bound(inst(psi=psi), 1.0, 3.0, y_prev) == pytest.approx(expected, abs=1e-10)


@settings(max_examples=40, deadline=None)
@given(st.floats(-2, 0.5), st.floats(0.1, 3), st.floats(1.0, 9.0), st.floats(0.0, 5.0))
def test_razumikhin_degenerates_to_gronwall(mu, T, t, y):
    i = inst(mu=mu)
    if t < T:
        return
    assert razumikhin_bound(i, T, t, y) == gronwall_bound(i, t - T, t, y)


def test_oracle_exact_decay():
    times, y = oracle_trajectory(inst(), 1e-3)
    assert np.max(np.abs(y - np.exp(-times))) < 1e-3


def test_oracle_frozen_when_premise_never_fires():
    times, y = oracle_trajectory(inst(psi=1e9, y0=2.0), 1e-2)
    assert np.all(y == 2.0)


def test_oracle_mixed_square_wave_respects_bound():
    mu = AffineSum(((1.0, Constant(-1.0)), (1.2, SquareWave(0.0, 2.0, 0.9, 1.0))))
    i = ComparisonInstance(mu, Constant(0.0), Constant(0.1), 1.0, (0.0, 10.0))
    times, y = oracle_trajectory(i, 1e-3)
    assert np.all(y >= 0)
    tt, bound = razumikhin_bound_curve(i, 1.0, times, y)
    assert np.all(y[times.size - tt.size:] <= bound + 10 * 1e-3)


def test_curves_match_pointwise_bounds():
    mu = AffineSum(((1.0, Constant(-0.7)), (1.0, SquareWave(0.0, 1.0, 0.6, 1.5))))
    i = ComparisonInstance(mu, SquareWave(0.2, 0.0, 0.5, 2.0), Constant(0.3), 1.5, (0.0, 6.0))
    times = np.linspace(0.0, 6.0, 601)
    y = np.exp(-0.5 * times)
    g = gronwall_bound_curve(i, times, y[0])
    for k in (0, 77, 350, 600):
        assert g[k] == pytest.approx(gronwall_bound(i, 0.0, times[k], y[0]), rel=1e-9, abs=1e-12)
    tt, r = razumikhin_bound_curve(i, 1.0, times, y)
    for k in (0, 123, 400, tt.size - 1):
        assert r[k] == pytest.approx(razumikhin_bound(i, 1.0, tt[k], y[k]), rel=1e-9)


def test_razumikhin_curve_requires_grid_multiple():
    times = np.linspace(0.0, 1.0, 11)
    with pytest.raises(ValueError):
        razumikhin_bound_curve(inst(), 0.15, times, np.ones(11))


def test_instance_validation():
    with pytest.raises(ValueError):
        inst(y0=-1.0)
    with pytest.raises(ValueError):
        inst(span=(1.0, 1.0))


@pytest.mark.parametrize("dt", [4e-3, 2e-3, 1e-3])
def test_bound_tolerance_shrinks_with_dt(dt):
    # with psi > 0 the oracle freezes; the windowed bound must still hold within O(dt)
    mu = AffineSum(((1.0, Constant(-1.0)), (2.0, SquareWave(0.0, 1.0, 0.7, 1.0))))
    i = ComparisonInstance(mu, Constant(0.05), Constant(0.2), 1.0, (0.0, 8.0))
    times, y = oracle_trajectory(i, dt)
    tt, bound = razumikhin_bound_curve(i, 1.0, times, y)
    excess = np.max(y[times.size - tt.size:] - bound)
    assert excess <= 10 * dt
