import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from usfcert.quadrature import QuadratureError, adaptive_gk, cumulative_integral
from usfcert.signals import (AffineSum, Constant, Sampled, SignalDomainError, SinPower,
                             SquareWave, TCosTSquared, from_dict, integrate, positive_part_integral,
                             quad, sup_on, sup_window_integral, window_integrals)


def square(e=2.0, c=0.9):
    return SquareWave(0.0, e, c, 1.0)


def test_eval_examples():
    assert Constant(-1.0).eval(7.3) == -1.0
    assert square().eval(0.95) == 2.0
    assert TCosTSquared().eval(0.0) == 0.0


def test_square_wave_is_right_continuous():
    sw = square()
    assert sw.eval(0.9) == 2.0
    assert sw.eval(np.nextafter(0.9, 0)) == 0.0
    assert sw.eval(1.0) == 0.0
    assert sw.eval(-0.05) == 2.0


@pytest.mark.parametrize("sig, a, b, expected", [
    (Constant(-1.0), 0.0, 5.0, -5.0),
    (square(), 0.0, 1.0, 0.2),
    (AffineSum(((1.0, square()), (-1.0, Constant(1.0)))), 0.0, 1.0, -0.8),
    (TCosTSquared(), 0.0, math.sqrt(math.pi / 2), 0.5),
    (SinPower(1, 1.0), 0.0, math.pi, math.pi / 2),
    (SinPower(2, 2.0), 0.0, math.pi, 2 * 3 * math.pi / 8),
])
def test_integrate_examples(sig, a, b, expected):
    assert integrate(sig, a, b) == pytest.approx(expected, abs=1e-12)


def test_sampled_interpolation_and_domain():
    s = Sampled(np.array([0.0, 1.0, 3.0]), np.array([0.0, 2.0, 0.0]))
    assert s.eval(0.5) == pytest.approx(1.0)
    assert s.eval(2.0) == pytest.approx(1.0)
    assert integrate(s, 0.0, 3.0) == pytest.approx(3.0)
    assert integrate(s, 0.5, 2.0) == pytest.approx(0.75 + 1.5)
    assert integrate(s, 0.5, 2.0) == pytest.approx(quad(s, 0.5, 2.0), abs=1e-12)
    with pytest.raises(SignalDomainError):
        s.eval(3.5)


@pytest.mark.parametrize("bad", [
    lambda: SquareWave(0, 1, 0.0, 1.0),
    lambda: SquareWave(0, 1, 1.0, 1.0),
    lambda: SquareWave(0, 1, 0.5, 0.0),
    lambda: Sampled(np.array([0.0, 0.0]), np.array([1.0, 1.0])),
    lambda: Sampled(np.array([0.0, 1.0]), np.array([1.0, np.nan])),
    lambda: SinPower(0),
])
def test_invalid_construction(bad):
    with pytest.raises(ValueError):
        bad()


FAMILIES = [
    Constant(-0.3),
    square(),
    SquareWave(-1.0, 0.5, 0.3, 2.0),
    TCosTSquared(),
    SinPower(3, 1.5),
    AffineSum(((1.0, TCosTSquared()), (1.0, Constant(-1.0)), (0.5, SinPower(2)))),
]


@pytest.mark.parametrize("sig", FAMILIES, ids=lambda s: type(s).__name__)
@pytest.mark.parametrize("a, b", [(0.0, 1.0), (0.3, 4.7), (2.0, 11.0)])
def test_closed_form_matches_quadrature(sig, a, b):
    assert integrate(sig, a, b) == pytest.approx(quad(sig, a, b, abs_tol=1e-11), abs=1e-8)


@settings(max_examples=60, deadline=None)
@given(st.floats(0, 20), st.floats(0, 10), st.floats(0, 10), st.sampled_from(FAMILIES))
def test_integral_is_additive(a, d1, d2, sig):
    b, c = a + d1, a + d1 + d2
    whole = integrate(sig, a, c)
    parts = integrate(sig, a, b) + integrate(sig, b, c)
    assert whole == pytest.approx(parts, abs=2e-10 * max(1.0, abs(whole)))


@settings(max_examples=40, deadline=None)
@given(st.floats(-5, 5), st.sampled_from([square(), SquareWave(-1.0, 0.5, 0.3, 2.0), SinPower(2)]))
def test_periodic_window_integral_independent_of_start(t, sig):
    w = sig.period
    assert integrate(sig, t, t + w) == pytest.approx(integrate(sig, 0.0, w), abs=1e-10)


def test_integrate_rejects_reversed_bounds():
    with pytest.raises(ValueError):
        integrate(Constant(1.0), 1.0, 0.0)


@pytest.mark.parametrize("sig", FAMILIES, ids=lambda s: type(s).__name__)
def test_dict_round_trip(sig):
    again = from_dict(sig.to_dict())
    t = np.linspace(0, 5, 41)
    assert np.array_equal(again.eval(t), sig.eval(t))


def test_from_dict_rejects_unknown():
    with pytest.raises(ValueError):
        from_dict({"family": "constant", "value": 1, "extra": 2})
    with pytest.raises(ValueError):
        from_dict({"family": "sawtooth"})


def test_sup_window_integral_examples():
    assert sup_window_integral(Constant(-1.0), 1.0, 10.0, 1e-3) == pytest.approx(-1.0)
    mu = AffineSum(((1.0, Constant(-1.0)), (1.2, square())))
    # all period-length windows of a periodic signal share the same integral
    assert sup_window_integral(mu, 1.0, 10.0, 1e-3) == pytest.approx(-0.76, abs=1e-12)
    shifted = TCosTSquared() - Constant(5.0)
    v = sup_window_integral(shifted, 2 * math.pi, 100.0, 1e-3)
    assert math.isfinite(v) and v < 0
    # the oscillating part contributes at most 1 in absolute value
    assert v == pytest.approx(-10 * math.pi, abs=1.0 + 1e-9)


def test_window_integrals_vectorised():
    starts = np.array([0.0, 0.25, 0.95])
    v = window_integrals(square(), starts, 0.1)
    assert v == pytest.approx([0.0, 0.0, 0.1])


def test_positive_part_and_sup_on():
    mu = AffineSum(((1.0, Constant(-1.0)), (1.2, square())))
    assert positive_part_integral(mu, 0.0, 3.0) == pytest.approx(3 * 0.14, abs=1e-8)
    assert sup_on(mu, 0.0, 0.5) == pytest.approx(-1.0)
    assert sup_on(mu, 0.0, 2.0) == pytest.approx(1.4)


# --- quadrature ---

def test_adaptive_gk_polynomial_exact():
    val, err = adaptive_gk(lambda x: x ** 21 + 3 * x ** 4, -1.0, 2.0)
    assert val == pytest.approx((2 ** 22 - 1) / 22 + 3 * (32 + 1) / 5, rel=1e-14)


def test_adaptive_gk_oscillatory():
    f = lambda t: t * np.cos(t * t)
    val, _ = adaptive_gk(f, 0.0, 30.0, abs_tol=1e-11, pieces=300)
    assert val == pytest.approx(0.5 * math.sin(900.0), abs=1e-9)


def test_adaptive_gk_reversed_and_breakpoints():
    val, _ = adaptive_gk(lambda x: np.where(x < 0.3, 0.0, 1.0), 1.0, 0.0, breakpoints=[0.3])
    assert val == pytest.approx(-0.7, abs=1e-14)


def test_quadrature_error_carries_achieved():
    with pytest.raises(QuadratureError) as info:
        adaptive_gk(lambda x: np.sin(1.0 / np.maximum(x, 1e-300)), 0.0, 1.0, abs_tol=1e-14,
                    max_intervals=50)
    assert info.value.achieved > 0


def test_cumulative_integral():
    grid = np.linspace(0.0, 2.0, 21)
    vals, _ = cumulative_integral(np.exp, grid)
    assert vals == pytest.approx(np.exp(grid) - 1.0, abs=1e-13)
