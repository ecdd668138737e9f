import math

import numpy as np
import pytest
import scipy.special as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from trefftz.specialfn import (
    bessel_j,
    bessel_j_sequence,
    bessel_y,
    bessel_y_sequence,
    hankel1,
    hankel1_sequence,
)


def series_j0(x, terms=40):
    # independent power series, exact in float for moderate x
    return sum((-1) ** m * (x / 2) ** (2 * m) / math.factorial(m) ** 2 for m in range(terms))


def trapezoid(f, a, b, n):
    t = np.linspace(a, b, n + 1)
    y = f(t)
    return (b - a) / n * (y.sum() - 0.5 * (y[0] + y[-1]))


def romberg_pair(f, a, b, n):
    return (4.0 * trapezoid(f, a, b, 2 * n) - trapezoid(f, a, b, n)) / 3.0


def y_integral(n, x):
    first = romberg_pair(lambda t: np.sin(x * np.sin(t) - n * t), 0.0, np.pi, 20000) / np.pi
    tail = romberg_pair(
        lambda t: (np.exp(n * t) + (-1) ** n * np.exp(-n * t)) * np.exp(-x * np.sinh(t)),
        0.0,
        6.0,
        40000,
    )
    return first - tail / np.pi


def rel_error(val, ref, order, x):
    ok = (np.abs(ref) > 1e-280) & (np.abs(ref) < 1e280)
    scale = np.maximum(np.abs(ref[ok]), envelope(order, x[ok], ref[ok]))
    return np.abs(val[ok] - ref[ok]) / scale


def envelope(order, x, ref):
    # oscillatory regime: compare against the amplitude, not the local value
    return np.where(x > order, np.sqrt(2.0 / (np.pi * np.maximum(x, 1e-300))), np.abs(ref))


def test_values_at_origin():
    assert bessel_j(0, 0.0)[0] == 1.0
    assert bessel_j(3, 0.0)[0] == 0.0
    assert bessel_j(1, 0.0)[1] == 0.5


def test_first_zero_of_j0_matches_series_bisection():
    lo, hi = 2.0, 3.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if series_j0(lo) * series_j0(mid) <= 0:
            hi = mid
        else:
            lo = mid
    root = 0.5 * (lo + hi)
    assert abs(root - 2.404825557695773) < 1e-14
    assert abs(bessel_j(0, root)[0]) < 1e-15


def test_wronskian_at_one():
    for n in range(11):
        j, jd = bessel_j(n, 1.0)
        y, yd = bessel_y(n, 1.0)
        assert j * yd - jd * y == pytest.approx(2.0 / np.pi, rel=1e-12)


def test_y0_logarithmic_singularity():
    assert bessel_y(0, 1e-8)[0] < -10.0
    with pytest.raises(ValueError):
        bessel_y(0, 0.0)


def test_y5_against_integral_representation():
    assert bessel_y(5, 10.0)[0] == pytest.approx(y_integral(5, 10.0), abs=1e-9)


def test_hankel_modulus_identity():
    h = hankel1(0, 2.0)[0]
    j = bessel_j(0, 2.0)[0]
    y = bessel_y(0, 2.0)[0]
    assert abs(h) ** 2 == pytest.approx(j**2 + y**2, rel=1e-15)


def test_hankel_solves_helmholtz_away_from_pole():
    k, eps = 3.0, 1e-3
    pts = np.array([[0.7, 0.2], [-1.1, 0.5], [0.3, -2.0]])

    def u(p):
        return hankel1(0, k * np.hypot(p[:, 0], p[:, 1]))[0]

    ex, ey = np.array([eps, 0]), np.array([0, eps])
    lap = (u(pts + ex) + u(pts - ex) + u(pts + ey) + u(pts - ey) - 4 * u(pts)) / eps**2
    res = np.abs(lap + k**2 * u(pts)) / (k**2 * np.abs(u(pts)))
    assert res.max() < 1e-5


def test_far_field_decay():
    r = np.linspace(50.0, 500.0, 200)
    scaled = np.abs(hankel1(0, r)[0]) * np.sqrt(r)
    assert np.all((scaled > 0.5) & (scaled < 1.0))
    assert np.allclose(scaled, np.sqrt(2 / np.pi), rtol=5e-3)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 50), st.floats(0.1, 100.0))
def test_three_term_recurrence(n, x):
    seq = bessel_j_sequence(0.0, n + 1, np.array(x))
    lhs = seq[n - 1] + seq[n + 1]
    rhs = 2.0 * n / x * seq[n]
    scale = max(abs(seq[n - 1]), abs(seq[n + 1]), abs(rhs))
    assert abs(lhs - rhs) <= 1e-11 * scale


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 30), st.floats(0.05, 60.0))
def test_derivative_identity(n, x):
    val, der = bessel_j(n + 1, x)
    lo = bessel_j(n, x)[0]
    hi = bessel_j(n + 2, x)[0]
    assert der == pytest.approx(0.5 * (lo - hi), abs=1e-13)


@pytest.mark.parametrize("order", [0, 1, 2, 7, 20, 63, 120, 200, 0.5, 1 / 3, 2.7, 10.25, 45.5])
def test_j_against_scipy(order, rng):
    x = np.concatenate([rng.uniform(0, 1e3, 400), rng.uniform(0, 30, 400)])
    val, der = bessel_j(order, x)
    ref = sp.jv(order, x)
    assert rel_error(val, ref, order, x).max() < 1e-12
    pos = x > 0
    assert rel_error(der[pos], sp.jvp(order, x[pos]), order, x[pos]).max() < 1e-11


@pytest.mark.parametrize("order", [0, 1, 3, 10, 25])
def test_y_against_scipy(order, rng):
    x = np.concatenate([rng.uniform(0.01, 1e3, 400), rng.uniform(0.01, 30, 400)])
    val = bessel_y(order, x)[0]
    ref = sp.yv(order, x)
    assert rel_error(val, ref, order, x).max() < 1e-12


def test_sequences_agree_with_single_evaluations():
    x = np.array([0.3, 4.0, 17.5])
    js = bessel_j_sequence(0.0, 6, x)
    ys = bessel_y_sequence(6, x)
    hs = hankel1_sequence(6, x)
    for n in range(7):
        assert np.allclose(js[n], bessel_j(n, x)[0], rtol=1e-14, atol=1e-300)
        assert np.allclose(ys[n], bessel_y(n, x)[0], rtol=1e-14)
        assert np.allclose(hs[n], js[n] + 1j * ys[n], rtol=1e-15)


def test_sequence_shape():
    x = np.ones((3, 4))
    assert bessel_j_sequence(0.5, 5, x).shape == (6, 3, 4)


@pytest.mark.parametrize(
    "call",
    [
        lambda: bessel_j(-1, 1.0),
        lambda: bessel_j(0, -1.0),
        lambda: bessel_y(1.5, 1.0),
        lambda: hankel1(0, 0.0),
        lambda: bessel_j_sequence(0.0, 3, np.array([np.nan])),
    ],
)
def test_invalid_arguments(call):
    with pytest.raises(ValueError):
        call()
