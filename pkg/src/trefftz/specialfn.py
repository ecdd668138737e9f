"""Bessel and Hankel functions of real argument.

Integer and fractional order J are produced by Miller's downward recurrence,
normalised with the Gegenbauer identity

    (x/2)**nu0 = sum_k (nu0 + 2k) Gamma(nu0 + k) / k! * J_{nu0 + 2k}(x),

which reduces to ``1 = J_0 + 2 sum J_2k`` for integer orders.  Y_0 and Y_1 come
from the Neumann (logarithmic) expansion in even-order J for moderate
arguments and from the Hankel asymptotic expansion for large ones; higher
orders use forward recurrence, which is stable for Y.

Every public routine returns ``(value, derivative)`` and accepts a scalar or
an array argument.
"""

from __future__ import annotations

import math

import numpy as np

EULER_GAMMA = 0.57721566490153286061
# above this argument Y_0, Y_1 use the Hankel expansion (truncation error ~ e^{-2x})
ASYMPTOTIC_SWITCH = 25.0
# below this argument J uses two terms of the ascending series
TINY_ARGUMENT = 1e-6
_RESCALE = 1e250


def miller_start(nmax: int, xmax: float) -> int:
    """Starting order of the downward recurrence.

    ``nmax + max(20, ceil(1.5 x))`` is not deep enough around x ~ 10, so the
    transition-region depth ``x + 14 x**(1/3)`` is also honoured.
    """
    base = nmax + max(20, math.ceil(1.5 * xmax))
    transition = math.ceil(xmax + 14.0 * xmax ** (1.0 / 3.0)) + 20
    return max(base, transition, nmax + 2)


def _gegenbauer_weights(nu0: float, kmax: int) -> np.ndarray:
    c = np.empty(kmax + 1)
    c[0] = math.gamma(nu0 + 1.0)
    g = math.gamma(nu0 + 1.0)  # Gamma(nu0 + k) / k! at k = 1
    for k in range(1, kmax + 1):
        if k > 1:
            g *= (nu0 + k - 1.0) / k
        c[k] = (nu0 + 2.0 * k) * g
    return c


def _miller(nu0: float, nmax: int, x: np.ndarray) -> np.ndarray:
    """J_{nu0+n}(x) for n = 0..nmax, shape (nmax + 1, len(x)); requires x > 0."""
    start = miller_start(nmax, float(x.max()))
    weights = _gegenbauer_weights(nu0, start // 2 + 1)
    out = np.zeros((nmax + 1, x.size))
    j_next = np.zeros_like(x)
    j_cur = np.full_like(x, 1e-30)
    total = np.zeros_like(x)
    for n in range(start, -1, -1):
        if n <= nmax:
            out[n] = j_cur
        if n % 2 == 0:
            total += weights[n // 2] * j_cur
        if n == 0:
            break
        j_prev = (2.0 * (nu0 + n) / x) * j_cur - j_next
        j_next, j_cur = j_cur, j_prev
        big = np.abs(j_cur) > _RESCALE
        if big.any():
            scale = np.where(big, 1.0 / _RESCALE, 1.0)
            j_cur = j_cur * scale
            j_next = j_next * scale
            total = total * scale
            out *= scale
    return out * ((0.5 * x) ** nu0 / total)


def _small_series(nu: np.ndarray | float, x: np.ndarray) -> np.ndarray:
    nu = np.asarray(nu, dtype=float)
    half = 0.5 * x
    with np.errstate(divide="ignore"):
        lead = np.where(
            half > 0.0,
            np.exp(nu * np.log(np.where(half > 0, half, 1.0)) - _lgamma(nu + 1.0)),
            np.where(nu == 0.0, 1.0, 0.0),
        )
    q = half * half
    return lead * (1.0 - q / (nu + 1.0) + q * q / (2.0 * (nu + 1.0) * (nu + 2.0)))


_lgamma = np.vectorize(math.lgamma, otypes=[float])


def bessel_j_sequence(nu0: float, nmax: int, x) -> np.ndarray:
    """J_{nu0 + n}(x) for n = 0..nmax.

    Parameters
    ----------
    nu0 : float
        Base order, ``nu0 >= 0``.
    nmax : int
        Number of unit steps above ``nu0``.
    x : array_like
        Nonnegative arguments.

    Returns
    -------
    numpy.ndarray
        Shape ``(nmax + 1,) + np.shape(x)``.
    """
    if nu0 < 0:
        raise ValueError("base order must be nonnegative")
    xa = np.asarray(x, dtype=float)
    if np.any(xa < 0) or not np.all(np.isfinite(xa)):
        raise ValueError("Bessel J requires finite x >= 0")
    flat = xa.ravel()
    out = np.zeros((nmax + 1, flat.size))
    orders = nu0 + np.arange(nmax + 1, dtype=float)
    small = flat <= TINY_ARGUMENT
    if small.any():
        out[:, small] = _small_series(orders[:, None], flat[None, small])
    if (~small).any():
        frac = nu0 - math.floor(nu0)
        lift = int(round(nu0 - frac))
        seq = _miller(frac, nmax + lift, flat[~small])
        out[:, ~small] = seq[lift:]
    return out.reshape((nmax + 1,) + xa.shape)


def bessel_j(order: float, x):
    """Bessel function of the first kind J_order(x) and its derivative.

    ``order`` may be fractional.  At ``x = 0`` with ``0 < order < 1`` the
    derivative is infinite.
    """
    if order < 0:
        raise ValueError("order must be nonnegative")
    xa = np.asarray(x, dtype=float)
    if np.any(xa < 0):
        raise ValueError("Bessel J requires x >= 0")
    seq = bessel_j_sequence(order, 1, xa)
    val, nxt = seq[0], seq[1]
    with np.errstate(divide="ignore", invalid="ignore"):
        der = np.where(xa > 0, order / np.where(xa > 0, xa, 1.0) * val - nxt, 0.0)
    at_zero = xa == 0
    if np.any(at_zero):
        if order == 0 or order > 1:
            zero_der = 0.0
        elif order == 1:
            zero_der = 0.5
        else:
            zero_der = np.inf
        der = np.where(at_zero, zero_der, der)
    if np.ndim(x) == 0:
        return float(val), float(der)
    return val, der


def _hankel_asymptotic(nu: int, x: np.ndarray):
    """(J_nu, Y_nu) from the Hankel expansion, nu in {0, 1}."""
    mu = 4.0 * nu * nu
    p = np.ones_like(x)
    q = np.zeros_like(x)
    term = np.ones_like(x)
    last = np.full_like(x, np.inf)
    active = np.ones(x.shape, dtype=bool)
    for k in range(1, 80):
        term = term * (mu - (2 * k - 1) ** 2) / (k * 8.0 * x)
        size = np.abs(term)
        active &= size < last
        if not active.any():
            break
        contrib = np.where(active, term, 0.0)
        # P collects even k with sign (-1)^{k/2}, Q odd k with sign (-1)^{(k-1)/2}
        if k % 2 == 0:
            p += contrib * (-1.0) ** (k // 2)
        else:
            q += contrib * (-1.0) ** ((k - 1) // 2)
        last = np.where(active, size, last)
        if np.all(size < 1e-17):
            break
    chi = x - (0.5 * nu + 0.25) * math.pi
    amp = np.sqrt(2.0 / (math.pi * x))
    c, s = np.cos(chi), np.sin(chi)
    return amp * (p * c - q * s), amp * (p * s + q * c)


def _y01(x: np.ndarray):
    """Y_0(x), Y_1(x) for x > 0."""
    y0 = np.empty_like(x)
    y1 = np.empty_like(x)
    far = x > ASYMPTOTIC_SWITCH
    if far.any():
        y0[far] = _hankel_asymptotic(0, x[far])[1]
        y1[far] = _hankel_asymptotic(1, x[far])[1]
    near = ~far
    if near.any():
        xn = x[near]
        m = miller_start(0, float(xn.max()))
        m += m % 2
        js = bessel_j_sequence(0.0, m + 1, xn)
        k = np.arange(1, m // 2 + 1)
        sign = (-1.0) ** k
        even = js[2 * k]
        dj_even = 0.5 * (js[2 * k - 1] - js[2 * k + 1])
        logterm = np.log(0.5 * xn) + EULER_GAMMA
        y0[near] = (2.0 / math.pi) * logterm * js[0] - (4.0 / math.pi) * np.sum(
            (sign / k)[:, None] * even, axis=0
        )
        dy0 = (2.0 / math.pi) * (logterm * (-js[1]) + js[0] / xn) - (4.0 / math.pi) * np.sum(
            (sign / k)[:, None] * dj_even, axis=0
        )
        y1[near] = -dy0
    return y0, y1


def bessel_y_sequence(nmax: int, x) -> np.ndarray:
    """Y_n(x) for n = 0..nmax by forward recurrence; x > 0."""
    xa = np.asarray(x, dtype=float)
    if np.any(xa <= 0):
        raise ValueError("Bessel Y requires x > 0 (logarithmic singularity at 0)")
    flat = xa.ravel()
    out = np.empty((max(nmax, 1) + 1, flat.size))
    out[0], out[1] = _y01(flat)
    with np.errstate(over="ignore", invalid="ignore"):
        for n in range(1, nmax):
            out[n + 1] = (2.0 * n / flat) * out[n] - out[n - 1]
    return out[: nmax + 1].reshape((nmax + 1,) + xa.shape)


def _derivative_from_sequence(seq: np.ndarray, x: np.ndarray, order: int):
    if order == 0:
        return -seq[1]
    return seq[order - 1] - order / x * seq[order]


def bessel_y(order: int, x):
    """Bessel function of the second kind Y_order(x) and its derivative."""
    if int(order) != order or order < 0:
        raise ValueError("Bessel Y is provided for integer orders >= 0 only")
    order = int(order)
    xa = np.asarray(x, dtype=float)
    seq = bessel_y_sequence(order + 1, xa)
    with np.errstate(over="ignore", invalid="ignore"):
        der = _derivative_from_sequence(seq, xa, order)
    val = seq[order]
    if np.ndim(x) == 0:
        return float(val), float(der)
    return val, der


def hankel1_sequence(nmax: int, x) -> np.ndarray:
    """H^(1)_n(x) = J_n(x) + i Y_n(x) for n = 0..nmax; x > 0."""
    xa = np.asarray(x, dtype=float)
    if np.any(xa <= 0):
        raise ValueError("Hankel function requires x > 0")
    return bessel_j_sequence(0.0, nmax, xa) + 1j * bessel_y_sequence(nmax, xa)


def hankel1(order: int, x):
    """Hankel function of the first kind H^(1)_order(x) and its derivative."""
    if int(order) != order or order < 0:
        raise ValueError("Hankel function is provided for integer orders >= 0 only")
    order = int(order)
    xa = np.asarray(x, dtype=float)
    seq = hankel1_sequence(order + 1, xa)
    with np.errstate(over="ignore", invalid="ignore"):
        der = _derivative_from_sequence(seq, xa, order)
    val = seq[order]
    if np.ndim(x) == 0:
        return complex(val), complex(der)
    return val, der
