"""Closed-form exponential integrals and Gauss-Legendre rules.

Plane-wave products integrate exactly over straight segments through
``psi(z) = (exp(z) - 1) / z``; polygon integrals reduce to edge integrals by
the divergence theorem.  Everything else goes through Gauss-Legendre rules
whose node count grows with ``k * length``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

PSI_TAYLOR_RADIUS = 1e-2
PSI_TAYLOR_TERMS = 8
DEGENERATE_WW = 1e-10
FALLBACK_NODES = 32
MAX_RULE = 128


@dataclass(frozen=True)
class SegmentRule:
    """Quadrature nodes and weights on a straight segment."""

    nodes: np.ndarray  # (n, 2) points, or (n,) on the reference interval
    weights: np.ndarray

    def integrate(self, values) -> complex:
        return complex(np.tensordot(self.weights, values, axes=(0, 0)))


@lru_cache(maxsize=None)
def _legendre_rule(n: int) -> tuple[np.ndarray, np.ndarray]:
    # Newton on P_n from Chebyshev-like initial guesses
    i = np.arange(1, n + 1)
    x = np.cos(np.pi * (i - 0.25) / (n + 0.5))
    for _ in range(100):
        p0 = np.ones_like(x)
        p1 = x.copy()
        for m in range(2, n + 1):
            p0, p1 = p1, ((2 * m - 1) * x * p1 - (m - 1) * p0) / m
        if n == 1:
            p0, p1 = np.ones_like(x), x
        dp = n * (x * p1 - p0) / (x * x - 1.0)
        dx = p1 / dp
        x = x - dx
        if np.max(np.abs(dx)) < 1e-16:
            break
    p0 = np.ones_like(x)
    p1 = x.copy()
    for m in range(2, n + 1):
        p0, p1 = p1, ((2 * m - 1) * x * p1 - (m - 1) * p0) / m
    if n == 1:
        p0, p1 = np.ones_like(x), x
    dp = n * (x * p1 - p0) / (x * x - 1.0)
    w = 2.0 / ((1.0 - x * x) * dp * dp)
    order = np.argsort(x)
    nodes, weights = x[order], w[order]
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def gauss_legendre(n: int) -> SegmentRule:
    """n-point Gauss-Legendre rule on [-1, 1], 1 <= n <= 128."""
    if not 1 <= n <= MAX_RULE:
        raise ValueError(f"Gauss-Legendre rule size must lie in [1, {MAX_RULE}], got {n}")
    nodes, weights = _legendre_rule(int(n))
    return SegmentRule(nodes, weights)


def oscillation_nodes(k: float, length: float, extra: int = 0) -> int:
    """Node count resolving an integrand that oscillates at wavenumber k."""
    n = max(8, math.ceil(1.5 * k * length / math.pi) + 6) + extra
    return min(n, MAX_RULE)


def segment_rule(a, b, n: int) -> SegmentRule:
    """Gauss-Legendre rule mapped onto the segment [a, b]."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    ref = gauss_legendre(n)
    t = 0.5 * (ref.nodes + 1.0)
    pts = a[None, :] + t[:, None] * (b - a)[None, :]
    length = float(np.hypot(*(b - a)))
    return SegmentRule(pts, 0.5 * length * ref.weights)


def psi(z):
    """(exp(z) - 1) / z with the removable singularity at 0 filled in."""
    z = np.asarray(z, dtype=complex)
    out = np.empty_like(z)
    small = np.abs(z) < PSI_TAYLOR_RADIUS
    if small.any():
        zs = z[small]
        acc = np.zeros_like(zs)
        term = np.ones_like(zs)
        for n in range(PSI_TAYLOR_TERMS):
            acc += term
            term = term * zs / (n + 2)
        out[small] = acc
    big = ~small
    if big.any():
        zb = z[big]
        out[big] = np.expm1(zb) / zb
    if out.ndim == 0:
        return complex(out)
    return out


def segment_integral_exp(w, a, b, origin=None):
    """Exact integral of exp(w . (x - origin)) over the segment [a, b].

    ``w`` may carry leading batch dimensions: shape (..., 2).
    """
    w = np.asarray(w, dtype=complex)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    o = np.zeros(2) if origin is None else np.asarray(origin, dtype=float)
    length = float(np.hypot(*(b - a)))
    wa = w @ (a - o)
    wd = w @ (b - a)
    res = np.exp(wa) * length * psi(wd)
    return complex(res) if np.ndim(res) == 0 else res


def _polygon_edges(poly: np.ndarray):
    a = poly
    b = np.roll(poly, -1, axis=0)
    d = b - a
    lengths = np.hypot(d[:, 0], d[:, 1])
    normals = np.stack([d[:, 1], -d[:, 0]], axis=1) / lengths[:, None]
    return a, b, normals


def signed_area(poly) -> float:
    p = np.asarray(poly, dtype=float)
    x, y = p[:, 0], p[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


@lru_cache(maxsize=None)
def _triangle_reference(n: int):
    # collapsed tensor Gauss (Duffy) on the unit triangle (0,0),(1,0),(0,1)
    g = gauss_legendre(n)
    t = 0.5 * (g.nodes + 1.0)
    wt = 0.5 * g.weights
    u, v = np.meshgrid(t, t, indexing="ij")
    wu, wv = np.meshgrid(wt, wt, indexing="ij")
    xi = u * (1.0 - v)
    eta = v
    w = wu * wv * (1.0 - v)
    return np.stack([xi.ravel(), eta.ravel()], axis=1), w.ravel()


def triangle_rule(tri, n: int):
    """Tensorised n x n collapsed Gauss rule on a triangle: (points, weights)."""
    tri = np.asarray(tri, dtype=float)
    ref, w = _triangle_reference(n)
    e1 = tri[1] - tri[0]
    e2 = tri[2] - tri[0]
    jac = abs(e1[0] * e2[1] - e1[1] * e2[0])
    pts = tri[0] + ref[:, :1] * e1 + ref[:, 1:] * e2
    return pts, w * jac


def polygon_rule(poly, n: int):
    """Quadrature on a simple polygon by fan triangulation from vertex 0.

    Exact for star-shaped polygons with respect to vertex 0 (in particular
    convex ones); signed triangle weights keep it exact for any simple
    polygon since the fan contributions cancel outside.
    """
    poly = np.asarray(poly, dtype=float)
    pts, wts = [], []
    for i in range(1, len(poly) - 1):
        tri = poly[[0, i, i + 1]]
        p, w = triangle_rule(tri, n)
        sign = 1.0 if signed_area(tri) >= 0 else -1.0
        pts.append(p)
        wts.append(sign * w)
    return np.concatenate(pts), np.concatenate(wts)


def polygon_integral_exp(w, poly, origin=None) -> complex:
    """Exact integral of exp(w . (x - origin)) over a CCW simple polygon."""
    w = np.asarray(w, dtype=complex)
    poly = np.asarray(poly, dtype=float)
    if len(poly) < 3 or signed_area(poly) <= 0:
        raise ValueError("degenerate or clockwise polygon")
    o = np.zeros(2) if origin is None else np.asarray(origin, dtype=float)
    ww = complex(w @ w)
    wnorm2 = float(np.real(np.vdot(w, w)))
    if abs(ww) <= DEGENERATE_WW * max(1.0, wnorm2):
        pts, wts = polygon_rule(poly, FALLBACK_NODES)
        return complex(np.sum(wts * np.exp((pts - o) @ w)))
    a, b, normals = _polygon_edges(poly)
    total = 0.0j
    for ai, bi, ni in zip(a, b, normals):
        total += (w @ ni) * segment_integral_exp(w, ai, bi, o)
    return total / ww


def facet_integral(f, a, b, k: float, extra: int = 0) -> complex:
    """Integrate ``f(points)`` over the segment [a, b] with the oscillation rule."""
    length = float(np.hypot(*(np.asarray(b, float) - np.asarray(a, float))))
    rule = segment_rule(a, b, oscillation_nodes(k, length, extra))
    return rule.integrate(f(rule.nodes))
