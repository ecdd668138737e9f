"""Norms, errors, convergence orders and conditioning studies.

Skeleton norms are evaluated from sampled trace rows: for a norm made of
weighted squared trace combinations, each facet contributes rows
``sqrt(w_q * weight) * combo(traces)(x_q)``, and the norm is the Euclidean
norm of the stacked rows.  The same rows built for a whole discrete space
turn best-approximation problems into ordinary least squares.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import quadrature as quad
from .basis import (
    CircularWaves,
    LocalSpace,
    dof_offsets,
    equispaced_directions,
    oscillation_hint,
)
from .forms import BoundaryData, FluxParameters, LSWeights, assemble_tdg
from .linalg import SATURATION, lu_solve, svd_cond
from .mesh import Facet, Mesh
from .specialfn import bessel_j_sequence, hankel1_sequence

NORM_EXTRA_NODES = 16


class AnalysisError(ValueError):
    pass


# ---------------------------------------------------------------------------
# fields: anything with traces(element, points) -> (values (n,), grads (n, 2))
# ---------------------------------------------------------------------------


class _Field:
    order_hint = 0

    def traces(self, element: int, points):
        raise NotImplementedError

    def __sub__(self, other):
        return Difference(self, other)

    def __mul__(self, c):
        return Scaled(self, c)

    __rmul__ = __mul__


class ExactSolution(_Field):
    """Closed-form Helmholtz solution; subclasses give ``value``/``gradient``."""

    k: float

    def value(self, points) -> np.ndarray:
        raise NotImplementedError

    def gradient(self, points) -> np.ndarray:
        raise NotImplementedError

    def traces(self, element, points):
        pts = np.atleast_2d(np.asarray(points, float))
        return self.value(pts), self.gradient(pts)

    def __call__(self, points):
        return self.traces(0, points)


@dataclass(frozen=True, eq=False)
class PlaneWaveSolution(ExactSolution):
    k: float
    direction: tuple = (1.0, 0.0)
    amplitude: complex = 1.0

    def __post_init__(self):
        d = np.asarray(self.direction, dtype=complex)
        if abs(d @ d - 1.0) > 1e-12:
            raise AnalysisError("plane-wave direction must satisfy d . d = 1")

    def value(self, points):
        d = np.asarray(self.direction, dtype=complex)
        return self.amplitude * np.exp(1j * self.k * (np.atleast_2d(points) @ d))

    def gradient(self, points):
        d = np.asarray(self.direction, dtype=complex)
        return 1j * self.k * d[None, :] * self.value(points)[:, None]


@dataclass(frozen=True, eq=False)
class FourierBesselSolution(ExactSolution):
    """J_l(k r) e^{i l theta} about ``center``."""

    k: float
    order: int = 0
    center: tuple = (0.0, 0.0)

    @property
    def order_hint(self):
        return abs(self.order)

    def _z(self, pts):
        rel = np.atleast_2d(pts) - np.asarray(self.center, float)
        r = np.hypot(rel[:, 0], rel[:, 1])
        jn = bessel_j_sequence(0.0, abs(self.order) + 1, self.k * r)
        e = np.where(r > 0, (rel[:, 0] + 1j * rel[:, 1]) / np.where(r > 0, r, 1.0), 1.0)

        def z(m):
            sign = (-1.0) ** abs(m) if m < 0 else 1.0
            return sign * jn[abs(m)] * e**m

        return z

    def value(self, points):
        return self._z(points)(self.order)

    def gradient(self, points):
        z = self._z(points)
        l = self.order
        gx = 0.5 * self.k * (z(l - 1) - z(l + 1))
        gy = 0.5j * self.k * (z(l - 1) + z(l + 1))
        return np.stack([gx, gy], axis=1)


@dataclass(frozen=True, eq=False)
class FundamentalSolution(ExactSolution):
    """H0^(1)(k |x - pole|); the pole must lie outside the closed domain."""

    k: float
    pole: tuple = (3.0, 0.0)

    def _parts(self, points):
        rel = np.atleast_2d(points) - np.asarray(self.pole, float)
        r = np.hypot(rel[:, 0], rel[:, 1])
        if np.any(r == 0):
            raise AnalysisError("fundamental solution evaluated at its pole")
        return rel, r, hankel1_sequence(1, self.k * r)

    def value(self, points):
        return self._parts(points)[2][0]

    def gradient(self, points):
        rel, r, h = self._parts(points)
        return (-self.k * h[1] / r)[:, None] * rel


class Difference(_Field):
    def __init__(self, a, b):
        self.a, self.b = a, b
        self.order_hint = max(getattr(a, "order_hint", 0), getattr(b, "order_hint", 0))

    def traces(self, element, points):
        va, ga = self.a.traces(element, points)
        vb, gb = self.b.traces(element, points)
        return va - vb, ga - gb


class Scaled(_Field):
    def __init__(self, a, c):
        self.a, self.c = a, complex(c)
        self.order_hint = getattr(a, "order_hint", 0)

    def traces(self, element, points):
        v, g = self.a.traces(element, points)
        return self.c * v, self.c * g


class DiscreteSolution(_Field):
    """Piecewise Trefftz function sum_j c_j phi_j on a mesh."""

    def __init__(self, mesh: Mesh, spaces: Sequence[LocalSpace], coeffs):
        self.mesh = mesh
        self.spaces = list(spaces)
        self.offsets = dof_offsets(self.spaces)
        self.coeffs = np.asarray(coeffs, dtype=complex)
        if self.coeffs.shape != (self.offsets[-1],):
            raise AnalysisError("coefficient vector does not match the dof count")
        self.order_hint = max(oscillation_hint(s)[1] for s in self.spaces)

    def local(self, element: int) -> np.ndarray:
        return self.coeffs[self.offsets[element] : self.offsets[element + 1]]

    def traces(self, element, points):
        ev = self.spaces[element].eval(np.atleast_2d(points))
        c = self.local(element)
        return ev.values @ c, np.einsum("npd,p->nd", ev.gradients, c)

    def value(self, points) -> np.ndarray:
        """Values at arbitrary points; nan outside the domain."""
        pts = np.atleast_2d(np.asarray(points, float))
        owner = self.mesh.locate(pts)
        out = np.full(len(pts), np.nan + 0j)
        for e in np.unique(owner[owner >= 0]):
            sel = owner == e
            out[sel] = self.traces(int(e), pts[sel])[0]
        return out


# ---------------------------------------------------------------------------
# norm specifications
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LambdaSigma:
    lam: float | None = None  # default k
    sigma: float = 1.0


@dataclass(frozen=True)
class TDGNorm:
    flux: FluxParameters = field(default_factory=FluxParameters)


@dataclass(frozen=True)
class TDGPlusNorm:
    flux: FluxParameters = field(default_factory=FluxParameters)


@dataclass(frozen=True)
class LSNorm:
    weights: LSWeights = field(default_factory=LSWeights)


@dataclass(frozen=True)
class L2Domain:
    pass


NormSpec = LambdaSigma | TDGNorm | TDGPlusNorm | LSNorm | L2Domain

_JV = ((1, "v", 1.0), (2, "v", -1.0))
_JN = ((1, "dn", 1.0), (2, "dn", -1.0))
_JX = ((1, "gx", 1.0), (2, "gx", -1.0))
_JY = ((1, "gy", 1.0), (2, "gy", -1.0))
_AV = ((1, "v", 0.5), (2, "v", 0.5))
_AX = ((1, "gx", 0.5), (2, "gx", 0.5))
_AY = ((1, "gy", 0.5), (2, "gy", 0.5))
_V = ((1, "v", 1.0),)
_N = ((1, "dn", 1.0),)


def _norm_terms(spec, mesh: Mesh, f: Facet, k: float, theta: float):
    """List of (weight, combo): the squared norm is sum weight * |combo|^2."""
    if isinstance(spec, (LambdaSigma, LSNorm)):
        if isinstance(spec, LambdaSigma):
            lam = k if spec.lam is None else float(spec.lam)
            sig = float(spec.sigma)
            full = False
            if not (lam > 0 and sig > 0):
                raise AnalysisError("lambda and sigma must be positive")
        else:
            lam, sig = spec.weights.values(f, k)
            full = spec.weights.gradient_jump == "full"
        if f.kind == "interior":
            grad = [(sig**2, _JX), (sig**2, _JY)] if full else [(sig**2, _JN)]
            return [(lam**2, _JV)] + grad
        if f.kind == "robin":
            return [(sig**2, ((1, "dn", 1.0), (1, "v", 1j * k * theta)))]
        return [(lam**2, _V)]
    if isinstance(spec, (TDGNorm, TDGPlusNorm)):
        al, be, de = spec.flux.values(mesh, f, k)
        plus = isinstance(spec, TDGPlusNorm)
        if f.kind == "interior":
            out = [(be / k, _JN), (k * al, _JV)]
            if plus:
                out += [(k / be, _AV), (1 / (k * al), _AX), (1 / (k * al), _AY)]
            return out
        if f.kind == "robin":
            out = [(de / (k * theta), _N), (k * (1 - de) * theta, _V)]
            if plus:
                out.append((k * theta / de, _V))
            return out
        out = [(k * al, _V)]
        if plus:
            out.append((1 / (k * al), _N))
        return out
    raise AnalysisError(f"unsupported norm specification {spec!r}")


def _facet_rule(f: Facet, k: float, hint: int, extra: int):
    n = quad.oscillation_nodes(2.0 * k * math.sqrt(2.0), f.length, extra + hint)
    return quad.segment_rule(f.a, f.b, n)


def skeleton_rows(
    mesh: Mesh, spec, k: float, columns, theta: float = 1.0, extra: int = NORM_EXTRA_NODES, hint: int | None = None
):
    """Stacked weighted trace rows; squared norm of R @ c is the squared norm.

    ``columns`` is either a field (one column) or a list of local spaces
    (one column per global dof).  Pass the same ``hint`` to get matching
    quadrature (and rows) for different column sets.
    """
    given = hint
    if isinstance(columns, (list, tuple)):
        spaces = list(columns)
        offsets = dof_offsets(spaces)
        ncol = int(offsets[-1])
        hint = max(oscillation_hint(s)[1] for s in spaces)

        def tr(e, pts):
            ev = spaces[e].eval(pts)
            return ev.values, ev.gradients, slice(offsets[e], offsets[e + 1])

    else:
        ncol = 1
        hint = 2 * getattr(columns, "order_hint", 0)

        def tr(e, pts):
            v, g = columns.traces(e, pts)
            return v[:, None], g[:, None, :], slice(0, 1)

    if given is not None:
        hint = given
    blocks = []
    for f in mesh.facets:
        terms = _norm_terms(spec, mesh, f, k, theta)
        rule = _facet_rule(f, k, hint, extra)
        n = f.normal
        sides = {}
        for s, e in enumerate(f.elements, start=1):
            v, g, sl = tr(e, rule.nodes)
            sides[s] = (
                {"v": v, "dn": g[..., 0] * n[0] + g[..., 1] * n[1], "gx": g[..., 0], "gy": g[..., 1]},
                sl,
            )
        sw = np.sqrt(rule.weights)[:, None]
        for weight, combo in terms:
            row = np.zeros((len(sw), ncol), dtype=complex)
            for side, kind, c in combo:
                tabs, sl = sides[side]
                row[:, sl] += c * tabs[kind]
            blocks.append(math.sqrt(weight) * sw * row)
    return np.vstack(blocks)


def _element_rule(mesh: Mesh, e: int, k: float, hint: int, extra: int):
    diam = mesh.metrics[e].diameter
    n = quad.oscillation_nodes(2.0 * k * math.sqrt(2.0), diam, extra + hint)
    return quad.polygon_rule(mesh.polygon(e), n)


def l2_norm(v, mesh: Mesh, k: float, extra: int = 0) -> float:
    hint = 2 * getattr(v, "order_hint", 0)
    total = 0.0
    for e in range(mesh.n_elements):
        pts, w = _element_rule(mesh, e, k, hint, extra)
        total += float(np.sum(w * np.abs(v.traces(e, pts)[0]) ** 2))
    return math.sqrt(max(total, 0.0))


def skeleton_norm(v, spec, mesh: Mesh, k: float, theta: float = 1.0, extra: int = NORM_EXTRA_NODES) -> float:
    """Norm of a field (discrete, exact or a difference) on the mesh skeleton.

    ``L2Domain`` is accepted too and returns the absolute L2(Omega) norm.
    """
    if isinstance(spec, L2Domain):
        return l2_norm(v, mesh, k, extra)
    rows = skeleton_rows(mesh, spec, k, v, theta, extra)
    return float(np.linalg.norm(rows[:, 0]))


def l2_domain_error(u_h, u, mesh: Mesh, k: float, extra: int = 0) -> float:
    """Relative L2(Omega) error ||u - u_h|| / ||u||."""
    ref = l2_norm(u, mesh, k, extra)
    if ref == 0.0:
        raise AnalysisError("exact solution has zero L2 norm")
    return l2_norm(Difference(u, u_h), mesh, k, extra) / ref


def eoc(records: Sequence[tuple[float, float]]) -> list[float]:
    """Orders log(e_i / e_{i+1}) / log(h_i / h_{i+1}) from (h, error) pairs."""
    hs = np.array([r[0] for r in records], float)
    es = np.array([r[1] for r in records], float)
    if np.any(np.diff(hs) >= 0):
        raise AnalysisError("mesh sizes must be strictly decreasing")
    if np.any(es <= 0):
        raise AnalysisError("errors must be positive")
    return list(np.log(es[:-1] / es[1:]) / np.log(hs[:-1] / hs[1:]))


# ---------------------------------------------------------------------------
# Theorem-level diagnostics
# ---------------------------------------------------------------------------


def l2_rows(mesh: Mesh, spaces: Sequence[LocalSpace], k: float, extra: int = 0) -> np.ndarray:
    """Rows with ||R c|| = ||v_c||_{L2(Omega)} for the discrete space."""
    offsets = dof_offsets(spaces)
    hint = max(oscillation_hint(s)[1] for s in spaces)
    blocks = []
    for e, s in enumerate(spaces):
        pts, w = _element_rule(mesh, e, k, hint, extra)
        row = np.zeros((len(w), offsets[-1]), dtype=complex)
        row[:, offsets[e] : offsets[e + 1]] = np.sqrt(w)[:, None] * s.eval(pts).values
        blocks.append(row)
    return np.vstack(blocks)


def random_coefficients(rng: np.random.Generator, n: int, count: int | None = None) -> np.ndarray:
    """Complex standard normal vectors."""
    shape = (n,) if count is None else (count, n)
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)


def mow_ratio(
    mesh: Mesh,
    spaces: Sequence[LocalSpace],
    lam: float,
    sigma: float,
    trials: int,
    k: float,
    theta: float = 1.0,
    seed: int = 42,
) -> float:
    """Largest observed ||v||_{L2} / |||v|||_{lambda, sigma} over random discrete v."""
    if not (lam > 0 and sigma > 0):
        raise AnalysisError("lambda and sigma must be positive")
    rng = np.random.default_rng(seed)
    skel = skeleton_rows(mesh, LambdaSigma(lam, sigma), k, list(spaces), theta)
    vol = l2_rows(mesh, spaces, k)
    c = random_coefficients(rng, skel.shape[1], trials).T
    top = np.linalg.norm(vol @ c, axis=0)
    bottom = np.linalg.norm(skel @ c, axis=0)
    if np.any(bottom == 0):
        raise AnalysisError("vanishing skeleton norm for a nonzero Trefftz function")
    return float(np.max(top / bottom))


@dataclass
class QuasiOptimality:
    error_tdg: float  # |||u - u_TDG|||_TDG
    best_plus: float  # min_v |||u - v|||_TDG+
    solution: DiscreteSolution

    @property
    def ratio(self) -> float:
        return self.error_tdg / self.best_plus


def tdg_quasi_optimality(
    mesh: Mesh,
    spaces: Sequence[LocalSpace],
    flux: FluxParameters,
    u: ExactSolution,
    k: float,
    theta: float = 1.0,
) -> QuasiOptimality:
    data = BoundaryData.from_exact(u, k, theta)
    system = assemble_tdg(mesh, spaces, flux, data, k)
    uh = DiscreteSolution(mesh, spaces, lu_solve(system.matrix, system.rhs).solution)
    err = skeleton_norm(u - uh, TDGNorm(flux), mesh, k, theta)
    hint = max(max(oscillation_hint(s)[1] for s in spaces), 2 * u.order_hint)
    rows = skeleton_rows(mesh, TDGPlusNorm(flux), k, list(spaces), theta, hint=hint)
    target = skeleton_rows(mesh, TDGPlusNorm(flux), k, u, theta, hint=hint)[:, 0]
    c = np.linalg.lstsq(rows, target, rcond=None)[0]
    best = float(np.linalg.norm(rows @ c - target))
    return QuasiOptimality(err, best, uh)


# ---------------------------------------------------------------------------
# conditioning
# ---------------------------------------------------------------------------


def square(h: float, center=(0.0, 0.0)) -> np.ndarray:
    cx, cy = center
    r = 0.5 * h
    return np.array([[cx - r, cy - r], [cx + r, cy - r], [cx + r, cy + r], [cx - r, cy + r]])


def pw_mass_matrix(h: float, center, k: float, directions) -> np.ndarray:
    """Element mass matrix of plane waves on the square of side ``h``."""
    dirs = np.array([getattr(d, "d", d) for d in directions], dtype=complex)
    p = len(dirs)
    for i in range(p):
        for j in range(i):
            if np.linalg.norm(dirs[i] - dirs[j]) < 1e-12:
                raise AnalysisError("directions must be distinct")
    poly = square(h, center)
    m = np.zeros((p, p), dtype=complex)
    for l in range(p):
        for j in range(l, p):
            if j == l and not np.any(dirs[l].imag):
                m[l, l] = h * h
                continue
            val = quad.polygon_integral_exp(1j * k * (dirs[l] - dirs[j].conj()), poly, center)
            m[l, j] = val
            m[j, l] = np.conj(val)
    return m


def ghp_gram(h: float, center, k: float, degree: int, scaled: bool = True, scale_h: float | None = None) -> np.ndarray:
    """L2 Gram matrix of circular waves of degree ``degree`` on a square, by quadrature.

    The scaling argument is k * scale_h with ``scale_h`` defaulting to the
    side ``h``, so that the scaling sees the same kh as the sweep.
    """
    poly = square(h, center)
    sh = h if scale_h is None else scale_h
    sp = LocalSpace(0, np.asarray(center, float), float(k), CircularWaves(degree, scaled), sh, poly)
    n = quad.oscillation_nodes(2.0 * k * math.sqrt(2.0), h, 2 * degree + 8)
    pts, w = quad.polygon_rule(poly, n)
    v = sp.eval(pts).values
    g = v.conj().T @ (w[:, None] * v)
    return 0.5 * (g + g.conj().T)


@dataclass(frozen=True)
class ConditioningRecord:
    family: str
    p_or_q: int
    k: float
    h: float
    cond2: float
    saturated: bool

    @property
    def kh(self) -> float:
        return self.k * self.h


@dataclass(frozen=True)
class ConditioningSweep:
    """Sweep over p (PW) or q (GHP) on a square of side ``h``."""

    family: str  # "PW" or "GHP"
    k: float
    h: float
    values: tuple[int, ...]
    center: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.family not in ("PW", "GHP"):
            raise AnalysisError("family must be PW or GHP")
        if not (self.k > 0 and self.h > 0):
            raise AnalysisError("k and h must be positive")
        if any(v < (1 if self.family == "PW" else 0) for v in self.values):
            raise AnalysisError("sweep values out of range")


def conditioning_sweep(spec: ConditioningSweep) -> list[ConditioningRecord]:
    """cond2 per sweep value, ordered by value; stops after the first saturated one."""
    out = []
    for v in sorted(spec.values):
        if spec.family == "PW":
            mat = pw_mass_matrix(spec.h, spec.center, spec.k, equispaced_directions(v))
        else:
            mat = ghp_gram(spec.h, spec.center, spec.k, v)
        cond = svd_cond(mat)[0]
        sat = not cond <= SATURATION
        out.append(ConditioningRecord(spec.family, int(v), spec.k, spec.h, cond, sat))
        if sat:
            break
    return out


CONDITIONING_HEADER = "family,p_or_q,k,h,kh,cond2,saturated"


def fmt(x: float) -> str:
    """CSV cell for a float: shortest round-trip repr, 'inf' for infinities, never nan."""
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(float(x))


def conditioning_csv(records: Sequence[ConditioningRecord]) -> str:
    buf = io.StringIO()
    buf.write(CONDITIONING_HEADER + "\n")
    for r in records:
        buf.write(
            ",".join(
                [r.family, str(r.p_or_q), fmt(r.k), fmt(r.h), fmt(r.kh), fmt(r.cond2), "true" if r.saturated else "false"]
            )
            + "\n"
        )
    return buf.getvalue()


class MFSSolution(_Field):
    """sum_l c_l H0^(1)(k |x - y_l|); defined everywhere except at the poles."""

    def __init__(self, k: float, poles, coeffs):
        self.k = float(k)
        self.poles = np.atleast_2d(np.asarray(poles, float))
        self.coeffs = np.asarray(coeffs, dtype=complex)

    def traces(self, element, points):
        pts = np.atleast_2d(np.asarray(points, float))
        rel = pts[:, None, :] - self.poles[None, :, :]
        r = np.hypot(rel[..., 0], rel[..., 1])
        h = hankel1_sequence(1, self.k * r)
        grad = (-self.k * h[1] / r)[..., None] * rel
        return h[0] @ self.coeffs, np.einsum("npd,p->nd", grad, self.coeffs)

    def value(self, points):
        return self.traces(0, points)[0]


def disc_rule(radius: float, center=(0.0, 0.0), n_r: int = 40, n_t: int = 80):
    """Gauss in r times trapezoid in theta on a disc: (points, weights)."""
    g = quad.gauss_legendre(n_r)
    r = 0.5 * radius * (g.nodes + 1.0)
    wr = 0.5 * radius * g.weights * r
    t = 2.0 * math.pi * np.arange(n_t) / n_t
    rr, tt = np.meshgrid(r, t, indexing="ij")
    pts = np.stack([rr.ravel() * np.cos(tt.ravel()), rr.ravel() * np.sin(tt.ravel())], axis=1)
    w = np.repeat(wr, n_t) * (2.0 * math.pi / n_t)
    return pts + np.asarray(center, float), w


def disc_l2_error(u_h, u, radius: float, center=(0.0, 0.0), n_r: int = 40, n_t: int = 80) -> float:
    pts, w = disc_rule(radius, center, n_r, n_t)
    ref = math.sqrt(float(np.sum(w * np.abs(u.traces(0, pts)[0]) ** 2)))
    if ref == 0.0:
        raise AnalysisError("exact solution has zero L2 norm")
    diff = u.traces(0, pts)[0] - u_h.traces(0, pts)[0]
    return math.sqrt(float(np.sum(w * np.abs(diff) ** 2))) / ref
