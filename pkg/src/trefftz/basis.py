"""Element-local Trefftz spaces.

Every family evaluates values and analytic gradients at arrays of points.
Member order is fixed per family so coefficient vectors are reproducible:

* plane waves: by direction index;
* circular waves (GHP) and multipoles: l = 0, 1, -1, ..., q, -q;
* wave-based (WBM): x-set then y-set, j ascending, (+, -) pairs;
* fundamental solutions: by pole index;
* corner waves: l = 1, 2, ... ascending.

Plane and wave-based families also expose an "atoms" form, a matrix of
coefficients over pure exponentials ``exp(w . (x - origin))``; assembly uses
it to integrate products in closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import specialfn
from .mesh import Mesh, _contains

DIRECTION_GAP = 1e-10


class BasisError(ValueError):
    """Invalid basis parameters or evaluation outside the domain of a member."""


@dataclass(frozen=True)
class Direction:
    """Complex direction with d . d = 1 (unconjugated)."""

    d: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.d, dtype=complex).reshape(2)
        if abs(d @ d - 1.0) > 1e-14 * max(1.0, float(np.vdot(d, d).real)):
            raise BasisError(f"direction {d} does not satisfy d.d = 1")
        object.__setattr__(self, "d", d)

    @classmethod
    def from_angle(cls, theta: float) -> "Direction":
        return cls(np.array([math.cos(theta), math.sin(theta)]))

    @classmethod
    def evanescent(cls, propagation: float, decay: float) -> "Direction":
        """Wave oscillating along angle ``propagation`` and decaying at rate k*``decay``
        in the orthogonal (+90 degree) direction."""
        e = np.array([math.cos(propagation), math.sin(propagation)])
        perp = np.array([-e[1], e[0]])
        return cls(math.sqrt(1.0 + decay * decay) * e + 1j * decay * perp)

    @property
    def is_real(self) -> bool:
        return bool(np.all(self.d.imag == 0.0))


def equispaced_directions(p: int) -> list[Direction]:
    """d_l = (cos(2 pi l / p), sin(2 pi l / p)), l = 0..p-1."""
    if p < 1:
        raise BasisError("number of directions must be at least 1")
    out = []
    for l in range(p):
        t = 2.0 * math.pi * l / p
        c, s = math.cos(t), math.sin(t)
        # exact zeros at quarter turns keep the p = 4 set exactly axis-aligned
        if 4 * l % p == 0:
            c, s = round(c), round(s)
        out.append(Direction(np.array([c, s])))
    return out


# ---------------------------------------------------------------------------
# families
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PlaneWaves:
    directions: tuple[Direction, ...]

    name = "pw"

    def __post_init__(self):
        dirs = tuple(self.directions)
        object.__setattr__(self, "directions", dirs)
        if not dirs:
            raise BasisError("plane-wave space needs at least one direction")
        arr = np.array([d.d for d in dirs])
        for i in range(len(arr)):
            for j in range(i + 1, len(arr)):
                if np.max(np.abs(arr[i] - arr[j])) < DIRECTION_GAP:
                    raise BasisError(f"directions {i} and {j} coincide")

    @classmethod
    def equispaced(cls, p: int) -> "PlaneWaves":
        return cls(tuple(equispaced_directions(p)))

    def dimension(self, space) -> int:
        return len(self.directions)


@dataclass(frozen=True)
class CircularWaves:
    """Generalised harmonic polynomials J_l(k r) e^{i l theta}, |l| <= degree."""

    degree: int
    scaled: bool = False

    name = "ghp"

    def __post_init__(self):
        if self.degree < 0:
            raise BasisError("GHP degree must be nonnegative")

    def dimension(self, space) -> int:
        return 2 * self.degree + 1


@dataclass(frozen=True)
class FundamentalSolutions:
    poles: np.ndarray = field(compare=False)

    name = "mfs"

    def __post_init__(self):
        poles = np.atleast_2d(np.asarray(self.poles, dtype=float))
        if poles.shape[1] != 2 or len(poles) == 0:
            raise BasisError("poles must be a nonempty (N, 2) array")
        object.__setattr__(self, "poles", poles)

    def dimension(self, space) -> int:
        return len(self.poles)


@dataclass(frozen=True)
class Multipoles:
    pole: tuple[float, float]
    degree: int

    name = "multipole"

    def __post_init__(self):
        if self.degree < 0:
            raise BasisError("multipole degree must be nonnegative")

    def dimension(self, space) -> int:
        return 2 * self.degree + 1


@dataclass(frozen=True)
class WaveBased:
    truncation: float = 1.0

    name = "wbm"

    def __post_init__(self):
        if not self.truncation > 0:
            raise BasisError("WBM truncation N must be positive")

    def counts(self, k: float, lx: float, ly: float) -> tuple[int, int]:
        return (
            math.floor(self.truncation * k * lx / math.pi + 1e-12),
            math.floor(self.truncation * k * ly / math.pi + 1e-12),
        )

    def dimension(self, space) -> int:
        jx, jy = self.counts(space.k, space.box[2], space.box[3])
        return 4 + 2 * (jx + jy)


@dataclass(frozen=True)
class CornerWaves:
    """J_{l/alpha}(k r) sin(l theta / alpha), theta measured from ``edge_angle``."""

    corner: tuple[float, float]
    alpha: float
    count: int
    edge_angle: float = 0.0

    name = "corner"

    def __post_init__(self):
        if not 0.0 < self.alpha < 2.0:
            raise BasisError("corner opening alpha must lie in (0, 2)")
        if self.count < 1:
            raise BasisError("corner-wave count must be at least 1")

    def dimension(self, space) -> int:
        return self.count


Family = PlaneWaves | CircularWaves | FundamentalSolutions | Multipoles | WaveBased | CornerWaves


# ---------------------------------------------------------------------------
# local space
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BasisEval:
    values: np.ndarray  # (npts, p)
    gradients: np.ndarray  # (npts, p, 2)


@dataclass(frozen=True, eq=False)
class LocalSpace:
    element: int
    center: np.ndarray
    k: float
    family: Family
    h: float
    polygon: np.ndarray
    box: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)  # x0, y0, Lx, Ly

    def __post_init__(self):
        if not self.k > 0:
            raise BasisError("wavenumber must be positive")
        fam = self.family
        if isinstance(fam, FundamentalSolutions):
            _check_outside(self.polygon, fam.poles, "MFS pole")
        if isinstance(fam, Multipoles):
            _check_outside(self.polygon, np.array([fam.pole], dtype=float), "multipole centre")

    @property
    def dim(self) -> int:
        return self.family.dimension(self)

    def eval(self, points) -> BasisEval:
        return eval_basis(self, points)

    @property
    def has_atoms(self) -> bool:
        if isinstance(self.family, PlaneWaves):
            return True
        if isinstance(self.family, WaveBased):
            return not _wbm_grazing(self)
        return False

    def atoms(self, origin) -> tuple[np.ndarray, np.ndarray]:
        """(W, C) with member j equal to sum_m C[j, m] exp(W[m] . (x - origin))."""
        o = np.asarray(origin, dtype=float)
        fam = self.family
        if isinstance(fam, PlaneWaves):
            w = 1j * self.k * np.array([d.d for d in fam.directions])
            return w, np.diag(np.exp(w @ (o - self.center)))
        if isinstance(fam, WaveBased) and self.has_atoms:
            return _wbm_atoms(self, o)
        raise BasisError(f"family {fam.name!r} has no exponential form")


def _check_outside(polygon, pts, what):
    poly = np.asarray(polygon, dtype=float)
    inside = _contains(poly, np.asarray(pts, dtype=float))
    if inside.any():
        raise BasisError(f"{what} {int(np.flatnonzero(inside)[0])} lies in the element closure")


def wbm_box(polygon) -> tuple[float, float]:
    """Extents (L_x, L_y) of the smallest axis-aligned box containing the polygon."""
    p = np.asarray(polygon, dtype=float)
    span = p.max(axis=0) - p.min(axis=0)
    return float(span[0]), float(span[1])


def make_space(mesh: Mesh, element: int, k: float, family: Family, center=None) -> LocalSpace:
    poly = mesh.polygon(element)
    met = mesh.metrics[element]
    lo = poly.min(axis=0)
    lx, ly = wbm_box(poly)
    c = met.barycentre if center is None else np.asarray(center, dtype=float)
    return LocalSpace(element, c, float(k), family, met.diameter, poly, (lo[0], lo[1], lx, ly))


def build_spaces(mesh: Mesh, k: float, family: Family | Sequence[Family]) -> list[LocalSpace]:
    """One local space per element; a single family is used uniformly."""
    fams = [family] * mesh.n_elements if not isinstance(family, (list, tuple)) else list(family)
    if len(fams) != mesh.n_elements:
        raise BasisError("one family per element required")
    return [make_space(mesh, e, k, f) for e, f in enumerate(fams)]


def dof_offsets(spaces: Sequence[LocalSpace]) -> np.ndarray:
    return np.concatenate([[0], np.cumsum([s.dim for s in spaces])]).astype(int)


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------


def eval_basis(space: LocalSpace, points) -> BasisEval:
    """Values (npts, p) and gradients (npts, p, 2) of all members at ``points``."""
    pts = np.asarray(points, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    fam = space.family
    if isinstance(fam, PlaneWaves):
        val, grad = _eval_pw(space, pts)
    elif isinstance(fam, CircularWaves):
        val, grad = _eval_cylindrical(space, pts, space.center, fam.degree, regular=True)
        if fam.scaled:
            scale = ghp_scaling(space.k, space.h, fam.degree)
            val = val / scale
            grad = grad / scale[None, :, None]
    elif isinstance(fam, Multipoles):
        val, grad = _eval_cylindrical(space, pts, np.asarray(fam.pole, float), fam.degree, regular=False)
    elif isinstance(fam, FundamentalSolutions):
        val, grad = _eval_mfs(space.k, fam.poles, pts)
    elif isinstance(fam, WaveBased):
        val, grad = _eval_wbm(space, pts)
    elif isinstance(fam, CornerWaves):
        val, grad = _eval_corner(space, pts)
    else:  # pragma: no cover
        raise BasisError(f"unknown family {fam!r}")
    if single:
        return BasisEval(val[0], grad[0])
    return BasisEval(val, grad)


def _eval_pw(space, pts):
    d = np.array([dd.d for dd in space.family.directions])  # (p, 2)
    phase = 1j * space.k * ((pts - space.center) @ d.T)
    val = np.exp(phase)
    grad = 1j * space.k * val[:, :, None] * d[None, :, :]
    return val, grad


def cylindrical_order(degree: int) -> np.ndarray:
    """Member orders l = 0, 1, -1, ..., q, -q."""
    out = [0]
    for l in range(1, degree + 1):
        out += [l, -l]
    return np.array(out, dtype=int)


def ghp_scaling(k: float, h: float, degree: int) -> np.ndarray:
    """k * sqrt(J_l'(k h)^2 + J_l(k h)^2) per member, in canonical order."""
    seq = specialfn.bessel_j_sequence(0.0, degree + 1, k * h)
    ls = np.abs(cylindrical_order(degree))
    x = k * h
    der = np.where(ls == 0, -seq[1], seq[np.maximum(ls - 1, 0)] - ls / x * seq[ls])
    return k * np.sqrt(der**2 + seq[ls] ** 2)


def _eval_cylindrical(space, pts, centre, degree, regular):
    k = space.k
    rel = pts - centre
    r = np.hypot(rel[:, 0], rel[:, 1])
    if not regular and np.any(r == 0.0):
        raise BasisError("multipole evaluated at its centre")
    top = degree + 1
    if regular:
        radial = specialfn.bessel_j_sequence(0.0, top, k * r)  # (top+1, n)
    else:
        radial = specialfn.hankel1_sequence(top, k * r)
    safe_r = np.where(r > 0, r, 1.0)
    e = np.where(r > 0, (rel[:, 0] + 1j * rel[:, 1]) / safe_r, 1.0)  # e^{i theta}

    def z(m):
        # Z_m e^{i m theta} for any integer m, using Z_{-m} = (-1)^m Z_m
        a = abs(m)
        sign = (-1.0) ** a if m < 0 else 1.0
        return sign * radial[a] * e**m

    orders = cylindrical_order(degree)
    val = np.stack([z(l) for l in orders], axis=1)
    gx = np.stack([0.5 * k * (z(l - 1) - z(l + 1)) for l in orders], axis=1)
    gy = np.stack([0.5j * k * (z(l - 1) + z(l + 1)) for l in orders], axis=1)
    return val, np.stack([gx, gy], axis=-1)


def _eval_mfs(k, poles, pts):
    rel = pts[:, None, :] - poles[None, :, :]
    r = np.hypot(rel[..., 0], rel[..., 1])
    if np.any(r == 0.0):
        raise BasisError("fundamental solution evaluated at its pole")
    h = specialfn.hankel1_sequence(1, k * r)
    val = h[0]
    grad = (-k * h[1] / r)[..., None] * rel
    return val, grad


def _wbm_wavenumbers(space):
    jx, jy = space.family.counts(space.k, space.box[2], space.box[3])
    k = space.k
    kx = np.arange(jx + 1) * math.pi / space.box[2]
    ky = np.arange(jy + 1) * math.pi / space.box[3]
    # branch with Im >= 0
    sx = np.sqrt((k * k - kx * kx).astype(complex))
    sy = np.sqrt((k * k - ky * ky).astype(complex))
    return kx, sx, ky, sy


def _wbm_grazing(space) -> bool:
    _, sx, _, sy = _wbm_wavenumbers(space)
    k = space.k
    return bool(np.any(np.abs(sx) < 1e-12 * k) or np.any(np.abs(sy) < 1e-12 * k))


def _eval_wbm(space, pts):
    x0, y0, lx, ly = space.box
    X = pts[:, 0] - x0
    Y = pts[:, 1] - y0
    k = space.k
    kx, sx, ky, sy = _wbm_wavenumbers(space)
    vals, gxs, gys = [], [], []

    def pair(a, s, u, v, lv, swap):
        # members cos(a u) e^{+i s v} and cos(a u) e^{-i s (v - lv)} (or e^{-i s v})
        cu, su = np.cos(a * u), np.sin(a * u)
        if abs(s) < 1e-12 * k:
            # s = 0: both exponentials coincide; the second member becomes cos(a u) v
            out = [(cu + 0j, -a * su + 0j, 0j * v), (cu * v + 0j, -a * su * v + 0j, cu + 0j)]
        else:
            shift = lv if s.imag > 0 else 0.0
            ep = np.exp(1j * s * v)
            em = np.exp(-1j * s * (v - shift))
            out = [(cu * ep, -a * su * ep, 1j * s * cu * ep), (cu * em, -a * su * em, -1j * s * cu * em)]
        for val, du, dv in out:
            vals.append(val)
            if swap:
                gxs.append(dv)
                gys.append(du)
            else:
                gxs.append(du)
                gys.append(dv)

    for a, s in zip(kx, sx):
        pair(a, s, X, Y, ly, swap=False)
    for a, s in zip(ky, sy):
        pair(a, s, Y, X, lx, swap=True)
    val = np.stack(vals, axis=1)
    grad = np.stack([np.stack(gxs, axis=1), np.stack(gys, axis=1)], axis=-1)
    return val, grad


def _wbm_atoms(space, origin):
    x0, y0, lx, ly = space.box
    o_loc = origin - np.array([x0, y0])
    kx, sx, ky, sy = _wbm_wavenumbers(space)
    ws, rows = [], []

    def add(a, s, lv, swap):
        shift = lv if s.imag > 0 else 0.0
        for sign_s, off in ((1.0, 0.0), (-1.0, shift)):
            row = {}
            for sign_a in (1.0, -1.0):
                wu, wv = 1j * sign_a * a, 1j * sign_s * s
                w = np.array([wv, wu]) if swap else np.array([wu, wv])
                # exp(w . (x_loc)) * exp(-i sign_s s off) rewritten about origin
                const = 0.5 * np.exp(w @ o_loc) * np.exp(-1j * sign_s * s * off)
                ws.append(w)
                row[len(ws) - 1] = const
            rows.append(row)

    for a, s in zip(kx, sx):
        add(a, s, ly, swap=False)
    for a, s in zip(ky, sy):
        add(a, s, lx, swap=True)
    W = np.array(ws)
    C = np.zeros((len(rows), len(ws)), dtype=complex)
    for i, row in enumerate(rows):
        for j, c in row.items():
            C[i, j] = c
    return W, C


def _eval_corner(space, pts):
    fam = space.family
    k = space.k
    rel = pts - np.asarray(fam.corner, float)
    r = np.hypot(rel[:, 0], rel[:, 1])
    theta = np.mod(np.arctan2(rel[:, 1], rel[:, 0]) - fam.edge_angle, 2.0 * math.pi)
    # points just below the first edge wrap to ~2 pi; map them back to ~0
    theta = np.where(theta > math.pi * (1.0 + 0.5 * fam.alpha), theta - 2.0 * math.pi, theta)
    safe_r = np.where(r > 0, r, 1e-300)
    er = rel / safe_r[:, None]
    et = np.stack([-er[:, 1], er[:, 0]], axis=1)
    vals, grads = [], []
    for l in range(1, fam.count + 1):
        nu = l / fam.alpha
        j, dj = specialfn.bessel_j(nu, k * r)
        sn, cs = np.sin(nu * theta), np.cos(nu * theta)
        vals.append(j * sn)
        dr = k * dj * sn
        dt = nu * j * cs / safe_r
        grads.append(dr[:, None] * er + dt[:, None] * et)
    return np.stack(vals, axis=1).astype(complex), np.stack(grads, axis=1).astype(complex)


# ---------------------------------------------------------------------------
# MFS helpers
# ---------------------------------------------------------------------------


def dilated_poles(boundary: np.ndarray, n: int, factor: float = 1.5, centre=None) -> np.ndarray:
    """``n`` points equispaced by arc length on the closed polygon ``boundary``
    dilated by ``factor`` about ``centre`` (default: vertex mean)."""
    b = np.asarray(boundary, dtype=float)
    c = b.mean(axis=0) if centre is None else np.asarray(centre, float)
    return c + factor * (equispaced_on_loop(b, n) - c)


def equispaced_on_loop(loop: np.ndarray, n: int) -> np.ndarray:
    loop = np.asarray(loop, dtype=float)
    nxt = np.roll(loop, -1, axis=0)
    seg = np.hypot(*(nxt - loop).T)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    s = np.arange(n) * cum[-1] / n
    idx = np.clip(np.searchsorted(cum, s, side="right") - 1, 0, len(loop) - 1)
    t = (s - cum[idx]) / seg[idx]
    return loop[idx] + t[:, None] * (nxt[idx] - loop[idx])


def circle_points(n: int, radius: float, centre=(0.0, 0.0)) -> np.ndarray:
    t = 2.0 * math.pi * np.arange(n) / n
    return np.asarray(centre, float) + radius * np.stack([np.cos(t), np.sin(t)], axis=1)


# ---------------------------------------------------------------------------
# quadrature hints and function adapters
# ---------------------------------------------------------------------------


def oscillation_hint(space) -> tuple[float, int]:
    """(effective wavenumber, extra Gauss nodes) for integrals of members on a facet."""
    fam = getattr(space, "family", None)
    k = space.k
    if isinstance(fam, PlaneWaves):
        return k * max(float(np.abs(d.d).max()) for d in fam.directions) * math.sqrt(2.0), 0
    if isinstance(fam, WaveBased):
        _, sx, _, sy = _wbm_wavenumbers(space)
        grow = max(float(np.abs(sx.imag).max()), float(np.abs(sy.imag).max()))
        return math.hypot(k, grow), 4
    if isinstance(fam, (CircularWaves, Multipoles)):
        return k, 2 * fam.degree
    if isinstance(fam, CornerWaves):
        return k, 2 * fam.count + 8
    if isinstance(fam, FundamentalSolutions):
        return k, 8
    return k, 8


class FunctionSpace:
    """A single known function posing as a one-member local space.

    ``fn(points) -> (values (n,), gradients (n, 2))``.  Used to push exact
    solutions through the assembly engine.
    """

    has_atoms = False
    dim = 1

    def __init__(self, fn, k: float, element: int = 0):
        self.fn = fn
        self.k = float(k)
        self.element = element

    def eval(self, points) -> BasisEval:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        val, grad = self.fn(pts)
        return BasisEval(np.asarray(val, complex)[:, None], np.asarray(grad, complex)[:, None, :])
