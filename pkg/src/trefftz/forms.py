"""Facet-wise assembly of Trefftz variational formulations.

Every formulation is written as a list of facet terms.  A term is a
coefficient times the integral of (a linear combination of trial traces)
against (a linear combination of test traces), each trace being one of

    "v"   value,
    "dn"  derivative along the reference normal n (outward for the first
          element of the facet),
    "gx", "gy"  gradient components,

taken from side 1 or side 2 of the facet.  With this, for interior facets
and n = n_{K1},

    [v]_N = (v1 - v2) n,  [grad v]_N = dn1 - dn2,
    {v} = (v1 + v2) / 2,  {grad v} . n = (dn1 + dn2) / 2.

Matrix convention: ``A[l, m] = a(phi_m, phi_l)`` and ``b[l] = l(phi_l)``, so
the coefficient vector solves ``A c = b``.  Sesquilinear forms conjugate the
test side, bilinear ones do not.

Products of plane-wave type members are integrated in closed form through
their exponential atoms; everything else uses oscillation-aware Gauss rules.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg as sla

from . import quadrature as quad
from .basis import FunctionSpace, LocalSpace, dof_offsets, oscillation_hint
from .linalg import lu_solve
from .mesh import Facet, Mesh
from .specialfn import hankel1_sequence

DEFAULT_EXTRA_NODES = 12
KINDS = ("v", "dn", "gx", "gy")


class AssemblyError(ValueError):
    pass


# ---------------------------------------------------------------------------
# parameters
# ---------------------------------------------------------------------------

PRESETS = ("h-version", "p-version", "uwvf", "locally-refined", "geometric-hp")


@dataclass(frozen=True)
class FluxParameters:
    """Flux parameters alpha, beta, delta from a named preset and constants a, b, d."""

    preset: str = "p-version"
    a: float = 0.5
    b: float = 0.5
    d: float = 0.5

    def __post_init__(self):
        if self.preset not in PRESETS:
            raise AssemblyError(f"unknown flux preset {self.preset!r}; choose from {PRESETS}")
        if not (self.a > 0 and self.b > 0 and self.d > 0):
            raise AssemblyError("flux constants a, b, d must be positive")

    @classmethod
    def uwvf(cls) -> "FluxParameters":
        return cls("uwvf")

    def _local_h(self, mesh: Mesh, facet: Facet) -> float:
        return min(mesh.metrics[e].diameter for e in facet.elements)

    def values(self, mesh: Mesh, facet: Facet, k: float) -> tuple[float, float, float]:
        """(alpha, beta, delta) on ``facet``; entries not defined there are nan."""
        hk = self._local_h(mesh, facet)
        h = mesh.h
        a, b, d = self.a, self.b, self.d
        p = self.preset
        if p == "uwvf":
            al, be, de = 0.5, 0.5, 0.5
        elif p == "p-version":
            al, be, de = a, b, d
        elif p == "h-version":
            al, be, de = a / (k * hk), b * k * hk, d * k * hk
        elif p == "locally-refined":
            al, be, de = a * h / hk, b * h / hk, d * h / hk
        else:  # geometric-hp
            al, be, de = a * h / hk, b, d
        nan = float("nan")
        if facet.kind == "interior":
            out = (al, be, nan)
        elif facet.kind == "dirichlet":
            out = (al, nan, nan)
        else:
            out = (nan, nan, de)
        for name, val in zip(("alpha", "beta", "delta"), out):
            if not math.isnan(val) and not val > 0:
                raise AssemblyError(f"{name} = {val} is not positive on facet {facet.index}")
        if not math.isnan(out[2]) and out[2] > 0.5:
            raise AssemblyError(
                f"delta = {out[2]:.6g} exceeds 1/2 on facet {facet.index}; lower d for this preset"
            )
        return out


@dataclass(frozen=True)
class LSWeights:
    """Least-squares weights lambda (interior, Dirichlet) and sigma (interior, Robin)."""

    lam: float | Callable[[Facet], float] | None = None  # default: k
    sigma: float | Callable[[Facet], float] = 1.0
    gradient_jump: str = "full"  # or "normal"

    def __post_init__(self):
        if self.gradient_jump not in ("full", "normal"):
            raise AssemblyError("gradient_jump must be 'full' or 'normal'")

    def values(self, facet: Facet, k: float) -> tuple[float, float]:
        lam = k if self.lam is None else self.lam
        lam = lam(facet) if callable(lam) else float(lam)
        sig = self.sigma(facet) if callable(self.sigma) else float(self.sigma)
        if not (lam > 0 and sig > 0):
            raise AssemblyError(f"LS weights must be positive on facet {facet.index}")
        return lam, sig


def _zero_data(points, normals):
    return np.zeros(len(points), dtype=complex)


@dataclass(frozen=True)
class BoundaryData:
    """Boundary data as callables ``g(points (n, 2), normals (n, 2)) -> (n,)``."""

    g_D: Callable = _zero_data
    g_R: Callable = _zero_data
    theta: float = 1.0
    g_N: Callable | None = None

    def __post_init__(self):
        if not self.theta > 0:
            raise AssemblyError("impedance theta must be positive")

    @classmethod
    def from_exact(cls, u, k: float, theta: float = 1.0) -> "BoundaryData":
        """Data matching an exact solution object with ``value``/``gradient``."""

        def gd(x, n):
            return u.value(x)

        def gr(x, n):
            return np.sum(u.gradient(x) * n, axis=1) + 1j * k * theta * u.value(x)

        def gn(x, n):
            return np.sum(u.gradient(x) * n, axis=1)

        return cls(gd, gr, theta, gn)


@dataclass
class GlobalSystem:
    matrix: np.ndarray
    rhs: np.ndarray
    offsets: np.ndarray
    method: str = ""
    sesquilinear: bool = True
    info: dict = field(default_factory=dict)

    def dof(self, element: int, local: int) -> int:
        return int(self.offsets[element] + local)

    @property
    def shape(self):
        return self.matrix.shape


# ---------------------------------------------------------------------------
# facet engine
# ---------------------------------------------------------------------------

Combo = tuple[tuple[int, str, complex], ...]


@dataclass(frozen=True)
class Term:
    coef: complex
    trial: Combo
    test: Combo


@dataclass(frozen=True)
class DataTerm:
    coef: complex
    data: Callable
    test: Combo


def _c(*items) -> Combo:
    return tuple(items)


V1, V2 = (1, "v", 1.0), (2, "v", 1.0)
N1, N2 = (1, "dn", 1.0), (2, "dn", 1.0)


def _scale(combo: Combo, s) -> Combo:
    return tuple((side, kind, c * s) for side, kind, c in combo)


JUMP_V = _c((1, "v", 1.0), (2, "v", -1.0))
JUMP_DN = _c((1, "dn", 1.0), (2, "dn", -1.0))
AVG_V = _c((1, "v", 0.5), (2, "v", 0.5))
AVG_DN = _c((1, "dn", 0.5), (2, "dn", 0.5))
JUMP_GX = _c((1, "gx", 1.0), (2, "gx", -1.0))
JUMP_GY = _c((1, "gy", 1.0), (2, "gy", -1.0))


class _FacetContext:
    """Traces of the spaces adjacent to one facet, in both representations."""

    def __init__(self, facet: Facet, trial, test, k: float, closed_form: bool, extra: int):
        self.facet = facet
        self.trial = trial  # side -> space
        self.test = test
        self.k = k
        self.n = facet.normal
        self.origin = facet.midpoint
        spaces = list(trial.values()) + list(test.values())
        self.closed = closed_form and all(getattr(s, "has_atoms", False) for s in spaces)
        keff, pad = 0.0, 0
        for s in spaces:
            if isinstance(s, FunctionSpace):
                ke, pe = s.k * math.sqrt(2.0), 8
            else:
                ke, pe = oscillation_hint(s)
            keff, pad = max(keff, ke), max(pad, pe)
        nodes = quad.oscillation_nodes(2.0 * keff, facet.length, extra + pad)
        self.rule = quad.segment_rule(facet.a, facet.b, nodes)
        self._samples = {}
        self._atoms = {}
        self._pairs = {}

    def samples(self, role: str, side: int):
        key = (role, side)
        if key not in self._samples:
            space = (self.trial if role == "trial" else self.test)[side]
            ev = space.eval(self.rule.nodes)
            g = ev.gradients
            self._samples[key] = {
                "v": ev.values,
                "dn": g[..., 0] * self.n[0] + g[..., 1] * self.n[1],
                "gx": g[..., 0],
                "gy": g[..., 1],
            }
        return self._samples[key]

    def atoms(self, role: str, side: int):
        key = (role, side)
        if key not in self._atoms:
            space = (self.trial if role == "trial" else self.test)[side]
            w, c = space.atoms(self.origin)
            mult = {"v": np.ones(len(w)), "dn": w @ self.n, "gx": w[:, 0], "gy": w[:, 1]}
            self._atoms[key] = (w, {kd: c * m[None, :] for kd, m in mult.items()})
        return self._atoms[key]

    def pair(self, s: int, ka: str, t: int, kb: str, conj: bool) -> np.ndarray:
        """(p_test, p_trial) matrix of integrals trial(s, ka) * test(t, kb)~."""
        key = (s, ka, t, kb, conj)
        if key in self._pairs:
            return self._pairs[key]
        if self.closed:
            wa, ca = self.atoms("trial", s)
            wb, cb = self.atoms("test", t)
            ya = ca[ka]
            yb = cb[kb]
            if conj:
                wb, yb = wb.conj(), yb.conj()
            w = wa[None, :, :] + wb[:, None, :]
            e = quad.segment_integral_exp(w, self.facet.a, self.facet.b, self.origin)
            out = yb @ e @ ya.T
        else:
            x = self.samples("trial", s)[ka]
            y = self.samples("test", t)[kb]
            if conj:
                y = y.conj()
            out = y.T @ (self.rule.weights[:, None] * x)
        self._pairs[key] = out
        return out

    def data(self, fn: Callable, t: int, kb: str, conj: bool) -> np.ndarray:
        pts = self.rule.nodes
        normals = np.broadcast_to(self.n, pts.shape)
        g = np.asarray(fn(pts, normals), dtype=complex)
        y = self.samples("test", t)[kb]
        if conj:
            y = y.conj()
        return y.T @ (self.rule.weights * g)


def _facet_contribution(ctx: _FacetContext, terms, data_terms, conj: bool):
    blocks: dict[tuple[int, int], np.ndarray] = {}
    vecs: dict[int, np.ndarray] = {}
    for term in terms:
        for s, ka, ca in term.trial:
            for t, kb, cb in term.test:
                w = term.coef * ca * (np.conj(cb) if conj else cb)
                if w == 0:
                    continue
                m = w * ctx.pair(s, ka, t, kb, conj)
                blocks[(t, s)] = blocks.get((t, s), 0) + m
    for dt in data_terms:
        for t, kb, cb in dt.test:
            w = dt.coef * (np.conj(cb) if conj else cb)
            vecs[t] = vecs.get(t, 0) + w * ctx.data(dt.data, t, kb, conj)
    return blocks, vecs


def _worker_count() -> int:
    try:
        return max(1, int(os.environ.get("TREFFTZ_THREADS", "1")))
    except ValueError:
        return 1


def assemble_terms(
    mesh: Mesh,
    trial_spaces: Sequence,
    test_spaces: Sequence,
    facet_terms: Callable[[Facet], tuple[list[Term], list[DataTerm]]],
    k: float,
    conj: bool = True,
    closed_form: bool = True,
    extra: int = DEFAULT_EXTRA_NODES,
) -> tuple[np.ndarray, np.ndarray]:
    """Generic facet loop; returns (matrix, rhs) in the A[test, trial] convention."""
    if len(trial_spaces) != mesh.n_elements or len(test_spaces) != mesh.n_elements:
        raise AssemblyError("one trial and one test space per element required")
    off_u = dof_offsets(trial_spaces)
    off_v = dof_offsets(test_spaces)
    mat = np.zeros((off_v[-1], off_u[-1]), dtype=complex)
    rhs = np.zeros(off_v[-1], dtype=complex)

    def work(facet: Facet):
        terms, data_terms = facet_terms(facet)
        if not terms and not data_terms:
            return facet, {}, {}
        sides = {i + 1: e for i, e in enumerate(facet.elements)}
        ctx = _FacetContext(
            facet,
            {s: trial_spaces[e] for s, e in sides.items()},
            {s: test_spaces[e] for s, e in sides.items()},
            k,
            closed_form,
            extra,
        )
        blocks, vecs = _facet_contribution(ctx, terms, data_terms, conj)
        return facet, blocks, vecs

    facets = list(mesh.facets)
    nw = _worker_count()
    if nw > 1 and len(facets) > 1:
        with ThreadPoolExecutor(max_workers=nw) as pool:
            results = list(pool.map(work, facets))
    else:
        results = [work(f) for f in facets]
    # fixed facet order keeps the sum deterministic
    for facet, blocks, vecs in results:
        for (t, s), blk in blocks.items():
            et, es = facet.elements[t - 1], facet.elements[s - 1]
            mat[off_v[et] : off_v[et + 1], off_u[es] : off_u[es + 1]] += blk
        for t, vec in vecs.items():
            et = facet.elements[t - 1]
            rhs[off_v[et] : off_v[et + 1]] += vec
    return mat, rhs


# ---------------------------------------------------------------------------
# formulations
# ---------------------------------------------------------------------------


def tdg_terms(mesh: Mesh, flux: FluxParameters, data: BoundaryData, k: float):
    ik = 1j * k
    th = data.theta

    def terms(f: Facet):
        al, be, de = flux.values(mesh, f, k)
        if f.kind == "interior":
            return [
                Term(1.0, AVG_V, JUMP_DN),
                Term(-1.0, AVG_DN, JUMP_V),
                Term(al * ik, JUMP_V, JUMP_V),
                Term(-be / ik, JUMP_DN, JUMP_DN),
            ], []
        if f.kind == "robin":
            return [
                Term((1 - de) * ik * th, (V1,), (V1,)),
                Term(1 - de, (V1,), (N1,)),
                Term(-de, (N1,), (V1,)),
                Term(-de / (ik * th), (N1,), (N1,)),
            ], [DataTerm(1.0, data.g_R, ((1, "v", 1 - de), (1, "dn", de / (ik * th))))]
        # ell conjugates the whole test combination, so (ik theta)^{-1} enters as conj
        return [
            Term(-1.0, (N1,), (V1,)),
            Term(al * ik, (V1,), (V1,)),
        ], [DataTerm(1.0, data.g_D, ((1, "v", np.conj(al * ik)), (1, "dn", -1.0)))]

    return terms


def assemble_tdg(
    mesh: Mesh,
    spaces: Sequence[LocalSpace],
    flux: FluxParameters,
    data: BoundaryData,
    k: float,
    *,
    closed_form: bool = True,
    extra: int = DEFAULT_EXTRA_NODES,
    trial_spaces=None,
) -> GlobalSystem:
    """TDG system; with the UWVF preset this is the UWVF."""
    trial = spaces if trial_spaces is None else trial_spaces
    mat, rhs = assemble_terms(mesh, trial, spaces, tdg_terms(mesh, flux, data, k), k, True, closed_form, extra)
    name = "uwvf" if flux.preset == "uwvf" else "tdg"
    return GlobalSystem(mat, rhs, dof_offsets(spaces), name, True, {"flux": flux})


def vtcr_terms(C1: complex, C2: complex, data: BoundaryData, k: float):
    ikt = 1j * k * data.theta

    def terms(f: Facet):
        if f.kind == "interior":
            return [Term(1.0, JUMP_V, AVG_DN), Term(-1.0, JUMP_DN, AVG_V)], []
        if f.kind == "dirichlet":
            return [Term(1.0, (V1,), (N1,))], [DataTerm(1.0, data.g_D, (N1,))]
        imp = ((1, "dn", 1.0), (1, "v", ikt))
        return [Term(C1 / ikt, imp, (N1,)), Term(C2, imp, (V1,))], [
            DataTerm(1.0, data.g_R, ((1, "dn", np.conj(C1 / ikt)), (1, "v", np.conj(C2))))
        ]

    return terms


def assemble_vtcr(
    mesh: Mesh,
    spaces: Sequence[LocalSpace],
    C1: complex,
    C2: complex,
    data: BoundaryData,
    k: float,
    *,
    closed_form: bool = True,
    extra: int = DEFAULT_EXTRA_NODES,
    trial_spaces=None,
) -> GlobalSystem:
    """VTCR system without the outer imaginary part (complex sesquilinear)."""
    if not (np.isfinite(C1) and np.isfinite(C2)):
        raise AssemblyError("C1 and C2 must be finite")
    trial = spaces if trial_spaces is None else trial_spaces
    mat, rhs = assemble_terms(mesh, trial, spaces, vtcr_terms(C1, C2, data, k), k, True, closed_form, extra)
    return GlobalSystem(mat, rhs, dof_offsets(spaces), "vtcr", True, {"C1": C1, "C2": C2})


def wbm_terms(Z_int: complex, data: BoundaryData, k: float):
    ik = 1j * k
    ikt = ik * data.theta

    def terms(f: Facet):
        if f.kind == "interior":
            return [Term(2.0, JUMP_DN, AVG_V), Term(ik / Z_int, JUMP_V, JUMP_V)], []
        if f.kind == "robin":
            return [Term(1.0, ((1, "dn", 1.0), (1, "v", ikt)), (V1,))], [DataTerm(1.0, data.g_R, (V1,))]
        return [Term(-1.0, (V1,), (N1,))], [DataTerm(-1.0, data.g_D, (N1,))]

    return terms


def assemble_wbm(
    mesh: Mesh,
    spaces: Sequence[LocalSpace],
    Z_int: complex,
    data: BoundaryData,
    k: float,
    *,
    closed_form: bool = True,
    extra: int = DEFAULT_EXTRA_NODES,
    trial_spaces=None,
) -> GlobalSystem:
    """WBM system (bilinear: test functions are not conjugated)."""
    if Z_int == 0:
        raise AssemblyError("Z_int must be nonzero")
    trial = spaces if trial_spaces is None else trial_spaces
    mat, rhs = assemble_terms(mesh, trial, spaces, wbm_terms(Z_int, data, k), k, False, closed_form, extra)
    return GlobalSystem(mat, rhs, dof_offsets(spaces), "wbm", False, {"Z_int": Z_int})


def ls_terms(weights: LSWeights, data: BoundaryData, k: float, with_data: bool = True):
    ikt = 1j * k * data.theta

    def terms(f: Facet):
        lam, sig = weights.values(f, k)
        if f.kind == "interior":
            out = [Term(lam**2, JUMP_V, JUMP_V)]
            if weights.gradient_jump == "full":
                out += [Term(sig**2, JUMP_GX, JUMP_GX), Term(sig**2, JUMP_GY, JUMP_GY)]
            else:
                out.append(Term(sig**2, JUMP_DN, JUMP_DN))
            return out, []
        if f.kind == "robin":
            imp = ((1, "dn", 1.0), (1, "v", ikt))
            return [Term(sig**2, imp, imp)], ([DataTerm(sig**2, data.g_R, imp)] if with_data else [])
        return [Term(lam**2, (V1,), (V1,))], ([DataTerm(lam**2, data.g_D, (V1,))] if with_data else [])

    return terms


def assemble_ls(
    mesh: Mesh,
    spaces: Sequence[LocalSpace],
    weights: LSWeights,
    data: BoundaryData,
    k: float,
    *,
    closed_form: bool = True,
    extra: int = DEFAULT_EXTRA_NODES,
) -> GlobalSystem:
    """Hermitian normal equations G c = b of the least-squares functional."""
    mat, rhs = assemble_terms(mesh, spaces, spaces, ls_terms(weights, data, k), k, True, closed_form, extra)
    mat = 0.5 * (mat + mat.conj().T)
    sys = GlobalSystem(mat, rhs, dof_offsets(spaces), "ls", True, {"weights": weights})
    sys.info["functional"] = lambda c: ls_functional(mesh, spaces, weights, data, k, c, extra=extra)
    return sys


def _residual_rows(mesh, spaces, weights, data, k, extra, exact=None):
    """Sampled square-root-weighted residual rows of the LS functional.

    Returns (R, r0) with J(c) = ||R c - r0||^2.  With ``exact`` (a pair of
    callables value/gradient) the rows of the exact function are returned in
    place of R (a single column).
    """
    ikt = 1j * k * data.theta
    offsets = dof_offsets(spaces) if exact is None else None
    rows, rhs = [], []
    for f in mesh.facets:
        lam, sig = weights.values(f, k)
        hints = [oscillation_hint(spaces[e]) for e in f.elements]
        keff, pad = max(h[0] for h in hints), max(h[1] for h in hints)
        n = quad.oscillation_nodes(2.0 * keff, f.length, extra + pad)
        rule = quad.segment_rule(f.a, f.b, n)
        sw = np.sqrt(rule.weights)
        nrm = f.normal
        normals = np.broadcast_to(nrm, rule.nodes.shape)

        def traces(e):
            if exact is not None:
                val = exact.value(rule.nodes)[:, None]
                grad = exact.gradient(rule.nodes)[:, None, :]
            else:
                ev = spaces[e].eval(rule.nodes)
                val, grad = ev.values, ev.gradients
            return val, grad, grad[..., 0] * nrm[0] + grad[..., 1] * nrm[1]

        def place(blocks, target):
            ncols = 1 if exact is not None else offsets[-1]
            row = np.zeros((len(sw), ncols), dtype=complex)
            for e, blk in blocks:
                if exact is not None:
                    row += blk
                else:
                    row[:, offsets[e] : offsets[e + 1]] += blk
            rows.append(row)
            rhs.append(target)

        zero = np.zeros(len(sw), dtype=complex)
        if f.kind == "interior":
            e1, e2 = f.elements
            v1, g1, d1 = traces(e1)
            v2, g2, d2 = traces(e2)
            s = sw[:, None]
            place([(e1, lam * s * v1), (e2, -lam * s * v2)], zero)
            if weights.gradient_jump == "full":
                for c in (0, 1):
                    place([(e1, sig * s * g1[..., c]), (e2, -sig * s * g2[..., c])], zero)
            else:
                place([(e1, sig * s * d1), (e2, -sig * s * d2)], zero)
        elif f.kind == "robin":
            (e1,) = f.elements
            v1, _, d1 = traces(e1)
            g = np.asarray(data.g_R(rule.nodes, normals), complex)
            place([(e1, sig * sw[:, None] * (d1 + ikt * v1))], sig * sw * g)
        else:
            (e1,) = f.elements
            v1, _, _ = traces(e1)
            g = np.asarray(data.g_D(rule.nodes, normals), complex)
            place([(e1, lam * sw[:, None] * v1)], lam * sw * g)
    return np.vstack(rows), np.concatenate(rhs)


def ls_functional(mesh, spaces, weights, data, k, coeffs=None, *, exact=None, extra=DEFAULT_EXTRA_NODES):
    """Direct evaluation of the least-squares functional J.

    Either for the discrete function with ``coeffs`` or for an ``exact``
    solution object (with ``value`` and ``gradient``).
    """
    if exact is not None:
        r, r0 = _residual_rows(mesh, spaces, weights, data, k, extra, exact=exact)
        return float(np.sum(np.abs(r[:, 0] - r0) ** 2))
    r, r0 = _residual_rows(mesh, spaces, weights, data, k, extra)
    return float(np.sum(np.abs(r @ np.asarray(coeffs) - r0) ** 2))


def boundary_grams(mesh: Mesh, spaces: Sequence[LocalSpace], k: float, extra: int = DEFAULT_EXTRA_NODES):
    """Per-element L2(dK) Gram matrices G[l, m] = int phi_m conj(phi_l)."""
    grams = []
    for e, sp in enumerate(spaces):
        keff, pad = oscillation_hint(sp)
        g = np.zeros((sp.dim, sp.dim), dtype=complex)
        for fi in mesh.element_facets[e]:
            f = mesh.facets[fi]
            rule = quad.segment_rule(f.a, f.b, quad.oscillation_nodes(2.0 * keff, f.length, extra + pad))
            v = sp.eval(rule.nodes).values
            g += (v.conj() * rule.weights[:, None]).T @ v
        grams.append(0.5 * (g + g.conj().T))
    return grams


# ---------------------------------------------------------------------------
# single-element schemes
# ---------------------------------------------------------------------------


def assemble_single_element(
    mesh: Mesh,
    trial_space,
    data: BoundaryData,
    k: float,
    mode: str = "indirect",
    *,
    test_space=None,
    conjugate: bool = False,
    closed_form: bool = True,
    extra: int = DEFAULT_EXTRA_NODES,
) -> GlobalSystem:
    """Direct or indirect scheme on a one-element mesh.

    Robin-tagged facets act as the Neumann part with datum ``data.g_N``.
    By default test functions are not conjugated and the direct matrix is the
    plain transpose of the indirect one.  ``conjugate=True`` gives the
    sesquilinear variant, whose direct matrix is the conjugate transpose; with
    coinciding plane-wave trial and test spaces that variant is singular.
    """
    if mesh.n_elements != 1:
        raise AssemblyError("single-element schemes need a mesh with exactly one element")
    if mode not in ("direct", "indirect"):
        raise AssemblyError("mode must be 'direct' or 'indirect'")
    test = trial_space if test_space is None else test_space
    g_N = data.g_N if data.g_N is not None else _zero_data

    def terms(f: Facet):
        if f.kind == "dirichlet":
            lhs = Term(1.0, (V1,), (N1,)) if mode == "indirect" else Term(1.0, (N1,), (V1,))
            return [lhs], [DataTerm(1.0, data.g_D, (N1,))]
        lhs = Term(-1.0, (N1,), (V1,)) if mode == "indirect" else Term(-1.0, (V1,), (N1,))
        return [lhs], [DataTerm(-1.0, g_N, (V1,))]

    mat, rhs = assemble_terms(mesh, [trial_space], [test], terms, k, conjugate, closed_form, extra)
    return GlobalSystem(mat, rhs, dof_offsets([trial_space]), mode, conjugate)


# ---------------------------------------------------------------------------
# method of fundamental solutions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BoundarySamples:
    points: np.ndarray  # (M, 2)
    normals: np.ndarray  # (M, 2) outward
    kinds: np.ndarray  # (M,) "D" or "R"


def disc_boundary(m: int, radius: float = 1.0, centre=(0.0, 0.0), kind: str = "D") -> BoundarySamples:
    t = 2.0 * math.pi * np.arange(m) / m
    nrm = np.stack([np.cos(t), np.sin(t)], axis=1)
    return BoundarySamples(np.asarray(centre, float) + radius * nrm, nrm, np.full(m, kind))


def mesh_boundary(mesh: Mesh, m: int) -> BoundarySamples:
    """``m`` samples equispaced by arc length on the (single-loop) mesh boundary."""
    bnd = [f for f in mesh.facets if not f.is_interior]
    lengths = np.array([f.length for f in bnd])
    cum = np.concatenate([[0.0], np.cumsum(lengths)])
    s = (np.arange(m) + 0.5) * cum[-1] / m
    idx = np.clip(np.searchsorted(cum, s, side="right") - 1, 0, len(bnd) - 1)
    pts, nrms, kinds = [], [], []
    for si, i in zip(s, idx):
        f = bnd[i]
        t = (si - cum[i]) / lengths[i]
        pts.append(f.a + t * (f.b - f.a))
        nrms.append(f.normal)
        kinds.append("D" if f.kind == "dirichlet" else "R")
    return BoundarySamples(np.array(pts), np.array(nrms), np.array(kinds))


def assemble_mfs(
    samples: BoundarySamples,
    poles,
    data: BoundaryData,
    k: float,
    mode: str = "least-squares",
    inside: Callable | None = None,
) -> GlobalSystem:
    """M x N system of boundary-operator values of H0(k |x_j - y_l|).

    ``inside(points) -> bool array`` rejects poles inside the domain when given.
    """
    y = np.atleast_2d(np.asarray(poles, dtype=float))
    x = samples.points
    m, n = len(x), len(y)
    if mode not in ("collocation", "least-squares"):
        raise AssemblyError("mode must be 'collocation' or 'least-squares'")
    if m < n:
        raise AssemblyError(f"need at least as many boundary points as poles (M={m} < N={n})")
    if mode == "collocation" and m != n:
        raise AssemblyError("collocation needs M = N")
    if inside is not None and np.any(inside(y)):
        raise AssemblyError("pole inside the domain")
    rel = x[:, None, :] - y[None, :, :]
    r = np.hypot(rel[..., 0], rel[..., 1])
    if np.any(r == 0):
        raise AssemblyError("boundary point coincides with a pole")
    h = hankel1_sequence(1, k * r)
    dn = -k * h[1] * np.sum(rel * samples.normals[:, None, :], axis=-1) / r
    robin = samples.kinds == "R"
    mat = np.where(robin[:, None], dn + 1j * k * data.theta * h[0], h[0])
    rhs = np.where(
        robin,
        np.asarray(data.g_R(x, samples.normals), complex),
        np.asarray(data.g_D(x, samples.normals), complex),
    )
    return GlobalSystem(mat, rhs, np.array([0, n]), "mfs-" + mode, True, {"poles": y, "samples": samples})


def solve_mfs(system: GlobalSystem) -> np.ndarray:
    """Collocation by LU, least squares by a QR-based minimisation."""
    a, b = system.matrix, system.rhs
    if a.shape[0] == a.shape[1] and system.method == "mfs-collocation":
        return lu_solve(a, b).solution
    q, r = np.linalg.qr(a)
    return sla.solve_triangular(r, q.conj().T @ b)
