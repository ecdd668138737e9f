"""Polygonal meshes of 2D domains with a tagged skeleton.

A :class:`Mesh` stores vertices, counter-clockwise element polygons and the
Dirichlet/Robin tags of the boundary.  The skeleton is built once: every
element edge is cut at vertices lying on it (hanging nodes), and each
resulting straight fragment becomes one :class:`Facet` with one or two
adjacent elements.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping

import numpy as np

from .quadrature import signed_area

DIRICHLET = "D"
ROBIN = "R"
TAGS = (DIRICHLET, ROBIN)
SIDES = ("left", "right", "bottom", "top")
_GEOM_TOL = 1e-12


class MeshError(ValueError):
    """Invalid mesh input or violated mesh invariant."""


@dataclass(frozen=True)
class Facet:
    """Straight skeleton segment from ``a`` to ``b``.

    ``a -> b`` follows the counter-clockwise traversal of ``elements[0]``, so
    ``normal`` is outward for that element.  Interior facets list their two
    elements in increasing id order.
    """

    index: int
    a: np.ndarray
    b: np.ndarray
    vertex_ids: tuple[int, int]
    elements: tuple[int, ...]
    kind: str  # "interior" | "dirichlet" | "robin"

    @property
    def length(self) -> float:
        return float(np.hypot(*(self.b - self.a)))

    @property
    def midpoint(self) -> np.ndarray:
        return 0.5 * (self.a + self.b)

    @property
    def normal(self) -> np.ndarray:
        d = (self.b - self.a) / self.length
        return np.array([d[1], -d[0]])

    def unit_normal(self, element: int) -> np.ndarray:
        """Outward unit normal of ``element`` on this facet."""
        if element == self.elements[0]:
            return self.normal
        if len(self.elements) == 2 and element == self.elements[1]:
            return -self.normal
        raise KeyError(f"element {element} is not adjacent to facet {self.index}")

    @property
    def is_interior(self) -> bool:
        return self.kind == "interior"


@dataclass(frozen=True)
class ElementMetrics:
    diameter: float
    barycentre: np.ndarray
    inradius: float  # radius of the largest circle centred at the barycentre
    area: float

    @property
    def rho(self) -> float:
        """Shape-regularity proxy: inradius / diameter."""
        return self.inradius / self.diameter


def _segments_cross(p1, p2, q1, q2) -> bool:
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1 = orient(q1, q2, p1)
    d2 = orient(q1, q2, p2)
    d3 = orient(p1, p2, q1)
    d4 = orient(p1, p2, q2)
    if ((d1 > 0 > d2) or (d1 < 0 < d2)) and ((d3 > 0 > d4) or (d3 < 0 < d4)):
        return True
    return False


def _is_simple(poly: np.ndarray) -> bool:
    n = len(poly)
    for i in range(n):
        for j in range(i + 1, n):
            if j == i + 1 or (i == 0 and j == n - 1):
                continue
            if _segments_cross(poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n]):
                return False
    return True


def _point_segment_distance(p, a, b) -> float:
    d = b - a
    t = np.clip(np.dot(p - a, d) / np.dot(d, d), 0.0, 1.0)
    return float(np.hypot(*(p - (a + t * d))))


@dataclass(frozen=True, eq=False)
class Mesh:
    """Validated polygonal mesh; immutable after construction."""

    vertices: np.ndarray
    elements: tuple[tuple[int, ...], ...]
    boundary_tags: Mapping[tuple[int, int], str] = field(default_factory=dict)

    def __post_init__(self):
        verts = np.asarray(self.vertices, dtype=float)
        if verts.ndim != 2 or verts.shape[1] != 2:
            raise MeshError("vertices must be an (N, 2) array")
        verts.setflags(write=False)
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "elements", tuple(tuple(int(v) for v in e) for e in self.elements))
        tags = {}
        for (va, vb), tag in dict(self.boundary_tags).items():
            if tag not in TAGS:
                raise MeshError(f"unknown boundary tag {tag!r}")
            tags[(min(va, vb), max(va, vb))] = tag
        object.__setattr__(self, "boundary_tags", tags)
        self._validate_elements()
        facets = self.facets  # builds and validates the skeleton
        if not any(f.kind == "robin" for f in facets):
            raise MeshError("empty Robin boundary: at least one boundary facet must be tagged R")

    # -- construction helpers -------------------------------------------------
    def _validate_elements(self):
        nv = len(self.vertices)
        if not self.elements:
            raise MeshError("mesh has no elements")
        for i, elem in enumerate(self.elements):
            if len(elem) < 3 or len(set(elem)) != len(elem):
                raise MeshError(f"element {i} needs at least 3 distinct vertices")
            if min(elem) < 0 or max(elem) >= nv:
                raise MeshError(f"element {i} references a missing vertex")
            poly = self.vertices[list(elem)]
            area = signed_area(poly)
            if area == 0.0:
                raise MeshError(f"element {i} is degenerate (zero area)")
            if not _is_simple(poly):
                raise MeshError(f"element {i} is not a simple polygon")
            if area < 0.0:
                raise MeshError(f"element {i} is clockwise: inconsistent orientation")

    def _split_edge(self, u: int, v: int) -> list[int]:
        a, b = self.vertices[u], self.vertices[v]
        d = b - a
        length2 = float(d @ d)
        rel = self.vertices - a
        t = rel @ d / length2
        cross = rel[:, 0] * d[1] - rel[:, 1] * d[0]
        scale = self.length_scale
        on = (np.abs(cross) <= _GEOM_TOL * scale * math.sqrt(length2)) & (t > _GEOM_TOL) & (
            t < 1.0 - _GEOM_TOL
        )
        inner = np.flatnonzero(on)
        inner = inner[np.argsort(t[inner])]
        return [u, *inner.tolist(), v]

    def _tag_for(self, i: int, j: int) -> str | None:
        key = (min(i, j), max(i, j))
        if key in self.boundary_tags:
            return self.boundary_tags[key]
        # a tagged segment may span several fragments when it contains hanging nodes
        p, q = self.vertices[i], self.vertices[j]
        tol = _GEOM_TOL * self.length_scale
        for (va, vb), tag in self.boundary_tags.items():
            a, b = self.vertices[va], self.vertices[vb]
            if _point_segment_distance(p, a, b) <= tol and _point_segment_distance(q, a, b) <= tol:
                return tag
        return None

    @cached_property
    def length_scale(self) -> float:
        span = self.vertices.max(axis=0) - self.vertices.min(axis=0)
        return float(max(span.max(), 1e-300))

    @cached_property
    def facets(self) -> tuple[Facet, ...]:
        """The skeleton: one facet per edge fragment, in deterministic order."""
        sides: dict[tuple[int, int], list[tuple[int, int, int]]] = {}
        order: list[tuple[int, int]] = []
        for k, elem in enumerate(self.elements):
            n = len(elem)
            for e in range(n):
                chain = self._split_edge(elem[e], elem[(e + 1) % n])
                for i, j in zip(chain[:-1], chain[1:]):
                    key = (min(i, j), max(i, j))
                    if key not in sides:
                        sides[key] = []
                        order.append(key)
                    sides[key].append((k, i, j))
        facets = []
        used_tags = set()
        for key in order:
            owners = sides[key]
            if len(owners) > 2:
                raise MeshError(f"segment {key} is shared by more than two elements")
            if len(owners) == 2:
                (k1, i1, j1), (k2, i2, j2) = sorted(owners)
                if (i1, j1) != (j2, i2):
                    raise MeshError(f"elements {k1} and {k2} traverse a shared edge in the same direction")
                if k1 == k2:
                    raise MeshError(f"element {k1} touches itself along {key}")
                elems, (i, j), kind = (k1, k2), (i1, j1), "interior"
            else:
                k1, i, j = owners[0]
                tag = self._tag_for(i, j)
                if tag is None:
                    raise MeshError(f"untagged boundary facet between vertices {i} and {j}")
                used_tags.add(key)
                elems, kind = (k1,), "dirichlet" if tag == DIRICHLET else "robin"
            facets.append(
                Facet(len(facets), self.vertices[i].copy(), self.vertices[j].copy(), (i, j), elems, kind)
            )
        for key in self.boundary_tags:
            if key in sides and len(sides[key]) == 2:
                raise MeshError(f"boundary tag placed on interior segment {key}")
        return tuple(facets)

    # -- queries -------------------------------------------------------------
    @property
    def n_elements(self) -> int:
        return len(self.elements)

    def polygon(self, element: int) -> np.ndarray:
        return self.vertices[list(self.elements[element])]

    @cached_property
    def metrics(self) -> tuple[ElementMetrics, ...]:
        out = []
        for k in range(self.n_elements):
            poly = self.polygon(k)
            area = signed_area(poly)
            x, y = poly[:, 0], poly[:, 1]
            xn, yn = np.roll(x, -1), np.roll(y, -1)
            cr = x * yn - xn * y
            centre = np.array([np.sum((x + xn) * cr), np.sum((y + yn) * cr)]) / (6.0 * area)
            diff = poly[:, None, :] - poly[None, :, :]
            diam = float(np.sqrt((diff**2).sum(-1)).max())
            if _contains(poly, centre[None, :])[0]:
                rad = min(
                    _point_segment_distance(centre, poly[i], poly[(i + 1) % len(poly)])
                    for i in range(len(poly))
                )
            else:
                rad = 0.0
            out.append(ElementMetrics(diam, centre, rad, area))
        return tuple(out)

    @property
    def h(self) -> float:
        """Mesh width: the largest element diameter."""
        return max(m.diameter for m in self.metrics)

    @property
    def domain_area(self) -> float:
        return float(sum(m.area for m in self.metrics))

    @cached_property
    def element_facets(self) -> tuple[tuple[int, ...], ...]:
        lists: list[list[int]] = [[] for _ in range(self.n_elements)]
        for f in self.facets:
            for k in f.elements:
                lists[k].append(f.index)
        return tuple(tuple(v) for v in lists)

    def facets_of_kind(self, kind: str) -> list[Facet]:
        return [f for f in self.facets if f.kind == kind]

    @property
    def bounding_box(self) -> tuple[float, float, float, float]:
        lo = self.vertices.min(axis=0)
        hi = self.vertices.max(axis=0)
        return float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1])

    def boundary_loop(self) -> np.ndarray:
        """Boundary vertices in CCW order (single-loop domains only)."""
        nxt = {}
        for f in self.facets:
            if not f.is_interior:
                nxt[f.vertex_ids[0]] = f.vertex_ids[1]
        start = min(nxt)
        loop = [start]
        while True:
            v = nxt[loop[-1]]
            if v == start:
                break
            loop.append(v)
            if len(loop) > len(nxt):
                raise MeshError("boundary is not a single closed loop")
        if len(loop) != len(nxt):
            raise MeshError("domain boundary has several components")
        return self.vertices[loop]

    def locate(self, points) -> np.ndarray:
        """Element index containing each point, -1 outside the domain."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        owner = np.full(len(pts), -1, dtype=int)
        for k in range(self.n_elements):
            todo = owner < 0
            if not todo.any():
                break
            inside = _contains(self.polygon(k), pts[todo])
            idx = np.flatnonzero(todo)[inside]
            owner[idx] = k
        return owner

    def with_tags(self, tags: Mapping[tuple[int, int], str]) -> "Mesh":
        return Mesh(self.vertices, self.elements, tags)


def _contains(poly: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Closed point-in-polygon test (boundary points count as inside)."""
    x, y = pts[:, 0], pts[:, 1]
    inside = np.zeros(len(pts), dtype=bool)
    on_edge = np.zeros(len(pts), dtype=bool)
    n = len(poly)
    scale = float(np.ptp(poly, axis=0).max())
    tol = 1e-12 * scale
    for i in range(n):
        a, b = poly[i], poly[(i + 1) % n]
        d = b - a
        rel_x, rel_y = x - a[0], y - a[1]
        cross = d[0] * rel_y - d[1] * rel_x
        t = (rel_x * d[0] + rel_y * d[1]) / (d @ d)
        on_edge |= (np.abs(cross) <= tol * np.hypot(*d)) & (t >= -1e-12) & (t <= 1 + 1e-12)
        cond = (a[1] > y) != (b[1] > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = a[0] + (y - a[1]) * d[0] / d[1]
        inside ^= cond & (x < xint)
    return inside | on_edge


def generate_rect_grid(
    domain=(0.0, 0.0, 1.0, 1.0),
    nx: int = 1,
    ny: int = 1,
    bc: str | Mapping[str, str] = ROBIN,
) -> Mesh:
    """Conforming ``nx`` x ``ny`` grid of rectangles on an axis-aligned box.

    ``bc`` is one tag for every side or a mapping from ``left``, ``right``,
    ``bottom``, ``top`` to ``"D"``/``"R"`` (missing sides default to Robin).
    """
    if nx < 1 or ny < 1:
        raise MeshError("nx and ny must be at least 1")
    x0, y0, x1, y1 = map(float, domain)
    if not (x1 > x0 and y1 > y0):
        raise MeshError("domain must be (xmin, ymin, xmax, ymax) with positive extent")
    if isinstance(bc, str):
        side_tags = {s: bc for s in SIDES}
    else:
        unknown = set(bc) - set(SIDES)
        if unknown:
            raise MeshError(f"unknown side names {sorted(unknown)}")
        side_tags = {s: bc.get(s, ROBIN) for s in SIDES}
    if all(t == DIRICHLET for t in side_tags.values()):
        raise MeshError("empty Robin boundary: at least one side must be tagged R")
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    vid = lambda i, j: j * (nx + 1) + i  # noqa: E731
    verts = np.array([[x, y] for y in ys for x in xs])
    elements = []
    for j in range(ny):
        for i in range(nx):
            elements.append((vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)))
    tags = {}
    for i in range(nx):
        tags[(vid(i, 0), vid(i + 1, 0))] = side_tags["bottom"]
        tags[(vid(i, ny), vid(i + 1, ny))] = side_tags["top"]
    for j in range(ny):
        tags[(vid(0, j), vid(0, j + 1))] = side_tags["left"]
        tags[(vid(nx, j), vid(nx, j + 1))] = side_tags["right"]
    return Mesh(verts, tuple(elements), tags)


def load_mesh(text: str) -> Mesh:
    """Parse the plain-text mesh format.

    ::

        vertices N
        x y            (N lines)
        elements M
        k v0 ... v{k-1}  (M lines, 0-based vertex ids, counter-clockwise)
        boundary B
        va vb TAG      (B lines, TAG in {D, R})
    """
    lines = [(n + 1, ln.split()) for n, ln in enumerate(text.splitlines())]
    lines = [(n, toks) for n, toks in lines if toks and not toks[0].startswith("#")]
    pos = 0

    def header(name: str) -> int:
        nonlocal pos
        if pos >= len(lines):
            raise MeshError(f"missing '{name}' section")
        n, toks = lines[pos]
        if len(toks) != 2 or toks[0] != name:
            raise MeshError(f"line {n}: expected '{name} <count>'")
        pos += 1
        try:
            return int(toks[1])
        except ValueError:
            raise MeshError(f"line {n}: bad count {toks[1]!r}") from None

    def body(count: int):
        nonlocal pos
        if pos + count > len(lines):
            raise MeshError("unexpected end of mesh file")
        chunk = lines[pos : pos + count]
        pos += count
        return chunk

    try:
        verts = [(float(t[0]), float(t[1])) for n, t in body(header("vertices")) if _arity(n, t, 2)]
        elems = []
        for n, t in body(header("elements")):
            k = int(t[0])
            _arity(n, t, k + 1)
            elems.append(tuple(int(v) for v in t[1:]))
        tags = {}
        for n, t in body(header("boundary")):
            _arity(n, t, 3)
            tags[(int(t[0]), int(t[1]))] = t[2]
    except ValueError as exc:
        if isinstance(exc, MeshError):
            raise
        raise MeshError(f"malformed number in mesh file: {exc}") from None
    if pos != len(lines):
        raise MeshError(f"line {lines[pos][0]}: trailing content")
    return Mesh(np.array(verts), tuple(elems), tags)


def _arity(lineno: int, toks: list[str], n: int) -> bool:
    if len(toks) != n:
        raise MeshError(f"line {lineno}: expected {n} fields, got {len(toks)}")
    return True


def dump_mesh(mesh: Mesh) -> str:
    out = [f"vertices {len(mesh.vertices)}"]
    out += [f"{float(x)!r} {float(y)!r}" for x, y in mesh.vertices]
    out.append(f"elements {mesh.n_elements}")
    out += [" ".join(map(str, (len(e), *e))) for e in mesh.elements]
    bnd = [f for f in mesh.facets if not f.is_interior]
    out.append(f"boundary {len(bnd)}")
    out += [f"{f.vertex_ids[0]} {f.vertex_ids[1]} {'D' if f.kind == 'dirichlet' else 'R'}" for f in bnd]
    return "\n".join(out) + "\n"


def extract_skeleton(mesh: Mesh) -> list[Facet]:
    """All skeleton facets (interior first-seen order, deterministic)."""
    return list(mesh.facets)


def refine_uniform(domain, nx: int, ny: int, bc, levels: Iterable[int]) -> list[Mesh]:
    """Grids with ``nx * m`` by ``ny * m`` cells for each multiplier m."""
    return [generate_rect_grid(domain, nx * m, ny * m, bc) for m in levels]
